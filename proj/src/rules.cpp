#include "otc/rules.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace otc {

int atc_step(AtcState& state, double v_local, double dt_s) {
  if (dt_s <= 0.0) throw std::invalid_argument("dt must be positive");
  const double dev = v_local - state.v_ref;
  if (std::abs(dev) <= state.bandwidth / 2.0) {
    state.timer_s = 0.0;
    return 0;
  }
  state.timer_s += dt_s;
  if (state.timer_s < state.delay_s) return 0;
  state.timer_s = 0.0;
  // secondary too high -> lower the boosting ratio
  int cmd = dev > 0.0 ? -1 : +1;
  if (std::abs(state.tap + cmd) > state.tau_max) cmd = 0;
  state.tap += cmd;
  return cmd;
}

int reference_to_tap(double u, int tau_max, double a_max) {
  const double a_min = 2.0 - a_max;
  int tau = static_cast<int>(std::lround(2.0 * tau_max * (u - 1.0) / (a_max - a_min)));
  return std::clamp(tau, -tau_max, tau_max);
}

double tap_to_reference(int tau, int tau_max, double a_max) {
  const double a_min = 2.0 - a_max;
  return 1.0 + (a_max - a_min) * tau / (2.0 * tau_max);
}

int vlc_step(VlcState& state, double u_max, double u_min) {
  if (u_max < u_min) throw std::invalid_argument("u_max below u_min");
  const double rng = u_max - u_min;
  state.range_exceeded = rng > state.band;
  const double u_new = state.u_upper - (state.band - rng) / 2.0 - (u_max - state.u_old);
  const int target = reference_to_tap(u_new, state.tau_max, state.a_max);
  int cmd = std::clamp(target - state.tap, -1, 1);
  if (std::abs(state.tap + cmd) > state.tau_max) cmd = 0;
  state.tap += cmd;
  state.u_old = tap_to_reference(state.tap, state.tau_max, state.a_max);
  return cmd;
}

}  // namespace otc

#ifndef OTC_RULES_HPP_
#define OTC_RULES_HPP_

#include "otc/feeder.hpp"

namespace otc {

/// Autonomous tap control: local deadband plus time delay on the OLTC's own
/// secondary busbar voltage.
struct AtcState {
  double v_ref = 0.99;
  double bandwidth = 0.0167;  // full band width, p.u.
  double delay_s = 60.0;
  double timer_s = 0.0;
  int tap = 0;
  int tau_max = 16;
};

/// Returns -1, 0 or +1; updates timer and tap in place.
int atc_step(AtcState& state, double local_secondary_voltage, double dt_s);

/// Voltage level control driven by feeder-wide extreme measurements.
struct VlcState {
  double u_old = 1.0;      // reference, reset to 1 p.u. at day start
  double u_upper = 1.05;
  double band = 0.1;       // VB
  int tap = 0;
  int tau_max = 16;
  double a_max = 1.1;
  bool range_exceeded = false;  // last step saw Rng > VB
};

/// Nearest integer tap realizing a reference voltage, clamped to limits.
int reference_to_tap(double u, int tau_max, double a_max);

/// Reference voltage realized by an integer tap (the Eq.-of-state inverse of
/// reference_to_tap).
double tap_to_reference(int tau, int tau_max, double a_max);

/// One control decision from measured feeder extremes. Call only when a node
/// violates the allowed band; returns the tap command (-1, 0, +1) and updates
/// the state reference to the realized tap's value.
int vlc_step(VlcState& state, double u_max, double u_min);

/// Resets the reference to 1 p.u. (day start).
inline void vlc_reset(VlcState& state) {
  state.u_old = 1.0;
  state.range_exceeded = false;
}

}  // namespace otc

#endif  // OTC_RULES_HPP_

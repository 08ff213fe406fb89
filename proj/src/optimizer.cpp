#include "otc/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace otc {

HorizonData build_horizon(const FeederModel& model, const TapMap& current_taps,
                          const std::vector<InjectionSet>& forecast, int extra_extremes) {
  HorizonData h;
  for (const auto& d : model.oltcs)
    h.oltcs.push_back({d.id, tap_of(current_taps, d.id), d.tau_max, d.dto_max, ratio_step(d)});

  AdmittanceMatrix y0 = build_admittance(model, current_taps);
  Factorization fact(y0.y, model.slack_nodes);

  std::vector<Eigen::VectorXd> mags;
  std::vector<HorizonStepData> steps;
  const ComplexVector* warm = nullptr;
  ComplexVector prev_v;
  for (const auto& inj : forecast) {
    VoltageSolution sol = solve_power_flow(model, y0, fact, inj, warm);
    if (!sol.converged)
      throw ConvergenceError("power flow at linearization point did not converge");
    SensitivityModel sm = build_sensitivity(model, fact, sol.v, sol.i, current_taps);

    HorizonStepData st;
    st.v0_mag = sol.v.cwiseAbs();
    for (size_t p = 0; p < model.oltcs.size(); ++p) {
      const auto& d = model.oltcs[p];
      const ComplexVector& s = sm.s.at(d.id);
      Eigen::VectorXd gain(model.node_count());
      for (int n = 0; n < model.node_count(); ++n) {
        // d|v|/d tau = ratio_step * Re(conj(v0) s) / |v0|
        gain[n] = ratio_step(d) *
                  (sol.v[n].real() * s[n].real() + sol.v[n].imag() * s[n].imag()) /
                  std::abs(sol.v[n]);
      }
      st.tap_gain.push_back(std::move(gain));
    }
    mags.push_back(st.v0_mag);
    steps.push_back(std::move(st));
    prev_v = sol.v;
    warm = &prev_v;
  }

  std::vector<std::vector<int>> oltc_nodes;
  for (const auto& d : model.oltcs) {
    std::vector<int> nodes = d.secondary_nodes;
    nodes.insert(nodes.end(), d.primary_nodes.begin(), d.primary_nodes.end());
    oltc_nodes.push_back(std::move(nodes));
  }
  auto cands = select_candidate_nodes(mags, oltc_nodes, extra_extremes);
  for (size_t t = 0; t < steps.size(); ++t) steps[t].candidates = cands[t];
  h.steps = std::move(steps);
  return h;
}

namespace {

TapMap first_step_taps(const FeederModel& model, const TapSchedule& sched) {
  TapMap taps;
  for (size_t p = 0; p < model.oltcs.size(); ++p)
    taps[model.oltcs[p].id] = sched.tau[p][0];
  return taps;
}

}  // namespace

PlanResult plan_step(const FeederModel& model, const TapMap& current_taps,
                     const std::vector<InjectionSet>& forecast, const PlanOptions& opts) {
  if (forecast.empty()) throw std::invalid_argument("empty forecast");
  const auto t0 = std::chrono::steady_clock::now();
  PlanResult res;
  res.applied = current_taps;

  const bool simplified = opts.mode == PlanOptions::Mode::kSimplified;
  if (simplified) {
    VoltageSolution now = solve_power_flow(model, current_taps, forecast[0]);
    bool violated = false;
    for (int n = 0; n < model.node_count(); ++n) {
      const double m = std::abs(now.v[n]);
      if (m < opts.ansi_low || m > opts.ansi_high) {
        violated = true;
        break;
      }
    }
    if (!violated) {
      res.solve_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return res;  // hold taps
    }
  }

  const int T = simplified ? 1 : opts.horizon_steps;
  const double w2 = simplified ? 0.0 : opts.w2;
  std::vector<InjectionSet> window(forecast.begin(),
                                   forecast.begin() + std::min<size_t>(T, forecast.size()));
  while (static_cast<int>(window.size()) < T) window.push_back(window.back());

  HorizonData h = build_horizon(model, current_taps, window, opts.extra_extremes);
  std::vector<int> extra_candidates;
  for (int repeat = 0;; ++repeat) {
    MilpInstance inst = build_milp(h, opts.w1, w2);
    res.schedule = solve_milp(inst, opts.time_limit_s);
    res.applied = first_step_taps(model, res.schedule);
    res.acted = res.applied != current_taps;
    res.candidate_repeats = repeat;

    if (repeat >= opts.max_candidate_repeats) break;

    // candidate-set guard: one oracle flow at the applied taps; if a
    // non-candidate node violates ANSI while the candidates don't, widen
    // the set and re-solve
    VoltageSolution check = solve_power_flow(model, res.applied, window[0]);
    if (!check.converged) break;
    const auto& cand0 = h.steps[0].candidates;
    auto is_candidate = [&](int n) {
      return std::binary_search(cand0.begin(), cand0.end(), n);
    };
    bool candidate_violates = false;
    int rogue = -1;
    for (int n = 0; n < model.node_count(); ++n) {
      const double m = std::abs(check.v[n]);
      const bool viol = m < opts.ansi_low || m > opts.ansi_high;
      if (!viol) continue;
      if (is_candidate(n))
        candidate_violates = true;
      else if (rogue < 0)
        rogue = n;
    }
    if (rogue < 0 || candidate_violates) break;
    for (auto& st : h.steps) {
      st.candidates.push_back(rogue);
      std::sort(st.candidates.begin(), st.candidates.end());
    }
  }

  res.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace otc

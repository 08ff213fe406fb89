#ifndef OTC_OPTIMIZER_HPP_
#define OTC_OPTIMIZER_HPP_

#include "otc/milp.hpp"
#include "otc/sensitivity.hpp"

namespace otc {

struct PlanOptions {
  enum class Mode { kFull, kSimplified };
  Mode mode = Mode::kFull;
  int horizon_steps = 10;
  double w1 = 1.0;
  double w2 = 0.005;
  int extra_extremes = 5;
  double ansi_low = 0.95;
  double ansi_high = 1.05;
  double time_limit_s = 0.0;
  int max_candidate_repeats = 3;
};

struct PlanResult {
  TapMap applied;            // tap command per OLTC for the next interval
  TapSchedule schedule;      // full horizon schedule (simplified mode: T=1)
  bool acted = false;        // simplified mode holds taps unless violated
  int candidate_repeats = 0;
  double solve_seconds = 0.0;
};

/// Builds per-step linearization points from the forecast injections (taps
/// frozen at the current position), assembles HorizonData, and solves the
/// tap MILP. Full mode applies the first step of the receding horizon;
/// simplified mode uses T=1, w2=0 and acts only on an ANSI violation.
PlanResult plan_step(const FeederModel& model, const TapMap& current_taps,
                     const std::vector<InjectionSet>& forecast, const PlanOptions& opts);

/// HorizonData assembly shared by plan_step and the benchmark harness.
HorizonData build_horizon(const FeederModel& model, const TapMap& current_taps,
                          const std::vector<InjectionSet>& forecast, int extra_extremes);

}  // namespace otc

#endif  // OTC_OPTIMIZER_HPP_

#ifndef OTC_MILP_HPP_
#define OTC_MILP_HPP_

#include <Eigen/Dense>
#include <ostream>
#include <string>
#include <vector>

namespace otc {

/// Per-OLTC data needed by the optimizer.
struct HorizonOltc {
  std::string id;
  int tau0 = 0;       // applied tap position entering the horizon
  int tau_max = 16;
  int dto_max = 1;
  double ratio_step = 0.00625;  // (a_max - 1)/tau_max
};

/// One horizon step: linearization-point magnitudes and per-OLTC tap gains.
struct HorizonStepData {
  Eigen::VectorXd v0_mag;                 // |v0| per node at this step
  std::vector<Eigen::VectorXd> tap_gain;  // [oltc] d|v|/d tau per node
  std::vector<int> candidates;            // nodes entering the J1 max
};

struct HorizonData {
  std::vector<HorizonOltc> oltcs;
  std::vector<HorizonStepData> steps;
  int oltc_count() const { return static_cast<int>(oltcs.size()); }
  int step_count() const { return static_cast<int>(steps.size()); }
};

/// Candidate nodes per step: extreme-|V| nodes (1 + extra_extremes each side,
/// ties broken toward the lowest node index) plus all OLTC terminal nodes.
std::vector<std::vector<int>> select_candidate_nodes(
    const std::vector<Eigen::VectorXd>& v0_trajectory,
    const std::vector<std::vector<int>>& oltc_nodes, int extra_extremes = 5);

/// The mixed-integer program: integer taps tau(p,t), tap-operation
/// auxiliaries u(p,t), epigraph variable eta; objective w1*eta + w2*sum(u).
struct MilpInstance {
  HorizonData horizon;
  double w1 = 1.0;
  double w2 = 0.005;

  struct Row {
    std::vector<std::pair<int, double>> coeffs;  // variable index, coefficient
    double rhs;                                  // a'x <= rhs
  };
  int num_vars = 0;
  std::vector<double> cost, lower, upper;
  std::vector<Row> rows;

  int tau_index(int p, int t) const { return p * horizon.step_count() + t; }
  int u_index(int p, int t) const {
    return horizon.oltc_count() * horizon.step_count() + p * horizon.step_count() + t;
  }
  int eta_index() const { return 2 * horizon.oltc_count() * horizon.step_count(); }

  /// Exact objective of an integer schedule under the affine voltage model.
  double evaluate(const std::vector<std::vector<int>>& tau, double* j1_out = nullptr,
                  double* j2_out = nullptr) const;

  /// Human-readable LP-style dump for debugging.
  void dump(std::ostream& os) const;
};

MilpInstance build_milp(const HorizonData& horizon, double w1, double w2);

struct TapSchedule {
  std::vector<std::vector<int>> tau;  // [oltc][step]
  double objective = 0.0;
  double j1 = 0.0;
  double j2 = 0.0;
  bool optimal = false;
  double gap = 0.0;          // incumbent minus best bound when time limit hit
  bool fallback = false;     // hold-current-taps incumbent was never improved
  long nodes_explored = 0;
  long lp_iterations = 0;
  double wall_seconds = 0.0;
};

/// Branch and bound over the integer taps, LP bounds from a dual simplex on
/// the relaxation. Deterministic exploration order. time_limit_s <= 0 means
/// no limit.
TapSchedule solve_milp(const MilpInstance& instance, double time_limit_s = 0.0);

/// Optimal objective of the LP relaxation (integrality dropped). Exposed for
/// validation against the integer solution: it is always a lower bound.
double solve_lp_relaxation(const MilpInstance& instance, long* iterations = nullptr);

}  // namespace otc

#endif  // OTC_MILP_HPP_

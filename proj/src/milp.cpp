#include "otc/milp.hpp"

#include <algorithm>
#include <cassert>
#include <fstream>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace otc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDualTol = 1e-9;
constexpr double kPrimalTol = 1e-7;
constexpr double kPivotTol = 1e-7;  // smaller pivots corrupt the dense tableau
constexpr double kIntTol = 1e-6;
constexpr long kMaxLpIterations = 200000;

/// Dense tableau dual simplex with native variable bounds. Columns are the
/// structural variables followed by one slack per row; the all-slack basis is
/// dual feasible because all structural costs are nonnegative.
class BoundedDualSimplex {
 public:
  enum class Status { kOptimal, kInfeasible, kIterLimit };

  void setup(const MilpInstance& inst) {
    n_ = inst.num_vars;
    m_ = static_cast<int>(inst.rows.size());
    width_ = n_ + m_ + 1;  // + transformed rhs column
    tab_.assign(static_cast<size_t>(m_) * width_, 0.0);
    for (int i = 0; i < m_; ++i) {
      for (const auto& [j, a] : inst.rows[i].coeffs) at(i, j) += a;
      at(i, n_ + i) = 1.0;
      at(i, n_ + m_) = inst.rows[i].rhs;
    }
    lo_ = inst.lower;
    hi_ = inst.upper;
    lo_.resize(n_ + m_, 0.0);
    hi_.resize(n_ + m_, kInf);
    d_.assign(n_ + m_, 0.0);
    for (int j = 0; j < n_; ++j) {
      if (inst.cost[j] < 0.0) throw std::logic_error("negative cost breaks dual-feasible start");
      d_[j] = inst.cost[j];
    }
    cost_ = inst.cost;
    cost_.resize(n_ + m_, 0.0);
    status_.assign(n_ + m_, kLower);
    basis_.resize(m_);
    row_of_.assign(n_ + m_, -1);
    for (int i = 0; i < m_; ++i) {
      basis_[i] = n_ + i;
      status_[n_ + i] = kBasic;
      row_of_[n_ + i] = i;
    }
  }

  void set_lower(int j, double lo) { lo_[j] = lo; }
  void set_upper(int j, double hi) { hi_[j] = hi; }
  double lower_of(int j) const { return lo_[j]; }
  double upper_of(int j) const { return hi_[j]; }

  bool bounds_consistent() const {
    for (int j = 0; j < n_ + m_; ++j)
      if (lo_[j] > hi_[j] + kPrimalTol) return false;
    return true;
  }

  Status solve(long* iterations) {
    if (!bounds_consistent()) return Status::kInfeasible;
    std::vector<double> beta(m_);
    for (long iter = 0; iter < kMaxLpIterations; ++iter) {
      compute_beta(beta);

      // leaving row: largest bound violation among basic variables
      int r = -1;
      double worst = kPrimalTol;
      bool below = false;
      for (int i = 0; i < m_; ++i) {
        const int jb = basis_[i];
        if (beta[i] < lo_[jb] - worst) {
          worst = lo_[jb] - beta[i];
          r = i;
          below = true;
        } else if (beta[i] > hi_[jb] + worst) {
          worst = beta[i] - hi_[jb];
          r = i;
          below = false;
        }
      }
      if (r < 0) {
        if (iterations) *iterations += iter;
        beta_ = beta;
        // degenerate pivots can leave the point primal-feasible but short of
        // optimal; clean up with primal iterations on exact reduced costs
        return primal_cleanup(iterations);
      }

      // entering column: dual ratio test
      int q = -1;
      double best_ratio = kInf;
      double best_alpha = 0.0;
      for (int j = 0; j < n_ + m_; ++j) {
        if (status_[j] == kBasic) continue;
        const double alpha = at(r, j);
        bool eligible;
        if (below)
          eligible = (status_[j] == kLower && alpha < -kPivotTol) ||
                     (status_[j] == kUpper && alpha > kPivotTol);
        else
          eligible = (status_[j] == kLower && alpha > kPivotTol) ||
                     (status_[j] == kUpper && alpha < -kPivotTol);
        if (!eligible) continue;
        const double ratio = std::abs(d_[j]) / std::abs(alpha);
        if (ratio < best_ratio - kDualTol ||
            (ratio < best_ratio + kDualTol && std::abs(alpha) > std::abs(best_alpha))) {
          best_ratio = ratio;
          best_alpha = alpha;
          q = j;
        }
      }
      if (q < 0) {
        if (iterations) *iterations += iter;
        return Status::kInfeasible;  // dual unbounded
      }

      pivot(r, q, below);
    }
    if (iterations) *iterations += kMaxLpIterations;
    return Status::kIterLimit;
  }

  double var_value(int j) const {
    if (status_[j] == kBasic) return beta_[row_of_[j]];
    return status_[j] == kLower ? lo_[j] : hi_[j];
  }

  double objective() const {
    double obj = 0.0;
    for (int j = 0; j < n_; ++j)
      if (cost_[j] != 0.0) obj += cost_[j] * var_value(j);
    return obj;
  }

 private:
  static constexpr int kLower = 0, kUpper = 1, kBasic = 2;

  // exact reduced costs from the transformed tableau: d = c - c_B^T (B^-1 A)
  void recompute_reduced_costs() {
    for (int j = 0; j < n_ + m_; ++j) d_[j] = cost_[j];
    for (int i = 0; i < m_; ++i) {
      const double cb = cost_[basis_[i]];
      if (cb == 0.0) continue;
      const double* rowi = &tab_[static_cast<size_t>(i) * width_];
      for (int j = 0; j < n_ + m_; ++j) d_[j] -= cb * rowi[j];
    }
    for (int i = 0; i < m_; ++i) d_[basis_[i]] = 0.0;
  }

  // Bounded-variable primal simplex with Bland's rule, starting from the
  // primal-feasible point the dual phase reached. Needed because degenerate
  // dual pivots can stall at a suboptimal vertex.
  Status primal_cleanup(long* iterations) {
    recompute_reduced_costs();
    for (long iter = 0; iter < kMaxLpIterations; ++iter) {
      int q = -1;
      double dir = 1.0;
      for (int j = 0; j < n_ + m_; ++j) {  // Bland: first eligible index
        if (status_[j] == kBasic) continue;
        if (status_[j] == kLower && d_[j] < -kDualTol) {
          q = j;
          dir = 1.0;
          break;
        }
        if (status_[j] == kUpper && d_[j] > kDualTol) {
          q = j;
          dir = -1.0;
          break;
        }
      }
      if (q < 0) {
        if (iterations) *iterations += iter;
        return Status::kOptimal;
      }

      // ratio test: x_q moves by dir * t; basic values move by -alpha * dir * t
      double tmax = hi_[q] - lo_[q];  // bound-flip limit, may be +inf
      int r = -1;
      bool r_to_lower = true;
      for (int i = 0; i < m_; ++i) {
        const double a = at(i, q) * dir;
        const int jb = basis_[i];
        double t = kInf;
        bool to_lower = true;
        if (a > kPivotTol) {
          t = std::max(0.0, beta_[i] - lo_[jb]) / a;
          to_lower = true;
        } else if (a < -kPivotTol) {
          t = std::max(0.0, hi_[jb] - beta_[i]) / (-a);
          to_lower = false;
        } else {
          continue;
        }
        if (t < tmax - 1e-12 || (t <= tmax + 1e-12 && (r < 0 || jb < basis_[r]))) {
          tmax = std::min(tmax, t);
          r = i;
          r_to_lower = to_lower;
        }
      }

      if (r < 0) {
        if (tmax == kInf) throw std::logic_error("unbounded LP in primal cleanup");
        // bound flip: x_q jumps to its opposite bound
        for (int i = 0; i < m_; ++i) beta_[i] -= at(i, q) * dir * tmax;
        status_[q] = status_[q] == kLower ? kUpper : kLower;
      } else {
        pivot(r, q, r_to_lower);
        compute_beta(beta_);
        recompute_reduced_costs();
      }
    }
    if (iterations) *iterations += kMaxLpIterations;
    return Status::kIterLimit;
  }

  double& at(int i, int j) { return tab_[static_cast<size_t>(i) * width_ + j]; }
  double at(int i, int j) const { return tab_[static_cast<size_t>(i) * width_ + j]; }

  void compute_beta(std::vector<double>& beta) const {
    for (int i = 0; i < m_; ++i) {
      double v = at(i, n_ + m_);
      for (int j = 0; j < n_; ++j) {
        if (status_[j] == kBasic) continue;
        const double x = status_[j] == kLower ? lo_[j] : hi_[j];
        if (x != 0.0) v -= at(i, j) * x;
      }
      // upper-bounded slacks never occur (slack upper = +inf, lower = 0)
      beta[i] = v;
    }
  }

  void pivot(int r, int q, bool leaving_below) {
    const int j_out = basis_[r];
    const double piv = at(r, q);
    const double inv = 1.0 / piv;
    double* rowr = &tab_[static_cast<size_t>(r) * width_];
    for (int j = 0; j < width_; ++j) rowr[j] *= inv;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      const double f = at(i, q);
      if (f == 0.0) continue;
      double* rowi = &tab_[static_cast<size_t>(i) * width_];
      for (int j = 0; j < width_; ++j) rowi[j] -= f * rowr[j];
    }
    const double dq = d_[q];
    if (dq != 0.0)
      for (int j = 0; j < n_ + m_; ++j) d_[j] -= dq * rowr[j];
    d_[q] = 0.0;

    status_[j_out] = leaving_below ? kLower : kUpper;
    row_of_[j_out] = -1;
    basis_[r] = q;
    status_[q] = kBasic;
    row_of_[q] = r;
  }

  int m_ = 0, n_ = 0, width_ = 0;
  std::vector<double> tab_, d_, lo_, hi_, cost_, beta_;
  std::vector<int> basis_, status_, row_of_;
};

}  // namespace

std::vector<std::vector<int>> select_candidate_nodes(
    const std::vector<Eigen::VectorXd>& v0_trajectory,
    const std::vector<std::vector<int>>& oltc_nodes, int extra_extremes) {
  std::vector<std::vector<int>> sets;
  sets.reserve(v0_trajectory.size());
  const int take = 1 + std::max(0, extra_extremes);
  for (const auto& mags : v0_trajectory) {
    const int n = static_cast<int>(mags.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (mags[a] != mags[b]) return mags[a] > mags[b];
      return a < b;
    });
    std::vector<int> set;
    for (int k = 0; k < std::min(take, n); ++k) set.push_back(order[k]);           // maxima
    for (int k = 0; k < std::min(take, n); ++k) set.push_back(order[n - 1 - k]);   // minima
    for (const auto& nodes : oltc_nodes) set.insert(set.end(), nodes.begin(), nodes.end());
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    sets.push_back(std::move(set));
  }
  return sets;
}

MilpInstance build_milp(const HorizonData& horizon, double w1, double w2) {
  const int P = horizon.oltc_count();
  const int T = horizon.step_count();
  if (P == 0 || T == 0) throw std::invalid_argument("empty horizon");
  for (const auto& st : horizon.steps) {
    if (static_cast<int>(st.tap_gain.size()) != P)
      throw std::invalid_argument("tap_gain count does not match OLTC count");
    if (st.candidates.empty()) throw std::invalid_argument("empty candidate set");
  }

  MilpInstance inst;
  inst.horizon = horizon;
  inst.w1 = w1;
  inst.w2 = w2;
  inst.num_vars = 2 * P * T + 1;
  inst.cost.assign(inst.num_vars, 0.0);
  inst.lower.assign(inst.num_vars, 0.0);
  inst.upper.assign(inst.num_vars, kInf);
  inst.cost[inst.eta_index()] = w1;

  for (int p = 0; p < P; ++p) {
    const auto& d = horizon.oltcs[p];
    for (int t = 0; t < T; ++t) {
      // reachability-tightened tap bounds
      const int reach = d.dto_max * (t + 1);
      inst.lower[inst.tau_index(p, t)] = std::max(-d.tau_max, d.tau0 - reach);
      inst.upper[inst.tau_index(p, t)] = std::min(d.tau_max, d.tau0 + reach);
      inst.cost[inst.u_index(p, t)] = w2;
      inst.upper[inst.u_index(p, t)] = d.dto_max;
    }
  }

  // eta epigraph rows per candidate node and step
  for (int t = 0; t < T; ++t) {
    const auto& st = horizon.steps[t];
    for (int n : st.candidates) {
      double c0 = st.v0_mag[n];
      for (int p = 0; p < P; ++p) c0 -= st.tap_gain[p][n] * horizon.oltcs[p].tau0;
      // eta >= |v| - 1  and  eta >= 1 - |v|, |v| affine in tau
      MilpInstance::Row hi, lo;
      for (int p = 0; p < P; ++p) {
        const double g = st.tap_gain[p][n];
        // negligible gains (tap-insensitive nodes) only poison the LP numerics
        if (std::abs(g) < 1e-9) continue;
        hi.coeffs.push_back({inst.tau_index(p, t), g});
        lo.coeffs.push_back({inst.tau_index(p, t), -g});
      }
      hi.coeffs.push_back({inst.eta_index(), -1.0});
      hi.rhs = 1.0 - c0;
      lo.coeffs.push_back({inst.eta_index(), -1.0});
      lo.rhs = c0 - 1.0;
      inst.rows.push_back(std::move(hi));
      inst.rows.push_back(std::move(lo));
    }
  }

  // u >= |tau_t - tau_{t-1}| including the link to the applied position
  for (int p = 0; p < P; ++p) {
    for (int t = 0; t < T; ++t) {
      MilpInstance::Row up, dn;
      up.coeffs.push_back({inst.tau_index(p, t), 1.0});
      dn.coeffs.push_back({inst.tau_index(p, t), -1.0});
      if (t == 0) {
        up.rhs = horizon.oltcs[p].tau0;
        dn.rhs = -horizon.oltcs[p].tau0;
      } else {
        up.coeffs.push_back({inst.tau_index(p, t - 1), -1.0});
        dn.coeffs.push_back({inst.tau_index(p, t - 1), 1.0});
        up.rhs = 0.0;
        dn.rhs = 0.0;
      }
      up.coeffs.push_back({inst.u_index(p, t), -1.0});
      dn.coeffs.push_back({inst.u_index(p, t), -1.0});
      inst.rows.push_back(std::move(up));
      inst.rows.push_back(std::move(dn));
    }
  }
  return inst;
}

double MilpInstance::evaluate(const std::vector<std::vector<int>>& tau, double* j1_out,
                              double* j2_out) const {
  const int P = horizon.oltc_count();
  const int T = horizon.step_count();
  double j1 = 0.0, j2 = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto& st = horizon.steps[t];
    for (int n : st.candidates) {
      double mag = st.v0_mag[n];
      for (int p = 0; p < P; ++p)
        mag += st.tap_gain[p][n] * (tau[p][t] - horizon.oltcs[p].tau0);
      j1 = std::max(j1, std::abs(mag - 1.0));
    }
  }
  for (int p = 0; p < P; ++p) {
    int prev = horizon.oltcs[p].tau0;
    for (int t = 0; t < T; ++t) {
      j2 += std::abs(tau[p][t] - prev);
      prev = tau[p][t];
    }
  }
  if (j1_out) *j1_out = j1;
  if (j2_out) *j2_out = j2;
  return w1 * j1 + w2 * j2;
}

void MilpInstance::dump(std::ostream& os) const {
  const int P = horizon.oltc_count();
  const int T = horizon.step_count();
  auto name = [&](int j) -> std::string {
    if (j == eta_index()) return "eta";
    const int block = j / (P * T);
    const int p = (j % (P * T)) / T;
    const int t = j % T;
    return (block == 0 ? "tau[" : "u[") + horizon.oltcs[p].id + "," + std::to_string(t) + "]";
  };
  os << "min";
  for (int j = 0; j < num_vars; ++j)
    if (cost[j] != 0.0) os << " + " << cost[j] << " " << name(j);
  os << "\nsubject to\n";
  for (const auto& row : rows) {
    bool first = true;
    for (const auto& [j, a] : row.coeffs) {
      os << (first ? "  " : " + ") << a << " " << name(j);
      first = false;
    }
    os << " <= " << row.rhs << "\n";
  }
  os << "bounds\n";
  for (int j = 0; j < num_vars; ++j)
    os << "  " << lower[j] << " <= " << name(j) << " <= " << upper[j] << "\n";
}

namespace {

struct TieKey {
  double to_count;
  double sum_abs;
  std::vector<int> flat;

  static TieKey of(const MilpInstance& inst, const std::vector<std::vector<int>>& tau) {
    TieKey k{0.0, 0.0, {}};
    for (size_t p = 0; p < tau.size(); ++p) {
      int prev = inst.horizon.oltcs[p].tau0;
      for (int v : tau[p]) {
        k.to_count += std::abs(v - prev);
        k.sum_abs += std::abs(v);
        k.flat.push_back(v);
        prev = v;
      }
    }
    return k;
  }
  bool better_than(const TieKey& o) const {
    if (to_count != o.to_count) return to_count < o.to_count;
    if (sum_abs != o.sum_abs) return sum_abs < o.sum_abs;
    return flat < o.flat;
  }
};

struct BnbContext {
  const MilpInstance& inst;
  std::vector<std::vector<int>> best_tau;
  double best_obj;
  TieKey best_key;
  bool improved = false;
  long nodes = 0;
  long lp_iters = 0;
  double root_bound = -kInf;
  bool timed_out = false;
  std::chrono::steady_clock::time_point deadline;
  bool has_deadline = false;

  void offer(const std::vector<std::vector<int>>& tau) {
    const double obj = inst.evaluate(tau);
    if (obj < best_obj - 1e-9) {
      best_obj = obj;
      best_tau = tau;
      best_key = TieKey::of(inst, tau);
      improved = true;
    } else if (obj < best_obj + 1e-9) {
      TieKey k = TieKey::of(inst, tau);
      if (k.better_than(best_key)) {
        best_tau = tau;
        best_key = std::move(k);
      }
    }
  }
};

void explore(BnbContext& ctx, BoundedDualSimplex lp, int depth) {
  if (ctx.timed_out) return;
  if (ctx.has_deadline && std::chrono::steady_clock::now() > ctx.deadline) {
    ctx.timed_out = true;
    return;
  }
  ctx.nodes++;
  const auto status = lp.solve(&ctx.lp_iters);
  if (status != BoundedDualSimplex::Status::kOptimal) return;
  const double bound = lp.objective();
  if (depth == 0) ctx.root_bound = bound;
  if (bound > ctx.best_obj - 1e-9) return;  // cannot strictly improve

  const int P = ctx.inst.horizon.oltc_count();
  const int T = ctx.inst.horizon.step_count();
  int frac_var = -1;
  double frac_score = kIntTol;
  double frac_val = 0.0;
  for (int p = 0; p < P; ++p)
    for (int t = 0; t < T; ++t) {
      const int j = ctx.inst.tau_index(p, t);
      const double v = lp.var_value(j);
      const double f = v - std::floor(v);
      const double score = std::min(f, 1.0 - f);
      if (score > frac_score) {
        frac_score = score;
        frac_var = j;
        frac_val = v;
      }
    }

  if (frac_var < 0) {
    std::vector<std::vector<int>> tau(P, std::vector<int>(T));
    for (int p = 0; p < P; ++p)
      for (int t = 0; t < T; ++t)
        tau[p][t] = static_cast<int>(std::lround(lp.var_value(ctx.inst.tau_index(p, t))));
    ctx.offer(tau);
    return;
  }

  const int p = frac_var / T;
  const double fl = std::floor(frac_val);
  // visit the half closer to the applied position first (fewer-TO preference)
  const bool floor_first = ctx.inst.horizon.oltcs[p].tau0 <= fl + 0.5;
  for (int side = 0; side < 2; ++side) {
    const bool take_floor = (side == 0) == floor_first;
    BoundedDualSimplex child = lp;
    if (take_floor)
      child.set_upper(frac_var, fl);
    else
      child.set_lower(frac_var, fl + 1.0);
    explore(ctx, std::move(child), depth + 1);
  }
}

}  // namespace

double solve_lp_relaxation(const MilpInstance& inst, long* iterations) {
  BoundedDualSimplex lp;
  lp.setup(inst);
  if (lp.solve(iterations) != BoundedDualSimplex::Status::kOptimal)
    throw std::runtime_error("LP relaxation did not solve to optimality");
#ifdef OTC_MILP_DEBUG_DUMP
  {
    std::ofstream xs("/tmp/lp_x.txt");
    xs.precision(17);
    for (int j = 0; j < inst.num_vars; ++j) xs << lp.var_value(j) << "\n";
  }
#endif
  return lp.objective();
}

TapSchedule solve_milp(const MilpInstance& inst, double time_limit_s) {
  const auto t_start = std::chrono::steady_clock::now();
  const int P = inst.horizon.oltc_count();
  const int T = inst.horizon.step_count();

  BnbContext ctx{inst, {}, 0.0, {}, false, 0, 0, -kInf, false, {}, false};
  // hold-current-taps schedule: always feasible, seeds the incumbent
  std::vector<std::vector<int>> hold(P);
  for (int p = 0; p < P; ++p) hold[p].assign(T, inst.horizon.oltcs[p].tau0);
  ctx.best_tau = hold;
  ctx.best_obj = inst.evaluate(hold);
  ctx.best_key = TieKey::of(inst, hold);
  if (time_limit_s > 0.0) {
    ctx.has_deadline = true;
    ctx.deadline = t_start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                 std::chrono::duration<double>(time_limit_s));
  }

  BoundedDualSimplex root;
  root.setup(inst);
  explore(ctx, std::move(root), 0);

  TapSchedule sched;
  sched.tau = ctx.best_tau;
  sched.objective = inst.evaluate(ctx.best_tau, &sched.j1, &sched.j2);
  sched.optimal = !ctx.timed_out;
  sched.fallback = ctx.timed_out && !ctx.improved;
  sched.nodes_explored = ctx.nodes;
  sched.lp_iterations = ctx.lp_iters;
  sched.gap = ctx.timed_out && ctx.root_bound > -kInf
                  ? std::max(0.0, sched.objective - ctx.root_bound)
                  : 0.0;
  sched.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  // relaxation bound can never exceed the integer optimum
  if (ctx.root_bound > -kInf && ctx.root_bound > sched.objective + 1e-6) {
#ifdef OTC_MILP_DEBUG_DUMP
    {
      std::ofstream dump("/tmp/bad_milp.txt");
      dump << "root_bound=" << ctx.root_bound << " integer_obj=" << sched.objective << "\n";
      inst.dump(dump);
    }
#endif
    throw std::logic_error("LP relaxation bound exceeds integer objective");
  }

  // hard feasibility assert on the returned schedule
  for (int p = 0; p < P; ++p) {
    int prev = inst.horizon.oltcs[p].tau0;
    for (int t = 0; t < T; ++t) {
      assert(std::abs(sched.tau[p][t]) <= inst.horizon.oltcs[p].tau_max);
      assert(std::abs(sched.tau[p][t] - prev) <= inst.horizon.oltcs[p].dto_max);
      prev = sched.tau[p][t];
    }
  }
  return sched;
}

}  // namespace otc

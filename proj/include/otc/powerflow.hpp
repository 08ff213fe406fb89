#ifndef OTC_POWERFLOW_HPP_
#define OTC_POWERFLOW_HPP_

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <memory>
#include <optional>

#include "otc/admittance.hpp"
#include "otc/feeder.hpp"

namespace otc {

struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// LU factorization of Y with slack rows replaced by identity rows, so that
/// solve(b) pins x[slack] = b[slack] while satisfying Y x = b elsewhere.
class Factorization {
 public:
  Factorization(const SparseComplex& y, const std::vector<int>& pinned_rows);
  ComplexVector solve(const ComplexVector& b) const;
  int dimension() const { return n_; }
  const std::vector<int>& pinned() const { return pinned_; }

 private:
  int n_;
  std::vector<int> pinned_;
  Eigen::SparseLU<SparseComplex> lu_;
};

/// Constant-power injections at one time step, p.u. on the feeder base.
struct InjectionSet {
  ComplexVector s_load;       // complex demand per node
  Eigen::VectorXd p_pv;       // PV real-power injection per node

  static InjectionSet zeros(int n) {
    InjectionSet inj;
    inj.s_load = ComplexVector::Zero(n);
    inj.p_pv = Eigen::VectorXd::Zero(n);
    return inj;
  }
  /// Net injected power at a node: P_pv - S_load.
  Complex net(int node) const { return Complex(p_pv[node], 0.0) - s_load[node]; }
};

struct VoltageSolution {
  ComplexVector v;
  ComplexVector i;          // injected currents, consistent with v via Y v = i
  bool converged = false;
  int iterations = 0;
  double max_mismatch = 0.0;  // p.u. complex-power mismatch
};

inline constexpr double kDefaultPfTol = 1e-8;
inline constexpr int kMaxPfIterations = 100;

/// Fixed-point current-injection power flow against the nonlinear constant-PQ model.
VoltageSolution solve_power_flow(const FeederModel& model, const TapMap& taps,
                                 const InjectionSet& inj,
                                 const ComplexVector* v_init = nullptr,
                                 double tol = kDefaultPfTol);

/// Same, reusing a prebuilt admittance matrix and factorization.
VoltageSolution solve_power_flow(const FeederModel& model, const AdmittanceMatrix& ymat,
                                 const Factorization& fact, const InjectionSet& inj,
                                 const ComplexVector* v_init = nullptr,
                                 double tol = kDefaultPfTol);

/// I_node = conj(net S / V) off-slack; slack currents from Y V.
ComplexVector node_currents(const FeederModel& model, const SparseComplex& y,
                            const ComplexVector& v, const InjectionSet& inj);

}  // namespace otc

#endif  // OTC_POWERFLOW_HPP_

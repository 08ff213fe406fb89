#ifndef OTC_SENSITIVITY_HPP_
#define OTC_SENSITIVITY_HPP_

#include <map>
#include <string>
#include <vector>

#include "otc/powerflow.hpp"

namespace otc {

/// Linearized tap-ratio effect on the admittance matrix for one device:
/// dY_ii = (2 a a0 - 2 a0^2)/z_T, dY_ij = dY_ji = -(a - a0)/z_T, dY_jj = 0.
/// Affine in a.
SparseComplex delta_y_linear(const FeederModel& model, const OltcDevice& device,
                             double a0, double a);

/// Exact (quadratic) tap-change stamp difference, used to drive the oracle
/// comparison: dY_ii = (a^2 - a0^2)/z_T.
SparseComplex delta_y_exact(const FeederModel& model, const OltcDevice& device,
                            double a0, double a);

/// dV = -Y0^-1 dY V0 with slack rows held at zero.
ComplexVector delta_v_direct(const Factorization& fact, const FeederModel& model,
                             const SparseComplex& dy, const ComplexVector& v0);

/// Same perturbation through the impedance route: dV = dZ I0 with
/// dZ = -Y0^-1 dY Y0^-1 applied to the slack-pinned right-hand side.
ComplexVector delta_v_via_impedance(const Factorization& fact, const FeederModel& model,
                                    const SparseComplex& dy, const ComplexVector& i0);

/// Affine voltage-magnitude model around v0: |v0| + (vd0 dvd + vq0 dvq)/|v0|.
double linear_voltage_magnitude(Complex v0, Complex dv);

/// Linearization point plus one sensitivity vector per OLTC
/// (p.u. voltage per unit tap-ratio change).
struct SensitivityModel {
  ComplexVector v0;
  ComplexVector i0;
  std::map<std::string, double> a0;             // ratio at the linearization point
  std::map<std::string, ComplexVector> s;       // per-device sensitivity vector

  /// Complex voltage change for the given tap positions.
  ComplexVector delta_v(const FeederModel& model, const TapMap& taps) const;
  /// Predicted |V| per node from the affine magnitude model.
  Eigen::VectorXd predict_magnitudes(const FeederModel& model, const TapMap& taps) const;
};

SensitivityModel build_sensitivity(const FeederModel& model, const Factorization& fact,
                                   const ComplexVector& v0, const ComplexVector& i0,
                                   const TapMap& taps0);

struct ErrorRecord {
  int step;
  int node;
  double error;  // predicted |V| minus oracle |V|, p.u.
};

struct ErrorStats {
  std::vector<ErrorRecord> records;
  int steps_compared = 0;
  int steps_skipped = 0;  // oracle non-convergence
  double max_abs = 0.0;
  double mean_abs = 0.0;
  std::vector<int> histogram;  // symmetric bins over [-max_abs, max_abs]
  double bin_width = 0.0;

  void finalize(int bins = 41);
  void write_csv(const std::string& path) const;
};

/// One comparison: linearize at (inj, base taps), predict |V| at perturbed
/// taps, difference against the nonlinear oracle at the perturbed taps.
struct TapPerturbationStep {
  InjectionSet inj;
  TapMap base_taps;
  TapMap perturbed_taps;
};

ErrorStats validate_linearization(const FeederModel& model,
                                  const std::vector<TapPerturbationStep>& steps);

}  // namespace otc

#endif  // OTC_SENSITIVITY_HPP_

#include "otc/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace otc {

namespace {

SparseComplex stamp_delta(const FeederModel& model, const OltcDevice& d,
                          Complex dii, Complex dij) {
  std::vector<Eigen::Triplet<Complex>> trip;
  for (size_t ph = 0; ph < d.primary_nodes.size(); ++ph) {
    const int i = d.primary_nodes[ph];
    const int j = d.secondary_nodes[ph];
    trip.emplace_back(i, i, dii);
    trip.emplace_back(i, j, dij);
    trip.emplace_back(j, i, dij);
  }
  SparseComplex dy(model.node_count(), model.node_count());
  dy.setFromTriplets(trip.begin(), trip.end());
  return dy;
}

void zero_slack_rows(const FeederModel& model, ComplexVector& b) {
  for (int s : model.slack_nodes) b[s] = Complex{0.0, 0.0};
}

}  // namespace

SparseComplex delta_y_linear(const FeederModel& model, const OltcDevice& device,
                             double a0, double a) {
  const Complex yt = 1.0 / device.z_t;
  return stamp_delta(model, device, (2.0 * a * a0 - 2.0 * a0 * a0) * yt, -(a - a0) * yt);
}

SparseComplex delta_y_exact(const FeederModel& model, const OltcDevice& device,
                            double a0, double a) {
  const Complex yt = 1.0 / device.z_t;
  return stamp_delta(model, device, (a * a - a0 * a0) * yt, -(a - a0) * yt);
}

ComplexVector delta_v_direct(const Factorization& fact, const FeederModel& model,
                             const SparseComplex& dy, const ComplexVector& v0) {
  ComplexVector b = -(dy * v0);
  zero_slack_rows(model, b);
  return fact.solve(b);
}

ComplexVector delta_v_via_impedance(const Factorization& fact, const FeederModel& model,
                                    const SparseComplex& dy, const ComplexVector& i0) {
  // dZ I0 = -Y0^-1 dY (Y0^-1 I0); the inner solve reconstructs V0 with the
  // slack rows carrying the fixed slack voltage.
  ComplexVector rhs = i0;
  for (int s : model.slack_nodes) rhs[s] = model.slack_voltage_at(s);
  ComplexVector inner = fact.solve(rhs);
  ComplexVector b = -(dy * inner);
  zero_slack_rows(model, b);
  return fact.solve(b);
}

double linear_voltage_magnitude(Complex v0, Complex dv) {
  const double mag0 = std::abs(v0);
  if (mag0 == 0.0) throw std::domain_error("zero linearization-point voltage");
  return mag0 + (v0.real() * dv.real() + v0.imag() * dv.imag()) / mag0;
}

ComplexVector SensitivityModel::delta_v(const FeederModel& model, const TapMap& taps) const {
  ComplexVector dv = ComplexVector::Zero(v0.size());
  for (const auto& d : model.oltcs) {
    const double a = tap_to_ratio(d, tap_of(taps, d.id));
    const double da = a - a0.at(d.id);
    if (da != 0.0) dv += da * s.at(d.id);
  }
  return dv;
}

Eigen::VectorXd SensitivityModel::predict_magnitudes(const FeederModel& model,
                                                     const TapMap& taps) const {
  ComplexVector dv = delta_v(model, taps);
  Eigen::VectorXd mag(v0.size());
  for (int k = 0; k < v0.size(); ++k) mag[k] = linear_voltage_magnitude(v0[k], dv[k]);
  return mag;
}

SensitivityModel build_sensitivity(const FeederModel& model, const Factorization& fact,
                                   const ComplexVector& v0, const ComplexVector& i0,
                                   const TapMap& taps0) {
  SensitivityModel sm;
  sm.v0 = v0;
  sm.i0 = i0;
  for (const auto& d : model.oltcs) {
    const double a0 = tap_to_ratio(d, tap_of(taps0, d.id));
    sm.a0[d.id] = a0;
    // G_p = d(dY)/da at a0: 2 a0 / z_T on (i,i), -1/z_T on (i,j), (j,i)
    const Complex yt = 1.0 / d.z_t;
    SparseComplex g = stamp_delta(model, d, 2.0 * a0 * yt, -yt);
    ComplexVector b = -(g * v0);
    for (int slack : model.slack_nodes) b[slack] = Complex{0.0, 0.0};
    sm.s[d.id] = fact.solve(b);
  }
  return sm;
}

void ErrorStats::finalize(int bins) {
  max_abs = 0.0;
  mean_abs = 0.0;
  for (const auto& r : records) {
    max_abs = std::max(max_abs, std::abs(r.error));
    mean_abs += std::abs(r.error);
  }
  if (!records.empty()) mean_abs /= static_cast<double>(records.size());
  histogram.assign(bins, 0);
  bin_width = records.empty() || max_abs == 0.0 ? 0.0 : 2.0 * max_abs / bins;
  if (bin_width > 0.0) {
    for (const auto& r : records) {
      int b = static_cast<int>((r.error + max_abs) / bin_width);
      b = std::clamp(b, 0, bins - 1);
      histogram[b]++;
    }
  }
}

void ErrorStats::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "step,node,E\n";
  for (const auto& r : records)
    out << r.step << "," << r.node << "," << r.error << "\n";
}

ErrorStats validate_linearization(const FeederModel& model,
                                  const std::vector<TapPerturbationStep>& steps) {
  ErrorStats stats;
  for (size_t k = 0; k < steps.size(); ++k) {
    const auto& st = steps[k];
    if (st.base_taps == st.perturbed_taps) continue;  // only steps with tap changes

    VoltageSolution base = solve_power_flow(model, st.base_taps, st.inj);
    VoltageSolution pert = solve_power_flow(model, st.perturbed_taps, st.inj, &base.v);
    if (!base.converged || !pert.converged) {
      stats.steps_skipped++;
      continue;
    }
    AdmittanceMatrix y0 = build_admittance(model, st.base_taps);
    Factorization fact(y0.y, model.slack_nodes);
    SensitivityModel sm = build_sensitivity(model, fact, base.v, base.i, st.base_taps);
    Eigen::VectorXd pred = sm.predict_magnitudes(model, st.perturbed_taps);

    stats.steps_compared++;
    for (int n = 0; n < model.node_count(); ++n)
      stats.records.push_back({static_cast<int>(k), n, pred[n] - std::abs(pert.v[n])});
  }
  stats.finalize();
  return stats;
}

}  // namespace otc

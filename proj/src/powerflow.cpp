#include "otc/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace otc {

Factorization::Factorization(const SparseComplex& y, const std::vector<int>& pinned_rows)
    : n_(static_cast<int>(y.rows())), pinned_(pinned_rows) {
  std::vector<char> pin(n_, 0);
  for (int r : pinned_) pin[r] = 1;

  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(y.nonZeros() + pinned_.size());
  for (int k = 0; k < y.outerSize(); ++k)
    for (SparseComplex::InnerIterator it(y, k); it; ++it)
      if (!pin[it.row()]) trip.emplace_back(it.row(), it.col(), it.value());
  for (int r : pinned_) trip.emplace_back(r, r, Complex{1.0, 0.0});

  SparseComplex a(n_, n_);
  a.setFromTriplets(trip.begin(), trip.end());
  a.makeCompressed();
  lu_.compute(a);
  if (lu_.info() != Eigen::Success)
    throw SingularMatrixError("admittance matrix singular after slack pinning");
}

ComplexVector Factorization::solve(const ComplexVector& b) const {
  ComplexVector x = lu_.solve(b);
  if (lu_.info() != Eigen::Success)
    throw SingularMatrixError("sparse solve failed");
  return x;
}

ComplexVector node_currents(const FeederModel& model, const SparseComplex& y,
                            const ComplexVector& v, const InjectionSet& inj) {
  const int n = model.node_count();
  std::vector<char> slack(n, 0);
  for (int s : model.slack_nodes) slack[s] = 1;

  ComplexVector i = ComplexVector::Zero(n);
  for (int k = 0; k < n; ++k) {
    if (slack[k]) continue;
    const Complex s = inj.net(k);
    if (s == Complex{0.0, 0.0}) continue;
    if (std::abs(v[k]) == 0.0)
      throw std::domain_error("zero voltage at node with nonzero power");
    i[k] = std::conj(s / v[k]);
  }
  ComplexVector yv = y * v;
  for (int s : model.slack_nodes) i[s] = yv[s];
  return i;
}

VoltageSolution solve_power_flow(const FeederModel& model, const AdmittanceMatrix& ymat,
                                 const Factorization& fact, const InjectionSet& inj,
                                 const ComplexVector* v_init, double tol) {
  const int n = model.node_count();
  std::vector<char> slack(n, 0);
  for (int s : model.slack_nodes) slack[s] = 1;

  ComplexVector v(n);
  if (v_init && v_init->size() == n) {
    v = *v_init;
  } else {
    for (int k = 0; k < n; ++k) {
      // flat start at the phase-rotated slack voltage
      const Node& node = model.nodes[k];
      const double shift = -2.0 * std::numbers::pi / 3.0 * (node.phase - 1);
      v[k] = std::abs(model.slack_voltage) * std::polar(1.0, shift + std::arg(model.slack_voltage));
    }
  }
  for (int s : model.slack_nodes) v[s] = model.slack_voltage_at(s);

  VoltageSolution sol;
  for (int iter = 1; iter <= kMaxPfIterations; ++iter) {
    ComplexVector rhs = ComplexVector::Zero(n);
    for (int k = 0; k < n; ++k) {
      if (slack[k]) {
        rhs[k] = model.slack_voltage_at(k);
        continue;
      }
      const Complex s = inj.net(k);
      if (s != Complex{0.0, 0.0}) rhs[k] = std::conj(s / v[k]);
    }
    v = fact.solve(rhs);
    sol.iterations = iter;

    // power mismatch at non-slack nodes against the constant-PQ spec
    ComplexVector yv = ymat.y * v;
    double mis = 0.0;
    for (int k = 0; k < n; ++k) {
      if (slack[k]) continue;
      const Complex s_calc = v[k] * std::conj(yv[k]);
      mis = std::max(mis, std::abs(s_calc - inj.net(k)));
    }
    sol.max_mismatch = mis;
    if (mis < tol) {
      sol.converged = true;
      break;
    }
  }

  sol.v = v;
  sol.i = node_currents(model, ymat.y, v, inj);
  return sol;
}

VoltageSolution solve_power_flow(const FeederModel& model, const TapMap& taps,
                                 const InjectionSet& inj, const ComplexVector* v_init,
                                 double tol) {
  AdmittanceMatrix ymat = build_admittance(model, taps);
  Factorization fact(ymat.y, model.slack_nodes);
  return solve_power_flow(model, ymat, fact, inj, v_init, tol);
}

}  // namespace otc

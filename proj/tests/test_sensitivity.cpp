#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "otc/sensitivity.hpp"

using namespace otc;

namespace {

struct LinPoint {
  FeederModel model;
  AdmittanceMatrix ym;
  VoltageSolution sol;
  InjectionSet inj;
};

LinPoint loaded_chain(int n, double load_kw = 0.04) {
  LinPoint lp{testing::chain_feeder(n), {}, {}, InjectionSet::zeros(0)};
  lp.inj = InjectionSet::zeros(lp.model.node_count());
  for (int k = 1; k < lp.model.node_count(); ++k)
    lp.inj.s_load[k] = Complex{load_kw, load_kw * 0.3};
  lp.ym = build_admittance(lp.model, {});
  lp.sol = solve_power_flow(lp.model, {}, lp.inj);
  REQUIRE(lp.sol.converged);
  return lp;
}

}  // namespace

TEST_CASE("admittance perturbation vanishes at the linearization point") {
  FeederModel m = testing::two_bus_feeder();
  SparseComplex dy = delta_y_linear(m, m.oltcs[0], 1.0, 1.0);
  CHECK(dy.norm() < 1e-15);
}

TEST_CASE("linear admittance perturbation is affine in the ratio") {
  FeederModel m = testing::two_bus_feeder(0.01, 0.05);
  const double a0 = 1.0, d = 0.00625;
  SparseComplex one = delta_y_linear(m, m.oltcs[0], a0, a0 + d);
  SparseComplex two = delta_y_linear(m, m.oltcs[0], a0, a0 + 2.0 * d);
  SparseComplex diff = two - SparseComplex(2.0 * one);
  CHECK(diff.norm() < 1e-12);
}

TEST_CASE("diagonal perturbation term matches the tangent coefficient") {
  // d(a^2)/da = 2 a0, so at a0 = 1 a step of 0.00625 adds 0.0125/z_T on the
  // primary diagonal
  FeederModel m = testing::two_bus_feeder(0.01, 0.05);
  SparseComplex dy = delta_y_linear(m, m.oltcs[0], 1.0, 1.00625);
  const Complex want = 0.0125 / Complex{0.01, 0.05};
  CHECK(std::abs(dy.coeff(0, 0) - want) < 1e-12);
  const Complex off = -0.00625 / Complex{0.01, 0.05};
  CHECK(std::abs(dy.coeff(0, 1) - off) < 1e-12);
  CHECK(std::abs(dy.coeff(1, 1)) < 1e-15);
}

TEST_CASE("exact perturbation keeps the quadratic diagonal") {
  FeederModel m = testing::two_bus_feeder(0.01, 0.05);
  const double a = 1.00625;
  SparseComplex dy = delta_y_exact(m, m.oltcs[0], 1.0, a);
  const Complex want = (a * a - 1.0) / Complex{0.01, 0.05};
  CHECK(std::abs(dy.coeff(0, 0) - want) < 1e-12);
}

TEST_CASE("voltage perturbation via impedance equals the direct route") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    FeederModel m = testing::random_radial_feeder(seed, 8 + static_cast<int>(seed % 5),
                                                  1 + static_cast<int>(seed % 2));
    InjectionSet inj = InjectionSet::zeros(m.node_count());
    for (const auto& l : m.loads) inj.s_load[l.node] += l.s_kva / 1000.0;
    TapMap taps;
    VoltageSolution sol = solve_power_flow(m, taps, inj);
    REQUIRE(sol.converged);
    AdmittanceMatrix ym = build_admittance(m, taps);
    Factorization fact(ym.y, m.slack_nodes);
    // the identity is algebraic for a consistent (v0, i0) pair
    const ComplexVector i0 = ym.y * sol.v;
    for (const auto& dev : m.oltcs) {
      SparseComplex dy = delta_y_linear(m, dev, 1.0, 1.00625);
      ComplexVector direct = delta_v_direct(fact, m, dy, sol.v);
      ComplexVector via_z = delta_v_via_impedance(fact, m, dy, i0);
      REQUIRE(direct.size() == via_z.size());
      for (int n = 0; n < direct.size(); ++n)
        CHECK(std::abs(direct[n] - via_z[n]) < 1e-12);
    }
  }
}

TEST_CASE("sensitivity model is linear in the tap positions") {
  LinPoint lp = loaded_chain(7);
  Factorization fact(lp.ym.y, lp.model.slack_nodes);
  SensitivityModel sm = build_sensitivity(lp.model, fact, lp.sol.v, lp.sol.i, {});
  ComplexVector one = sm.delta_v(lp.model, {{"T1", 1}});
  ComplexVector two = sm.delta_v(lp.model, {{"T1", 2}});
  for (int n = 0; n < one.size(); ++n) CHECK(std::abs(two[n] - 2.0 * one[n]) < 1e-12);
  // zero taps produce a zero perturbation
  ComplexVector none = sm.delta_v(lp.model, {});
  CHECK(none.norm() < 1e-15);
}

TEST_CASE("superposition over devices") {
  FeederModel m = testing::random_radial_feeder(7, 10, 2);
  InjectionSet inj = InjectionSet::zeros(m.node_count());
  for (const auto& l : m.loads) inj.s_load[l.node] += l.s_kva / 1000.0;
  VoltageSolution sol = solve_power_flow(m, {}, inj);
  REQUIRE(sol.converged);
  AdmittanceMatrix ym = build_admittance(m, {});
  Factorization fact(ym.y, m.slack_nodes);
  SensitivityModel sm = build_sensitivity(m, fact, sol.v, sol.i, {});
  ComplexVector both = sm.delta_v(m, {{"T1", 2}, {"T2", -3}});
  ComplexVector t1 = sm.delta_v(m, {{"T1", 2}});
  ComplexVector t2 = sm.delta_v(m, {{"T2", -3}});
  for (int n = 0; n < both.size(); ++n)
    CHECK(std::abs(both[n] - (t1[n] + t2[n])) < 1e-12);
}

TEST_CASE("magnitude model is exact for collinear perturbations") {
  const Complex v0{0.98, 0.0};
  const Complex dv{0.01, 0.0};
  CHECK(linear_voltage_magnitude(v0, dv) == doctest::Approx(0.99).epsilon(1e-14));
  // orthogonal perturbations contribute nothing to first order
  CHECK(linear_voltage_magnitude(v0, Complex{0.0, 0.01}) ==
        doctest::Approx(0.98).epsilon(1e-14));
}

TEST_CASE("prediction is exact at no load") {
  // without load current the dropped quadratic term only touches the pinned
  // slack row, so the affine model reproduces the oracle voltages exactly
  FeederModel m = testing::chain_feeder(8);
  InjectionSet none = InjectionSet::zeros(m.node_count());
  for (int dtau : {1, 8, 16}) {
    TapPerturbationStep st{none, {}, {{"T1", dtau}}};
    ErrorStats es = validate_linearization(m, {st});
    CHECK(es.max_abs < 1e-9);
  }
}

TEST_CASE("prediction error shrinks with the step under load") {
  // with load the neglected current correction adds a term linear in the
  // step, so the decay is between linear and quadratic but still monotone
  LinPoint lp = loaded_chain(8, 0.06);
  auto max_err = [&](int dtau) {
    TapPerturbationStep st{lp.inj, {}, {{"T1", dtau}}};
    ErrorStats es = validate_linearization(lp.model, {st});
    return es.max_abs;
  };
  const double e1 = max_err(4);
  const double e2 = max_err(8);
  REQUIRE(e1 > 0.0);
  CHECK(e2 / e1 > 1.5);
  CHECK(e2 / e1 < 4.5);
}

TEST_CASE("error stats histogram covers every record") {
  ErrorStats es;
  es.records = {{0, 0, 0.001}, {0, 1, -0.002}, {1, 0, 0.0005}};
  es.finalize(11);
  CHECK(es.steps_compared == 0);  // set by the harness, not finalize
  CHECK(es.max_abs == doctest::Approx(0.002));
  CHECK(es.mean_abs == doctest::Approx((0.001 + 0.002 + 0.0005) / 3.0));
  int total = 0;
  for (int c : es.histogram) total += c;
  CHECK(total == 3);
}

#include <doctest.h>

#include "fixtures.hpp"
#include "otc/admittance.hpp"

using namespace otc;

namespace {

Complex entry(const SparseComplex& y, int i, int j) { return y.coeff(i, j); }

}  // namespace

TEST_CASE("two node transformer stamp at neutral tap") {
  FeederModel m = testing::two_bus_feeder(0.01, 0.05);
  AdmittanceMatrix ym = build_admittance(m, {});
  const Complex yt = 1.0 / Complex{0.01, 0.05};
  // a = 1: Y_ii = a^2/z, Y_ij = -a/z, Y_jj = 1/z
  CHECK(std::abs(entry(ym.y, 0, 0) - yt) < 1e-14);
  CHECK(std::abs(entry(ym.y, 0, 1) + yt) < 1e-14);
  CHECK(std::abs(entry(ym.y, 1, 0) + yt) < 1e-14);
  CHECK(std::abs(entry(ym.y, 1, 1) - yt) < 1e-14);
}

TEST_CASE("primary diagonal scales with ratio squared at full boost") {
  FeederModel m = testing::two_bus_feeder(0.01, 0.05);
  AdmittanceMatrix ym = build_admittance(m, {{"T1", 16}});
  const Complex yt = 1.0 / Complex{0.01, 0.05};
  const double a = 1.1;
  CHECK(std::abs(entry(ym.y, 0, 0) - a * a * yt) < 1e-12);
  CHECK(std::abs(entry(ym.y, 0, 1) + a * yt) < 1e-12);
  CHECK(std::abs(entry(ym.y, 1, 1) - yt) < 1e-12);  // secondary diagonal tap-independent
}

TEST_CASE("matrix is symmetric") {
  FeederModel m = testing::chain_feeder(6);
  AdmittanceMatrix ym = build_admittance(m, {{"T1", -5}});
  SparseComplex diff = SparseComplex(ym.y.transpose()) - ym.y;
  double worst = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseComplex::InnerIterator it(diff, k); it; ++it)
      worst = std::max(worst, std::abs(it.value()));
  CHECK(worst < 1e-14);
}

TEST_CASE("tap change touches only the device entries") {
  FeederModel m = testing::chain_feeder(6);
  AdmittanceMatrix y0 = build_admittance(m, {{"T1", 0}});
  AdmittanceMatrix y1 = build_admittance(m, {{"T1", 4}});
  const auto& touched = y0.tap_entries.at("T1");
  for (int i = 0; i < m.node_count(); ++i)
    for (int j = 0; j < m.node_count(); ++j) {
      const Complex d = entry(y1.y, i, j) - entry(y0.y, i, j);
      const bool listed =
          std::find(touched.begin(), touched.end(), std::make_pair(i, j)) != touched.end();
      if (!listed) CHECK(std::abs(d) < 1e-14);
    }
  // the secondary-secondary entry is tap independent even though the device owns it
  const int sec = m.oltcs[0].secondary_nodes[0];
  CHECK(std::abs(entry(y1.y, sec, sec) - entry(y0.y, sec, sec)) < 1e-14);
}

TEST_CASE("branch and shunt stamps add classically") {
  FeederModel m = parse_feeder_text(
      "bus SRC 12.0 1\nbus B 12.0 1\nslack SRC 1.0 0\n"
      "branch SRC.1 B.1 0.0 0.1\nshunt B.1 0.0 -10.0\n");
  AdmittanceMatrix ym = build_admittance(m, {});
  const Complex yb = 1.0 / Complex{0.0, 0.1};
  const Complex ys = 1.0 / Complex{0.0, -10.0};
  CHECK(std::abs(entry(ym.y, 0, 0) - yb) < 1e-14);
  CHECK(std::abs(entry(ym.y, 1, 1) - (yb + ys)) < 1e-14);
  CHECK(std::abs(entry(ym.y, 0, 1) + yb) < 1e-14);
}

TEST_CASE("tap_of defaults to neutral for unknown devices") {
  TapMap taps{{"T1", 3}};
  CHECK(tap_of(taps, "T1") == 3);
  CHECK(tap_of(taps, "T9") == 0);
}

#include <doctest.h>

#include "fixtures.hpp"
#include "otc/feeder.hpp"

using namespace otc;

TEST_CASE("parser builds dense nodes per bus phase") {
  FeederModel m = parse_feeder_text(
      "basemva 10\n"
      "bus SRC 12.0 3\n"
      "bus A 12.0 3\n"
      "slack SRC 1.0 0\n"
      "oltc T1 SRC A 0.01 0.05 16 1.1 1\n");
  CHECK(m.base_mva == 10.0);
  CHECK(m.buses.size() == 2);
  CHECK(m.nodes.size() == 6);
  CHECK(m.find_node("SRC.1") == 0);
  CHECK(m.find_node("A.3") == 5);
  CHECK(m.find_node("A.4") == -1);
  CHECK(m.slack_nodes.size() == 3);
  REQUIRE(m.oltcs.size() == 1);
  CHECK(m.oltcs[0].primary_nodes == std::vector<int>{0, 1, 2});
  CHECK(m.oltcs[0].secondary_nodes == std::vector<int>{3, 4, 5});
}

TEST_CASE("comments and blank lines are ignored") {
  FeederModel m = parse_feeder_text(
      "# header\n\nbasemva 1\nbus SRC 12.0 1  # trailing\nbus B 12.0 1\n"
      "slack SRC 1.0 0\nbranch SRC.1 B.1 0.01 0.01\n");
  CHECK(m.branches.size() == 1);
}

TEST_CASE("records may appear before the buses they reference") {
  FeederModel m = parse_feeder_text(
      "slack SRC 1.0 0\nbranch SRC.1 B.1 0.01 0.01\nbus SRC 12.0 1\nbus B 12.0 1\n");
  CHECK(m.branches.size() == 1);
  CHECK(m.slack_bus == 0);
}

TEST_CASE("unknown node reference fails with origin and line") {
  try {
    parse_feeder_text("bus SRC 12.0 1\nslack SRC 1.0 0\nbranch SRC.1 NOPE.1 0.01 0.01\n",
                      "test.otc");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("test.otc:3") != std::string::npos);
    CHECK(msg.find("NOPE.1") != std::string::npos);
  }
}

TEST_CASE("duplicate bus is rejected") {
  CHECK_THROWS_AS(parse_feeder_text("bus A 12.0 1\nbus A 12.0 1\nslack A 1.0 0\n"),
                  ParseError);
}

TEST_CASE("missing slack fails validation") {
  CHECK_THROWS_AS(parse_feeder_text("bus A 12.0 1\n"), ValidationError);
}

TEST_CASE("island disconnected from slack fails validation") {
  CHECK_THROWS_AS(parse_feeder_text("bus SRC 12.0 1\nbus LONE 12.0 1\nslack SRC 1.0 0\n"),
                  ValidationError);
}

TEST_CASE("oltc requires matching phase counts") {
  CHECK_THROWS_AS(parse_feeder_text("bus SRC 12.0 3\nbus B 12.0 1\nslack SRC 1.0 0\n"
                                    "oltc T1 SRC B 0.01 0.05 16 1.1 1\n"),
                  ParseError);
}

TEST_CASE("tap ratio map is affine between the limits") {
  OltcDevice d;
  d.tau_max = 16;
  d.a_max = 1.1;
  CHECK(tap_to_ratio(d, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(tap_to_ratio(d, 16) == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(tap_to_ratio(d, -16) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(tap_to_ratio(d, -8) == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(ratio_step(d) == doctest::Approx(0.00625).epsilon(1e-15));
  // affinity: equal increments in tau give equal increments in a
  const double d1 = tap_to_ratio(d, 5) - tap_to_ratio(d, 4);
  const double d2 = tap_to_ratio(d, -3) - tap_to_ratio(d, -4);
  CHECK(d1 == doctest::Approx(d2).epsilon(1e-12));
  CHECK_THROWS_AS(tap_to_ratio(d, 17), std::out_of_range);
}

TEST_CASE("pv scaling hits the requested penetration exactly") {
  FeederModel m = parse_feeder_text(
      "basemva 1\nbus SRC 12.0 1\nbus B 12.0 1\nbus C 12.0 1\nslack SRC 1.0 0\n"
      "branch SRC.1 B.1 0.01 0.01\nbranch B.1 C.1 0.01 0.01\n"
      "load B.1 50 10 l\npv B.1 30 p\npv C.1 10 p\n");
  const double peak = 80.0;
  FeederModel scaled = scale_pv_penetration(m, 150.0, peak);
  double total = 0.0;
  for (const auto& p : scaled.pvs) total += p.rated_kw;
  CHECK(total == doctest::Approx(1.5 * peak).epsilon(1e-12));
  // relative sizes preserved
  CHECK(scaled.pvs[0].rated_kw / scaled.pvs[1].rated_kw ==
        doctest::Approx(3.0).epsilon(1e-12));

  FeederModel zero = scale_pv_penetration(m, 0.0, peak);
  for (const auto& p : zero.pvs) CHECK(p.rated_kw == 0.0);

  FeederModel nopv = m;
  nopv.pvs.clear();
  CHECK_THROWS_AS(scale_pv_penetration(nopv, 100.0, peak), ValidationError);
}

TEST_CASE("slack voltage rotates -120 degrees per phase") {
  FeederModel m = parse_feeder_text(
      "bus SRC 12.0 3\nbus A 12.0 3\nslack SRC 1.0 0\n"
      "oltc T1 SRC A 0.01 0.05 16 1.1 1\n");
  const Complex v1 = m.slack_voltage_at(0);
  const Complex v2 = m.slack_voltage_at(1);
  const Complex v3 = m.slack_voltage_at(2);
  CHECK(std::abs(v1 - Complex{1.0, 0.0}) < 1e-12);
  CHECK(std::arg(v2) == doctest::Approx(-2.0943951023931953).epsilon(1e-12));
  CHECK(std::abs(v1 + v2 + v3) < 1e-12);  // balanced set sums to zero
}

TEST_CASE("bundled feeders parse and validate") {
  FeederModel m13 = parse_feeder("data/feeder13.otc");
  CHECK(m13.oltcs.size() == 1);
  CHECK(m13.node_count() == 13);
  FeederModel m40 = parse_feeder("data/feeder40.otc");
  CHECK(m40.oltcs.size() == 2);
  CHECK(m40.node_count() == 39);
}

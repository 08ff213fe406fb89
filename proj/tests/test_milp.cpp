#include <doctest.h>

#include <functional>
#include <random>
#include <vector>

#include "otc/milp.hpp"

using namespace otc;

namespace {

/// Exhaustive enumeration over every movement-feasible tap path; independent
/// of the branch-and-bound code path.
double enumerate_best(const MilpInstance& inst, long* paths_out = nullptr) {
  const int P = inst.horizon.oltc_count();
  const int T = inst.horizon.step_count();
  std::vector<std::vector<int>> tau(P, std::vector<int>(T, 0));
  double best = std::numeric_limits<double>::infinity();
  long paths = 0;

  std::function<void(int, int)> rec = [&](int p, int t) {
    if (p == P) {
      ++paths;
      best = std::min(best, inst.evaluate(tau));
      return;
    }
    const auto& d = inst.horizon.oltcs[p];
    if (t == T) {
      rec(p + 1, 0);
      return;
    }
    const int prev = t == 0 ? d.tau0 : tau[p][t - 1];
    for (int v = prev - d.dto_max; v <= prev + d.dto_max; ++v) {
      if (std::abs(v) > d.tau_max) continue;
      tau[p][t] = v;
      rec(p, t + 1);
    }
  };
  rec(0, 0);
  if (paths_out) *paths_out = paths;
  return best;
}

HorizonData random_horizon(std::uint64_t seed, int P, int T, int nodes = 6) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> vmag(0.94, 1.07);
  std::uniform_real_distribution<double> gain(0.002, 0.009);
  std::uniform_int_distribution<int> taumax(2, 4), dto(1, 2);

  HorizonData h;
  for (int p = 0; p < P; ++p) {
    HorizonOltc d;
    d.id = "T" + std::to_string(p + 1);
    d.tau_max = taumax(rng);
    d.dto_max = dto(rng);
    std::uniform_int_distribution<int> t0(-d.tau_max, d.tau_max);
    d.tau0 = t0(rng);
    d.ratio_step = 0.00625;
    h.oltcs.push_back(d);
  }
  for (int t = 0; t < T; ++t) {
    HorizonStepData st;
    st.v0_mag.resize(nodes);
    for (int n = 0; n < nodes; ++n) st.v0_mag[n] = vmag(rng);
    for (int p = 0; p < P; ++p) {
      Eigen::VectorXd g(nodes);
      for (int n = 0; n < nodes; ++n) g[n] = gain(rng) * (n >= nodes / 2 ? 1.0 : 0.3);
      st.tap_gain.push_back(g);
    }
    for (int n = 0; n < nodes; ++n) st.candidates.push_back(n);
    h.steps.push_back(std::move(st));
  }
  return h;
}

}  // namespace

TEST_CASE("objective evaluation matches a hand computation") {
  HorizonData h;
  HorizonOltc d{"T1", 1, 4, 2, 0.00625};
  h.oltcs.push_back(d);
  HorizonStepData st;
  st.v0_mag.resize(2);
  st.v0_mag << 1.03, 0.97;
  Eigen::VectorXd g(2);
  g << 0.005, 0.002;
  st.tap_gain.push_back(g);
  st.candidates = {0, 1};
  h.steps.push_back(st);

  MilpInstance inst = build_milp(h, 1.0, 0.005);
  double j1 = 0.0, j2 = 0.0;
  // tau = -1: node0 -> 1.03 - 0.010 = 1.020, node1 -> 0.97 - 0.004 = 0.966
  const double obj = inst.evaluate({{-1}}, &j1, &j2);
  CHECK(j1 == doctest::Approx(0.034).epsilon(1e-12));
  CHECK(j2 == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(obj == doctest::Approx(0.034 + 0.005 * 2.0).epsilon(1e-12));
}

TEST_CASE("zero sensitivity holds the current taps") {
  HorizonData h;
  h.oltcs.push_back({"T1", 2, 6, 1, 0.00625});
  for (int t = 0; t < 3; ++t) {
    HorizonStepData st;
    st.v0_mag = Eigen::VectorXd::Constant(4, 1.01);
    st.tap_gain.push_back(Eigen::VectorXd::Zero(4));
    st.candidates = {0, 1, 2, 3};
    h.steps.push_back(st);
  }
  TapSchedule s = solve_milp(build_milp(h, 1.0, 0.005));
  REQUIRE(s.optimal);
  for (int t = 0; t < 3; ++t) CHECK(s.tau[0][t] == 2);
  CHECK(s.j2 == 0.0);
}

TEST_CASE("constraint count is two per candidate appearance plus movement rows") {
  HorizonData h = random_horizon(3, 2, 3);
  MilpInstance inst = build_milp(h, 1.0, 0.005);
  size_t cand = 0;
  for (const auto& st : h.steps) cand += st.candidates.size();
  CHECK(inst.rows.size() == 2 * cand + 2 * 2 * 3);
  CHECK(inst.num_vars == 2 * 2 * 3 + 1);
}

TEST_CASE("branch and bound matches exhaustive enumeration") {
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 30; ++seed) {
    const int P = 1 + static_cast<int>(seed % 2);
    const int T = 1 + static_cast<int>((seed / 2) % 4);
    HorizonData h = random_horizon(seed * 977, P, T);
    for (double w2 : {0.0, 0.005}) {
      MilpInstance inst = build_milp(h, 1.0, w2);
      TapSchedule s = solve_milp(inst);
      REQUIRE(s.optimal);
      const double oracle = enumerate_best(inst);
      CHECK(std::abs(s.objective - oracle) < 1e-9);
    }
    ++checked;
  }
}

TEST_CASE("relaxation never exceeds the integer objective") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    HorizonData h = random_horizon(seed, 2, 3);
    MilpInstance inst = build_milp(h, 1.0, 0.005);
    TapSchedule s = solve_milp(inst);
    REQUIRE(s.optimal);
    CHECK(solve_lp_relaxation(inst) <= s.objective + 1e-9);
  }
}

TEST_CASE("movement penalty reduces tap operations monotonically") {
  HorizonData h = random_horizon(42, 2, 4);
  double prev_j2 = std::numeric_limits<double>::infinity();
  for (double w2 : {0.0, 0.005, 0.02, 0.08}) {
    TapSchedule s = solve_milp(build_milp(h, 1.0, w2));
    REQUIRE(s.optimal);
    CHECK(s.j2 <= prev_j2 + 1e-12);
    prev_j2 = s.j2;
  }
}

TEST_CASE("repeat solves return the identical schedule") {
  HorizonData h = random_horizon(7, 2, 4);
  MilpInstance inst = build_milp(h, 1.0, 0.005);
  TapSchedule a = solve_milp(inst);
  TapSchedule b = solve_milp(inst);
  CHECK(a.tau == b.tau);
  CHECK(a.objective == b.objective);
}

TEST_CASE("schedules respect movement and range limits") {
  for (std::uint64_t seed = 200; seed < 210; ++seed) {
    HorizonData h = random_horizon(seed, 2, 4);
    TapSchedule s = solve_milp(build_milp(h, 1.0, 0.001));
    for (int p = 0; p < 2; ++p) {
      int prev = h.oltcs[p].tau0;
      for (int t = 0; t < 4; ++t) {
        CHECK(std::abs(s.tau[p][t]) <= h.oltcs[p].tau_max);
        CHECK(std::abs(s.tau[p][t] - prev) <= h.oltcs[p].dto_max);
        prev = s.tau[p][t];
      }
    }
  }
}

TEST_CASE("candidate selection keeps extremes and device terminals") {
  std::vector<Eigen::VectorXd> traj(1);
  traj[0].resize(8);
  traj[0] << 1.00, 1.06, 0.95, 1.01, 0.99, 1.04, 0.93, 1.02;
  auto sets = select_candidate_nodes(traj, {{0}}, 1);
  REQUIRE(sets.size() == 1);
  // two maxima (1, 5), two minima (6, 2), plus terminal 0
  std::vector<int> want{0, 1, 2, 5, 6};
  CHECK(sets[0] == want);
}

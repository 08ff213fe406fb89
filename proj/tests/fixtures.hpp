#ifndef OTC_TESTS_FIXTURES_HPP_
#define OTC_TESTS_FIXTURES_HPP_

#include <random>
#include <sstream>
#include <string>

#include "otc/feeder.hpp"

namespace otc::testing {

/// Slack -- OLTC -- single load bus, single phase.
inline std::string two_bus_text(double r_t = 0.01, double x_t = 0.05, int tau_max = 16,
                                double a_max = 1.1) {
  std::ostringstream s;
  s << "basemva 1\n"
    << "bus SRC 12.0 1\n"
    << "bus SEC 12.0 1\n"
    << "slack SRC 1.0 0\n"
    << "oltc T1 SRC SEC " << r_t << " " << x_t << " " << tau_max << " " << a_max << " 1\n";
  return s.str();
}

inline FeederModel two_bus_feeder(double r_t = 0.01, double x_t = 0.05, int tau_max = 16,
                                  double a_max = 1.1) {
  return parse_feeder_text(two_bus_text(r_t, x_t, tau_max, a_max));
}

/// Single-phase radial chain: SRC -(OLTC)- B1 - B2 - ... - B<n>.
inline FeederModel chain_feeder(int n, double r = 0.01, double x = 0.01) {
  std::ostringstream s;
  s << "basemva 1\nbus SRC 12.0 1\n";
  for (int i = 1; i <= n; ++i) s << "bus B" << i << " 12.0 1\n";
  s << "slack SRC 1.0 0\n";
  s << "oltc T1 SRC B1 0.003 0.03 16 1.1 1\n";
  for (int i = 1; i < n; ++i)
    s << "branch B" << i << ".1 B" << (i + 1) << ".1 " << r << " " << x << "\n";
  return parse_feeder_text(s.str());
}

/// Random single-phase radial network with one or two OLTCs, for the
/// perturbation-identity trials. Deterministic per seed.
inline FeederModel random_radial_feeder(std::uint64_t seed, int n_buses, int n_oltcs) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> zr(0.004, 0.02), zx(0.004, 0.02);
  std::ostringstream s;
  s << "basemva 1\nbus SRC 12.0 1\n";
  for (int i = 1; i <= n_buses; ++i) s << "bus B" << i << " 12.0 1\n";
  s << "slack SRC 1.0 0\n";
  // OLTC from SRC to B1; optional mid-feeder OLTC
  s << "oltc T1 SRC B1 " << zr(rng) << " " << zx(rng) << " 16 1.1 1\n";
  const int mid = n_buses / 2;
  for (int i = 1; i < n_buses; ++i) {
    if (n_oltcs > 1 && i == mid) {
      s << "oltc T2 B" << i << " B" << (i + 1) << " " << zr(rng) << " " << zx(rng)
        << " 16 1.1 1\n";
    } else {
      // random upstream attachment keeps the network radial but not a pure chain
      std::uniform_int_distribution<int> up(std::max(1, i - 3), i);
      const int parent = (i > mid || n_oltcs <= 1) ? up(rng) : i;
      s << "branch B" << parent << ".1 B" << (i + 1) << ".1 " << zr(rng) << " " << zx(rng)
        << "\n";
    }
  }
  for (int i = 2; i <= n_buses; ++i) {
    std::uniform_real_distribution<double> kw(20.0, 80.0);
    s << "load B" << i << ".1 " << kw(rng) << " " << kw(rng) * 0.3 << " load_x\n";
  }
  return parse_feeder_text(s.str());
}

}  // namespace otc::testing

#endif  // OTC_TESTS_FIXTURES_HPP_

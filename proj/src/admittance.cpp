#include "otc/admittance.hpp"

#include <vector>

namespace otc {

int tap_of(const TapMap& taps, const std::string& id) {
  auto it = taps.find(id);
  return it == taps.end() ? 0 : it->second;
}

AdmittanceMatrix build_admittance(const FeederModel& m, const TapMap& taps) {
  const int n = m.node_count();
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(4 * m.branches.size() + m.shunts.size() + 4 * m.oltcs.size() * 3);

  for (const auto& br : m.branches) {
    const Complex y = 1.0 / br.z;
    trip.emplace_back(br.from, br.from, y);
    trip.emplace_back(br.to, br.to, y);
    trip.emplace_back(br.from, br.to, -y);
    trip.emplace_back(br.to, br.from, -y);
  }
  for (const auto& sh : m.shunts) trip.emplace_back(sh.node, sh.node, 1.0 / sh.z);

  AdmittanceMatrix out;
  for (const auto& d : m.oltcs) {
    const double a = tap_to_ratio(d, tap_of(taps, d.id));
    const Complex yt = 1.0 / d.z_t;
    auto& ent = out.tap_entries[d.id];
    for (size_t ph = 0; ph < d.primary_nodes.size(); ++ph) {
      const int i = d.primary_nodes[ph];
      const int j = d.secondary_nodes[ph];
      trip.emplace_back(i, i, a * a * yt);
      trip.emplace_back(i, j, -a * yt);
      trip.emplace_back(j, i, -a * yt);
      trip.emplace_back(j, j, yt);
      ent.push_back({i, i});
      ent.push_back({i, j});
      ent.push_back({j, i});
    }
  }

  out.y.resize(n, n);
  out.y.setFromTriplets(trip.begin(), trip.end());
  out.y.makeCompressed();
  return out;
}

}  // namespace otc

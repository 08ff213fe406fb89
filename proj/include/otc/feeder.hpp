#ifndef OTC_FEEDER_HPP_
#define OTC_FEEDER_HPP_

#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace otc {

using Complex = std::complex<double>;

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One phase of one bus. Node indices are dense: 0..n-1.
struct Node {
  int index = -1;
  int bus = -1;
  int phase = 1;  // 1-based phase number
  std::string name;  // "BUS.ph"
};

struct Bus {
  int index = -1;
  std::string name;
  double base_kv = 0.0;
  int phases = 1;
};

/// Series element between two nodes, impedance in p.u.
struct Branch {
  int from = -1;
  int to = -1;
  Complex z;
};

/// Shunt impedance from a node to ground, p.u.
struct Shunt {
  int node = -1;
  Complex z;
};

struct OltcDevice {
  std::string id;
  int primary_bus = -1;
  int secondary_bus = -1;
  std::vector<int> primary_nodes;    // one per phase
  std::vector<int> secondary_nodes;  // one per phase, ganged tap
  Complex z_t;         // transformer impedance, p.u., on the primary winding
  int tau_max = 16;
  double a_max = 1.1;  // ratio at +tau_max; a_min = 2 - a_max
  int dto_max = 1;     // max tap steps per control interval
};

struct Load {
  int node = -1;
  Complex s_kva;       // kW + j*kvar nominal demand
  std::string profile;
};

struct PvSystem {
  int node = -1;
  double rated_kw = 0.0;
  std::string profile;
};

struct FeederModel {
  std::vector<Bus> buses;
  std::vector<Node> nodes;
  std::vector<Branch> branches;
  std::vector<Shunt> shunts;
  std::vector<OltcDevice> oltcs;
  std::vector<Load> loads;
  std::vector<PvSystem> pvs;
  int slack_bus = -1;
  std::vector<int> slack_nodes;
  Complex slack_voltage{1.0, 0.0};  // phase-1 voltage; other phases rotated -120 deg each
  double base_mva = 1.0;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int find_bus(const std::string& name) const;
  int find_node(const std::string& busdotphase) const;  // -1 if absent
  /// Fixed complex voltage of a slack node (rotated per phase).
  Complex slack_voltage_at(int node) const;
};

/// Tap ratio for an integer tap position: a = 1 + (tau/tau_max)(a_max - 1).
double tap_to_ratio(const OltcDevice& device, int tau);

/// p.u. ratio change for one tap step: (a_max - 1)/tau_max.
inline double ratio_step(const OltcDevice& d) { return (d.a_max - 1.0) / d.tau_max; }

FeederModel parse_feeder(const std::string& path);
FeederModel parse_feeder_text(const std::string& text, const std::string& origin = "<memory>");

/// Validates all model invariants; throws ValidationError naming the violation.
void validate(const FeederModel& model);

/// Scales every PV rating by a common factor so total rated kW equals
/// (penetration/100) * peak_load_kva. Relative sizes preserved.
FeederModel scale_pv_penetration(const FeederModel& model, double penetration_pct,
                                 double peak_load_kva);

}  // namespace otc

#endif  // OTC_FEEDER_HPP_

#include "otc/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <queue>
#include <sstream>

namespace otc {

int FeederModel::find_bus(const std::string& name) const {
  for (const auto& b : buses)
    if (b.name == name) return b.index;
  return -1;
}

int FeederModel::find_node(const std::string& busdotphase) const {
  for (const auto& n : nodes)
    if (n.name == busdotphase) return n.index;
  return -1;
}

Complex FeederModel::slack_voltage_at(int node) const {
  const Node& n = nodes.at(node);
  const double shift = -2.0 * std::numbers::pi / 3.0 * (n.phase - 1);
  return slack_voltage * std::polar(1.0, shift);
}

double tap_to_ratio(const OltcDevice& device, int tau) {
  if (std::abs(tau) > device.tau_max)
    throw std::out_of_range("tap position " + std::to_string(tau) + " outside +-" +
                            std::to_string(device.tau_max) + " for OLTC " + device.id);
  return 1.0 + (static_cast<double>(tau) / device.tau_max) * (device.a_max - 1.0);
}

namespace {

struct Line {
  int number;
  std::vector<std::string> fields;
};

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw ParseError(origin + ":" + std::to_string(line) + ": " + msg);
}

double num(const std::string& origin, int line, const std::string& s, const char* what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(origin, line, std::string("bad ") + what + " value '" + s + "'");
  }
}

int integer(const std::string& origin, int line, const std::string& s, const char* what) {
  try {
    size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(origin, line, std::string("bad ") + what + " value '" + s + "'");
  }
}

// Resolves "BUS.ph" to a node index, failing with a diagnostic.
int node_ref(const FeederModel& m, const std::string& origin, int line, const std::string& ref) {
  int idx = m.find_node(ref);
  if (idx < 0) fail(origin, line, "unknown node '" + ref + "'");
  return idx;
}

}  // namespace

FeederModel parse_feeder_text(const std::string& text, const std::string& origin) {
  FeederModel m;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  std::vector<Line> deferred;  // records that reference nodes, handled after buses

  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> f;
    for (std::string tok; ls >> tok;) f.push_back(tok);
    if (f.empty()) continue;

    if (f[0] == "bus") {
      if (f.size() != 4) fail(origin, lineno, "bus expects: bus <name> <basekV> <phases>");
      if (m.find_bus(f[1]) >= 0) fail(origin, lineno, "duplicate bus '" + f[1] + "'");
      Bus b;
      b.index = static_cast<int>(m.buses.size());
      b.name = f[1];
      b.base_kv = num(origin, lineno, f[2], "basekV");
      b.phases = integer(origin, lineno, f[3], "phases");
      if (b.phases < 1 || b.phases > 3) fail(origin, lineno, "phases must be 1..3");
      m.buses.push_back(b);
      for (int ph = 1; ph <= b.phases; ++ph) {
        Node n;
        n.index = static_cast<int>(m.nodes.size());
        n.bus = b.index;
        n.phase = ph;
        n.name = b.name + "." + std::to_string(ph);
        m.nodes.push_back(n);
      }
    } else if (f[0] == "basemva") {
      if (f.size() != 2) fail(origin, lineno, "basemva expects: basemva <MVA>");
      m.base_mva = num(origin, lineno, f[1], "basemva");
    } else {
      deferred.push_back({lineno, f});
    }
  }

  for (const auto& [ln, f] : deferred) {
    if (f[0] == "branch") {
      if (f.size() != 5) fail(origin, ln, "branch expects: branch <a.ph> <b.ph> <r> <x>");
      Branch br;
      br.from = node_ref(m, origin, ln, f[1]);
      br.to = node_ref(m, origin, ln, f[2]);
      br.z = {num(origin, ln, f[3], "r"), num(origin, ln, f[4], "x")};
      if (br.z == Complex{0.0, 0.0}) fail(origin, ln, "zero branch impedance");
      m.branches.push_back(br);
    } else if (f[0] == "shunt") {
      if (f.size() != 4) fail(origin, ln, "shunt expects: shunt <bus.ph> <r> <x>");
      Shunt sh;
      sh.node = node_ref(m, origin, ln, f[1]);
      sh.z = {num(origin, ln, f[2], "r"), num(origin, ln, f[3], "x")};
      if (sh.z == Complex{0.0, 0.0}) fail(origin, ln, "zero shunt impedance");
      m.shunts.push_back(sh);
    } else if (f[0] == "oltc") {
      if (f.size() != 9)
        fail(origin, ln, "oltc expects: oltc <id> <pri bus> <sec bus> <r> <x> <tau_max> <a_max> <dto_max>");
      OltcDevice d;
      d.id = f[1];
      d.primary_bus = m.find_bus(f[2]);
      d.secondary_bus = m.find_bus(f[3]);
      if (d.primary_bus < 0) fail(origin, ln, "unknown bus '" + f[2] + "'");
      if (d.secondary_bus < 0) fail(origin, ln, "unknown bus '" + f[3] + "'");
      d.z_t = {num(origin, ln, f[4], "r"), num(origin, ln, f[5], "x")};
      if (d.z_t == Complex{0.0, 0.0}) fail(origin, ln, "zero transformer impedance");
      d.tau_max = integer(origin, ln, f[6], "tau_max");
      d.a_max = num(origin, ln, f[7], "a_max");
      d.dto_max = integer(origin, ln, f[8], "dto_max");
      if (d.tau_max < 1) fail(origin, ln, "tau_max must be >= 1");
      if (d.a_max <= 1.0) fail(origin, ln, "a_max must be > 1");
      const int pri_ph = m.buses[d.primary_bus].phases;
      const int sec_ph = m.buses[d.secondary_bus].phases;
      if (pri_ph != sec_ph) fail(origin, ln, "oltc bus phase counts differ");
      for (int ph = 1; ph <= pri_ph; ++ph) {
        d.primary_nodes.push_back(m.find_node(m.buses[d.primary_bus].name + "." + std::to_string(ph)));
        d.secondary_nodes.push_back(m.find_node(m.buses[d.secondary_bus].name + "." + std::to_string(ph)));
      }
      m.oltcs.push_back(d);
    } else if (f[0] == "load") {
      if (f.size() != 5) fail(origin, ln, "load expects: load <bus.ph> <kW> <kvar> <profile>");
      Load l;
      l.node = node_ref(m, origin, ln, f[1]);
      l.s_kva = {num(origin, ln, f[2], "kW"), num(origin, ln, f[3], "kvar")};
      l.profile = f[4];
      m.loads.push_back(l);
    } else if (f[0] == "pv") {
      if (f.size() != 4) fail(origin, ln, "pv expects: pv <bus.ph> <kW rated> <profile>");
      PvSystem p;
      p.node = node_ref(m, origin, ln, f[1]);
      p.rated_kw = num(origin, ln, f[2], "kW");
      p.profile = f[3];
      m.pvs.push_back(p);
    } else if (f[0] == "slack") {
      if (f.size() != 4) fail(origin, ln, "slack expects: slack <bus> <Vpu> <angle deg>");
      if (m.slack_bus >= 0) fail(origin, ln, "more than one slack bus");
      m.slack_bus = m.find_bus(f[1]);
      if (m.slack_bus < 0) fail(origin, ln, "unknown bus '" + f[1] + "'");
      const double vpu = num(origin, ln, f[2], "Vpu");
      const double ang = num(origin, ln, f[3], "angle") * std::numbers::pi / 180.0;
      m.slack_voltage = std::polar(vpu, ang);
      for (const auto& n : m.nodes)
        if (n.bus == m.slack_bus) m.slack_nodes.push_back(n.index);
    } else {
      fail(origin, ln, "unknown record '" + f[0] + "'");
    }
  }

  validate(m);
  return m;
}

FeederModel parse_feeder(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open feeder file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_feeder_text(buf.str(), path);
}

void validate(const FeederModel& m) {
  if (m.nodes.empty()) throw ValidationError("feeder has no buses");
  if (m.slack_bus < 0) throw ValidationError("no slack bus defined");
  for (size_t i = 0; i < m.nodes.size(); ++i)
    if (m.nodes[i].index != static_cast<int>(i))
      throw ValidationError("node indices not dense");

  // Connectivity from slack over branches, shunt-free (shunts don't connect), OLTC windings.
  std::vector<std::vector<int>> adj(m.nodes.size());
  for (const auto& br : m.branches) {
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }
  for (const auto& d : m.oltcs)
    for (size_t ph = 0; ph < d.primary_nodes.size(); ++ph) {
      adj[d.primary_nodes[ph]].push_back(d.secondary_nodes[ph]);
      adj[d.secondary_nodes[ph]].push_back(d.primary_nodes[ph]);
    }
  std::vector<char> seen(m.nodes.size(), 0);
  std::queue<int> q;
  for (int s : m.slack_nodes) {
    seen[s] = 1;
    q.push(s);
  }
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        q.push(v);
      }
  }
  for (const auto& n : m.nodes)
    if (!seen[n.index])
      throw ValidationError("node '" + n.name + "' disconnected from slack");
}

FeederModel scale_pv_penetration(const FeederModel& model, double penetration_pct,
                                 double peak_load_kva) {
  if (penetration_pct < 0) throw std::invalid_argument("penetration must be >= 0");
  if (peak_load_kva <= 0) throw std::invalid_argument("peak load must be positive");
  FeederModel out = model;
  double installed = 0.0;
  for (const auto& p : model.pvs) installed += p.rated_kw;
  if (penetration_pct == 0.0) {
    for (auto& p : out.pvs) p.rated_kw = 0.0;
    return out;
  }
  if (installed <= 0.0)
    throw ValidationError("nonzero PV penetration requested but feeder has no installed PV");
  const double factor = (penetration_pct / 100.0) * peak_load_kva / installed;
  for (auto& p : out.pvs) p.rated_kw *= factor;
  return out;
}

}  // namespace otc

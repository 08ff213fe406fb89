#include "otc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace otc {

ControllerKind controller_from_string(const std::string& s) {
  if (s == "atc") return ControllerKind::kAtc;
  if (s == "vlc") return ControllerKind::kVlc;
  if (s == "otc-full" || s == "otc") return ControllerKind::kOtcFull;
  if (s == "otc-simplified") return ControllerKind::kOtcSimplified;
  throw std::runtime_error("unknown controller '" + s + "'");
}

std::string to_string(ControllerKind c) {
  switch (c) {
    case ControllerKind::kAtc: return "atc";
    case ControllerKind::kVlc: return "vlc";
    case ControllerKind::kOtcFull: return "otc-full";
    case ControllerKind::kOtcSimplified: return "otc-simplified";
  }
  return "?";
}

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

}  // namespace

void apply_override(Scenario& s, const std::string& key, const std::string& value) {
  if (key == "feeder") s.feeder_path = value;
  else if (key == "profiles") s.profiles_dir = value;
  else if (key == "controller") s.controller = controller_from_string(value);
  else if (key == "dates") s.dates = split_csv(value);
  else if (key == "weather") s.weather = weather_from_string(value);
  else if (key == "penetration") s.penetration_pct = std::stod(value);
  else if (key == "horizon_steps") s.horizon_steps = std::stoi(value);
  else if (key == "w1") s.w1 = std::stod(value);
  else if (key == "w2") s.w2 = std::stod(value);
  else if (key == "dto_max") s.dto_max = std::stoi(value);
  else if (key == "seed") s.seed = std::stoull(value);
  else if (key == "outdir") s.outdir = value;
  else if (key == "start_hour") s.start_hour = std::stod(value);
  else if (key == "end_hour") s.end_hour = std::stod(value);
  else if (key == "settle_min") s.settle_min = std::stod(value);
  else if (key == "extra_extremes") s.extra_extremes = std::stoi(value);
  else if (key == "time_limit") s.time_limit_s = std::stod(value);
  else if (key == "commit_horizon") s.commit_horizon = value == "1" || value == "true";
  else if (key == "ansi_low") s.ansi_low = std::stod(value);
  else if (key == "ansi_high") s.ansi_high = std::stod(value);
  else if (key == "atc_vref") s.atc_vref = std::stod(value);
  else if (key == "atc_band") s.atc_band = std::stod(value);
  else if (key == "atc_delay") s.atc_delay_s = std::stod(value);
  else throw std::runtime_error("unknown scenario key '" + key + "'");
}

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario '" + path + "'");
  Scenario s;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key, value;
    if (!(ls >> key)) continue;
    std::getline(ls, value);
    // accept both "key value" and "key = value"
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1) + value;
      key.erase(eq);
    } else if (auto v = value.find_first_not_of(" \t");
               v != std::string::npos && value[v] == '=') {
      value.erase(0, v + 1);
    }
    const auto first = value.find_first_not_of(" \t");
    value = first == std::string::npos ? "" : value.substr(first);
    while (!value.empty() && (value.back() == ' ' || value.back() == '\t')) value.pop_back();
    try {
      apply_override(s, key, value);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (s.feeder_path.empty()) throw std::runtime_error(path + ": missing 'feeder' key");
  return s;
}

namespace {

double to_pu(double kw_or_kva, double base_mva) { return kw_or_kva / (base_mva * 1000.0); }

InjectionSet injections_at(const FeederModel& m, ProfileSet& profiles, int step) {
  InjectionSet inj = InjectionSet::zeros(m.node_count());
  for (const auto& l : m.loads)
    inj.s_load[l.node] += Complex(to_pu(l.s_kva.real(), m.base_mva),
                                  to_pu(l.s_kva.imag(), m.base_mva)) *
                          profiles.value(l.profile, step);
  for (const auto& p : m.pvs)
    inj.p_pv[p.node] += to_pu(p.rated_kw, m.base_mva) * profiles.value(p.profile, step);
  return inj;
}

double compute_peak_load_kva(const FeederModel& m, ProfileSet& profiles) {
  double peak = 0.0;
  for (int step = 0; step < kStepsPerDay; ++step) {
    Complex total{0.0, 0.0};
    for (const auto& l : m.loads) total += l.s_kva * profiles.value(l.profile, step);
    peak = std::max(peak, std::abs(total));
  }
  return peak;
}

struct Extremes {
  double max_v = 0.0;
  double min_v = 0.0;
};

Extremes extremes_of(const FeederModel& m, const ComplexVector& v) {
  std::vector<char> slack(m.node_count(), 0);
  for (int s : m.slack_nodes) slack[s] = 1;
  Extremes e{0.0, 1e9};
  for (int n = 0; n < m.node_count(); ++n) {
    if (slack[n]) continue;
    const double mag = std::abs(v[n]);
    e.max_v = std::max(e.max_v, mag);
    e.min_v = std::min(e.min_v, mag);
  }
  return e;
}

}  // namespace

SimulationResult run_qsts(const Scenario& s) {
  FeederModel base = parse_feeder(s.feeder_path);
  // peak over the scenario's own load profiles, not a stored constant
  ProfileSet day0(s.profiles_dir, s.weather, s.seed, 0);
  const double peak_kva = compute_peak_load_kva(base, day0);
  base = scale_pv_penetration(base, s.penetration_pct, peak_kva);

  SimulationResult res;
  res.peak_load_kva = peak_kva;
  for (const auto& d : base.oltcs) res.oltc_ids.push_back(d.id);

  if (s.controller == ControllerKind::kVlc && base.oltcs.size() != 1)
    throw ValidationError("VLC controls a single OLTC; feeder has " +
                          std::to_string(base.oltcs.size()));

  auto dto_of = [&](const OltcDevice& d) { return s.dto_max >= 0 ? s.dto_max : d.dto_max; };

  TapMap taps;
  for (const auto& d : base.oltcs) taps[d.id] = 0;

  std::vector<AtcState> atc;
  for (const auto& d : base.oltcs)
    atc.push_back({s.atc_vref, s.atc_band, s.atc_delay_s, 0.0, 0, d.tau_max});
  VlcState vlc;
  if (!base.oltcs.empty()) {
    vlc.tau_max = base.oltcs[0].tau_max;
    vlc.a_max = base.oltcs[0].a_max;
    vlc.u_upper = s.ansi_high;
    vlc.band = s.ansi_high - s.ansi_low;
  }

  PlanOptions popt;
  popt.horizon_steps = s.horizon_steps;
  popt.w1 = s.w1;
  popt.w2 = s.w2;
  popt.extra_extremes = s.extra_extremes;
  popt.ansi_low = s.ansi_low;
  popt.ansi_high = s.ansi_high;
  popt.time_limit_s = s.time_limit_s;
  popt.mode = s.controller == ControllerKind::kOtcSimplified ? PlanOptions::Mode::kSimplified
                                                             : PlanOptions::Mode::kFull;

  const int s0 = static_cast<int>(std::lround(s.start_hour * 3600.0 / kProfileResolutionS));
  const int settle_end =
      s0 + static_cast<int>(std::lround(s.settle_min * 60.0 / kProfileResolutionS));
  const int s1 = static_cast<int>(std::lround(s.end_hour * 3600.0 / kProfileResolutionS));
  const double dt = kProfileResolutionS;

  ComplexVector prev_v;
  bool have_prev = false;
  Extremes prev_ext{1.0, 1.0};
  std::deque<TapMap> committed;  // pending schedule when commit_horizon is on

  for (size_t day = 0; day < s.dates.size(); ++day) {
    ProfileSet profiles(s.profiles_dir, s.weather, s.seed, static_cast<int>(day));
    vlc_reset(vlc);
    std::map<std::string, long> day_to;
    for (const auto& id : res.oltc_ids) day_to[id] = 0;

    for (int step = s0; step < s1; ++step) {
      InjectionSet inj = injections_at(base, profiles, step);
      StepRecord rec;
      rec.day = static_cast<int>(day);
      rec.step = step;

      VoltageSolution meas;
      bool meas_ok = true;
      try {
        meas = solve_power_flow(base, taps, inj, have_prev ? &prev_v : nullptr);
        meas_ok = meas.converged;
      } catch (const std::exception&) {
        meas_ok = false;
      }

      if (!meas_ok) {
        res.failed_steps++;
        rec.pf_failed = true;
        rec.max_v = prev_ext.max_v;
        rec.min_v = prev_ext.min_v;
        for (const auto& d : base.oltcs) rec.taps.push_back(taps[d.id]);
        res.steps.push_back(rec);
        continue;
      }
      const Extremes ext = extremes_of(base, meas.v);

      // controller decision
      TapMap wanted = taps;
      switch (s.controller) {
        case ControllerKind::kAtc: {
          for (size_t p = 0; p < base.oltcs.size(); ++p) {
            const auto& d = base.oltcs[p];
            double v_local = 0.0;
            for (int n : d.secondary_nodes) v_local += std::abs(meas.v[n]);
            v_local /= static_cast<double>(d.secondary_nodes.size());
            atc[p].tap = taps[d.id];
            atc_step(atc[p], v_local, dt);
            wanted[d.id] = atc[p].tap;
          }
          break;
        }
        case ControllerKind::kVlc: {
          const bool violated = ext.max_v > s.ansi_high || ext.min_v < s.ansi_low;
          if (violated) {
            vlc.tap = taps[base.oltcs[0].id];
            vlc_step(vlc, ext.max_v, ext.min_v);
            wanted[base.oltcs[0].id] = vlc.tap;
          }
          break;
        }
        case ControllerKind::kOtcFull:
        case ControllerKind::kOtcSimplified: {
          if (s.commit_horizon && !committed.empty()) {
            wanted = committed.front();
            committed.pop_front();
            break;
          }
          std::vector<InjectionSet> forecast;
          const int T = popt.mode == PlanOptions::Mode::kFull ? s.horizon_steps : 1;
          for (int k = 0; k < T; ++k)
            forecast.push_back(injections_at(base, profiles, std::min(step + k, s1 - 1)));
          PlanResult plan = plan_step(base, taps, forecast, popt);
          wanted = plan.applied;
          res.solver_nodes += plan.schedule.nodes_explored;
          res.solver_lp_iterations += plan.schedule.lp_iterations;
          res.solve_seconds.push_back(plan.solve_seconds);
          if (s.commit_horizon && popt.mode == PlanOptions::Mode::kFull &&
              !plan.schedule.tau.empty()) {
            const int sched_T = static_cast<int>(plan.schedule.tau[0].size());
            for (int t = 1; t < sched_T; ++t) {
              TapMap m2;
              for (size_t p = 0; p < base.oltcs.size(); ++p)
                m2[base.oltcs[p].id] = plan.schedule.tau[p][t];
              committed.push_back(m2);
            }
          }
          break;
        }
      }

      // harness-level clamp: realized trajectories obey the step limits even
      // if a controller misbehaves
      TapMap applied = taps;
      for (const auto& d : base.oltcs) {
        const int dto = dto_of(d);
        int delta = std::clamp(wanted[d.id] - taps[d.id], -dto, dto);
        int next = std::clamp(taps[d.id] + delta, -d.tau_max, d.tau_max);
        applied[d.id] = next;
      }

      // linearization bookkeeping for OTC modes, only on actual tap changes
      const bool otc_mode = s.controller == ControllerKind::kOtcFull ||
                            s.controller == ControllerKind::kOtcSimplified;
      SensitivityModel sm;
      bool have_sm = false;
      if (otc_mode && applied != taps) {
        AdmittanceMatrix y0 = build_admittance(base, taps);
        Factorization fact(y0.y, base.slack_nodes);
        sm = build_sensitivity(base, fact, meas.v, meas.i, taps);
        have_sm = true;
      }

      VoltageSolution sol;
      bool sol_ok = true;
      if (applied == taps) {
        sol = meas;
      } else {
        try {
          sol = solve_power_flow(base, applied, inj, &meas.v);
          sol_ok = sol.converged;
        } catch (const std::exception&) {
          sol_ok = false;
        }
        if (!sol_ok) {
          res.failed_steps++;
          rec.pf_failed = true;
          applied = taps;  // hold on plant failure
          sol = meas;
          sol_ok = true;
          have_sm = false;
        }
      }

      if (have_sm) {
        Eigen::VectorXd pred = sm.predict_magnitudes(base, applied);
        for (int n = 0; n < base.node_count(); ++n)
          res.lin_errors.records.push_back(
              {static_cast<int>(day) * kStepsPerDay + step, n,
               pred[n] - std::abs(sol.v[n])});
        res.lin_errors.steps_compared++;
        res.has_lin_errors = true;
      }

      for (const auto& d : base.oltcs) {
        day_to[d.id] += std::abs(applied[d.id] - taps[d.id]);
        rec.taps.push_back(applied[d.id]);
      }
      taps = applied;

      const Extremes e2 = extremes_of(base, sol.v);
      rec.max_v = e2.max_v;
      rec.min_v = e2.min_v;
      rec.violation = e2.max_v > s.ansi_high || e2.min_v < s.ansi_low;
      if (rec.violation && step >= settle_end) res.violation_steps++;
      res.steps.push_back(rec);

      prev_v = sol.v;
      have_prev = true;
      prev_ext = e2;
    }
    res.to_per_day.push_back(day_to);
  }

  res.overall_max_v = 0.0;
  res.overall_min_v = 1e9;
  for (const auto& rec : res.steps) {
    if (rec.step < settle_end) continue;
    res.overall_max_v = std::max(res.overall_max_v, rec.max_v);
    res.overall_min_v = std::min(res.overall_min_v, rec.min_v);
  }
  for (const auto& day_to : res.to_per_day)
    for (const auto& [id, cnt] : day_to) res.total_to += cnt;
  res.lin_errors.finalize();
  return res;
}

std::string summary_json(const SimulationResult& r) {
  nlohmann::json j;
  j["overall_max_v"] = r.overall_max_v;
  j["overall_min_v"] = r.overall_min_v;
  j["total_to"] = r.total_to;
  j["violation_steps"] = r.violation_steps;
  j["failed_steps"] = r.failed_steps;
  j["steps"] = r.steps.size();
  j["peak_load_kva"] = r.peak_load_kva;
  j["oltc_ids"] = r.oltc_ids;
  nlohmann::json days = nlohmann::json::array();
  for (const auto& day_to : r.to_per_day) {
    nlohmann::json d;
    for (const auto& [id, cnt] : day_to) d[id] = cnt;
    days.push_back(d);
  }
  j["to_per_day"] = days;
  if (r.has_lin_errors) {
    j["lin_error_max"] = r.lin_errors.max_abs;
    j["lin_error_mean"] = r.lin_errors.mean_abs;
    j["lin_error_samples"] = r.lin_errors.records.size();
  }
  j["solver_nodes"] = r.solver_nodes;
  j["solver_lp_iterations"] = r.solver_lp_iterations;
  return j.dump(2) + "\n";
}

void write_outputs(const Scenario& s, const SimulationResult& r) {
  std::filesystem::create_directories(s.outdir);
  const auto dir = std::filesystem::path(s.outdir);

  std::ofstream ts(dir / "timeseries.csv");
  ts << "day,step,max_v,min_v";
  for (const auto& id : r.oltc_ids) ts << ",tap_" << id;
  ts << ",violation,pf_failed\n";
  for (const auto& rec : r.steps) {
    ts << rec.day << "," << rec.step << "," << rec.max_v << "," << rec.min_v;
    for (int t : rec.taps) ts << "," << t;
    ts << "," << (rec.violation ? 1 : 0) << "," << (rec.pf_failed ? 1 : 0) << "\n";
  }

  std::ofstream sj(dir / "summary.json");
  sj << summary_json(r);

  if (r.has_lin_errors) r.lin_errors.write_csv((dir / "errors.csv").string());
}

HostingResult hosting_capacity_sweep(const Scenario& base, const std::vector<double>& levels,
                                     int jobs) {
  if (levels.size() < 2) throw std::invalid_argument("need at least two penetration levels");
  HostingResult hr;
  hr.levels = levels;
  hr.atc_violates.resize(levels.size());
  hr.otc_violates.resize(levels.size());

  const int n = static_cast<int>(levels.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs))
#endif
  for (int i = 0; i < n; ++i) {
    Scenario sa = base;
    sa.penetration_pct = levels[i];
    sa.controller = ControllerKind::kAtc;
    SimulationResult ra = run_qsts(sa);
    Scenario so = base;
    so.penetration_pct = levels[i];
    so.controller = ControllerKind::kOtcFull;
    SimulationResult ro = run_qsts(so);
    hr.atc_violates[i] = ra.overall_max_v > base.ansi_high;
    hr.otc_violates[i] = ro.overall_max_v > base.ansi_high;
  }
  (void)jobs;

  for (size_t i = 0; i < levels.size(); ++i) {
    if (hr.first_atc < 0 && hr.atc_violates[i]) hr.first_atc = levels[i];
    if (hr.first_otc < 0 && hr.otc_violates[i]) hr.first_otc = levels[i];
  }
  if (hr.first_atc > 0 && hr.first_otc > 0) hr.ratio = hr.first_otc / hr.first_atc;
  return hr;
}

std::vector<WeightRow> weight_sweep(const Scenario& base, const std::vector<double>& w2_values,
                                    int jobs) {
  std::vector<WeightRow> rows(w2_values.size());
  const int n = static_cast<int>(w2_values.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs))
#endif
  for (int i = 0; i < n; ++i) {
    Scenario s = base;
    s.controller = ControllerKind::kOtcFull;
    s.w2 = w2_values[i];
    SimulationResult r = run_qsts(s);
    rows[i] = {w2_values[i], r.overall_max_v, r.total_to};
  }
  (void)jobs;
  return rows;
}

std::string synthetic_feeder_text(int n_buses, int n_oltcs, std::uint64_t seed) {
  if (n_buses < 10) throw std::invalid_argument("synthetic feeder needs >= 10 buses");
  if (n_oltcs < 1) throw std::invalid_argument("need at least one OLTC");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const int trunk = std::max(2 * n_oltcs, n_buses / 12);
  const int lateral_total = n_buses - 1 - trunk;
  const int per_trunk = std::max(1, (lateral_total + trunk - 1) / trunk);  // ceil

  std::ostringstream out;
  out << "# generated radial feeder: " << n_buses << " buses, " << n_oltcs << " OLTCs\n";
  out << "basemva 10\n";
  out << "bus SRC 12.0 1\n";
  out << "slack SRC 1.0 0\n";

  std::vector<std::string> trunk_names;
  for (int k = 0; k < trunk; ++k) trunk_names.push_back("T" + std::to_string(k));
  for (const auto& name : trunk_names) out << "bus " << name << " 12.0 1\n";

  // OLTC positions: substation plus evenly spaced along the trunk
  std::vector<int> oltc_at(trunk, -1);  // trunk segment index -> OLTC number
  for (int p = 1; p < n_oltcs; ++p) oltc_at[p * trunk / n_oltcs] = p;

  out << "oltc LTC0 SRC T0 0.001 0.008 16 1.1 1\n";
  for (int k = 1; k < trunk; ++k) {
    if (oltc_at[k] > 0)
      out << "oltc LTC" << oltc_at[k] << " " << trunk_names[k - 1] << " " << trunk_names[k]
          << " 0.001 0.008 16 1.1 1\n";
    else
      out << "branch " << trunk_names[k - 1] << ".1 " << trunk_names[k] << ".1 0.0008 0.0016\n";
  }

  int made = 1 + trunk;
  for (int k = 0; k < trunk && made < n_buses; ++k) {
    std::string prev = trunk_names[k];
    for (int l = 0; l < per_trunk && made < n_buses; ++l) {
      const std::string name = "L" + std::to_string(k) + "_" + std::to_string(l);
      out << "bus " << name << " 12.0 1\n";
      out << "branch " << prev << ".1 " << name << ".1 0.002 0.003\n";
      const double load_kw = 8.0 + 8.0 * u01(rng);
      out << "load " << name << ".1 " << load_kw << " " << load_kw * 0.3 << " load_" << k << "\n";
      if (u01(rng) < 0.5)
        out << "pv " << name << ".1 " << 15.0 + 15.0 * u01(rng) << " pv_" << k << "\n";
      prev = name;
      ++made;
    }
  }
  return out.str();
}

FeederModel make_synthetic_feeder(int n_buses, int n_oltcs, std::uint64_t seed) {
  return parse_feeder_text(synthetic_feeder_text(n_buses, n_oltcs, seed), "<synthetic>");
}

RuntimeResult runtime_benchmark(int n_buses, const std::vector<int>& oltc_counts,
                                int solves_per_count, std::uint64_t seed) {
  RuntimeResult out;
  for (int P : oltc_counts) {
    FeederModel model = make_synthetic_feeder(n_buses, P, seed);
    ProfileSet profiles("", Weather::kCloudy, seed, 0);
    double total = 0.0;
    for (int i = 0; i < solves_per_count; ++i) {
      const int step = 1200 + 23 * i;  // spread over the PV-active hours
      std::vector<InjectionSet> forecast;
      InjectionSet inj = InjectionSet::zeros(model.node_count());
      for (int t = 0; t < 10; ++t)
        forecast.push_back(injections_at(model, profiles, step + t));
      (void)inj;
      TapMap taps;
      for (const auto& d : model.oltcs) taps[d.id] = (i % 3) - 1;
      HorizonData h = build_horizon(model, taps, forecast, 5);
      MilpInstance inst = build_milp(h, 1.0, 0.005);
      const auto t0 = std::chrono::steady_clock::now();
      TapSchedule sched = solve_milp(inst);
      total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      static_cast<void>(sched);
    }
    out.rows.push_back({P, total / solves_per_count});
  }

  // least-squares cubic trend over (P, mean seconds)
  const int n = static_cast<int>(out.rows.size());
  const int degree = std::min(3, n - 1);
  if (degree >= 1) {
    Eigen::MatrixXd a(n, degree + 1);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
      double x = out.rows[i].oltcs;
      for (int dcol = 0; dcol <= degree; ++dcol) a(i, dcol) = std::pow(x, dcol);
      b(i) = out.rows[i].mean_seconds;
    }
    Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
    for (int dcol = 0; dcol <= degree; ++dcol) out.cubic_fit[dcol] = c(dcol);
  }
  return out;
}

}  // namespace otc

// otcctl: feeder validation, power flow, QSTS runs, sweeps and benchmarks.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "otc/harness.hpp"

namespace {

constexpr int kExitGeneric = 1;
constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitMissingInput = 4;

otc::Scenario load_scenario(const std::string& config,
                            const std::vector<std::string>& overrides,
                            const std::string& outdir, std::uint64_t seed, bool seed_set) {
  otc::Scenario s;
  if (!config.empty()) s = otc::parse_scenario(config);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("override '" + kv + "' is not key=value");
    otc::apply_override(s, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!outdir.empty()) s.outdir = outdir;
  if (seed_set) s.seed = seed;
  if (s.feeder_path.empty()) throw std::runtime_error("no feeder specified");
  return s;
}

std::vector<double> parse_levels(const std::string& spec) {
  // "a:b:step" range or comma-separated list
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    double a, b, st;
    if (sscanf(spec.c_str(), "%lf:%lf:%lf", &a, &b, &st) != 3 || st <= 0)
      throw std::runtime_error("bad range '" + spec + "' (want lo:hi:step)");
    for (double v = a; v <= b + 1e-9; v += st) out.push_back(v);
  } else {
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  }
  if (out.empty()) throw std::runtime_error("empty level list");
  return out;
}

std::vector<int> parse_int_range(const std::string& spec) {
  std::vector<int> out;
  if (auto dots = spec.find(".."); dots != std::string::npos) {
    const int a = std::stoi(spec.substr(0, dots));
    const int b = std::stoi(spec.substr(dots + 2));
    for (int v = a; v <= b; ++v) out.push_back(v);
  } else {
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  }
  if (out.empty()) throw std::runtime_error("empty list");
  return out;
}

int cmd_validate(const std::string& feeder, bool verbose) {
  otc::FeederModel model = otc::parse_feeder(feeder);
  otc::TapMap taps;
  for (const auto& d : model.oltcs) taps[d.id] = 0;
  otc::InjectionSet none = otc::InjectionSet::zeros(model.node_count());
  otc::VoltageSolution sol = otc::solve_power_flow(model, taps, none);
  if (!sol.converged) {
    std::cerr << "no-load power flow did not converge (mismatch " << sol.max_mismatch << ")\n";
    return kExitGeneric;
  }
  std::cout << "ok: " << model.buses.size() << " buses, " << model.node_count() << " nodes, "
            << model.branches.size() << " branches, " << model.oltcs.size() << " OLTCs, "
            << model.loads.size() << " loads, " << model.pvs.size() << " PV systems\n";
  if (verbose)
    for (const auto& n : model.nodes)
      std::cout << "  " << n.name << " |V|=" << std::abs(sol.v[n.index]) << "\n";
  return 0;
}

int cmd_powerflow(const otc::Scenario& s, int step, bool verbose) {
  otc::FeederModel model = otc::parse_feeder(s.feeder_path);
  otc::ProfileSet profiles(s.profiles_dir, s.weather, s.seed, 0);
  double peak = 0.0;
  for (int k = 0; k < otc::kStepsPerDay; ++k) {
    otc::Complex total{0, 0};
    for (const auto& l : model.loads) total += l.s_kva * profiles.value(l.profile, k);
    peak = std::max(peak, std::abs(total));
  }
  model = otc::scale_pv_penetration(model, s.penetration_pct, peak);

  otc::InjectionSet inj = otc::InjectionSet::zeros(model.node_count());
  for (const auto& l : model.loads)
    inj.s_load[l.node] += l.s_kva / (model.base_mva * 1000.0) * profiles.value(l.profile, step);
  for (const auto& p : model.pvs)
    inj.p_pv[p.node] += p.rated_kw / (model.base_mva * 1000.0) * profiles.value(p.profile, step);

  otc::TapMap taps;
  for (const auto& d : model.oltcs) taps[d.id] = 0;
  otc::VoltageSolution sol = otc::solve_power_flow(model, taps, inj);
  if (!sol.converged) {
    std::cerr << "power flow did not converge (mismatch " << sol.max_mismatch << ")\n";
    return kExitGeneric;
  }
  double vmax = 0.0, vmin = 1e9;
  for (const auto& n : model.nodes) {
    const double m = std::abs(sol.v[n.index]);
    vmax = std::max(vmax, m);
    vmin = std::min(vmin, m);
    if (verbose) std::cout << n.name << " " << m << "\n";
  }
  std::cout << "step " << step << ": max |V| = " << vmax << " p.u., min |V| = " << vmin
            << " p.u., " << sol.iterations << " iterations\n";
  return 0;
}

int cmd_run(const otc::Scenario& s) {
  otc::SimulationResult r = otc::run_qsts(s);
  otc::write_outputs(s, r);
  std::cout << "max |V| = " << r.overall_max_v << " p.u., min |V| = " << r.overall_min_v
            << " p.u., total TO = " << r.total_to << ", violation steps = "
            << r.violation_steps << ", failed steps = " << r.failed_steps << "\n";
  return 0;
}

int cmd_sweep(const otc::Scenario& s, const std::string& levels_spec, int jobs) {
  const auto levels = parse_levels(levels_spec);
  otc::HostingResult hr = otc::hosting_capacity_sweep(s, levels, jobs);
  std::filesystem::create_directories(s.outdir);
  std::ofstream out(std::filesystem::path(s.outdir) / "sweep.csv");
  out << "penetration,atc_overvoltage,otc_overvoltage\n";
  for (size_t i = 0; i < hr.levels.size(); ++i)
    out << hr.levels[i] << "," << (hr.atc_violates[i] ? 1 : 0) << ","
        << (hr.otc_violates[i] ? 1 : 0) << "\n";
  std::cout << "first over-voltage level: atc = " << hr.first_atc << "%, otc = " << hr.first_otc
            << "%";
  if (hr.ratio > 0) std::cout << ", otc/atc ratio = " << hr.ratio;
  std::cout << "\n";
  return 0;
}

int cmd_weights(const otc::Scenario& s, const std::string& w2_spec, int jobs) {
  const auto w2s = parse_levels(w2_spec);
  auto rows = otc::weight_sweep(s, w2s, jobs);
  std::filesystem::create_directories(s.outdir);
  std::ofstream out(std::filesystem::path(s.outdir) / "table_w2.csv");
  out << "w2,max_volt,total_to\n";
  std::cout << "w2,max_volt,total_to\n";
  for (const auto& row : rows) {
    out << row.w2 << "," << row.max_v << "," << row.total_to << "\n";
    std::cout << row.w2 << "," << row.max_v << "," << row.total_to << "\n";
  }
  return 0;
}

int cmd_bench(const std::string& oltc_spec, int buses, int solves, std::uint64_t seed,
              const std::string& outdir) {
  const auto counts = parse_int_range(oltc_spec);
  otc::RuntimeResult rr = otc::runtime_benchmark(buses, counts, solves, seed);
  std::filesystem::create_directories(outdir);
  std::ofstream out(std::filesystem::path(outdir) / "runtime.csv");
  out << "oltcs,mean_seconds\n";
  std::cout << "oltcs,mean_seconds\n";
  for (const auto& row : rr.rows) {
    out << row.oltcs << "," << row.mean_seconds << "\n";
    std::cout << row.oltcs << "," << row.mean_seconds << "\n";
  }
  out << "# cubic fit c0,c1,c2,c3 = " << rr.cubic_fit[0] << "," << rr.cubic_fit[1] << ","
      << rr.cubic_fit[2] << "," << rr.cubic_fit[3] << "\n";
  std::cout << "cubic fit: y = " << rr.cubic_fit[3] << " x^3 + " << rr.cubic_fit[2] << " x^2 + "
            << rr.cubic_fit[1] << " x + " << rr.cubic_fit[0] << " (s)\n";
  return 0;
}

int cmd_lincheck(const otc::Scenario& s, int stride) {
  otc::FeederModel model = otc::parse_feeder(s.feeder_path);
  otc::ProfileSet profiles(s.profiles_dir, s.weather, s.seed, 0);
  double peak = 0.0;
  for (int k = 0; k < otc::kStepsPerDay; ++k) {
    otc::Complex total{0, 0};
    for (const auto& l : model.loads) total += l.s_kva * profiles.value(l.profile, k);
    peak = std::max(peak, std::abs(total));
  }
  model = otc::scale_pv_penetration(model, s.penetration_pct, peak);

  const int s0 = static_cast<int>(s.start_hour * 3600 / otc::kProfileResolutionS);
  const int s1 = static_cast<int>(s.end_hour * 3600 / otc::kProfileResolutionS);
  std::vector<otc::TapPerturbationStep> steps;
  int i = 0;
  for (int step = s0; step < s1; step += stride, ++i) {
    otc::TapPerturbationStep ps;
    ps.inj = otc::InjectionSet::zeros(model.node_count());
    for (const auto& l : model.loads)
      ps.inj.s_load[l.node] += l.s_kva / (model.base_mva * 1000.0) * profiles.value(l.profile, step);
    for (const auto& p : model.pvs)
      ps.inj.p_pv[p.node] += p.rated_kw / (model.base_mva * 1000.0) * profiles.value(p.profile, step);
    for (const auto& d : model.oltcs) {
      ps.base_taps[d.id] = 0;
      ps.perturbed_taps[d.id] = 0;
    }
    // single-step change, cycling device and direction
    const auto& dev = model.oltcs[i % model.oltcs.size()];
    ps.perturbed_taps[dev.id] = (i / model.oltcs.size()) % 2 == 0 ? 1 : -1;
    steps.push_back(std::move(ps));
  }

  otc::ErrorStats stats = otc::validate_linearization(model, steps);
  std::filesystem::create_directories(s.outdir);
  stats.write_csv((std::filesystem::path(s.outdir) / "errors.csv").string());
  std::cout << "compared " << stats.steps_compared << " tap-change steps ("
            << stats.steps_skipped << " skipped), max |E| = " << stats.max_abs
            << " p.u., mean |E| = " << stats.mean_abs << " p.u.\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feeder-wide optimal tap control toolkit"};
  app.require_subcommand(1);

  std::string config, outdir, feeder;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false, verbose = false;
  int jobs = 1;
  app.add_option("--config", config, "scenario config file")->group("Global");
  app.add_option("--set", overrides, "override scenario key=value")->group("Global");
  app.add_option("--outdir", outdir, "output directory")->group("Global");
  app.add_option("--jobs", jobs, "parallel sweep runs")->group("Global");
  auto* seed_opt = app.add_option("--seed", seed, "random seed")->group("Global");
  app.add_flag("--verbose", verbose, "verbose output")->group("Global");

  auto* validate = app.add_subcommand("validate", "parse and sanity-check a feeder file");
  validate->add_option("feeder", feeder, "feeder file")->required();

  auto* powerflow = app.add_subcommand("powerflow", "single power flow at one step");
  int pf_step = 1440;
  powerflow->add_option("--step", pf_step, "step of day (30 s cadence)");

  app.add_subcommand("run", "quasi-steady-state simulation");

  auto* sweep = app.add_subcommand("sweep", "hosting-capacity sweep (ATC vs OTC)");
  std::string levels = "0:200:25";
  sweep->add_option("--levels", levels, "penetration levels, lo:hi:step or list");

  auto* weights = app.add_subcommand("weights", "w2 weight sweep");
  std::string w2_list = "0,0.005,0.01,0.02,0.04";
  weights->add_option("--w2", w2_list, "w2 values, comma separated");

  auto* bench = app.add_subcommand("bench", "MILP runtime benchmark");
  std::string oltcs = "2..8";
  int buses = 1000, solves = 20;
  bench->add_option("--oltcs", oltcs, "OLTC counts, a..b or list");
  bench->add_option("--buses", buses, "synthetic feeder size");
  bench->add_option("--solves", solves, "solves per OLTC count");

  auto* lincheck = app.add_subcommand("lincheck", "linearization error validation");
  int stride = 10;
  lincheck->add_option("--stride", stride, "steps between comparisons");

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0;

  try {
    if (validate->parsed()) return cmd_validate(feeder, verbose);

    if (app.get_subcommand("bench")->parsed())
      return cmd_bench(oltcs, buses, solves, seed_set ? seed : 1,
                       outdir.empty() ? "out" : outdir);

    otc::Scenario s = load_scenario(config, overrides, outdir, seed, seed_set);
    if (powerflow->parsed()) return cmd_powerflow(s, pf_step, verbose);
    if (app.get_subcommand("run")->parsed()) return cmd_run(s);
    if (sweep->parsed()) return cmd_sweep(s, levels, jobs);
    if (weights->parsed()) return cmd_weights(s, w2_list, jobs);
    if (lincheck->parsed()) return cmd_lincheck(s, stride);
  } catch (const otc::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const otc::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const otc::ProfileError& e) {
    std::cerr << "profile error: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGeneric;
  }
  return 0;
}

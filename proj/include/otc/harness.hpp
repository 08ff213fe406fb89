#ifndef OTC_HARNESS_HPP_
#define OTC_HARNESS_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "otc/optimizer.hpp"
#include "otc/profiles.hpp"
#include "otc/rules.hpp"

namespace otc {

enum class ControllerKind { kAtc, kVlc, kOtcFull, kOtcSimplified };
ControllerKind controller_from_string(const std::string& s);
std::string to_string(ControllerKind c);

struct Scenario {
  std::string feeder_path;
  std::string profiles_dir;
  ControllerKind controller = ControllerKind::kOtcFull;
  std::vector<std::string> dates{"day1"};
  Weather weather = Weather::kClear;
  double penetration_pct = 100.0;
  int horizon_steps = 10;
  double w1 = 1.0;
  double w2 = 0.005;
  int dto_max = -1;  // <0: per-device value from the feeder file
  std::uint64_t seed = 1;
  std::string outdir = "out";
  double start_hour = 0.0;
  double end_hour = 24.0;
  double settle_min = 0.0;  // initial minutes excluded from voltage statistics
  int extra_extremes = 5;
  double time_limit_s = 0.0;
  bool commit_horizon = false;  // follow the whole schedule instead of re-solving
  double ansi_low = 0.95;
  double ansi_high = 1.05;
  double atc_vref = 0.99;
  double atc_band = 0.0167;
  double atc_delay_s = 60.0;
};

Scenario parse_scenario(const std::string& path);
/// Applies one documented "key=value" override; throws on unknown keys.
void apply_override(Scenario& s, const std::string& key, const std::string& value);

struct StepRecord {
  int day = 0;
  int step = 0;       // step-of-day, 30 s cadence
  double max_v = 0.0;
  double min_v = 0.0;
  std::vector<int> taps;
  bool violation = false;
  bool pf_failed = false;
};

struct SimulationResult {
  std::vector<std::string> oltc_ids;
  std::vector<StepRecord> steps;
  std::vector<std::map<std::string, long>> to_per_day;  // per day: OLTC id -> TO count
  double overall_max_v = 0.0;
  double overall_min_v = 0.0;
  long total_to = 0;
  long violation_steps = 0;
  long failed_steps = 0;
  double peak_load_kva = 0.0;
  ErrorStats lin_errors;           // OTC modes: linear-vs-oracle at applied changes
  bool has_lin_errors = false;
  long solver_nodes = 0;
  long solver_lp_iterations = 0;
  std::vector<double> solve_seconds;  // not serialized into summary.json
};

SimulationResult run_qsts(const Scenario& s);

/// timeseries.csv, summary.json and (for OTC) errors.csv under s.outdir.
void write_outputs(const Scenario& s, const SimulationResult& r);
std::string summary_json(const SimulationResult& r);

struct HostingResult {
  std::vector<double> levels;
  std::vector<bool> atc_violates, otc_violates;
  double first_atc = -1.0;  // first penetration level with an over-voltage
  double first_otc = -1.0;
  double ratio = 0.0;       // otc threshold / atc threshold
};
HostingResult hosting_capacity_sweep(const Scenario& base, const std::vector<double>& levels,
                                     int jobs = 1);

struct WeightRow {
  double w2;
  double max_v;
  long total_to;
};
std::vector<WeightRow> weight_sweep(const Scenario& base, const std::vector<double>& w2_values,
                                    int jobs = 1);

struct RuntimeRow {
  int oltcs;
  double mean_seconds;
};
struct RuntimeResult {
  std::vector<RuntimeRow> rows;
  std::array<double, 4> cubic_fit{};  // y = c3 x^3 + c2 x^2 + c1 x + c0
};
RuntimeResult runtime_benchmark(int n_buses, const std::vector<int>& oltc_counts,
                                int solves_per_count, std::uint64_t seed);

/// Deterministic trunk-and-lateral radial feeder for the runtime study, with
/// the requested number of OLTCs inserted along the trunk.
FeederModel make_synthetic_feeder(int n_buses, int n_oltcs, std::uint64_t seed);
std::string synthetic_feeder_text(int n_buses, int n_oltcs, std::uint64_t seed);

}  // namespace otc

#endif  // OTC_HARNESS_HPP_

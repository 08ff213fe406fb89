#include "otc/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace otc {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double hour_of(int step) { return step * kProfileResolutionS / 3600.0; }

}  // namespace

TimeSeriesProfile load_profile_csv(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile '" + path + "'");
  TimeSeriesProfile prof;
  prof.name = name;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    const std::string val = line.substr(comma + 1);
    try {
      prof.values.push_back(std::stod(val));
    } catch (const std::exception&) {
      if (prof.values.empty()) continue;  // header row
      throw std::runtime_error("bad value in profile '" + path + "': " + val);
    }
  }
  if (prof.values.empty()) throw std::runtime_error("empty profile '" + path + "'");
  return prof;
}

Weather weather_from_string(const std::string& s) {
  if (s == "clear") return Weather::kClear;
  if (s == "cloudy" || s == "partly-cloudy") return Weather::kCloudy;
  if (s == "overcast") return Weather::kOvercast;
  throw std::runtime_error("unknown weather class '" + s + "'");
}

TimeSeriesProfile synth_solar_profile(const std::string& name, Weather weather,
                                      std::uint64_t seed, int day_index) {
  TimeSeriesProfile prof;
  prof.name = name;
  prof.values.resize(kStepsPerDay);

  std::mt19937_64 rng(seed ^ fnv1a(name) ^ (0x9e3779b97f4a7c15ull * (day_index + 1)));
  std::normal_distribution<double> noise(0.0, 0.06);
  std::uniform_real_distribution<double> jump(0.0, 1.0);

  double cloud = 0.85;  // clamped ramp process for partly-cloudy skies
  for (int k = 0; k < kStepsPerDay; ++k) {
    const double h = hour_of(k);
    double bell = 0.0;
    if (h > 6.5 && h < 17.5) {
      const double x = std::sin(std::numbers::pi * (h - 6.5) / 11.0);
      bell = x * x;
    }
    double mult = 1.0;
    switch (weather) {
      case Weather::kClear:
        break;
      case Weather::kOvercast:
        mult = 0.25;
        break;
      case Weather::kCloudy: {
        cloud += noise(rng);
        if (jump(rng) < 0.01) cloud += (jump(rng) < 0.5 ? -0.5 : 0.5);  // fast ramp
        cloud = std::clamp(cloud, 0.12, 1.0);
        mult = cloud;
        break;
      }
    }
    prof.values[k] = bell * mult;
  }
  return prof;
}

TimeSeriesProfile synth_load_profile(const std::string& name, std::uint64_t seed,
                                     int day_index) {
  TimeSeriesProfile prof;
  prof.name = name;
  prof.values.resize(kStepsPerDay);
  // small deterministic per-profile spread so loads are not perfectly uniform
  std::mt19937_64 rng(seed ^ fnv1a(name) ^ (0xbf58476d1ce4e5b9ull * (day_index + 1)));
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  const double scale = 1.0 + u(rng);
  const double evening_shift = u(rng) * 10.0;  // up to +-0.5 h

  for (int k = 0; k < kStepsPerDay; ++k) {
    const double h = hour_of(k);
    const double morning = 0.15 * std::exp(-std::pow((h - 8.5) / 2.0, 2));
    const double evening = 0.30 * std::exp(-std::pow((h - 19.0 - evening_shift * 0.1) / 2.5, 2));
    prof.values[k] = scale * (0.55 + morning + evening);
  }
  return prof;
}

ProfileSet::ProfileSet(std::string dir, Weather weather, std::uint64_t seed, int day_index)
    : dir_(std::move(dir)), weather_(weather), seed_(seed), day_(day_index) {}

const TimeSeriesProfile& ProfileSet::resolve(const std::string& name) {
  auto it = cache_.find(name);
  if (it != cache_.end()) return it->second;

  TimeSeriesProfile prof;
  const std::filesystem::path csv = std::filesystem::path(dir_) / (name + ".csv");
  if (!dir_.empty()) {
    // explicit profile directory: every referenced profile must exist
    if (!std::filesystem::exists(csv))
      throw ProfileError("missing profile '" + name + "' (expected " + csv.string() + ")");
    prof = load_profile_csv(csv.string(), name);
  } else if (name.find("pv") != std::string::npos || name.find("solar") != std::string::npos) {
    prof = synth_solar_profile(name, weather_, seed_, day_);
  } else {
    prof = synth_load_profile(name, seed_, day_);
  }
  return cache_.emplace(name, std::move(prof)).first->second;
}

double ProfileSet::value(const std::string& name, int step) {
  const TimeSeriesProfile& p = resolve(name);
  if (p.values.empty()) throw std::runtime_error("profile '" + name + "' is empty");
  const int idx = std::clamp<int>(step, 0, static_cast<int>(p.values.size()) - 1);
  return p.values[idx];
}

}  // namespace otc

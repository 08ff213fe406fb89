#ifndef OTC_PROFILES_HPP_
#define OTC_PROFILES_HPP_

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace otc {

inline constexpr double kProfileResolutionS = 30.0;
inline constexpr int kStepsPerDay = 2880;  // 24 h at 30 s

struct ProfileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TimeSeriesProfile {
  std::string name;
  double resolution_s = kProfileResolutionS;
  std::vector<double> values;  // multiplier of the nominal kW rating
};

TimeSeriesProfile load_profile_csv(const std::string& path, const std::string& name);

enum class Weather { kClear, kCloudy, kOvercast };
Weather weather_from_string(const std::string& s);

/// Resolves profile names to day-long series. With a profiles directory set,
/// every name must resolve to "<dir>/<name>.csv". Without one, profiles are
/// synthesized deterministically from (seed, name, day): names containing
/// "pv" get a weather-dependent solar shape, all others an evening-peak load
/// shape.
class ProfileSet {
 public:
  ProfileSet(std::string dir, Weather weather, std::uint64_t seed, int day_index = 0);

  const TimeSeriesProfile& resolve(const std::string& name);
  double value(const std::string& name, int step);

 private:
  std::string dir_;
  Weather weather_;
  std::uint64_t seed_;
  int day_;
  std::map<std::string, TimeSeriesProfile> cache_;
};

TimeSeriesProfile synth_solar_profile(const std::string& name, Weather weather,
                                      std::uint64_t seed, int day_index);
TimeSeriesProfile synth_load_profile(const std::string& name, std::uint64_t seed,
                                     int day_index);

}  // namespace otc

#endif  // OTC_PROFILES_HPP_

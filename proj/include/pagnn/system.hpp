#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace pagnn {

using Vec3 = Eigen::Vector3d;

inline constexpr double kSpeedOfLight = 2.99792458e8;  // m/s

/// Thrown when a configuration admits no feasible antenna placement or is
/// otherwise malformed.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

/// Physical and problem constants of a single-waveguide pinching-antenna
/// downlink. All quantities in SI units.
struct SystemConfig {
  int n_antennas = 4;
  int n_users = 2;
  double half_range = 100.0;             // users drawn from [-L, L] per axis
  double waveguide_half_length = 100.0;  // waveguide spans [-D, D]
  double height = 5.0;
  double carrier_freq = 6e9;
  double refractive_index = 1.4;
  double noise_power = 1e-12;  // -90 dBm
  double power_budget = 1.0;   // 30 dBm
  double guard_distance = kSpeedOfLight / 6e9 / 2.0;  // lambda / 2
  double static_power = 0.5;
  double slot_length = 1.0;

  /// Feed point of the waveguide, [-D, 0, H].
  Vec3 feed_point() const { return {-waveguide_half_length, 0.0, height}; }

  /// Default values of the simulation table with the given problem size.
  static SystemConfig defaults(int n_antennas = 4, int n_users = 2) {
    SystemConfig cfg;
    cfg.n_antennas = n_antennas;
    cfg.n_users = n_users;
    cfg.noise_power = dbm_to_watts(-90.0);
    cfg.power_budget = dbm_to_watts(30.0);
    return cfg;
  }

  /// Throws ConfigError unless every field is in range and B_max > 0.
  void validate() const;
};

struct DerivedConstants {
  double wavelength;         // lambda = c / f_c
  double guided_wavelength;  // lambda_g = c / (f_c n_neff)
  double path_gain;          // eta = c^2 / (4 pi f_c)^2
  double spacing_budget;     // B_max = 2D - (N-1) Delta
};

inline DerivedConstants derived_constants(const SystemConfig& cfg) {
  cfg.validate();
  DerivedConstants out{};
  out.wavelength = kSpeedOfLight / cfg.carrier_freq;
  out.guided_wavelength = kSpeedOfLight / (cfg.carrier_freq * cfg.refractive_index);
  const double r = kSpeedOfLight / (4.0 * std::numbers::pi * cfg.carrier_freq);
  out.path_gain = r * r;
  out.spacing_budget =
      2.0 * cfg.waveguide_half_length - (cfg.n_antennas - 1) * cfg.guard_distance;
  return out;
}

inline void SystemConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid system config: ") + what);
  };
  require(n_antennas >= 1, "n_antennas must be >= 1");
  require(n_users >= 1, "n_users must be >= 1");
  require(half_range > 0, "half_range must be positive");
  require(waveguide_half_length > 0, "waveguide_half_length must be positive");
  require(height > 0, "height must be positive");
  require(carrier_freq > 0, "carrier_freq must be positive");
  require(refractive_index > 0, "refractive_index must be positive");
  require(noise_power > 0, "noise_power must be positive");
  require(power_budget > 0, "power_budget must be positive");
  require(guard_distance > 0, "guard_distance must be positive");
  require(static_power >= 0, "static_power must be non-negative");
  require(slot_length > 0, "slot_length must be positive");
  const double budget = 2.0 * waveguide_half_length - (n_antennas - 1) * guard_distance;
  if (!(budget > 0))
    throw ConfigError("configuration infeasible: 2D - (N-1)*guard_distance = " +
                      std::to_string(budget) + " <= 0");
}

// JSON keys are the field names above; missing keys keep their defaults.
inline void to_json(nlohmann::json& j, const SystemConfig& c) {
  j = nlohmann::json{{"n_antennas", c.n_antennas},
                     {"n_users", c.n_users},
                     {"half_range", c.half_range},
                     {"waveguide_half_length", c.waveguide_half_length},
                     {"height", c.height},
                     {"carrier_freq", c.carrier_freq},
                     {"refractive_index", c.refractive_index},
                     {"noise_power", c.noise_power},
                     {"power_budget", c.power_budget},
                     {"guard_distance", c.guard_distance},
                     {"static_power", c.static_power},
                     {"slot_length", c.slot_length}};
}

inline void from_json(const nlohmann::json& j, SystemConfig& c) {
  SystemConfig d = SystemConfig::defaults();
  c.n_antennas = j.value("n_antennas", d.n_antennas);
  c.n_users = j.value("n_users", d.n_users);
  c.half_range = j.value("half_range", d.half_range);
  // The waveguide spans the user region unless told otherwise.
  c.waveguide_half_length = j.value("waveguide_half_length", c.half_range);
  c.height = j.value("height", d.height);
  c.carrier_freq = j.value("carrier_freq", d.carrier_freq);
  c.refractive_index = j.value("refractive_index", d.refractive_index);
  c.noise_power = j.value("noise_power", d.noise_power);
  c.power_budget = j.value("power_budget", d.power_budget);
  c.guard_distance = j.value("guard_distance", kSpeedOfLight / c.carrier_freq / 2.0);
  c.static_power = j.value("static_power", d.static_power);
  c.slot_length = j.value("slot_length", d.slot_length);
}

}  // namespace pagnn

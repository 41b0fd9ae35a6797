#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pagnn/system.hpp"

namespace pagnn {

using Complex = std::complex<double>;

/// User positions u_m = [x, y, 0].
struct UserLayout {
  std::vector<Vec3> positions;

  std::size_t size() const { return positions.size(); }
};

/// Antenna x-coordinates; the full position is [x_n, 0, H].
struct AntennaPlacement {
  std::vector<double> x;
};

struct PowerAllocation {
  std::vector<double> p;  // watts

  double total() const {
    double s = 0.0;
    for (double v : p) s += v;
    return s;
  }
};

struct Solution {
  AntennaPlacement placement;
  PowerAllocation power;
};

inline Vec3 antenna_position(const SystemConfig& cfg, double x) { return {x, 0.0, cfg.height}; }

/// Phase accumulated inside the waveguide from the feed point to x.
inline double in_waveguide_phase(const SystemConfig& cfg, double x) {
  const double lambda_g = kSpeedOfLight / (cfg.carrier_freq * cfg.refractive_index);
  return 2.0 * std::numbers::pi * (antenna_position(cfg, x) - cfg.feed_point()).norm() / lambda_g;
}

namespace detail {

using LComplex = std::complex<long double>;

// Phases reach ~1e4 rad over the service area, where double rounding alone
// costs ~1e-12 rad. Distances and whole cycles are taken in long double and
// reduced before the trigonometry.
inline long double distance_ld(const Vec3& a, const Vec3& b) {
  const long double dx = static_cast<long double>(a.x()) - b.x();
  const long double dy = static_cast<long double>(a.y()) - b.y();
  const long double dz = static_cast<long double>(a.z()) - b.z();
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline LComplex unit_phasor_cycles(long double cycles) {
  const long double frac = cycles - std::floor(cycles);
  const long double angle = -2.0L * std::numbers::pi_v<long double> * frac;
  return {std::cos(angle), std::sin(angle)};
}

inline long double sqrt_path_gain_ld(const SystemConfig& cfg) {
  return static_cast<long double>(kSpeedOfLight) / (4.0L * std::numbers::pi_v<long double> * cfg.carrier_freq);
}

/// sqrt(eta) e^{-j (2 pi d / lambda + theta(x))} / d in extended precision.
inline LComplex effective_channel_ld(const SystemConfig& cfg, const Vec3& user, double x) {
  const long double lambda = static_cast<long double>(kSpeedOfLight) / cfg.carrier_freq;
  const long double lambda_g = lambda / cfg.refractive_index;
  const long double d = distance_ld(user, antenna_position(cfg, x));
  const long double fed = distance_ld(antenna_position(cfg, x), cfg.feed_point());
  return unit_phasor_cycles(d / lambda + fed / lambda_g) * (sqrt_path_gain_ld(cfg) / d);
}

}  // namespace detail

/// Free-space line-of-sight coefficient sqrt(eta) e^{-j 2 pi d / lambda} / d.
inline Complex channel_coefficient(const SystemConfig& cfg, const Vec3& user, double x) {
  const long double lambda = static_cast<long double>(kSpeedOfLight) / cfg.carrier_freq;
  const long double d = detail::distance_ld(user, antenna_position(cfg, x));
  const detail::LComplex h = detail::unit_phasor_cycles(d / lambda) * (detail::sqrt_path_gain_ld(cfg) / d);
  return {static_cast<double>(h.real()), static_cast<double>(h.imag())};
}

/// Channel including the in-waveguide phase, i.e. the per-antenna term that is
/// scaled by sqrt(p_n) in the received signal.
inline Complex effective_channel(const SystemConfig& cfg, const Vec3& user, double x) {
  const detail::LComplex h = detail::effective_channel_ld(cfg, user, x);
  return {static_cast<double>(h.real()), static_cast<double>(h.imag())};
}

/// Received SNR of one user under TDMA (no inter-user interference).
inline double user_snr(const SystemConfig& cfg, const Vec3& user, const Solution& sol) {
  detail::LComplex sum{0.0L, 0.0L};
  const auto& x = sol.placement.x;
  const auto& p = sol.power.p;
  for (std::size_t n = 0; n < x.size(); ++n)
    sum += std::sqrt(static_cast<long double>(std::max(p[n], 0.0))) * detail::effective_channel_ld(cfg, user, x[n]);
  return static_cast<double>(std::norm(sum) / cfg.noise_power);
}

/// Achievable rate in bit/s/Hz.
inline double user_rate(const SystemConfig& cfg, const Vec3& user, const Solution& sol) {
  return std::log2(1.0 + user_snr(cfg, user, sol));
}

/// Sum of slot-weighted rates over consumed power, in bit/Hz/J.
inline double energy_efficiency(const SystemConfig& cfg, const UserLayout& layout,
                                const Solution& sol) {
  double rates = 0.0;
  for (const auto& u : layout.positions) rates += cfg.slot_length * user_rate(cfg, u, sol);
  const double consumed = sol.power.total() + cfg.static_power;
  if (consumed == 0.0)
    throw std::domain_error("energy_efficiency: zero consumed power (P_C = 0 and no transmit power)");
  return rates / consumed;
}

struct Violation {
  enum class Kind { PowerBudget, NegativePower, Spacing, Range, Size };
  Kind kind;
  int index;         // antenna index, -1 for aggregate constraints
  double magnitude;  // how far past the limit
};

struct FeasibilityReport {
  bool ok = true;
  std::vector<Violation> violations;

  std::string describe() const {
    std::ostringstream os;
    static constexpr const char* names[] = {"power-budget", "negative-power", "spacing", "range",
                                            "size"};
    for (const auto& v : violations)
      os << names[static_cast<int>(v.kind)] << "[" << v.index << "] by " << v.magnitude << "; ";
    return os.str();
  }
};

/// Checks the power budget, non-negativity, guard spacing and waveguide range,
/// each with an additive tolerance. Boundaries are inclusive.
inline FeasibilityReport check_feasible(const SystemConfig& cfg, const Solution& sol, double tol) {
  FeasibilityReport rep;
  auto add = [&](Violation::Kind k, int i, double mag) {
    rep.ok = false;
    rep.violations.push_back({k, i, mag});
  };
  const auto& x = sol.placement.x;
  const auto& p = sol.power.p;
  const auto n = static_cast<std::size_t>(cfg.n_antennas);
  if (x.size() != n || p.size() != n) {
    add(Violation::Kind::Size, -1, std::abs(static_cast<double>(x.size()) - static_cast<double>(n)) +
                                       std::abs(static_cast<double>(p.size()) - static_cast<double>(n)));
    return rep;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += p[i];
    if (!(p[i] >= -tol)) add(Violation::Kind::NegativePower, static_cast<int>(i), -p[i]);
    const double over = std::abs(x[i]) - cfg.waveguide_half_length;
    if (!(over <= tol)) add(Violation::Kind::Range, static_cast<int>(i), over);
    if (i > 0) {
      const double gap = x[i] - x[i - 1];
      if (!(gap >= cfg.guard_distance - tol))
        add(Violation::Kind::Spacing, static_cast<int>(i), cfg.guard_distance - gap);
    }
  }
  if (!(total <= cfg.power_budget + tol))
    add(Violation::Kind::PowerBudget, -1, total - cfg.power_budget);
  return rep;
}

}  // namespace pagnn

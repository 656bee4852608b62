#pragma once

#include <cmath>

namespace cvqkd {

inline constexpr double kPlanck = 6.62607015e-34;        // J s
inline constexpr double kSpeedOfLight = 299792458.0;     // m / s
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Photon energy h c / lambda in joules.
inline double photon_energy(double wavelength_m) { return kPlanck * kSpeedOfLight / wavelength_m; }

}  // namespace cvqkd

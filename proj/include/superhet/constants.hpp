#ifndef SUPERHET_CONSTANTS_HPP
#define SUPERHET_CONSTANTS_HPP

#include <numbers>

namespace superhet::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double euler_gamma = std::numbers::egamma;

// CODATA 2018
inline constexpr double hbar = 1.054571817e-34;        // J s
inline constexpr double speed_of_light = 299792458.0;  // m/s
inline constexpr double epsilon0 = 8.8541878128e-12;   // F/m

} // namespace superhet::constants

#endif

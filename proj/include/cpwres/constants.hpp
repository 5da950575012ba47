#pragma once

#include <numbers>

// CODATA 2018 values. h, k_B and c are exact by SI definition.
namespace cpwres::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double speed_of_light = 299'792'458.0;        // m/s
inline constexpr double mu0 = 1.25663706212e-6;                 // H/m
inline constexpr double eps0 = 8.8541878128e-12;                // F/m
inline constexpr double planck = 6.62607015e-34;                // J s
inline constexpr double hbar = planck / (2.0 * pi);             // J s
inline constexpr double boltzmann = 1.380649e-23;               // J/K

}  // namespace cpwres::constants

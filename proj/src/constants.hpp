#pragma once

namespace siv {

// CODATA 2018 exact values
inline constexpr double kPlanck = 6.62607015e-34;     // J s
inline constexpr double kBoltzmann = 1.380649e-23;    // J/K
inline constexpr double kPlanckOverBoltzmann = kPlanck / kBoltzmann;  // s K

// Bohr magneton over Planck constant, Hz per gauss
inline constexpr double kBohrMagnetonHzPerGauss = 1.39962449361e6;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Stand-in optical carrier for the excited manifold so that transition
// frequencies stay positive while all arithmetic remains at GHz scale.
inline constexpr double kExcitedBaseOffsetHz = 1.0e12;

}  // namespace siv

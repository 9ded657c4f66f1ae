#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace siv {

// Effective SiV- level model: two orbital branches in the ground and excited
// state, each carrying an electronic spin-1/2, optionally doubled by a 29Si
// nuclear spin-1/2. The microscopic spin-orbit/Jahn-Teller Hamiltonian is
// replaced by per-branch g-factors plus a single phenomenological mixing
// fraction for the spin-flipping dipoles.

enum class Manifold { GroundLower, GroundUpper, ExcitedLower, ExcitedUpper };

inline bool is_excited(Manifold m) {
  return m == Manifold::ExcitedLower || m == Manifold::ExcitedUpper;
}
inline bool is_upper_branch(Manifold m) {
  return m == Manifold::GroundUpper || m == Manifold::ExcitedUpper;
}

struct SivParameters {
  double ground_orbital_splitting = 47e9;   // Hz
  double excited_orbital_splitting = 260e9; // Hz; externally sourced, not fixed by this dataset
  double zpl_frequency = 406.7e12;          // Hz; labeling only
  // Defaults chosen so D2/D3 resolve while C2/C3 coincide, and so the
  // spin-flipping lines D1/D4 share upper levels with D2/D3 respectively
  // (the Lambda pairs the CPT configurations drive).
  double g_ground_upper = 2.00;
  double g_ground_lower = 2.30;
  double g_excited_upper = 1.70;
  double g_excited_lower = 2.30;
  double radiative_lifetime = 1.72e-9;      // s
  double branching_zpl = 0.70;              // ZPL fraction of emission
  double branch_share_upper = 0.5;          // excited decay share ending in the ground-upper branch
};

struct MagneticConfig {
  double magnitude = 0.0;      // gauss
  double polar_angle = 0.0;    // radians between B and the SiV axis, [0, pi/2]
  double mixing_scale = 14.5e3;// gauss; off-axis component at which mixing saturates toward 1/2
};

struct HyperfineConfig {
  bool enabled = false;
  double coupling_a = 34.5e6;  // Hz; effective ground-state constant for 29Si (I = 1/2)
};

struct Level {
  int index = -1;
  std::string label;
  Manifold manifold = Manifold::GroundLower;
  int spin = 0;      // +-1, units of 1/2
  int nuclear = 0;   // +-1 when hyperfine enabled, else 0
  double energy = 0; // Hz offset
};

struct Transition {
  int lower = -1;
  int upper = -1;
  double frequency = 0;     // Hz, upper energy - lower energy
  double dipole_weight = 0; // (1 - eps) spin conserving, eps spin flipping
  bool spin_flipping = false;
  std::string label;        // e.g. "D2"; with hyperfine "D2+"/"D2-" per nuclear projection
};

struct LevelScheme {
  SivParameters params;
  MagneticConfig field;
  HyperfineConfig hyperfine;
  double mixing_fraction = 0;  // eps
  std::vector<Level> levels;
  std::vector<Transition> transitions;

  int level_count() const { return static_cast<int>(levels.size()); }
  std::uint64_t content_hash() const;
};

// eps = sin^2(atan(B sin(theta) / mixing_scale) / 2): zero for aligned fields,
// strictly increasing in theta, bounded below 1/2.
double spin_mixing_fraction(const MagneticConfig& field, double mixing_scale);

LevelScheme build_level_scheme(const SivParameters& params, const MagneticConfig& field,
                               const HyperfineConfig& hyperfine);

const Transition& transition_lookup(const LevelScheme& scheme, const std::string& label);

}  // namespace siv

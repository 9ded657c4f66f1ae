#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "level_scheme.hpp"
#include "ode.hpp"

namespace siv {

struct Environment {
  double temperature = 4.5;            // K
  double orbital_coupling = 0;         // chi, 1/s; single-phonon coupling for the ground branches
  double excited_orbital_coupling = 0; // 1/s; 0 falls back to orbital_coupling
  double spin_t1 = 2.4e-3;             // s; intra-branch spin-flip timescale
  bool spin_t1_is_angle_derived = false;
};

struct Laser {
  std::string target;           // transition label
  double detuning = 0;          // Hz, offset from the target transition
  double saturation = 0;        // peak stimulated rate = saturation x spontaneous rate on target
  double linewidth_fwhm = 94e6; // Hz, Lorentzian intensity scaling vs detuning

  bool operator==(const Laser&) const = default;
};

struct DetectorModel {
  double efficiency = 1.0;
  double bin_width = 6.4e-6;   // s
  double background = 0.0;     // Hz
  bool shot_noise = false;
  std::uint64_t rng_seed = 0;
};

// Classical generator over level populations: off-diagonal (j,i) holds the
// rate i -> j, each diagonal entry balances its column.
struct RateMatrix {
  Eigen::MatrixXd generator;

  int dim() const { return static_cast<int>(generator.rows()); }
  void validate() const;  // column sums ~ 0, off-diagonals >= 0, finite
};

struct PopulationVector {
  Eigen::VectorXd p;
};

struct Spectrum {
  std::vector<double> detuning_hz;
  std::vector<double> counts_hz;
  std::string to_csv() const;
};

// Decay rate of one optical transition: dipole weight times the share of the
// excited branch's decay that terminates in the lower level's ground branch,
// over the radiative lifetime.
double transition_spontaneous_rate(const LevelScheme& scheme, const Transition& t);

// Single-phonon pair at the given splitting: {downward, upward}. The upward
// rate carries the Bose occupation, so upward/downward equals the Boltzmann
// factor exactly.
std::pair<double, double> phonon_rates(double splitting_hz, const Environment& env);

// chi chosen so that downward + upward at (splitting, temperature) equals 1/t1.
double calibrate_orbital_coupling(double splitting_hz, double temperature, double t1);

// Intra-branch spin flip time; in angle-derived mode the off-axis mixing adds
// a phonon-carried flip channel on top of the configured floor.
double effective_spin_t1(const Environment& env, const LevelScheme& scheme);

RateMatrix build_rate_matrix(const LevelScheme& scheme, const std::vector<Laser>& lasers,
                             const Environment& env);

PopulationVector steady_state_populations(const RateMatrix& rates);

std::vector<PopulationVector> evolve_populations(const RateMatrix& rates,
                                                 const PopulationVector& initial,
                                                 const std::vector<double>& times,
                                                 const OdeOptions& opts = {});

double fluorescence_rate(const PopulationVector& populations, const LevelScheme& scheme,
                         const DetectorModel& detector);

PopulationVector uniform_populations(int dim);

Spectrum excitation_spectrum(const LevelScheme& scheme, const Laser& probe,
                             const std::vector<double>& scan_detunings_hz,
                             const std::optional<Laser>& pump, const Environment& env,
                             const DetectorModel& detector, int jobs = 1);

}  // namespace siv

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "level_scheme.hpp"
#include "ode.hpp"
#include "rate_engine.hpp"

namespace siv {

// Density-matrix engine for the coherent phenomena the rate model cannot
// express: CPT dips on spin Lambda schemes, the 29Si double dip, and the
// zero-field orbital Lambda scheme.

struct LambdaConfig {
  LevelScheme scheme;
  std::string leg1;                 // pump leg
  std::string leg2;                 // probe leg
  double rabi1 = 0;                 // rad/s
  double rabi2 = 0;                 // rad/s
  double one_photon_detuning = 0;   // Hz, common offset of both lasers
  double two_photon_detuning = 0;   // Hz, leg1 laser detuning minus leg2 laser detuning
  double ground_coherence_rate = 0; // gamma_gs, 1/s decay of the ground-ground coherence
  Environment env;
  bool full_scheme = false;         // solve on the complete level set instead of the minimal 3
};

struct Liouvillian {
  Eigen::MatrixXcd op;        // (n^2 x n^2) superoperator acting on vec(rho)
  int dim = 0;                // n
  std::vector<int> basis;     // scheme level index per basis state
  Eigen::VectorXd emission;   // total spontaneous rate per basis state

  void validate() const;      // numerically trace-preserving
};

// gamma_gs = 1/(2 t2star): produces a zero-power dip of FWHM 1/(2 pi t2star),
// matching the convention t2star = 1/(2 pi FWHM) used throughout.
double gamma_gs_from_t2star(double t2star_s);

// Composes the ground coherence decay from orbital relaxation: half the
// phonon equilibration rate at the ground orbital splitting.
double gamma_gs_from_environment(const Environment& env, double ground_splitting_hz);

Liouvillian build_lambda_liouvillian(const LambdaConfig& cfg);

Eigen::MatrixXcd steady_state_dm(const Liouvillian& liouville);

std::vector<Eigen::MatrixXcd> evolve_dm(const Liouvillian& liouville,
                                        const Eigen::MatrixXcd& rho0,
                                        const std::vector<double>& times,
                                        const OdeOptions& opts = {});

double dm_fluorescence(const Liouvillian& liouville, const Eigen::MatrixXcd& rho,
                       const DetectorModel& detector);

Spectrum cpt_spectrum(const LambdaConfig& cfg, const std::vector<double>& two_photon_scan_hz,
                      const DetectorModel& detector, int jobs = 1);

Spectrum hyperfine_double_dip(const LambdaConfig& cfg, double coupling_a_hz,
                              const std::vector<double>& two_photon_scan_hz,
                              const DetectorModel& detector, int jobs = 1);

// Zero-field Lambda over the two ground orbital branches: pump fixed on line
// C, probe scanned across line D. The x axis is the probe detuning from D.
Spectrum orbital_lambda_spectrum(const LevelScheme& scheme, double pump_rabi, double probe_rabi,
                                 double pump_detuning_hz,
                                 const std::vector<double>& probe_scan_hz,
                                 const Environment& env, const DetectorModel& detector,
                                 double extra_orbital_dephasing = 0, int jobs = 1);

void check_density_matrix(const Eigen::MatrixXcd& rho);

}  // namespace siv

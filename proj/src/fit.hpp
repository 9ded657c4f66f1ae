#pragma once

#include <string>
#include <vector>

#include "rate_engine.hpp"

namespace siv {

struct FitResult {
  std::vector<std::pair<std::string, double>> params;
  std::vector<std::pair<std::string, double>> std_errors;
  double residual_norm = 0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> flags;

  double param(const std::string& name) const;
  double std_error(const std::string& name) const;
  bool has_flag(const std::string& name) const;
  std::string to_text() const;  // flat key=value block
};

struct XY {
  double x = 0;
  double y = 0;
};

// y = a + b exp(-x / tau)
FitResult fit_exponential(const std::vector<XY>& points);

// baseline - depth * L(x; center, fwhm), L a unit-peak Lorentzian
FitResult fit_lorentzian_dip(const Spectrum& spectrum);

// ordinary least squares; params slope, intercept, r_squared
FitResult fit_linear(const std::vector<XY>& points);

// linear fit of fwhm vs power; params zero_power_fwhm (+ std error), slope
FitResult extrapolate_zero_power(const std::vector<XY>& power_fwhm);

double t2_star_from_fwhm(double fwhm_hz);
double fwhm_from_t2_star(double t2_star_s);

struct SpectralFeature {
  std::size_t index = 0;
  double position = 0;
  double value = 0;
  double prominence = 0;
  bool is_dip = false;
};

// Local extrema of either sign whose prominence exceeds the given fraction of
// the full data range.
std::vector<SpectralFeature> find_spectral_features(const Spectrum& spectrum,
                                                    double min_prominence_fraction);

}  // namespace siv

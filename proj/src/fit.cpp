#include "fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "constants.hpp"
#include "csv.hpp"
#include "error.hpp"

namespace siv {

double FitResult::param(const std::string& name) const {
  for (const auto& [key, value] : params) {
    if (key == name) return value;
  }
  throw_invalid("fit result has no parameter '" + name + "'");
}

double FitResult::std_error(const std::string& name) const {
  for (const auto& [key, value] : std_errors) {
    if (key == name) return value;
  }
  throw_invalid("fit result has no std error '" + name + "'");
}

bool FitResult::has_flag(const std::string& name) const {
  return std::find(flags.begin(), flags.end(), name) != flags.end();
}

std::string FitResult::to_text() const {
  std::string out;
  for (const auto& [key, value] : params) {
    out += key + " = " + format_double(value) + "\n";
  }
  for (const auto& [key, value] : std_errors) {
    out += key + "_err = " + format_double(value) + "\n";
  }
  out += "residual_norm = " + format_double(residual_norm) + "\n";
  out += "converged = " + std::string(converged ? "true" : "false") + "\n";
  out += "iterations = " + std::to_string(iterations) + "\n";
  for (const auto& flag : flags) {
    out += "flag = " + flag + "\n";
  }
  return out;
}

namespace {

// Damped Gauss-Newton with analytic Jacobians. model(x, p, grad) returns the
// value and fills grad; valid(p) rejects out-of-domain parameter steps.
struct LevenbergFit {
  std::function<double(double, const Eigen::VectorXd&, Eigen::VectorXd&)> model;
  std::function<bool(const Eigen::VectorXd&)> valid = [](const Eigen::VectorXd&) { return true; };
  int max_iterations = 200;
  double step_tolerance = 1e-10;

  double cost(const std::vector<XY>& pts, const Eigen::VectorXd& p) const {
    double c = 0;
    Eigen::VectorXd grad(p.size());
    for (const XY& pt : pts) {
      const double r = model(pt.x, p, grad) - pt.y;
      c += r * r;
    }
    return 0.5 * c;
  }

  // returns {params, iterations, converged}
  std::tuple<Eigen::VectorXd, int, bool> run(const std::vector<XY>& pts,
                                             Eigen::VectorXd p) const {
    const int k = static_cast<int>(p.size());
    double lambda = 1e-3;
    double current = cost(pts, p);
    int iter = 0;
    bool converged = false;
    for (; iter < max_iterations; ++iter) {
      Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(k, k);
      Eigen::VectorXd jtr = Eigen::VectorXd::Zero(k);
      Eigen::VectorXd grad(k);
      for (const XY& pt : pts) {
        const double r = model(pt.x, p, grad) - pt.y;
        jtj += grad * grad.transpose();
        jtr += grad * r;
      }
      bool stepped = false;
      for (int attempt = 0; attempt < 25; ++attempt) {
        Eigen::MatrixXd damped = jtj;
        for (int i = 0; i < k; ++i) {
          damped(i, i) += lambda * std::max(jtj(i, i), 1e-30);
        }
        Eigen::VectorXd delta = damped.ldlt().solve(-jtr);
        Eigen::VectorXd trial = p + delta;
        if (valid(trial)) {
          const double trial_cost = cost(pts, trial);
          if (trial_cost <= current) {
            double max_rel = 0;
            for (int i = 0; i < k; ++i) {
              max_rel = std::max(max_rel,
                                 std::abs(delta[i]) / std::max(std::abs(p[i]), 1e-30));
            }
            p = trial;
            current = trial_cost;
            lambda = std::max(lambda / 3.0, 1e-12);
            stepped = true;
            if (max_rel < step_tolerance) converged = true;
            break;
          }
        }
        lambda *= 4.0;
      }
      if (converged || !stepped) {
        if (!stepped && current <= 1e-30) converged = true;  // already exact
        ++iter;
        break;
      }
    }
    return {p, iter, converged};
  }

  // Jacobian-based covariance approximation
  std::vector<double> std_errors(const std::vector<XY>& pts, const Eigen::VectorXd& p) const {
    const int k = static_cast<int>(p.size());
    const int n = static_cast<int>(pts.size());
    Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd grad(k);
    double rss = 0;
    for (const XY& pt : pts) {
      const double r = model(pt.x, p, grad) - pt.y;
      jtj += grad * grad.transpose();
      rss += r * r;
    }
    const double dof = std::max(n - k, 1);
    const double sigma2 = rss / dof;
    Eigen::MatrixXd cov = jtj.completeOrthogonalDecomposition().pseudoInverse() * sigma2;
    std::vector<double> out(k);
    for (int i = 0; i < k; ++i) {
      out[i] = cov(i, i) > 0 ? std::sqrt(cov(i, i)) : 0.0;
    }
    return out;
  }
};

}  // namespace

FitResult fit_exponential(const std::vector<XY>& points) {
  if (points.size() < 4) throw_invalid("fit_exponential needs at least 4 points");
  for (const XY& pt : points) {
    if (pt.x < 0 || !std::isfinite(pt.x) || !std::isfinite(pt.y)) {
      throw_invalid("fit_exponential requires finite points with x >= 0");
    }
  }

  double x_lo = points.front().x, x_hi = points.front().x;
  double y_lo = points.front().y, y_hi = points.front().y;
  for (const XY& pt : points) {
    x_lo = std::min(x_lo, pt.x);
    x_hi = std::max(x_hi, pt.x);
    y_lo = std::min(y_lo, pt.y);
    y_hi = std::max(y_hi, pt.y);
  }
  if (x_hi <= x_lo) throw_invalid("fit_exponential needs distinct x values");

  LevenbergFit lm;
  lm.model = [](double x, const Eigen::VectorXd& p, Eigen::VectorXd& grad) {
    const double e = std::exp(-x / p[2]);
    grad[0] = 1.0;
    grad[1] = e;
    grad[2] = p[1] * x / (p[2] * p[2]) * e;
    return p[0] + p[1] * e;
  };
  lm.valid = [](const Eigen::VectorXd& p) { return p[2] > 0 && std::isfinite(p[2]); };

  Eigen::VectorXd p0(3);
  p0 << points.back().y, points.front().y - points.back().y, (x_hi - x_lo) / 3.0;
  if (p0[2] <= 0) p0[2] = 1.0;
  auto [p, iterations, converged] = lm.run(points, p0);

  FitResult result;
  result.params = {{"a", p[0]}, {"b", p[1]}, {"tau", p[2]}};
  auto errs = lm.std_errors(points, p);
  result.std_errors = {{"a", errs[0]}, {"b", errs[1]}, {"tau", errs[2]}};
  result.residual_norm = std::sqrt(2.0 * lm.cost(points, p));
  result.converged = converged;
  result.iterations = iterations;
  const double scale = std::max(std::abs(y_hi), std::abs(y_lo));
  if (std::abs(p[1]) <= 1e-9 * std::max(scale, 1e-300) || y_hi == y_lo) {
    result.flags.push_back("tau_unidentifiable");
  }
  return result;
}

FitResult fit_lorentzian_dip(const Spectrum& spectrum) {
  const std::size_t n = spectrum.detuning_hz.size();
  if (n < 6) throw_invalid("fit_lorentzian_dip needs at least 6 points");
  std::vector<XY> points(n);
  for (std::size_t i = 0; i < n; ++i) {
    points[i] = {spectrum.detuning_hz[i], spectrum.counts_hz[i]};
  }

  std::vector<double> sorted_y(spectrum.counts_hz);
  std::sort(sorted_y.begin(), sorted_y.end());
  const double baseline0 = sorted_y[static_cast<std::size_t>(0.9 * (n - 1))];
  std::size_t imin = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (spectrum.counts_hz[i] < spectrum.counts_hz[imin]) imin = i;
  }
  const double depth0 = baseline0 - spectrum.counts_hz[imin];
  if (!(depth0 > 0)) throw_numeric("fit_lorentzian_dip: data has no dip");

  // half-depth crossings for the initial width
  const double half_level = baseline0 - 0.5 * depth0;
  double left = spectrum.detuning_hz.front(), right = spectrum.detuning_hz.back();
  for (std::size_t i = imin; i-- > 0;) {
    if (spectrum.counts_hz[i] >= half_level) {
      left = spectrum.detuning_hz[i];
      break;
    }
  }
  for (std::size_t i = imin; i < n; ++i) {
    if (spectrum.counts_hz[i] >= half_level) {
      right = spectrum.detuning_hz[i];
      break;
    }
  }
  double fwhm0 = right - left;
  const double span = spectrum.detuning_hz.back() - spectrum.detuning_hz.front();
  if (!(fwhm0 > 0)) fwhm0 = span / 10.0;

  LevenbergFit lm;
  lm.model = [](double x, const Eigen::VectorXd& p, Eigen::VectorXd& grad) {
    const double u = x - p[2];
    const double h = 0.5 * p[3];
    const double denom = u * u + h * h;
    const double lor = h * h / denom;
    grad[0] = 1.0;
    grad[1] = -lor;
    grad[2] = -p[1] * 2.0 * u * h * h / (denom * denom);
    grad[3] = -p[1] * h * u * u / (denom * denom);
    return p[0] - p[1] * lor;
  };
  lm.valid = [](const Eigen::VectorXd& p) { return p[3] > 0 && std::isfinite(p[3]); };

  Eigen::VectorXd p0(4);
  p0 << baseline0, depth0, spectrum.detuning_hz[imin], fwhm0;
  auto [p, iterations, converged] = lm.run(points, p0);

  // a depth below double-precision resolution of the trace is not a dip
  if (!(p[1] > 0) || p[1] <= 1e-6 * std::abs(p[0])) {
    throw_numeric("fit_lorentzian_dip: data has no significant dip");
  }

  FitResult result;
  result.params = {{"baseline", p[0]}, {"depth", p[1]}, {"center", p[2]}, {"fwhm", p[3]}};
  auto errs = lm.std_errors(points, p);
  result.std_errors = {
      {"baseline", errs[0]}, {"depth", errs[1]}, {"center", errs[2]}, {"fwhm", errs[3]}};
  result.residual_norm = std::sqrt(2.0 * lm.cost(points, p));
  result.converged = converged;
  result.iterations = iterations;
  if (p[3] > span / 3.0) result.flags.push_back("window_narrow");
  return result;
}

FitResult fit_linear(const std::vector<XY>& points) {
  const std::size_t n = points.size();
  if (n < 2) throw_invalid("fit_linear needs at least 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const XY& pt : points) {
    sx += pt.x;
    sy += pt.y;
    sxx += pt.x * pt.x;
    sxy += pt.x * pt.y;
  }
  const double denom = n * sxx - sx * sx;
  if (denom <= 0 || !std::isfinite(denom)) {
    throw_numeric("fit_linear: all x values coincide");
  }
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;

  double rss = 0, tss = 0;
  const double mean_y = sy / n;
  for (const XY& pt : points) {
    const double fit = intercept + slope * pt.x;
    rss += (pt.y - fit) * (pt.y - fit);
    tss += (pt.y - mean_y) * (pt.y - mean_y);
  }
  const double r_squared = tss > 0 ? 1.0 - rss / tss : 1.0;
  const double sigma2 = rss / std::max<double>(n - 2, 1);

  FitResult result;
  result.params = {{"slope", slope}, {"intercept", intercept}, {"r_squared", r_squared}};
  result.std_errors = {{"slope", std::sqrt(sigma2 * n / denom)},
                       {"intercept", std::sqrt(sigma2 * sxx / denom)}};
  result.residual_norm = std::sqrt(rss);
  result.converged = true;
  result.iterations = 0;
  return result;
}

FitResult extrapolate_zero_power(const std::vector<XY>& power_fwhm) {
  if (power_fwhm.size() < 3) throw_invalid("extrapolate_zero_power needs at least 3 powers");
  FitResult line = fit_linear(power_fwhm);
  FitResult result;
  result.params = {{"zero_power_fwhm", line.param("intercept")},
                   {"slope", line.param("slope")},
                   {"r_squared", line.param("r_squared")}};
  result.std_errors = {{"zero_power_fwhm", line.std_error("intercept")},
                       {"slope", line.std_error("slope")}};
  result.residual_norm = line.residual_norm;
  result.converged = line.converged;
  result.iterations = line.iterations;
  return result;
}

double t2_star_from_fwhm(double fwhm_hz) {
  if (!(fwhm_hz > 0)) throw_invalid("t2_star_from_fwhm requires fwhm > 0");
  return 1.0 / (kTwoPi * fwhm_hz);
}

double fwhm_from_t2_star(double t2_star_s) {
  if (!(t2_star_s > 0)) throw_invalid("fwhm_from_t2_star requires t2_star > 0");
  return 1.0 / (kTwoPi * t2_star_s);
}

namespace {

void collect_features(const std::vector<double>& x, const std::vector<double>& y,
                      double threshold, double level_floor, bool dips,
                      std::vector<SpectralFeature>& out) {
  const std::size_t n = y.size();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
    // a genuine feature departs from the background level; this excludes the
    // valley between two peaks (and the plateau between two dips)
    if (y[i] < level_floor) continue;
    // saddle on each side: lowest point before reaching higher ground
    double left_saddle = y[i];
    for (std::size_t k = i; k-- > 0;) {
      left_saddle = std::min(left_saddle, y[k]);
      if (y[k] > y[i]) break;
    }
    double right_saddle = y[i];
    for (std::size_t k = i + 1; k < n; ++k) {
      right_saddle = std::min(right_saddle, y[k]);
      if (y[k] > y[i]) break;
    }
    const double prominence = y[i] - std::max(left_saddle, right_saddle);
    if (prominence < threshold) continue;

    SpectralFeature feature;
    feature.index = i;
    feature.is_dip = dips;
    feature.prominence = prominence;
    feature.value = dips ? -y[i] : y[i];
    // parabolic refinement of the extremum position
    const double denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
    const double shift = denom != 0 ? 0.5 * (y[i - 1] - y[i + 1]) / denom : 0.0;
    feature.position = x[i] + shift * (x[std::min(i + 1, n - 1)] - x[i]);
    out.push_back(feature);
  }
}

}  // namespace

std::vector<SpectralFeature> find_spectral_features(const Spectrum& spectrum,
                                                    double min_prominence_fraction) {
  const std::size_t n = spectrum.counts_hz.size();
  std::vector<SpectralFeature> out;
  if (n < 3) return out;
  const double hi = *std::max_element(spectrum.counts_hz.begin(), spectrum.counts_hz.end());
  const double lo = *std::min_element(spectrum.counts_hz.begin(), spectrum.counts_hz.end());
  const double range = hi - lo;
  if (range <= 0) return out;
  const double threshold = min_prominence_fraction * range;

  std::vector<double> sorted(spectrum.counts_hz);
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[n / 2];
  const double margin = 0.5 * threshold;

  collect_features(spectrum.detuning_hz, spectrum.counts_hz, threshold, median + margin, false,
                   out);
  std::vector<double> negated(n);
  for (std::size_t i = 0; i < n; ++i) negated[i] = -spectrum.counts_hz[i];
  collect_features(spectrum.detuning_hz, negated, threshold, -(median - margin), true, out);

  std::sort(out.begin(), out.end(),
            [](const SpectralFeature& a, const SpectralFeature& b) {
              return a.position < b.position;
            });
  return out;
}

}  // namespace siv

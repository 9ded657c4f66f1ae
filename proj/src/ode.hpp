#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "csv.hpp"
#include "error.hpp"

namespace siv {

struct OdeOptions {
  double rtol = 1e-8;
  double atol = 1e-12;
  std::size_t max_steps = 20000000;
  double initial_step = 0;  // 0 selects automatically
};

// Adaptive TR-BDF2 for linear systems dy/dt = A(t) y. One-step and L-stable,
// which the rate models need: their generators mix nanosecond optical decay
// with millisecond spin relaxation. The local error is estimated by step
// doubling; the half-step solution is kept (no extrapolation, so stability is
// not degraded). Column sums of A map to invariants of y: the implicit stages
// preserve 1^T y exactly whenever 1^T A = 0.
template <typename Scalar>
class LinearOde {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Generator = std::function<void(double t, Matrix& a)>;

  LinearOde(Generator generator, int dim, OdeOptions options = {})
      : generator_(std::move(generator)), dim_(dim), opts_(options) {
    a0_.resize(dim, dim);
    a1_.resize(dim, dim);
    a2_.resize(dim, dim);
    work_.resize(dim, dim);
  }

  // Declares w such that w . y is conserved by the exact dynamics (population
  // sum, density-matrix trace). Accepted steps are projected back onto the
  // invariant, which removes the slow drift that generator round-off would
  // otherwise accumulate over long spans.
  void set_invariant(Eigen::Matrix<Scalar, 1, Eigen::Dynamic> w) { invariant_ = std::move(w); }

  // Integrates from t_start through all output times (sorted ascending).
  // `breakpoints` marks instants the stepper must not cross, e.g. pulse
  // edges where A(t) changes character.
  std::vector<Vector> solve(const Vector& y0, double t_start, const std::vector<double>& times,
                            const std::vector<double>& breakpoints = {}) {
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!(times[i] >= t_start) || (i > 0 && times[i] < times[i - 1])) {
        throw_invalid("output times must be sorted ascending and >= start time");
      }
    }
    std::vector<Vector> out;
    out.reserve(times.size());
    if (times.empty()) return out;

    std::vector<double> stops = breakpoints;
    stops.insert(stops.end(), times.begin(), times.end());
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    double t = t_start;
    Vector y = y0;
    if (invariant_.size() == dim_) invariant_value_ = invariant_ * y;
    std::size_t next_output = 0;
    while (next_output < times.size() && times[next_output] <= t) {
      out.push_back(y);
      ++next_output;
    }

    const double span = std::max(times.back() - t_start, 0.0);
    if (span == 0.0) return out;
    double h = opts_.initial_step > 0 ? opts_.initial_step : suggest_step(t, span);
    std::size_t steps = 0;

    auto reach_eps = [](double a, double b) {
      return 8.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b));
    };

    while (next_output < times.size()) {
      double limit = times[next_output];
      for (double s : stops) {
        if (s > t + reach_eps(t, s)) {
          limit = std::min(limit, s);
          break;
        }
      }
      bool clipped = t + h >= limit;
      double h_try = clipped ? limit - t : h;
      if (!(h_try > 0) || t + h_try == t) {
        throw_numeric("integration step underflow at t = " + format_compact(t) + " s");
      }

      Vector y_full = step_once(t, h_try, y);
      Vector y_half = step_once(t, 0.5 * h_try, y);
      y_half = step_once(t + 0.5 * h_try, 0.5 * h_try, y_half);

      double err = 0;
      for (int i = 0; i < dim_; ++i) {
        const double diff = std::abs(y_full[i] - y_half[i]) / 3.0;
        const double scale =
            opts_.atol + opts_.rtol * std::max(std::abs(y[i]),
                                               std::max(std::abs(y_full[i]), std::abs(y_half[i])));
        err = std::max(err, diff / scale);
      }

      if (err <= 1.0) {
        t += h_try;
        y = std::move(y_half);
        if (invariant_.size() == dim_) {
          const Scalar cur = invariant_ * y;
          if (std::abs(cur) > 0) y *= invariant_value_ / cur;
        }
        while (next_output < times.size() &&
               times[next_output] <= t + reach_eps(t, times[next_output])) {
          out.push_back(y);
          ++next_output;
        }
        double grow = 0.9 * std::pow(std::max(err, 1e-10), -1.0 / 3.0);
        double h_next = h_try * std::clamp(grow, 0.2, 5.0);
        // A step clipped short by an output time must not throttle later steps.
        h = clipped ? std::max(h, h_next) : h_next;
      } else {
        double shrink = 0.9 * std::pow(err, -1.0 / 3.0);
        h = h_try * std::clamp(shrink, 0.1, 0.5);
        if (t + h == t) {
          throw_numeric("integration step failure at t = " + format_compact(t) +
                        " s (error " + format_compact(err) + " at minimum step)");
        }
      }

      if (++steps > opts_.max_steps) {
        throw_numeric("integration exceeded " + std::to_string(opts_.max_steps) +
                      " steps at t = " + format_compact(t) + " s");
      }
    }
    return out;
  }

 private:
  double suggest_step(double t, double span) {
    generator_(t, a0_);
    double rate = 0;
    for (int i = 0; i < dim_; ++i) rate = std::max(rate, std::abs(a0_(i, i)));
    double h = 0.01 / (rate + 1.0 / span);
    return std::min(h, span);
  }

  Vector step_once(double t, double h, const Vector& y) {
    static constexpr double kGamma = 0.585786437626904951;  // 2 - sqrt(2)
    generator_(t, a0_);
    generator_(t + kGamma * h, a1_);
    generator_(t + h, a2_);

    const double d = 0.5 * kGamma * h;
    work_ = Matrix::Identity(dim_, dim_) - d * a1_;
    Vector rhs = y + d * (a0_ * y);
    Vector y_mid = work_.partialPivLu().solve(rhs);

    const double c2 = (1.0 - kGamma) / (2.0 - kGamma);
    const double c0 = 1.0 / (kGamma * (2.0 - kGamma));
    const double c1 = (1.0 - kGamma) * (1.0 - kGamma) / (kGamma * (2.0 - kGamma));
    work_ = Matrix::Identity(dim_, dim_) - (c2 * h) * a2_;
    rhs = c0 * y_mid - c1 * y;
    return work_.partialPivLu().solve(rhs);
  }

  Generator generator_;
  int dim_;
  OdeOptions opts_;
  Matrix a0_, a1_, a2_, work_;
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> invariant_;
  Scalar invariant_value_{};
};

}  // namespace siv

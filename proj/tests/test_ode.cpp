#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>

#include "doctest.h"
#include "error.hpp"
#include "ode.hpp"

using namespace siv;

TEST_CASE("zero generator keeps the state constant") {
  LinearOde<double> ode([](double, Eigen::MatrixXd& a) { a.setZero(2, 2); }, 2);
  Eigen::VectorXd y0(2);
  y0 << 0.25, 0.75;
  auto out = ode.solve(y0, 0.0, {0.0, 1.0, 10.0, 1e4});
  REQUIRE(out.size() == 4);
  for (const auto& y : out) {
    CHECK(y[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(0.75).epsilon(1e-12));
  }
}

TEST_CASE("two-level relaxation matches the closed form") {
  const double down = 3.0e6, up = 1.0e6;
  Eigen::MatrixXd gen(2, 2);
  gen << -up, down, up, -down;
  LinearOde<double> ode([&gen](double, Eigen::MatrixXd& a) { a = gen; }, 2);
  Eigen::VectorXd y0(2);
  y0 << 1.0, 0.0;
  std::vector<double> times{0.0, 1e-7, 5e-7, 2e-6, 1e-5};
  auto out = ode.solve(y0, 0.0, times);
  const double total = down + up;
  const double eq0 = down / total;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double expect = eq0 + (1.0 - eq0) * std::exp(-total * times[i]);
    CHECK(out[i][0] == doctest::Approx(expect).epsilon(1e-7));
    CHECK(out[i][0] + out[i][1] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("stiff system agrees with the matrix exponential oracle") {
  // rates spanning 1/1.72 ns to 1/2.4 ms
  const int n = 4;
  Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(n, n);
  auto rate = [&gen](int from, int to, double r) {
    gen(to, from) += r;
    gen(from, from) -= r;
  };
  rate(3, 0, 1.0 / 1.72e-9);
  rate(3, 1, 2.0e8);
  rate(0, 1, 1.0 / 38e-9);
  rate(1, 0, 0.6 / 38e-9);
  rate(0, 2, 0.5 / 2.4e-3);
  rate(2, 0, 0.5 / 2.4e-3);
  rate(2, 3, 5.0e4);

  LinearOde<double> ode([&gen](double, Eigen::MatrixXd& a) { a = gen; }, n);
  Eigen::VectorXd y0(n);
  y0 << 0.0, 0.0, 0.0, 1.0;
  std::vector<double> times{1e-9, 1e-8, 1e-7, 1e-6, 1e-4, 1e-2};
  auto out = ode.solve(y0, 0.0, times);
  for (std::size_t i = 0; i < times.size(); ++i) {
    Eigen::VectorXd oracle = (gen * times[i]).exp() * y0;
    for (int k = 0; k < n; ++k) {
      CHECK(out[i][k] == doctest::Approx(oracle[k]).epsilon(5e-7).scale(1.0));
      CHECK(out[i][k] > -1e-9);
    }
    CHECK(out[i].sum() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("nonautonomous scalar equation matches quadrature") {
  // dy/dt = -k(t) y with k(t) = k0 + k1 sin(w t); y = y0 exp(-k0 t + (k1/w)(cos(w t) - 1))
  const double k0 = 2.0e5, k1 = 8.0e4, w = 3.0e5;
  LinearOde<double> ode(
      [&](double t, Eigen::MatrixXd& a) {
        a.resize(1, 1);
        a(0, 0) = -(k0 + k1 * std::sin(w * t));
      },
      1);
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  std::vector<double> times{1e-6, 5e-6, 2e-5};
  auto out = ode.solve(y0, 0.0, times);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double expect = std::exp(-k0 * times[i] + (k1 / w) * (std::cos(w * times[i]) - 1.0));
    CHECK(out[i][0] == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("complex scalar decay") {
  using C = std::complex<double>;
  const C lambda(-2.0e6, 5.0e6);
  OdeOptions opts;
  opts.rtol = 1e-10;
  LinearOde<C> ode(
      [&](double, Eigen::MatrixXcd& a) {
        a.resize(1, 1);
        a(0, 0) = lambda;
      },
      1, opts);
  Eigen::VectorXcd y0(1);
  y0 << C(1.0, 0.0);
  auto out = ode.solve(y0, 0.0, {1e-6});
  const C expect = std::exp(lambda * 1e-6);
  CHECK(std::abs(out[0][0] - expect) < 1e-7);
}

TEST_CASE("step budget exhaustion raises a numeric error") {
  OdeOptions opts;
  opts.max_steps = 10;
  LinearOde<double> ode(
      [](double, Eigen::MatrixXd& a) {
        a.resize(1, 1);
        a(0, 0) = -1e9;
      },
      1, opts);
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  CHECK_THROWS_AS(ode.solve(y0, 0.0, {1.0}), SivError);
}

TEST_CASE("unsorted output times are rejected") {
  LinearOde<double> ode([](double, Eigen::MatrixXd& a) { a.setZero(1, 1); }, 1);
  Eigen::VectorXd y0(1);
  y0 << 1.0;
  CHECK_THROWS_AS(ode.solve(y0, 0.0, {2.0, 1.0}), SivError);
}

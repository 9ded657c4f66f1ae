#include "rate_engine.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

#include "constants.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "parallel.hpp"

namespace siv {

namespace {

double lorentzian_peak_one(double detuning_hz, double fwhm_hz) {
  const double half = 0.5 * fwhm_hz;
  return half * half / (detuning_hz * detuning_hz + half * half);
}

void validate_environment(const Environment& env) {
  if (!std::isfinite(env.temperature) || env.temperature <= 0) {
    throw_config("environment temperature must be > 0 K");
  }
  if (!std::isfinite(env.orbital_coupling) || env.orbital_coupling < 0) {
    throw_config("orbital_coupling must be >= 0");
  }
  if (!std::isfinite(env.spin_t1) || env.spin_t1 <= 0) {
    throw_config("spin_t1 must be > 0 s");
  }
}

}  // namespace

double transition_spontaneous_rate(const LevelScheme& scheme, const Transition& t) {
  const Level& lower = scheme.levels[t.lower];
  const double share = is_upper_branch(lower.manifold) ? scheme.params.branch_share_upper
                                                       : 1.0 - scheme.params.branch_share_upper;
  return t.dipole_weight * share / scheme.params.radiative_lifetime;
}

void RateMatrix::validate() const {
  const int n = dim();
  if (n == 0 || generator.cols() != n) throw_numeric("rate matrix must be square and nonempty");
  double scale = 1.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = generator(i, j);
      if (!std::isfinite(v)) throw_numeric("rate matrix has non-finite entries");
      if (i != j && v < 0) throw_numeric("rate matrix has a negative off-diagonal entry");
      scale = std::max(scale, std::abs(v));
    }
  }
  for (int j = 0; j < n; ++j) {
    const double col = generator.col(j).sum();
    if (std::abs(col) > 1e-12 * scale) {
      throw_numeric("rate matrix column " + std::to_string(j) + " does not balance: " +
                    format_compact(col));
    }
  }
}

std::string Spectrum::to_csv() const {
  CsvTable table;
  table.header = {"detuning_hz", "counts_hz"};
  table.rows.reserve(detuning_hz.size());
  for (std::size_t i = 0; i < detuning_hz.size(); ++i) {
    table.rows.push_back({format_double(detuning_hz[i]), format_double(counts_hz[i])});
  }
  return table.to_string();
}

std::pair<double, double> phonon_rates(double splitting_hz, const Environment& env) {
  if (!(splitting_hz > 0)) throw_invalid("phonon splitting must be > 0 Hz");
  validate_environment(env);
  const double x = kPlanckOverBoltzmann * splitting_hz / env.temperature;
  // n_bar = 1/(e^x - 1); written via expm1 to stay accurate for small x.
  const double occupation = 1.0 / std::expm1(x);
  const double chi = env.orbital_coupling;
  return {chi * (occupation + 1.0), chi * occupation};
}

double calibrate_orbital_coupling(double splitting_hz, double temperature, double t1) {
  if (!(t1 > 0)) throw_config("orbital t1 reference must be > 0 s");
  Environment probe;
  probe.temperature = temperature;
  probe.orbital_coupling = 1.0;
  auto [down, up] = phonon_rates(splitting_hz, probe);
  return 1.0 / (t1 * (down + up));
}

double effective_spin_t1(const Environment& env, const LevelScheme& scheme) {
  validate_environment(env);
  if (!env.spin_t1_is_angle_derived) return env.spin_t1;
  const double eps = scheme.mixing_fraction;
  auto [down, up] = phonon_rates(scheme.params.ground_orbital_splitting, env);
  const double mixed_rate = 4.0 * eps * (1.0 - eps) * (down + up);
  return 1.0 / (1.0 / env.spin_t1 + mixed_rate);
}

RateMatrix build_rate_matrix(const LevelScheme& scheme, const std::vector<Laser>& lasers,
                             const Environment& env) {
  validate_environment(env);
  const int n = scheme.level_count();
  RateMatrix result;
  result.generator = Eigen::MatrixXd::Zero(n, n);
  auto add_rate = [&](int from, int to, double rate) {
    result.generator(to, from) += rate;
    result.generator(from, from) -= rate;
  };

  // (a) spontaneous decay on every optical line
  for (const Transition& t : scheme.transitions) {
    add_rate(t.upper, t.lower, transition_spontaneous_rate(scheme, t));
  }

  // (b) stimulated rates per laser, Lorentzian-scaled over every line in reach
  for (const Laser& laser : lasers) {
    if (!(laser.saturation >= 0)) throw_config("laser saturation must be >= 0");
    if (!(laser.linewidth_fwhm > 0)) throw_config("laser linewidth must be > 0 Hz");
    const Transition& target = transition_lookup(scheme, laser.target);
    const double laser_frequency = target.frequency + laser.detuning;
    for (const Transition& t : scheme.transitions) {
      const double detuning = laser_frequency - t.frequency;
      const double rate = laser.saturation * transition_spontaneous_rate(scheme, t) *
                          lorentzian_peak_one(detuning, laser.linewidth_fwhm);
      if (rate <= 0) continue;
      add_rate(t.lower, t.upper, rate);
      add_rate(t.upper, t.lower, rate);
    }
  }

  // (c) phonon-mediated orbital mixing, ground and excited
  const double chi_excited =
      env.excited_orbital_coupling > 0 ? env.excited_orbital_coupling : env.orbital_coupling;
  for (const Level& upper : scheme.levels) {
    if (!is_upper_branch(upper.manifold)) continue;
    Environment branch_env = env;
    branch_env.orbital_coupling = is_excited(upper.manifold) ? chi_excited : env.orbital_coupling;
    for (const Level& lower : scheme.levels) {
      if (is_upper_branch(lower.manifold)) continue;
      if (is_excited(lower.manifold) != is_excited(upper.manifold)) continue;
      if (lower.spin != upper.spin || lower.nuclear != upper.nuclear) continue;
      const double splitting = upper.energy - lower.energy;
      auto [down, up] = phonon_rates(splitting, branch_env);
      add_rate(upper.index, lower.index, down);
      add_rate(lower.index, upper.index, up);
    }
  }

  // (d) intra-branch spin flips
  const double spin_rate = 0.5 / effective_spin_t1(env, scheme);
  for (const Level& a : scheme.levels) {
    for (const Level& b : scheme.levels) {
      if (a.index >= b.index) continue;
      if (a.manifold != b.manifold || a.nuclear != b.nuclear || a.spin == b.spin) continue;
      add_rate(a.index, b.index, spin_rate);
      add_rate(b.index, a.index, spin_rate);
    }
  }

  result.validate();
  return result;
}

namespace {

PopulationVector clamp_populations(Eigen::VectorXd p, const char* what) {
  const double min_entry = p.minCoeff();
  if (!p.allFinite()) throw_numeric(std::string(what) + " produced non-finite populations");
  if (min_entry < -1e-6) {
    throw_numeric(std::string(what) + " produced population " + format_compact(min_entry));
  }
  p = p.cwiseMax(0.0);
  const double total = p.sum();
  if (!(total > 0)) throw_numeric(std::string(what) + " lost all population");
  p /= total;
  return PopulationVector{std::move(p)};
}

// Equilibrium reached from the uniform state: square the propagator until the
// image of the uniform vector stops moving.
PopulationVector propagator_limit(const RateMatrix& rates) {
  const int n = rates.dim();
  double fastest = 0;
  for (int i = 0; i < n; ++i) fastest = std::max(fastest, std::abs(rates.generator(i, i)));
  if (fastest == 0) return PopulationVector{Eigen::VectorXd::Constant(n, 1.0 / n)};
  const double scale = rates.generator.cwiseAbs().maxCoeff();
  Eigen::MatrixXd propagator = (rates.generator * (1.0 / fastest)).exp();
  Eigen::VectorXd p = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (int k = 0; k < 128; ++k) {
    Eigen::VectorXd next = propagator * p;
    propagator = propagator * propagator;
    const double residual = (rates.generator * next).lpNorm<Eigen::Infinity>();
    if (residual <= 1e-13 * scale) {
      return clamp_populations(next, "steady-state fallback");
    }
    p = std::move(next);
  }
  std::string isolated;
  for (int j = 0; j < n; ++j) {
    const double in_out = rates.generator.col(j).cwiseAbs().sum() +
                          rates.generator.row(j).cwiseAbs().sum();
    if (in_out == 0) {
      if (!isolated.empty()) isolated += ", ";
      isolated += std::to_string(j);
    }
  }
  throw_numeric("steady state did not converge; unreachable levels: " +
                (isolated.empty() ? std::string("none detected") : isolated));
}

}  // namespace

PopulationVector steady_state_populations(const RateMatrix& rates) {
  rates.validate();
  const int n = rates.dim();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_probe(rates.generator);
  rank_probe.setThreshold(1e-10);
  if (rank_probe.rank() < n - 1) return propagator_limit(rates);

  Eigen::MatrixXd stacked(n + 1, n);
  stacked.topRows(n) = rates.generator;
  stacked.row(n).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs[n] = 1.0;
  Eigen::VectorXd p = stacked.colPivHouseholderQr().solve(rhs);
  return clamp_populations(std::move(p), "steady state");
}

std::vector<PopulationVector> evolve_populations(const RateMatrix& rates,
                                                 const PopulationVector& initial,
                                                 const std::vector<double>& times,
                                                 const OdeOptions& opts) {
  rates.validate();
  const int n = rates.dim();
  if (initial.p.size() != n) throw_invalid("initial population has wrong dimension");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0 || (i > 0 && times[i] < times[i - 1])) {
      throw_invalid("times must be sorted ascending and >= 0");
    }
  }

  LinearOde<double> ode([&rates](double, Eigen::MatrixXd& a) { a = rates.generator; }, n, opts);
  ode.set_invariant(Eigen::RowVectorXd::Ones(n));
  auto raw = ode.solve(initial.p, 0.0, times);

  std::vector<PopulationVector> out;
  out.reserve(raw.size());
  for (auto& y : raw) {
    if (std::abs(y.sum() - initial.p.sum()) > 1e-9) {
      throw_numeric("population sum drifted beyond 1e-9 during evolution");
    }
    out.push_back(clamp_populations(std::move(y), "evolution"));
  }
  return out;
}

double fluorescence_rate(const PopulationVector& populations, const LevelScheme& scheme,
                         const DetectorModel& detector) {
  Eigen::VectorXd decay = Eigen::VectorXd::Zero(scheme.level_count());
  for (const Transition& t : scheme.transitions) {
    decay[t.upper] += transition_spontaneous_rate(scheme, t);
  }
  return populations.p.dot(decay) * detector.efficiency;
}

PopulationVector uniform_populations(int dim) {
  return PopulationVector{Eigen::VectorXd::Constant(dim, 1.0 / dim)};
}

Spectrum excitation_spectrum(const LevelScheme& scheme, const Laser& probe,
                             const std::vector<double>& scan_detunings_hz,
                             const std::optional<Laser>& pump, const Environment& env,
                             const DetectorModel& detector, int jobs) {
  for (std::size_t i = 1; i < scan_detunings_hz.size(); ++i) {
    if (scan_detunings_hz[i] <= scan_detunings_hz[i - 1]) {
      throw_invalid("scan grid must be strictly ascending");
    }
  }
  if (!(probe.saturation > 0)) throw_config("probe saturation must be > 0");

  Spectrum spectrum;
  spectrum.detuning_hz = scan_detunings_hz;
  spectrum.counts_hz.assign(scan_detunings_hz.size(), 0.0);

  parallel_for(scan_detunings_hz.size(), jobs, [&](std::size_t k) {
    try {
      std::vector<Laser> lasers;
      Laser point_probe = probe;
      point_probe.detuning = probe.detuning + scan_detunings_hz[k];
      lasers.push_back(point_probe);
      if (pump) lasers.push_back(*pump);
      RateMatrix rates = build_rate_matrix(scheme, lasers, env);
      PopulationVector p = steady_state_populations(rates);
      spectrum.counts_hz[k] = fluorescence_rate(p, scheme, detector) + detector.background;
    } catch (const SivError& e) {
      throw SivError(e.code(), "at grid point " + std::to_string(k) + " (detuning " +
                                   format_compact(scan_detunings_hz[k]) + " Hz): " + e.what());
    }
  });
  return spectrum;
}

}  // namespace siv

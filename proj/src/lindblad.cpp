#include "lindblad.hpp"

#include <cmath>
#include <complex>

#include "constants.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "parallel.hpp"

namespace siv {

namespace {

using Complex = std::complex<double>;

constexpr double kRwaDetuningBound = 10e9;  // Hz; rotating frame validity

struct CollapseChannel {
  Eigen::MatrixXcd op;  // rate already absorbed (sqrt scaling)
};

// vec is column-major: vec(A X B) = (B^T kron A) vec(X).
Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Eigen::MatrixXcd assemble_superoperator(const Eigen::MatrixXcd& hamiltonian,
                                        const std::vector<CollapseChannel>& channels) {
  const int n = static_cast<int>(hamiltonian.rows());
  const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(n, n);
  const Complex img(0.0, 1.0);
  Eigen::MatrixXcd op = -img * (kron(eye, hamiltonian) - kron(hamiltonian.transpose(), eye));
  for (const CollapseChannel& ch : channels) {
    const Eigen::MatrixXcd cdc = ch.op.adjoint() * ch.op;
    op += kron(ch.op.conjugate(), ch.op);
    op -= 0.5 * kron(eye, cdc);
    op -= 0.5 * kron(cdc.transpose(), eye);
  }
  return op;
}

Eigen::MatrixXcd jump(int n, int to, int from, double rate) {
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
  c(to, from) = std::sqrt(rate);
  return c;
}

LambdaConfig shifted(const LambdaConfig& cfg, double offset_hz) {
  LambdaConfig out = cfg;
  out.two_photon_detuning += offset_hz;
  return out;
}

// Population and dephasing channels shared by the lambda reductions: spin
// exchange when the two ground levels are spin partners in one branch, the
// phonon pair when they are the two orbital branches.
void append_ground_channels(std::vector<CollapseChannel>& channels, const LevelScheme& scheme,
                            const Environment& env, int g1, int g2, double gamma_gs, int n,
                            int b1, int b2) {
  const Level& lv1 = scheme.levels[g1];
  const Level& lv2 = scheme.levels[g2];
  if (gamma_gs > 0) {
    // c = sqrt(gamma/2) (|g1><g1| - |g2><g2|) decays the ground coherence at
    // exactly gamma_gs and treats both legs symmetrically.
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
    c(b1, b1) = std::sqrt(0.5 * gamma_gs);
    c(b2, b2) = -std::sqrt(0.5 * gamma_gs);
    channels.push_back({std::move(c)});
  }
  if (lv1.manifold == lv2.manifold && lv1.spin != lv2.spin) {
    const double rate = 0.5 / effective_spin_t1(env, scheme);
    channels.push_back({jump(n, b2, b1, rate)});
    channels.push_back({jump(n, b1, b2, rate)});
  } else if (lv1.manifold != lv2.manifold && env.orbital_coupling > 0) {
    const bool first_is_lower = lv1.energy < lv2.energy;
    const int lo = first_is_lower ? b1 : b2;
    const int hi = first_is_lower ? b2 : b1;
    const double splitting = std::abs(lv2.energy - lv1.energy);
    auto [down, up] = phonon_rates(splitting, env);
    channels.push_back({jump(n, lo, hi, down)});
    channels.push_back({jump(n, hi, lo, up)});
  }
}

}  // namespace

void Liouvillian::validate() const {
  const int n = dim;
  if (op.rows() != n * n || op.cols() != n * n) throw_numeric("malformed Liouvillian");
  // trace preservation: applying L to any Hermitian matrix yields zero trace
  std::uint64_t seed = 12345;
  auto next = [&seed]() {
    seed = seed * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(seed >> 11) / static_cast<double>(1ULL << 53) - 0.5;
  };
  const double scale = op.cwiseAbs().maxCoeff();
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::MatrixXcd h(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) h(i, j) = Complex(next(), next());
    }
    h = Eigen::MatrixXcd((h + h.adjoint()) / 2.0);
    Eigen::VectorXcd v = op * Eigen::Map<const Eigen::VectorXcd>(h.data(), n * n);
    Complex trace = 0;
    for (int i = 0; i < n; ++i) trace += v[i * n + i];
    if (std::abs(trace) > 1e-10 * std::max(1.0, scale)) {
      throw_numeric("Liouvillian is not trace preserving: residual " +
                    format_compact(std::abs(trace)));
    }
  }
}

double gamma_gs_from_t2star(double t2star_s) {
  if (!(t2star_s > 0)) throw_config("t2star must be > 0 s");
  return 1.0 / (2.0 * t2star_s);
}

double gamma_gs_from_environment(const Environment& env, double ground_splitting_hz) {
  auto [down, up] = phonon_rates(ground_splitting_hz, env);
  return 0.5 * (down + up);
}

Liouvillian build_lambda_liouvillian(const LambdaConfig& cfg) {
  if (cfg.leg1 == cfg.leg2) throw_config("lambda legs must be distinct transitions");
  if (cfg.rabi1 < 0 || cfg.rabi2 < 0) throw_config("Rabi rates must be >= 0");
  if (cfg.ground_coherence_rate < 0) throw_config("ground_coherence_rate must be >= 0");
  const Transition& t1 = transition_lookup(cfg.scheme, cfg.leg1);
  const Transition& t2 = transition_lookup(cfg.scheme, cfg.leg2);
  if (t1.upper != t2.upper) {
    throw_config("legs " + cfg.leg1 + " and " + cfg.leg2 +
                 " do not share an upper level: not a Lambda scheme");
  }
  const double delta1 = cfg.one_photon_detuning;
  const double delta2 = cfg.one_photon_detuning - cfg.two_photon_detuning;
  if (std::abs(delta1) > kRwaDetuningBound || std::abs(delta2) > kRwaDetuningBound) {
    throw_config("laser detunings exceed the 10 GHz rotating-frame bound");
  }

  const double gamma_total = 1.0 / cfg.scheme.params.radiative_lifetime;
  const double w1 = transition_spontaneous_rate(cfg.scheme, t1);
  const double w2 = transition_spontaneous_rate(cfg.scheme, t2);

  Liouvillian result;
  if (!cfg.full_scheme) {
    // Minimal closed three-level system {g1, g2, e}: decay out of the shared
    // upper level is folded back onto the two legs in proportion to their
    // dipole weights, standing in for recycling through the spectator levels.
    const int n = 3;
    result.dim = n;
    result.basis = {t1.lower, t2.lower, t1.upper};
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
    h(1, 1) = -kTwoPi * cfg.two_photon_detuning;
    h(2, 2) = -kTwoPi * delta1;
    h(0, 2) = h(2, 0) = 0.5 * cfg.rabi1;
    h(1, 2) = h(2, 1) = 0.5 * cfg.rabi2;

    std::vector<CollapseChannel> channels;
    const double split = w1 + w2 > 0 ? gamma_total / (w1 + w2) : 0.0;
    if (w1 > 0) channels.push_back({jump(n, 0, 2, w1 * split)});
    if (w2 > 0) channels.push_back({jump(n, 1, 2, w2 * split)});
    append_ground_channels(channels, cfg.scheme, cfg.env, t1.lower, t2.lower,
                           cfg.ground_coherence_rate, n, 0, 1);

    result.op = assemble_superoperator(h, channels);
    result.emission = Eigen::VectorXd::Zero(n);
    result.emission[2] = gamma_total;
    return result;
  }

  // Full-scheme solve. Frame choice: ground levels rotate at their own
  // energies (the probe-leg lower level carries the two-photon detuning),
  // excited levels at energy + one-photon detuning. Undriven optical
  // couplings enter only as collapse channels, which are frame invariant.
  const int n = cfg.scheme.level_count();
  result.dim = n;
  result.basis.resize(n);
  for (int i = 0; i < n; ++i) result.basis[i] = i;

  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
  for (const Level& lvl : cfg.scheme.levels) {
    if (is_excited(lvl.manifold)) {
      h(lvl.index, lvl.index) = -kTwoPi * delta1;
    } else if (lvl.index == t2.lower) {
      h(lvl.index, lvl.index) = -kTwoPi * cfg.two_photon_detuning;
    }
  }
  h(t1.lower, t1.upper) = h(t1.upper, t1.lower) = 0.5 * cfg.rabi1;
  h(t2.lower, t2.upper) = h(t2.upper, t2.lower) = 0.5 * cfg.rabi2;

  std::vector<CollapseChannel> channels;
  result.emission = Eigen::VectorXd::Zero(n);
  for (const Transition& t : cfg.scheme.transitions) {
    const double rate = transition_spontaneous_rate(cfg.scheme, t);
    if (rate <= 0) continue;
    channels.push_back({jump(n, t.lower, t.upper, rate)});
    result.emission[t.upper] += rate;
  }
  const double chi_excited = cfg.env.excited_orbital_coupling > 0
                                 ? cfg.env.excited_orbital_coupling
                                 : cfg.env.orbital_coupling;
  for (const Level& upper : cfg.scheme.levels) {
    if (!is_upper_branch(upper.manifold)) continue;
    Environment branch_env = cfg.env;
    branch_env.orbital_coupling =
        is_excited(upper.manifold) ? chi_excited : cfg.env.orbital_coupling;
    if (branch_env.orbital_coupling <= 0) continue;
    for (const Level& lower : cfg.scheme.levels) {
      if (is_upper_branch(lower.manifold)) continue;
      if (is_excited(lower.manifold) != is_excited(upper.manifold)) continue;
      if (lower.spin != upper.spin || lower.nuclear != upper.nuclear) continue;
      auto [down, up] = phonon_rates(upper.energy - lower.energy, branch_env);
      channels.push_back({jump(n, lower.index, upper.index, down)});
      channels.push_back({jump(n, upper.index, lower.index, up)});
    }
  }
  const double spin_rate = 0.5 / effective_spin_t1(cfg.env, cfg.scheme);
  for (const Level& a : cfg.scheme.levels) {
    for (const Level& b : cfg.scheme.levels) {
      if (a.index >= b.index) continue;
      if (a.manifold != b.manifold || a.nuclear != b.nuclear || a.spin == b.spin) continue;
      channels.push_back({jump(n, a.index, b.index, spin_rate)});
      channels.push_back({jump(n, b.index, a.index, spin_rate)});
    }
  }
  if (cfg.ground_coherence_rate > 0) {
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
    c(t1.lower, t1.lower) = std::sqrt(0.5 * cfg.ground_coherence_rate);
    c(t2.lower, t2.lower) = -std::sqrt(0.5 * cfg.ground_coherence_rate);
    channels.push_back({std::move(c)});
  }

  result.op = assemble_superoperator(h, channels);
  return result;
}

void check_density_matrix(const Eigen::MatrixXcd& rho) {
  const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-10) {
    throw_numeric("density matrix is not Hermitian: residual " + format_compact(herm));
  }
  const double trace_err = std::abs(rho.trace() - Complex(1.0, 0.0));
  if (trace_err > 1e-9) {
    throw_numeric("density matrix trace deviates from 1 by " + format_compact(trace_err));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig((rho + rho.adjoint()) / 2.0);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < -1e-8) {
    throw_numeric("density matrix has negative eigenvalue " + format_compact(min_eig));
  }
}

Eigen::MatrixXcd steady_state_dm(const Liouvillian& liouville) {
  const int n = liouville.dim;
  const int m = n * n;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> rank_probe(liouville.op);
  rank_probe.setThreshold(1e-10);
  const int deficiency = m - static_cast<int>(rank_probe.rank());
  if (deficiency > 1) {
    throw_numeric("Liouvillian null space is degenerate (dimension " +
                  std::to_string(deficiency) + "); steady state is not unique");
  }

  Eigen::MatrixXcd stacked(m + 1, m);
  stacked.topRows(m) = liouville.op;
  stacked.row(m).setZero();
  for (int i = 0; i < n; ++i) stacked(m, i * n + i) = 1.0;
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(m + 1);
  rhs[m] = 1.0;
  Eigen::VectorXcd x = stacked.colPivHouseholderQr().solve(rhs);

  Eigen::MatrixXcd rho = Eigen::Map<Eigen::MatrixXcd>(x.data(), n, n);
  rho = Eigen::MatrixXcd((rho + rho.adjoint()) / 2.0);
  check_density_matrix(rho);
  rho /= rho.trace().real();
  return rho;
}

std::vector<Eigen::MatrixXcd> evolve_dm(const Liouvillian& liouville,
                                        const Eigen::MatrixXcd& rho0,
                                        const std::vector<double>& times,
                                        const OdeOptions& opts) {
  const int n = liouville.dim;
  if (rho0.rows() != n || rho0.cols() != n) throw_invalid("rho0 has wrong dimension");
  check_density_matrix(rho0);

  LinearOde<Complex> ode([&liouville](double, Eigen::MatrixXcd& a) { a = liouville.op; }, n * n,
                         opts);
  Eigen::Matrix<Complex, 1, Eigen::Dynamic> trace_row =
      Eigen::Matrix<Complex, 1, Eigen::Dynamic>::Zero(n * n);
  for (int i = 0; i < n; ++i) trace_row[i * n + i] = 1.0;
  ode.set_invariant(trace_row);

  Eigen::VectorXcd v0 = Eigen::Map<const Eigen::VectorXcd>(rho0.data(), n * n);
  auto raw = ode.solve(v0, 0.0, times);

  std::vector<Eigen::MatrixXcd> out;
  out.reserve(raw.size());
  for (auto& v : raw) {
    Eigen::MatrixXcd rho = Eigen::Map<Eigen::MatrixXcd>(v.data(), n, n);
    check_density_matrix(rho);
    out.push_back(Eigen::MatrixXcd((rho + rho.adjoint()) / 2.0));
  }
  return out;
}

double dm_fluorescence(const Liouvillian& liouville, const Eigen::MatrixXcd& rho,
                       const DetectorModel& detector) {
  double total = 0;
  for (int i = 0; i < liouville.dim; ++i) {
    total += liouville.emission[i] * rho(i, i).real();
  }
  return total * detector.efficiency;
}

Spectrum cpt_spectrum(const LambdaConfig& cfg, const std::vector<double>& two_photon_scan_hz,
                      const DetectorModel& detector, int jobs) {
  for (std::size_t i = 1; i < two_photon_scan_hz.size(); ++i) {
    if (two_photon_scan_hz[i] <= two_photon_scan_hz[i - 1]) {
      throw_invalid("two-photon scan grid must be strictly ascending");
    }
  }
  Spectrum spectrum;
  spectrum.detuning_hz = two_photon_scan_hz;
  spectrum.counts_hz.assign(two_photon_scan_hz.size(), 0.0);
  parallel_for(two_photon_scan_hz.size(), jobs, [&](std::size_t k) {
    try {
      LambdaConfig point = cfg;
      point.two_photon_detuning = cfg.two_photon_detuning + two_photon_scan_hz[k];
      Liouvillian liouville = build_lambda_liouvillian(point);
      Eigen::MatrixXcd rho = steady_state_dm(liouville);
      spectrum.counts_hz[k] = dm_fluorescence(liouville, rho, detector) + detector.background;
    } catch (const SivError& e) {
      throw SivError(e.code(), "at grid point " + std::to_string(k) + " (two-photon detuning " +
                                   format_compact(two_photon_scan_hz[k]) + " Hz): " + e.what());
    }
  });
  return spectrum;
}

Spectrum hyperfine_double_dip(const LambdaConfig& cfg, double coupling_a_hz,
                              const std::vector<double>& two_photon_scan_hz,
                              const DetectorModel& detector, int jobs) {
  if (!(coupling_a_hz >= 0)) throw_config("hyperfine coupling must be >= 0 Hz");
  // The nuclear spin is conserved by every optical and relaxation channel, so
  // the 16-level problem factorizes into the two nuclear sectors. Each sector
  // sees the electronic Lambda displaced by -+A in two-photon detuning; equal
  // nuclear populations give the even sum.
  Spectrum plus = cpt_spectrum(shifted(cfg, -coupling_a_hz), two_photon_scan_hz, detector, jobs);
  Spectrum minus = cpt_spectrum(shifted(cfg, +coupling_a_hz), two_photon_scan_hz, detector, jobs);
  Spectrum out;
  out.detuning_hz = two_photon_scan_hz;
  out.counts_hz.resize(two_photon_scan_hz.size());
  for (std::size_t i = 0; i < out.counts_hz.size(); ++i) {
    out.counts_hz[i] = 0.5 * (plus.counts_hz[i] + minus.counts_hz[i]);
  }
  return out;
}

Spectrum orbital_lambda_spectrum(const LevelScheme& scheme, double pump_rabi, double probe_rabi,
                                 double pump_detuning_hz,
                                 const std::vector<double>& probe_scan_hz,
                                 const Environment& env, const DetectorModel& detector,
                                 double extra_orbital_dephasing, int jobs) {
  if (scheme.field.magnitude != 0.0) {
    throw_config("orbital lambda spectrum requires a zero-field scheme");
  }
  // At zero field the spin sectors are degenerate copies; reduce to one:
  // legs are the spin-up C and D lines sharing the excited-lower level.
  std::string suffix = scheme.hyperfine.enabled ? "1+" : "1";
  LambdaConfig cfg;
  cfg.scheme = scheme;
  cfg.leg1 = "C" + suffix;
  cfg.leg2 = "D" + suffix;
  // pick the pair that actually shares an upper level among the degenerate labels
  const Transition& c1 = transition_lookup(scheme, cfg.leg1);
  for (const Transition& t : scheme.transitions) {
    if (t.label[0] == 'D' && t.upper == c1.upper &&
        scheme.levels[t.lower].nuclear == scheme.levels[c1.lower].nuclear) {
      cfg.leg2 = t.label;
      break;
    }
  }
  cfg.rabi1 = pump_rabi;
  cfg.rabi2 = probe_rabi;
  cfg.one_photon_detuning = pump_detuning_hz;
  cfg.ground_coherence_rate = extra_orbital_dephasing;
  cfg.env = env;

  std::vector<double> delta_grid;
  delta_grid.reserve(probe_scan_hz.size());
  for (auto it = probe_scan_hz.rbegin(); it != probe_scan_hz.rend(); ++it) {
    delta_grid.push_back(pump_detuning_hz - *it);
  }
  Spectrum scanned = cpt_spectrum(cfg, delta_grid, detector, jobs);

  Spectrum out;
  out.detuning_hz = probe_scan_hz;
  out.counts_hz.assign(probe_scan_hz.size(), 0.0);
  for (std::size_t i = 0; i < probe_scan_hz.size(); ++i) {
    out.counts_hz[i] = scanned.counts_hz[probe_scan_hz.size() - 1 - i];
  }
  return out;
}

}  // namespace siv

#include "runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "constants.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "fit.hpp"
#include "hash.hpp"
#include "lindblad.hpp"
#include "parallel.hpp"
#include "presets.hpp"
#include "pulse.hpp"
#include "svg.hpp"

namespace siv {

double RunSummary::value(const std::string& key) const {
  for (const auto& [k, v] : values) {
    if (k == key) return v;
  }
  throw_invalid("run summary has no value '" + key + "'");
}

namespace {

struct ScenarioResult {
  std::string data_csv;
  std::string fit_text;
  std::vector<std::pair<std::string, double>> summary;
  std::vector<PlotSeries> plot;
  std::string plot_title, x_label = "x", y_label = "y";
  std::vector<std::pair<std::string, std::string>> extra_files;
};

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw_config("scan grid needs at least 2 points and to > from");
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

const std::vector<std::string>& global_keys() {
  static const std::vector<std::string> keys = {
      "scenario",
      "scheme.ground_orbital_splitting", "scheme.excited_orbital_splitting",
      "scheme.zpl_frequency", "scheme.g_ground_upper", "scheme.g_ground_lower",
      "scheme.g_excited_upper", "scheme.g_excited_lower", "scheme.radiative_lifetime",
      "scheme.branching_zpl", "scheme.branch_share_upper",
      "field.magnitude", "field.polar_angle", "field.mixing_scale",
      "hyperfine.enabled", "hyperfine.coupling",
      "env.temperature", "env.orbital_coupling", "env.excited_orbital_coupling",
      "env.orbital_t1_ref", "env.orbital_t1_ref_temperature", "env.spin_t1",
      "env.spin_t1_angle_derived",
      "detector.efficiency", "detector.bin_width", "detector.background",
      "detector.shot_noise", "seed",
  };
  return keys;
}

std::vector<std::string> scenario_keys(Scenario scenario) {
  switch (scenario) {
    case Scenario::Spectrum:
      return {"spectrum.reference", "spectrum.from", "spectrum.to", "spectrum.points",
              "spectrum.probe.saturation", "spectrum.probe.linewidth", "spectrum.probe.detuning",
              "spectrum.pump.enabled", "spectrum.pump.target", "spectrum.pump.detuning",
              "spectrum.pump.saturation", "spectrum.pump.linewidth",
              "spectrum.feature_prominence"};
    case Scenario::Cpt:
    case Scenario::Hyperfine:
      return {"cpt.leg1", "cpt.leg2", "cpt.pump_rabi", "cpt.probe_rabi",
              "cpt.one_photon_detuning", "cpt.gamma_mode", "cpt.gamma_gs", "cpt.t2_star",
              "cpt.scan.from", "cpt.scan.to", "cpt.scan.points", "cpt.power_scales",
              "cpt.full_scheme", "cpt.fit_window"};
    case Scenario::OrbitalCpt:
      return {"ocpt.pump_rabi", "ocpt.probe_rabi", "ocpt.pump_detuning", "ocpt.scan.from",
              "ocpt.scan.to", "ocpt.scan.points", "ocpt.extra_dephasing", "ocpt.fit_window"};
    case Scenario::SpinT1:
      return {"spint1.init.target", "spint1.init.saturation", "spint1.init.linewidth",
              "spint1.init.duration", "spint1.read.target", "spint1.read.saturation",
              "spint1.read.linewidth", "spint1.read.duration", "spint1.gap", "spint1.rise",
              "spint1.extinction", "spint1.repetitions", "spint1.taus", "spint1.read_mode",
              "spint1.sequence_file", "spint1.tail"};
    case Scenario::OrbitalT1:
      return {"orbt1.gaps", "orbt1.pulse_width", "orbt1.saturation", "orbt1.linewidth",
              "orbt1.repetitions"};
    case Scenario::Sweep:
      return {"sweep.scenario", "sweep.axis", "sweep.values"};
  }
  return {};
}

void validate_config_keys(const RunConfig& config,
                          const std::vector<std::string>& extra_allowed = {}) {
  std::vector<std::string> known = global_keys();
  auto extend = [&known](const std::vector<std::string>& more) {
    known.insert(known.end(), more.begin(), more.end());
  };
  extend(scenario_keys(config.scenario));
  extend(extra_allowed);
  if (config.scenario == Scenario::Sweep) {
    const Scenario inner = scenario_from_name(config.raw.get_string("sweep.scenario"));
    if (inner == Scenario::Sweep) throw_config("sweep.scenario cannot itself be 'sweep'");
    extend(scenario_keys(inner));
  }
  config.raw.validate_keys(known);
}

// ---------------------------------------------------------------------------
// spectrum

ScenarioResult run_spectrum(const RunConfig& config, int jobs) {
  const ConfigMap& map = config.raw;
  LevelScheme scheme = config.build_scheme();

  Laser probe;
  probe.target = map.has("spectrum.reference") ? map.get_string("spectrum.reference") : "D2";
  probe.detuning = map.get_quantity("spectrum.probe.detuning", UnitKind::Frequency, 0.0);
  probe.saturation = map.get_number("spectrum.probe.saturation", 10.0);
  probe.linewidth_fwhm = map.get_quantity("spectrum.probe.linewidth", UnitKind::Frequency, 94e6);

  std::optional<Laser> pump;
  if (map.get_bool("spectrum.pump.enabled", false)) {
    Laser p;
    p.target = map.get_string("spectrum.pump.target");
    p.detuning = map.get_quantity("spectrum.pump.detuning", UnitKind::Frequency, 0.0);
    p.saturation = map.get_number("spectrum.pump.saturation", 10.0);
    p.linewidth_fwhm = map.get_quantity("spectrum.pump.linewidth", UnitKind::Frequency, 94e6);
    pump = p;
  }

  auto grid = linspace(map.get_quantity("spectrum.from", UnitKind::Frequency, -16e9),
                       map.get_quantity("spectrum.to", UnitKind::Frequency, 16e9),
                       static_cast<int>(map.get_number("spectrum.points", 400)));
  Spectrum spectrum =
      excitation_spectrum(scheme, probe, grid, pump, config.env, config.detector, jobs);

  const double prominence = map.get_number("spectrum.feature_prominence", 0.01);
  auto features = find_spectral_features(spectrum, prominence);

  ScenarioResult result;
  result.data_csv = spectrum.to_csv();
  result.summary.emplace_back("feature_count", static_cast<double>(features.size()));
  std::string fit_text = "feature_count = " + std::to_string(features.size()) + "\n";
  const double reference_freq = transition_lookup(scheme, probe.target).frequency;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    fit_text += "feature_" + std::to_string(i) + "_position_hz = " + format_double(f.position) + "\n";
    fit_text += "feature_" + std::to_string(i) + "_kind = " + (f.is_dip ? "dip" : "peak") + "\n";
    fit_text += "feature_" + std::to_string(i) + "_prominence = " + format_double(f.prominence) + "\n";
    // annotate with the nearest line when it is close on the grid
    const double absolute = reference_freq + probe.detuning + f.position;
    const Transition* best = nullptr;
    for (const Transition& t : scheme.transitions) {
      if (!best || std::abs(t.frequency - absolute) < std::abs(best->frequency - absolute)) {
        best = &t;
      }
    }
    const double step = grid.size() > 1 ? grid[1] - grid[0] : 0;
    if (best && std::abs(best->frequency - absolute) < 3 * step) {
      fit_text += "feature_" + std::to_string(i) + "_line = " + best->label + "\n";
    }
  }
  result.fit_text = fit_text;
  result.plot = {{spectrum.detuning_hz, spectrum.counts_hz, "#1f77b4", false}};
  result.plot_title = "excitation spectrum";
  result.x_label = "detuning (Hz)";
  result.y_label = "counts (Hz)";
  return result;
}

// ---------------------------------------------------------------------------
// cpt family

LambdaConfig lambda_from_config(const RunConfig& config) {
  const ConfigMap& map = config.raw;
  LambdaConfig cfg;
  // the hyperfine doubling is composed from the two displaced electronic
  // Lambda schemes, so the reduction always works on the electronic scheme
  HyperfineConfig electronic;
  cfg.scheme = build_level_scheme(config.params, config.field, electronic);
  cfg.leg1 = map.has("cpt.leg1") ? map.get_string("cpt.leg1") : "D2";
  cfg.leg2 = map.has("cpt.leg2") ? map.get_string("cpt.leg2") : "D1";
  cfg.rabi1 = kTwoPi * map.get_quantity("cpt.pump_rabi", UnitKind::Frequency, 8e6);
  cfg.rabi2 = kTwoPi * map.get_quantity("cpt.probe_rabi", UnitKind::Frequency, 4e6);
  cfg.one_photon_detuning = map.get_quantity("cpt.one_photon_detuning", UnitKind::Frequency, 0.0);
  cfg.env = config.env;
  cfg.full_scheme = map.get_bool("cpt.full_scheme", false);

  const std::string mode = map.has("cpt.gamma_mode") ? map.get_string("cpt.gamma_mode") : "t2star";
  if (mode == "t2star") {
    cfg.ground_coherence_rate =
        gamma_gs_from_t2star(map.get_quantity("cpt.t2_star", UnitKind::Time, 35e-9));
  } else if (mode == "orbital") {
    cfg.ground_coherence_rate =
        gamma_gs_from_environment(config.env, config.params.ground_orbital_splitting);
  } else if (mode == "explicit") {
    cfg.ground_coherence_rate = map.require_quantity("cpt.gamma_gs", UnitKind::Frequency);
  } else {
    throw_config("cpt.gamma_mode must be t2star, orbital, or explicit");
  }
  return cfg;
}

FitResult fit_dip_window(const Spectrum& spectrum, double window_half_width) {
  if (window_half_width <= 0) return fit_lorentzian_dip(spectrum);
  // search the interior so a shallow dip is not confused with the optical
  // envelope rolling off toward the scan edges
  const std::size_t n = spectrum.counts_hz.size();
  std::size_t imin = n / 5;
  for (std::size_t i = n / 5; i < n - n / 5; ++i) {
    if (spectrum.counts_hz[i] < spectrum.counts_hz[imin]) imin = i;
  }
  const double center = spectrum.detuning_hz[imin];
  Spectrum windowed;
  for (std::size_t i = 0; i < spectrum.counts_hz.size(); ++i) {
    if (std::abs(spectrum.detuning_hz[i] - center) <= window_half_width) {
      windowed.detuning_hz.push_back(spectrum.detuning_hz[i]);
      windowed.counts_hz.push_back(spectrum.counts_hz[i]);
    }
  }
  return fit_lorentzian_dip(windowed);
}

ScenarioResult run_cpt(const RunConfig& config, int jobs) {
  const ConfigMap& map = config.raw;
  LambdaConfig cfg = lambda_from_config(config);
  auto grid = linspace(map.get_quantity("cpt.scan.from", UnitKind::Frequency, -40e6),
                       map.get_quantity("cpt.scan.to", UnitKind::Frequency, 40e6),
                       static_cast<int>(map.get_number("cpt.scan.points", 401)));
  const double fit_window = map.get_quantity("cpt.fit_window", UnitKind::Frequency, 0.0);

  Spectrum spectrum = cpt_spectrum(cfg, grid, config.detector, jobs);
  FitResult dip = fit_dip_window(spectrum, fit_window);

  ScenarioResult result;
  result.data_csv = spectrum.to_csv();
  std::string fit_text = dip.to_text();
  const double fwhm = dip.param("fwhm");
  fit_text += "t2_star_s = " + format_double(t2_star_from_fwhm(fwhm)) + "\n";
  result.summary = {{"fwhm_hz", fwhm},
                    {"center_hz", dip.param("center")},
                    {"depth", dip.param("depth")},
                    {"baseline", dip.param("baseline")},
                    {"t2_star_s", t2_star_from_fwhm(fwhm)}};

  auto scales = map.get_quantity_list("cpt.power_scales", UnitKind::None);
  if (!scales.empty()) {
    CsvTable series;
    series.header = {"power", "fwhm_hz", "depth", "center_hz"};
    std::vector<XY> power_fwhm;
    for (double scale : scales) {
      if (!(scale > 0)) throw_config("cpt.power_scales entries must be > 0");
      LambdaConfig point = cfg;
      point.rabi1 = cfg.rabi1 * std::sqrt(scale);
      point.rabi2 = cfg.rabi2 * std::sqrt(scale);
      Spectrum s = cpt_spectrum(point, grid, config.detector, jobs);
      FitResult f = fit_dip_window(s, fit_window);
      series.rows.push_back({format_double(scale), format_double(f.param("fwhm")),
                             format_double(f.param("depth")), format_double(f.param("center"))});
      power_fwhm.push_back({scale, f.param("fwhm")});
    }
    result.extra_files.emplace_back("dip_fit.csv", series.to_string());
    FitResult zero = extrapolate_zero_power(power_fwhm);
    const double zero_fwhm = zero.param("zero_power_fwhm");
    fit_text += "zero_power_fwhm_hz = " + format_double(zero_fwhm) + "\n";
    fit_text += "zero_power_fwhm_err_hz = " + format_double(zero.std_error("zero_power_fwhm")) + "\n";
    fit_text += "zero_power_t2_star_s = " + format_double(t2_star_from_fwhm(zero_fwhm)) + "\n";
    result.summary.emplace_back("zero_power_fwhm_hz", zero_fwhm);
    result.summary.emplace_back("zero_power_t2_star_s", t2_star_from_fwhm(zero_fwhm));
  }
  result.fit_text = fit_text;
  result.plot = {{spectrum.detuning_hz, spectrum.counts_hz, "#1f77b4", false}};
  result.plot_title = "CPT dip";
  result.x_label = "two-photon detuning (Hz)";
  result.y_label = "counts (Hz)";
  return result;
}

ScenarioResult run_hyperfine(const RunConfig& config, int jobs) {
  const ConfigMap& map = config.raw;
  LambdaConfig cfg = lambda_from_config(config);
  auto grid = linspace(map.get_quantity("cpt.scan.from", UnitKind::Frequency, -90e6),
                       map.get_quantity("cpt.scan.to", UnitKind::Frequency, 90e6),
                       static_cast<int>(map.get_number("cpt.scan.points", 721)));
  Spectrum spectrum =
      hyperfine_double_dip(cfg, config.hyperfine.coupling_a, grid, config.detector, jobs);

  auto features = find_spectral_features(spectrum, 0.1);
  std::vector<double> dips;
  for (const auto& f : features) {
    if (f.is_dip) dips.push_back(f.position);
  }

  ScenarioResult result;
  result.data_csv = spectrum.to_csv();
  std::string fit_text = "dip_count = " + std::to_string(dips.size()) + "\n";
  for (std::size_t i = 0; i < dips.size(); ++i) {
    fit_text += "dip_" + std::to_string(i) + "_position_hz = " + format_double(dips[i]) + "\n";
  }
  result.summary.emplace_back("dip_count", static_cast<double>(dips.size()));
  if (dips.size() == 2) {
    const double separation = dips[1] - dips[0];
    fit_text += "separation_hz = " + format_double(separation) + "\n";
    fit_text += "implied_coupling_hz = " + format_double(0.5 * separation) + "\n";
    result.summary.emplace_back("separation_hz", separation);
    result.summary.emplace_back("implied_coupling_hz", 0.5 * separation);
  }
  result.fit_text = fit_text;
  result.plot = {{spectrum.detuning_hz, spectrum.counts_hz, "#1f77b4", false}};
  result.plot_title = "hyperfine double dip";
  result.x_label = "two-photon detuning (Hz)";
  result.y_label = "counts (Hz)";
  return result;
}

ScenarioResult run_orbital_cpt(const RunConfig& config, int jobs) {
  const ConfigMap& map = config.raw;
  LevelScheme scheme = config.build_scheme();
  const double pump_rabi = kTwoPi * map.get_quantity("ocpt.pump_rabi", UnitKind::Frequency, 15e6);
  const double probe_rabi = kTwoPi * map.get_quantity("ocpt.probe_rabi", UnitKind::Frequency, 15e6);
  const double pump_detuning = map.get_quantity("ocpt.pump_detuning", UnitKind::Frequency, 0.0);
  const double extra = map.get_quantity("ocpt.extra_dephasing", UnitKind::Frequency, 0.0);
  auto grid = linspace(pump_detuning + map.get_quantity("ocpt.scan.from", UnitKind::Frequency, -40e6),
                       pump_detuning + map.get_quantity("ocpt.scan.to", UnitKind::Frequency, 40e6),
                       static_cast<int>(map.get_number("ocpt.scan.points", 321)));
  Spectrum spectrum = orbital_lambda_spectrum(scheme, pump_rabi, probe_rabi, pump_detuning, grid,
                                              config.env, config.detector, extra, jobs);
  const double fit_window = map.get_quantity("ocpt.fit_window", UnitKind::Frequency, 0.0);
  FitResult dip = fit_dip_window(spectrum, fit_window);

  ScenarioResult result;
  result.data_csv = spectrum.to_csv();
  std::string fit_text = dip.to_text();
  const double contrast = dip.param("depth") / dip.param("baseline");
  fit_text += "contrast = " + format_double(contrast) + "\n";
  result.fit_text = fit_text;
  result.summary = {{"fwhm_hz", dip.param("fwhm")},
                    {"center_hz", dip.param("center")},
                    {"contrast", contrast}};
  result.plot = {{spectrum.detuning_hz, spectrum.counts_hz, "#1f77b4", false}};
  result.plot_title = "orbital Lambda dip";
  result.x_label = "probe detuning (Hz)";
  result.y_label = "counts (Hz)";
  return result;
}

// ---------------------------------------------------------------------------
// relaxation experiments

PulseSequence spin_template_from_config(const RunConfig& config, const LevelScheme& scheme) {
  const ConfigMap& map = config.raw;
  if (map.has("spint1.sequence_file")) {
    return parse_sequence(read_text_file(map.get_string("spint1.sequence_file")), &scheme);
  }
  Laser init;
  init.target = map.get_string("spint1.init.target");
  init.saturation = map.get_number("spint1.init.saturation", 1.0);
  init.linewidth_fwhm = map.get_quantity("spint1.init.linewidth", UnitKind::Frequency, 94e6);
  Laser read;
  read.target = map.get_string("spint1.read.target");
  read.saturation = map.get_number("spint1.read.saturation", 1.0);
  read.linewidth_fwhm = map.get_quantity("spint1.read.linewidth", UnitKind::Frequency, 94e6);

  const double init_duration = map.require_quantity("spint1.init.duration", UnitKind::Time);
  const double read_duration = map.require_quantity("spint1.read.duration", UnitKind::Time);
  const double gap = map.get_quantity("spint1.gap", UnitKind::Time, init_duration * 0.5);
  const double tail = map.get_quantity("spint1.tail", UnitKind::Time, 0.0);

  PulseSequence seq;
  seq.rise_fall_time = map.get_quantity("spint1.rise", UnitKind::Time, 60e-9);
  seq.extinction_db = map.get_quantity("spint1.extinction", UnitKind::Decibel, 60.0);
  seq.repetitions = static_cast<long>(map.get_number("spint1.repetitions", 1));
  const double read_on = init_duration + gap;
  if (init.target == read.target && init.saturation == read.saturation) {
    PulseChannel channel;
    channel.name = "d";
    channel.laser = init;
    channel.events = {{0.0, init_duration}, {read_on, read_on + read_duration}};
    seq.channels = {channel};
  } else {
    PulseChannel a{"init", init, {{0.0, init_duration}}};
    PulseChannel b{"read", read, {{read_on, read_on + read_duration}}};
    seq.channels = {a, b};
  }
  seq.total_duration = read_on + read_duration + tail;
  // validate laser labels against the scheme
  for (const PulseChannel& channel : seq.channels) transition_lookup(scheme, channel.laser.target);
  return seq;
}

ScenarioResult run_spin_t1(const RunConfig& config, int jobs) {
  const ConfigMap& map = config.raw;
  LevelScheme scheme = config.build_scheme();
  PulseSequence tmpl = spin_template_from_config(config, scheme);
  auto taus = map.get_quantity_list("spint1.taus", UnitKind::Time);
  if (taus.size() < 4) throw_config("spint1.taus needs at least 4 values");

  auto points = spin_t1_experiment(scheme, config.env, config.detector, taus, tmpl, jobs);
  std::vector<XY> xy;
  for (const TauPoint& p : points) xy.push_back({p.tau, p.h});
  FitResult fit = fit_exponential(xy);

  const std::string mode_name =
      map.has("spint1.read_mode") ? map.get_string("spint1.read_mode") : "bright";
  ReadMode mode;
  if (mode_name == "bright") mode = ReadMode::Bright;
  else if (mode_name == "dark") mode = ReadMode::Dark;
  else throw_config("spint1.read_mode must be bright or dark");

  // fidelity uses the absolute leading-edge levels: the within-pulse plateau
  // is part of the detected edge signal, not background
  double plateau_bar = 0;
  for (const TauPoint& p : points) plateau_bar += p.plateau;
  plateau_bar /= static_cast<double>(points.size());
  const double h0 = fit.param("a") + fit.param("b");
  bool clamped = false;
  double fidelity = std::numeric_limits<double>::quiet_NaN();
  if (fit.param("a") + plateau_bar > 0) {
    fidelity = initialization_fidelity(h0 + plateau_bar, fit.param("a") + plateau_bar, mode,
                                       &clamped);
  }

  ScenarioResult result;
  result.data_csv = tau_points_to_csv(points);
  std::string fit_text = fit.to_text();
  fit_text += "t1_s = " + format_double(fit.param("tau")) + "\n";
  fit_text += "rate_hz = " + format_double(1.0 / fit.param("tau")) + "\n";
  fit_text += "h0 = " + format_double(h0) + "\n";
  fit_text += "h0_absolute = " + format_double(h0 + plateau_bar) + "\n";
  fit_text += "a_absolute = " + format_double(fit.param("a") + plateau_bar) + "\n";
  fit_text += "read_mode = " + mode_name + "\n";
  if (std::isfinite(fidelity)) {
    fit_text += "fidelity = " + format_double(fidelity) + "\n";
  } else {
    fit_text += "flag = fidelity_unavailable\n";
  }
  if (clamped) fit_text += "flag = fidelity_clamped\n";
  result.fit_text = fit_text;
  result.summary = {{"t1_s", fit.param("tau")},
                    {"t1_err_s", fit.std_error("tau")},
                    {"rate_hz", 1.0 / fit.param("tau")},
                    {"h0", h0},
                    {"a", fit.param("a")}};
  if (std::isfinite(fidelity)) result.summary.emplace_back("fidelity", fidelity);

  // example trace for the first tau
  {
    PulseSequence seq = tmpl;
    RateMatrix dark = build_rate_matrix(scheme, {}, config.env);
    PopulationVector thermal = steady_state_populations(dark);
    TimeTrace trace = simulate_sequence(scheme, seq, config.env, config.detector, thermal);
    result.extra_files.emplace_back("trace_example.csv", trace_to_csv(trace));
  }

  PlotSeries data{{}, {}, "#1f77b4", true};
  for (const TauPoint& p : points) {
    data.x.push_back(p.tau);
    data.y.push_back(p.h);
  }
  PlotSeries curve{{}, {}, "#d62728", false};
  for (int i = 0; i <= 200; ++i) {
    const double t = taus.front() + (taus.back() - taus.front()) * i / 200.0;
    curve.x.push_back(t);
    curve.y.push_back(fit.param("a") + fit.param("b") * std::exp(-t / fit.param("tau")));
  }
  result.plot = {data, curve};
  result.plot_title = "spin relaxation";
  result.x_label = "tau (s)";
  result.y_label = "leading edge h (counts)";
  return result;
}

ScenarioResult run_orbital_t1(const RunConfig& config, int jobs) {
  const ConfigMap& map = config.raw;
  LevelScheme scheme = config.build_scheme();
  auto gaps = map.get_quantity_list("orbt1.gaps", UnitKind::Time);
  if (gaps.size() < 4) throw_config("orbt1.gaps needs at least 4 values");
  const double pulse_width = map.get_quantity("orbt1.pulse_width", UnitKind::Time, 80e-9);
  Laser laser{"D1", 0.0, map.get_number("orbt1.saturation", 5.0),
              map.get_quantity("orbt1.linewidth", UnitKind::Frequency, 94e6)};
  const long repetitions = static_cast<long>(map.get_number("orbt1.repetitions", 2));

  auto points = orbital_t1_experiment(scheme, config.env, config.detector, gaps, pulse_width,
                                      jobs, laser, repetitions);
  std::vector<XY> xy;
  for (const TauPoint& p : points) xy.push_back({p.tau, p.h});
  FitResult fit = fit_exponential(xy);

  ScenarioResult result;
  result.data_csv = tau_points_to_csv(points);
  std::string fit_text = fit.to_text();
  fit_text += "t1_s = " + format_double(fit.param("tau")) + "\n";
  fit_text += "rate_hz = " + format_double(1.0 / fit.param("tau")) + "\n";
  result.fit_text = fit_text;
  result.summary = {{"t1_s", fit.param("tau")},
                    {"t1_err_s", fit.std_error("tau")},
                    {"rate_hz", 1.0 / fit.param("tau")}};

  PlotSeries data{{}, {}, "#1f77b4", true};
  for (const TauPoint& p : points) {
    data.x.push_back(p.tau);
    data.y.push_back(p.h);
  }
  PlotSeries curve{{}, {}, "#d62728", false};
  for (int i = 0; i <= 200; ++i) {
    const double t = gaps.front() + (gaps.back() - gaps.front()) * i / 200.0;
    curve.x.push_back(t);
    curve.y.push_back(fit.param("a") + fit.param("b") * std::exp(-t / fit.param("tau")));
  }
  result.plot = {data, curve};
  result.plot_title = "orbital relaxation";
  result.x_label = "gap (s)";
  result.y_label = "leading edge h (counts)";
  return result;
}

ScenarioResult execute_scenario(const RunConfig& config, int jobs);

// ---------------------------------------------------------------------------
// sweep

ScenarioResult run_sweep_scenario(const RunConfig& config, int jobs, const std::string& axis_arg,
                                  const std::vector<double>& values_arg) {
  const ConfigMap& map = config.raw;
  const std::string axis = axis_arg.empty() ? map.get_string("sweep.axis") : axis_arg;
  std::vector<double> values = values_arg;
  if (values.empty()) values = map.get_quantity_list("sweep.values", UnitKind::None);
  const std::string inner_name = map.has("sweep.scenario") ? map.get_string("sweep.scenario")
                                                           : std::string(scenario_name(config.scenario));
  const Scenario inner = scenario_from_name(inner_name);
  if (inner == Scenario::Sweep) throw_config("sweep.scenario cannot itself be 'sweep'");

  // the axis must name a known key of the inner configuration
  std::vector<std::string> known = global_keys();
  auto inner_keys = scenario_keys(inner);
  known.insert(known.end(), inner_keys.begin(), inner_keys.end());
  if (std::find(known.begin(), known.end(), axis) == known.end()) {
    throw_config("sweep axis '" + axis + "' is not a known config key");
  }

  std::vector<std::vector<std::pair<std::string, double>>> summaries(values.size());
  std::vector<std::string> errors(values.size());

  // points are independent; fan them out and keep the collation order-stable
  parallel_for(values.size(), jobs, [&](std::size_t i) {
    try {
      ConfigMap point_map = map;
      point_map.set("scenario", inner_name);
      point_map.set(axis, format_double(values[i]));
      RunConfig point = resolve_config(point_map);
      validate_config_keys(point, scenario_keys(Scenario::Sweep));
      ScenarioResult r = execute_scenario(point, 1);
      summaries[i] = r.summary;
    } catch (const SivError& e) {
      errors[i] = e.what();
    }
  });

  std::vector<std::string> columns;
  for (const auto& summary : summaries) {
    for (const auto& [key, value] : summary) {
      if (std::find(columns.begin(), columns.end(), key) == columns.end()) {
        columns.push_back(key);
      }
    }
  }

  CsvTable table;
  table.header = {axis};
  table.header.insert(table.header.end(), columns.begin(), columns.end());
  table.header.push_back("errors");
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::vector<std::string> row{format_double(values[i])};
    for (const std::string& column : columns) {
      std::string cell;
      for (const auto& [key, value] : summaries[i]) {
        if (key == column) cell = format_double(value);
      }
      row.push_back(cell);
    }
    std::string err = errors[i];
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    row.push_back(err);
    table.rows.push_back(std::move(row));
  }

  ScenarioResult result;
  result.data_csv = table.to_string();
  int failed = 0;
  for (const auto& e : errors) {
    if (!e.empty()) ++failed;
  }
  result.fit_text = "points = " + std::to_string(values.size()) + "\nerrors = " +
                    std::to_string(failed) + "\n";
  result.summary = {{"points", static_cast<double>(values.size())},
                    {"errors", static_cast<double>(failed)}};

  if (!columns.empty() && !values.empty()) {
    PlotSeries series{{}, {}, "#1f77b4", true};
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (const auto& [key, value] : summaries[i]) {
        if (key == columns.front()) {
          series.x.push_back(values[i]);
          series.y.push_back(value);
        }
      }
    }
    result.plot = {series};
    result.plot_title = "sweep of " + axis;
    result.x_label = axis;
    result.y_label = columns.front();
  }
  return result;
}

ScenarioResult execute_scenario(const RunConfig& config, int jobs) {
  switch (config.scenario) {
    case Scenario::Spectrum: return run_spectrum(config, jobs);
    case Scenario::Cpt: return run_cpt(config, jobs);
    case Scenario::Hyperfine: return run_hyperfine(config, jobs);
    case Scenario::OrbitalCpt: return run_orbital_cpt(config, jobs);
    case Scenario::SpinT1: return run_spin_t1(config, jobs);
    case Scenario::OrbitalT1: return run_orbital_t1(config, jobs);
    case Scenario::Sweep: return run_sweep_scenario(config, jobs, "", {});
  }
  throw_config("unhandled scenario");
}

// ---------------------------------------------------------------------------

RunConfig load_and_resolve(const RunOptions& options) {
  int sources = 0;
  if (!options.config_path.empty()) ++sources;
  if (!options.preset.empty()) ++sources;
  if (!options.config_text.empty()) ++sources;
  if (sources != 1) {
    throw_config("exactly one of a config file, a preset, or inline config text is required");
  }
  std::string text;
  if (!options.preset.empty()) text = preset_text(options.preset);
  else if (!options.config_path.empty()) text = read_text_file(options.config_path);
  else text = options.config_text;

  ConfigMap map = ConfigMap::parse(text);
  for (const auto& [key, value] : options.overrides) {
    map.set(key, value);
  }
  if (options.seed) map.set("seed", std::to_string(*options.seed));

  RunConfig config = resolve_config(map);
  validate_config_keys(config);
  return config;
}

RunSummary write_artifacts(const RunOptions& options, const RunConfig& config,
                           const ScenarioResult& result) {
  if (options.output_dir.empty()) throw_config("output directory is required");
  std::error_code ec;
  std::filesystem::create_directories(options.output_dir, ec);
  if (ec) throw_io("cannot create output directory '" + options.output_dir + "': " + ec.message());
  auto path = [&](const std::string& name) { return options.output_dir + "/" + name; };

  RunSummary summary;
  summary.scenario = config.scenario;
  summary.values = result.summary;

  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("data.csv", result.data_csv);
  if (!result.fit_text.empty()) files.emplace_back("fit.txt", result.fit_text);
  for (const auto& extra : result.extra_files) files.push_back(extra);
  if (options.plot && !result.plot.empty()) {
    files.emplace_back("plot.svg", render_svg_plot(result.plot, result.plot_title, result.x_label,
                                                   result.y_label));
  }

  std::string manifest = "# manifest v1\n";
  for (const auto& [name, content] : files) {
    write_text_file(path(name), content);
    summary.artifacts.push_back(name);
    char hash[32];
    std::snprintf(hash, sizeof(hash), "0x%016llx",
                  static_cast<unsigned long long>(fnv1a64(content)));
    manifest += "# artifact " + name + " fnv1a64 = " + hash + "\n";
  }
  manifest += canonical_config_text(config);
  write_text_file(path("manifest.txt"), manifest);
  summary.artifacts.push_back("manifest.txt");
  return summary;
}

}  // namespace

RunSummary run(const RunOptions& options) {
  RunConfig config = load_and_resolve(options);
  ScenarioResult result = execute_scenario(config, options.jobs);
  return write_artifacts(options, config, result);
}

RunSummary run_sweep(const RunOptions& options, const std::string& axis,
                     const std::vector<double>& values) {
  RunConfig config = load_and_resolve(options);
  ScenarioResult result = run_sweep_scenario(config, options.jobs, axis, values);
  return write_artifacts(options, config, result);
}

}  // namespace siv

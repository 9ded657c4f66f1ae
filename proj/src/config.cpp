#include "config.hpp"

#include <algorithm>

#include "csv.hpp"
#include "error.hpp"

namespace siv {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

ConfigMap ConfigMap::parse(std::string_view text) {
  ConfigMap map;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    std::size_t comment = line.find('#');
    if (comment != std::string_view::npos) line = line.substr(0, comment);
    std::string stripped = trim(line);
    if (stripped.empty()) continue;

    std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw_config("config line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                   stripped + "'");
    }
    Entry entry;
    entry.key = trim(std::string_view(stripped).substr(0, eq));
    entry.value = trim(std::string_view(stripped).substr(eq + 1));
    entry.line = line_no;
    if (entry.key.empty()) {
      throw_config("config line " + std::to_string(line_no) + ": empty key");
    }
    if (entry.value.empty()) {
      throw_config("config line " + std::to_string(line_no) + ": key '" + entry.key +
                   "' has no value");
    }
    auto [it, inserted] = map.index_.try_emplace(entry.key, map.entries_.size());
    if (!inserted) {
      throw_config("config line " + std::to_string(line_no) + ": key '" + entry.key +
                   "' already set at line " + std::to_string(map.entries_[it->second].line));
    }
    map.entries_.push_back(std::move(entry));
  }
  return map;
}

bool ConfigMap::has(const std::string& key) const { return index_.count(key) > 0; }

const ConfigMap::Entry* ConfigMap::find(const std::string& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  auto it = index_.find(key);
  if (it == index_.end()) {
    index_.emplace(key, entries_.size());
    entries_.push_back({key, value, 0});
  } else {
    entries_[it->second].value = value;
  }
}

std::string ConfigMap::get_string(const std::string& key) const {
  const Entry* entry = find(key);
  if (!entry) throw_config("missing required config key '" + key + "'");
  return entry->value;
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  const Entry* entry = find(key);
  if (!entry) return fallback;
  const std::string& v = entry->value;
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw_config("config key '" + key + "' (line " + std::to_string(entry->line) +
               "): expected a boolean, got '" + v + "'");
}

double ConfigMap::get_number(const std::string& key, double fallback) const {
  return get_quantity(key, UnitKind::None, fallback);
}

double ConfigMap::get_quantity(const std::string& key, UnitKind expected, double fallback) const {
  const Entry* entry = find(key);
  if (!entry) return fallback;
  auto q = parse_quantity(entry->value);
  if (!q) {
    throw_config("config key '" + key + "' (line " + std::to_string(entry->line) +
                 "): cannot parse quantity '" + entry->value + "'");
  }
  if (q->kind != UnitKind::None && q->kind != expected) {
    throw_config("config key '" + key + "' (line " + std::to_string(entry->line) + "): has " +
                 unit_kind_name(q->kind) + " units where " + unit_kind_name(expected) +
                 " was expected");
  }
  return q->value;
}

double ConfigMap::require_quantity(const std::string& key, UnitKind expected) const {
  if (!has(key)) throw_config("missing required config key '" + key + "'");
  return get_quantity(key, expected, 0.0);
}

std::vector<double> ConfigMap::get_quantity_list(const std::string& key, UnitKind expected) const {
  const Entry* entry = find(key);
  if (!entry) return {};
  std::vector<double> out;
  std::string_view rest = entry->value;
  while (!rest.empty()) {
    std::size_t comma = rest.find(',');
    std::string_view piece = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    std::string token = trim(piece);
    if (token.empty()) continue;
    auto q = parse_quantity(token);
    if (!q || (q->kind != UnitKind::None && q->kind != expected)) {
      throw_config("config key '" + key + "' (line " + std::to_string(entry->line) +
                   "): bad list element '" + token + "'");
    }
    out.push_back(q->value);
  }
  return out;
}

void ConfigMap::validate_keys(const std::vector<std::string>& known) const {
  for (const Entry& entry : entries_) {
    if (std::find(known.begin(), known.end(), entry.key) == known.end()) {
      throw_config("unknown config key '" + entry.key + "' at line " + std::to_string(entry.line));
    }
  }
}

const char* scenario_name(Scenario scenario) {
  switch (scenario) {
    case Scenario::Spectrum: return "spectrum";
    case Scenario::Cpt: return "cpt";
    case Scenario::Hyperfine: return "hyperfine";
    case Scenario::OrbitalCpt: return "orbital-cpt";
    case Scenario::SpinT1: return "spin-t1";
    case Scenario::OrbitalT1: return "orbital-t1";
    case Scenario::Sweep: return "sweep";
  }
  return "unknown";
}

Scenario scenario_from_name(const std::string& name) {
  for (Scenario s : {Scenario::Spectrum, Scenario::Cpt, Scenario::Hyperfine, Scenario::OrbitalCpt,
                     Scenario::SpinT1, Scenario::OrbitalT1, Scenario::Sweep}) {
    if (name == scenario_name(s)) return s;
  }
  throw_config("unknown scenario '" + name +
               "'; expected one of spectrum, cpt, hyperfine, orbital-cpt, spin-t1, orbital-t1, "
               "sweep");
}

RunConfig resolve_config(const ConfigMap& map) {
  RunConfig config;
  config.raw = map;
  config.scenario = scenario_from_name(map.get_string("scenario"));

  SivParameters& p = config.params;
  p.ground_orbital_splitting =
      map.get_quantity("scheme.ground_orbital_splitting", UnitKind::Frequency, p.ground_orbital_splitting);
  p.excited_orbital_splitting =
      map.get_quantity("scheme.excited_orbital_splitting", UnitKind::Frequency, p.excited_orbital_splitting);
  p.zpl_frequency = map.get_quantity("scheme.zpl_frequency", UnitKind::Frequency, p.zpl_frequency);
  p.g_ground_upper = map.get_number("scheme.g_ground_upper", p.g_ground_upper);
  p.g_ground_lower = map.get_number("scheme.g_ground_lower", p.g_ground_lower);
  p.g_excited_upper = map.get_number("scheme.g_excited_upper", p.g_excited_upper);
  p.g_excited_lower = map.get_number("scheme.g_excited_lower", p.g_excited_lower);
  p.radiative_lifetime = map.get_quantity("scheme.radiative_lifetime", UnitKind::Time, p.radiative_lifetime);
  p.branching_zpl = map.get_number("scheme.branching_zpl", p.branching_zpl);
  p.branch_share_upper = map.get_number("scheme.branch_share_upper", p.branch_share_upper);

  config.field.magnitude = map.get_quantity("field.magnitude", UnitKind::Field, config.field.magnitude);
  config.field.polar_angle = map.get_quantity("field.polar_angle", UnitKind::Angle, config.field.polar_angle);
  config.field.mixing_scale = map.get_quantity("field.mixing_scale", UnitKind::Field, config.field.mixing_scale);

  config.hyperfine.enabled = map.get_bool("hyperfine.enabled", false);
  config.hyperfine.coupling_a =
      map.get_quantity("hyperfine.coupling", UnitKind::Frequency, config.hyperfine.coupling_a);

  Environment& env = config.env;
  env.temperature = map.get_quantity("env.temperature", UnitKind::Temperature, env.temperature);
  env.spin_t1 = map.get_quantity("env.spin_t1", UnitKind::Time, env.spin_t1);
  env.spin_t1_is_angle_derived = map.get_bool("env.spin_t1_angle_derived", false);
  env.excited_orbital_coupling =
      map.get_quantity("env.excited_orbital_coupling", UnitKind::Frequency, 0.0);
  if (map.has("env.orbital_coupling")) {
    env.orbital_coupling = map.require_quantity("env.orbital_coupling", UnitKind::Frequency);
  } else {
    // calibration route: coupling chosen so the equilibration time at the
    // reference temperature matches the reference t1
    const double t1_ref = map.get_quantity("env.orbital_t1_ref", UnitKind::Time, 38e-9);
    const double t_ref = map.get_quantity("env.orbital_t1_ref_temperature", UnitKind::Temperature, 4.5);
    env.orbital_coupling =
        calibrate_orbital_coupling(p.ground_orbital_splitting, t_ref, t1_ref);
  }

  DetectorModel& det = config.detector;
  det.efficiency = map.get_number("detector.efficiency", det.efficiency);
  det.bin_width = map.get_quantity("detector.bin_width", UnitKind::Time, det.bin_width);
  det.background = map.get_quantity("detector.background", UnitKind::Frequency, det.background);
  det.shot_noise = map.get_bool("detector.shot_noise", false);
  config.seed = static_cast<std::uint64_t>(map.get_number("seed", 0.0));
  det.rng_seed = config.seed;

  if (det.efficiency <= 0 || det.efficiency > 1) {
    throw_config("detector.efficiency must be in (0, 1]");
  }
  if (det.background < 0) throw_config("detector.background must be >= 0");
  return config;
}

std::string canonical_config_text(const RunConfig& config) {
  const std::vector<std::string> global_keys = {
      "scenario",
      "scheme.ground_orbital_splitting",
      "scheme.excited_orbital_splitting",
      "scheme.zpl_frequency",
      "scheme.g_ground_upper",
      "scheme.g_ground_lower",
      "scheme.g_excited_upper",
      "scheme.g_excited_lower",
      "scheme.radiative_lifetime",
      "scheme.branching_zpl",
      "scheme.branch_share_upper",
      "field.magnitude",
      "field.polar_angle",
      "field.mixing_scale",
      "hyperfine.enabled",
      "hyperfine.coupling",
      "env.temperature",
      "env.orbital_coupling",
      "env.excited_orbital_coupling",
      "env.orbital_t1_ref",
      "env.orbital_t1_ref_temperature",
      "env.spin_t1",
      "env.spin_t1_angle_derived",
      "detector.efficiency",
      "detector.bin_width",
      "detector.background",
      "detector.shot_noise",
      "seed",
  };

  std::string out;
  out += "scenario = " + std::string(scenario_name(config.scenario)) + "\n";
  auto emit = [&out](const std::string& key, double value) {
    out += key + " = " + format_double(value) + "\n";
  };
  emit("scheme.ground_orbital_splitting", config.params.ground_orbital_splitting);
  emit("scheme.excited_orbital_splitting", config.params.excited_orbital_splitting);
  emit("scheme.zpl_frequency", config.params.zpl_frequency);
  emit("scheme.g_ground_upper", config.params.g_ground_upper);
  emit("scheme.g_ground_lower", config.params.g_ground_lower);
  emit("scheme.g_excited_upper", config.params.g_excited_upper);
  emit("scheme.g_excited_lower", config.params.g_excited_lower);
  emit("scheme.radiative_lifetime", config.params.radiative_lifetime);
  emit("scheme.branching_zpl", config.params.branching_zpl);
  emit("scheme.branch_share_upper", config.params.branch_share_upper);
  emit("field.magnitude", config.field.magnitude);
  emit("field.polar_angle", config.field.polar_angle);
  emit("field.mixing_scale", config.field.mixing_scale);
  out += "hyperfine.enabled = " + std::string(config.hyperfine.enabled ? "true" : "false") + "\n";
  emit("hyperfine.coupling", config.hyperfine.coupling_a);
  emit("env.temperature", config.env.temperature);
  emit("env.orbital_coupling", config.env.orbital_coupling);
  if (config.env.excited_orbital_coupling > 0) {
    emit("env.excited_orbital_coupling", config.env.excited_orbital_coupling);
  }
  emit("env.spin_t1", config.env.spin_t1);
  out += "env.spin_t1_angle_derived = " +
         std::string(config.env.spin_t1_is_angle_derived ? "true" : "false") + "\n";
  emit("detector.efficiency", config.detector.efficiency);
  emit("detector.bin_width", config.detector.bin_width);
  emit("detector.background", config.detector.background);
  out += "detector.shot_noise = " + std::string(config.detector.shot_noise ? "true" : "false") +
         "\n";
  out += "seed = " + std::to_string(config.seed) + "\n";

  // scenario blocks pass through verbatim, sorted for stability
  std::vector<const ConfigMap::Entry*> block_entries;
  for (const auto& entry : config.raw.entries()) {
    if (std::find(global_keys.begin(), global_keys.end(), entry.key) == global_keys.end()) {
      block_entries.push_back(&entry);
    }
  }
  std::sort(block_entries.begin(), block_entries.end(),
            [](const auto* a, const auto* b) { return a->key < b->key; });
  for (const auto* entry : block_entries) {
    out += entry->key + " = " + entry->value + "\n";
  }
  return out;
}

}  // namespace siv

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "level_scheme.hpp"
#include "rate_engine.hpp"
#include "units.hpp"

namespace siv {

// Line-oriented `section.key = value` configuration with SI-suffixed numbers.
// Keys keep their source line for diagnostics; later assignments to the same
// key are rejected.

class ConfigMap {
 public:
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
  };

  static ConfigMap parse(std::string_view text);

  bool has(const std::string& key) const;
  const Entry* find(const std::string& key) const;
  void set(const std::string& key, const std::string& value);  // override path

  std::string get_string(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  double get_number(const std::string& key, double fallback) const;
  double get_quantity(const std::string& key, UnitKind expected, double fallback) const;
  // required variants
  double require_quantity(const std::string& key, UnitKind expected) const;
  std::vector<double> get_quantity_list(const std::string& key, UnitKind expected) const;

  const std::vector<Entry>& entries() const { return entries_; }

  // every present key must appear in `known`, else a config error naming the
  // key and line
  void validate_keys(const std::vector<std::string>& known) const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

enum class Scenario { Spectrum, Cpt, Hyperfine, OrbitalCpt, SpinT1, OrbitalT1, Sweep };

const char* scenario_name(Scenario scenario);
Scenario scenario_from_name(const std::string& name);

// Fully resolved run inputs shared by every scenario.
struct RunConfig {
  Scenario scenario = Scenario::Spectrum;
  SivParameters params;
  MagneticConfig field;
  HyperfineConfig hyperfine;
  Environment env;
  DetectorModel detector;
  std::uint64_t seed = 0;
  ConfigMap raw;  // scenario blocks are read from here by the runner

  LevelScheme build_scheme() const { return build_level_scheme(params, field, hyperfine); }
};

RunConfig resolve_config(const ConfigMap& map);

// Canonical full-precision dump of the resolved configuration; parsing it
// back yields an equivalent RunConfig.
std::string canonical_config_text(const RunConfig& config);

}  // namespace siv

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"

namespace siv {

struct RunOptions {
  std::string config_path;  // exactly one of config_path / preset / config_text
  std::string preset;
  std::string config_text;
  std::vector<std::pair<std::string, std::string>> overrides;  // dotted key -> value
  std::string output_dir;
  int jobs = 1;
  std::optional<long long> seed;
  bool plot = true;
};

struct RunSummary {
  Scenario scenario = Scenario::Spectrum;
  std::vector<std::pair<std::string, double>> values;
  std::vector<std::string> artifacts;  // file names written into output_dir

  double value(const std::string& key) const;
};

// Executes the configured scenario and writes data.csv, fit.txt, plot.svg,
// and manifest.txt (plus scenario extras) into output_dir.
RunSummary run(const RunOptions& options);

// Sweep of a numeric config key; axis/values may come from the arguments or
// from the sweep.* block when the scenario is `sweep`. Writes the collated
// per-value summary table as data.csv.
RunSummary run_sweep(const RunOptions& options, const std::string& axis,
                     const std::vector<double>& values);

}  // namespace siv

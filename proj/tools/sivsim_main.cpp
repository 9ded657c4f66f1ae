// Command-line front end. Everything substantive happens behind the C API in
// libsivsim; this file only maps flags onto it.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sivsim.h"

namespace {

struct RunDeleter {
  void operator()(siv_run* run) const { siv_run_free(run); }
};

int fail(siv_status status) {
  std::fprintf(stderr, "error: %s\n", siv_last_error());
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sivsim — desk-scale simulator of SiV- optical spin dynamics"};
  app.get_formatter()->column_width(34);

  std::string config_path, preset, out_dir = "out", sweep_axis;
  std::vector<std::string> overrides;
  std::vector<double> sweep_values;
  int jobs = 1;
  long long seed = -1;
  bool no_plot = false, list_presets = false;
  std::string dump_preset;

  app.add_option("--config", config_path, "configuration file (section.key = value lines)");
  app.add_option("--preset", preset, "named preset configuration");
  app.add_option("--set", overrides, "override a config key, e.g. --set env.temperature=12K")
      ->take_all();
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--jobs", jobs, "worker threads for scans and sweeps")->capture_default_str();
  app.add_option("--seed", seed, "random seed override for shot-noise sampling");
  app.add_flag("--no-plot", no_plot, "skip plot.svg");
  app.add_option("--sweep", sweep_axis, "sweep this dotted config key");
  app.add_option("--values", sweep_values, "sweep values (base units)")->delimiter(',');
  app.add_flag("--list-presets", list_presets, "print preset names and exit");
  app.add_option("--dump-preset", dump_preset, "print a preset's config text and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : SIV_ERROR_CONFIG;
  }

  if (list_presets) {
    for (size_t i = 0; i < siv_preset_count(); ++i) {
      std::printf("%s\n", siv_preset_name(i));
    }
    return 0;
  }
  if (!dump_preset.empty()) {
    const char* text = siv_preset_text(dump_preset.c_str());
    if (!text) return fail(SIV_ERROR_CONFIG);
    std::fputs(text, stdout);
    return 0;
  }

  std::unique_ptr<siv_run, RunDeleter> run(siv_run_new());
  if (!run) {
    std::fprintf(stderr, "error: out of memory\n");
    return SIV_ERROR_NUMERIC;
  }

  siv_status status = SIV_OK;
  if (!config_path.empty()) status = siv_run_set_config_file(run.get(), config_path.c_str());
  if (status == SIV_OK && !preset.empty()) status = siv_run_set_preset(run.get(), preset.c_str());
  if (status == SIV_OK && config_path.empty() && preset.empty()) {
    std::fprintf(stderr, "error: provide --config PATH or --preset NAME (see --list-presets)\n");
    return SIV_ERROR_CONFIG;
  }
  for (const std::string& item : overrides) {
    if (status != SIV_OK) break;
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", item.c_str());
      return SIV_ERROR_CONFIG;
    }
    status = siv_run_add_override(run.get(), item.substr(0, eq).c_str(),
                                  item.substr(eq + 1).c_str());
  }
  if (status == SIV_OK) status = siv_run_set_output_dir(run.get(), out_dir.c_str());
  if (status == SIV_OK) status = siv_run_set_jobs(run.get(), jobs);
  if (status == SIV_OK && seed >= 0) status = siv_run_set_seed(run.get(), seed);
  if (status == SIV_OK) status = siv_run_set_plot_enabled(run.get(), no_plot ? 0 : 1);
  if (status != SIV_OK) return fail(status);

  if (!sweep_axis.empty()) {
    status = siv_run_sweep(run.get(), sweep_axis.c_str(), sweep_values.data(),
                           sweep_values.size());
  } else {
    status = siv_run_execute(run.get());
  }
  if (status != SIV_OK) return fail(status);

  std::printf("wrote %s/\n", out_dir.c_str());
  for (size_t i = 0; i < siv_run_summary_count(run.get()); ++i) {
    std::printf("  %s = %g\n", siv_run_summary_key(run.get(), i),
                siv_run_summary_value(run.get(), i));
  }
  return 0;
}

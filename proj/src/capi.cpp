#include "sivsim.h"

#include <cstring>
#include <string>

#include "error.hpp"
#include "presets.hpp"
#include "runner.hpp"
#include "version.hpp"

namespace {

thread_local std::string g_last_error;

void clear_error() { g_last_error.clear(); }

siv_status record_error(const siv::SivError& e) {
  g_last_error = e.what();
  switch (e.code()) {
    case siv::ErrorCode::Config: return SIV_ERROR_CONFIG;
    case siv::ErrorCode::Numeric: return SIV_ERROR_NUMERIC;
    case siv::ErrorCode::Invalid: return SIV_ERROR_INVALID;
    case siv::ErrorCode::Io: return SIV_ERROR_IO;
  }
  return SIV_ERROR_INVALID;
}

siv_status record_error(const std::exception& e) {
  g_last_error = e.what();
  return SIV_ERROR_NUMERIC;
}

}  // namespace

struct siv_run {
  siv::RunOptions options;
  siv::RunSummary summary;
  bool has_summary = false;
};

extern "C" {

const char *siv_version(void) { return siv::kVersion; }

const char *siv_last_error(void) { return g_last_error.c_str(); }

siv_run *siv_run_new(void) {
  clear_error();
  return new (std::nothrow) siv_run();
}

void siv_run_free(siv_run *run) { delete run; }

#define SIV_REQUIRE(cond, message)            \
  do {                                        \
    if (!(cond)) {                            \
      g_last_error = (message);               \
      return SIV_ERROR_INVALID;               \
    }                                         \
  } while (0)

siv_status siv_run_set_config_file(siv_run *run, const char *path) {
  SIV_REQUIRE(run && path, "null argument");
  clear_error();
  run->options.config_path = path;
  return SIV_OK;
}

siv_status siv_run_set_preset(siv_run *run, const char *name) {
  SIV_REQUIRE(run && name, "null argument");
  clear_error();
  if (!siv::preset_exists(name)) {
    try {
      siv::preset_text(name);  // throws with the list of valid names
    } catch (const siv::SivError& e) {
      return record_error(e);
    }
  }
  run->options.preset = name;
  return SIV_OK;
}

siv_status siv_run_set_config_text(siv_run *run, const char *text) {
  SIV_REQUIRE(run && text, "null argument");
  clear_error();
  run->options.config_text = text;
  return SIV_OK;
}

siv_status siv_run_add_override(siv_run *run, const char *key, const char *value) {
  SIV_REQUIRE(run && key && value, "null argument");
  SIV_REQUIRE(key[0] != '\0', "override key is empty");
  clear_error();
  run->options.overrides.emplace_back(key, value);
  return SIV_OK;
}

siv_status siv_run_set_output_dir(siv_run *run, const char *dir) {
  SIV_REQUIRE(run && dir, "null argument");
  clear_error();
  run->options.output_dir = dir;
  return SIV_OK;
}

siv_status siv_run_set_jobs(siv_run *run, int jobs) {
  SIV_REQUIRE(run, "null argument");
  SIV_REQUIRE(jobs >= 1, "jobs must be >= 1");
  clear_error();
  run->options.jobs = jobs;
  return SIV_OK;
}

siv_status siv_run_set_seed(siv_run *run, long long seed) {
  SIV_REQUIRE(run, "null argument");
  clear_error();
  run->options.seed = seed;
  return SIV_OK;
}

siv_status siv_run_set_plot_enabled(siv_run *run, int enabled) {
  SIV_REQUIRE(run, "null argument");
  clear_error();
  run->options.plot = enabled != 0;
  return SIV_OK;
}

siv_status siv_run_execute(siv_run *run) {
  SIV_REQUIRE(run, "null argument");
  clear_error();
  try {
    run->summary = siv::run(run->options);
    run->has_summary = true;
    return SIV_OK;
  } catch (const siv::SivError& e) {
    // invalid values reached through configuration are configuration errors
    if (e.code() == siv::ErrorCode::Invalid) {
      g_last_error = e.what();
      return SIV_ERROR_CONFIG;
    }
    return record_error(e);
  } catch (const std::exception& e) {
    return record_error(e);
  }
}

siv_status siv_run_sweep(siv_run *run, const char *axis_key, const double *values, size_t count) {
  SIV_REQUIRE(run && axis_key, "null argument");
  SIV_REQUIRE(count == 0 || values, "null values with nonzero count");
  clear_error();
  try {
    std::vector<double> v(values, values + count);
    run->summary = siv::run_sweep(run->options, axis_key, v);
    run->has_summary = true;
    return SIV_OK;
  } catch (const siv::SivError& e) {
    if (e.code() == siv::ErrorCode::Invalid) {
      g_last_error = e.what();
      return SIV_ERROR_CONFIG;
    }
    return record_error(e);
  } catch (const std::exception& e) {
    return record_error(e);
  }
}

size_t siv_run_summary_count(const siv_run *run) {
  return run && run->has_summary ? run->summary.values.size() : 0;
}

const char *siv_run_summary_key(const siv_run *run, size_t index) {
  if (!run || !run->has_summary || index >= run->summary.values.size()) return nullptr;
  return run->summary.values[index].first.c_str();
}

double siv_run_summary_value(const siv_run *run, size_t index) {
  if (!run || !run->has_summary || index >= run->summary.values.size()) return 0.0;
  return run->summary.values[index].second;
}

size_t siv_preset_count(void) { return siv::preset_names().size(); }

const char *siv_preset_name(size_t index) {
  static thread_local std::string holder;
  auto names = siv::preset_names();
  if (index >= names.size()) return nullptr;
  holder = names[index];
  return holder.c_str();
}

const char *siv_preset_text(const char *name) {
  static thread_local std::string holder;
  if (!name) return nullptr;
  try {
    holder = siv::preset_text(name);
    return holder.c_str();
  } catch (const siv::SivError& e) {
    g_last_error = e.what();
    return nullptr;
  }
}

}  // extern "C"

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "level_scheme.hpp"
#include "ode.hpp"
#include "rate_engine.hpp"

namespace siv {

// Timed laser-pulse experiments: a line-oriented sequence description is
// parsed into channels of on/off events, simulated against the rate model
// with exponential switching ramps and finite extinction, and binned into
// time-resolved fluorescence traces.

struct PulseChannel {
  std::string name;
  Laser laser;
  std::vector<std::pair<double, double>> events;  // (t_on, t_off), sorted, disjoint

  bool operator==(const PulseChannel&) const = default;
};

struct PulseSequence {
  std::vector<PulseChannel> channels;
  double rise_fall_time = 60e-9;  // s, exponential ramp time constant
  double extinction_db = 60.0;    // off-state leakage = 10^(-extinction/10)
  double total_duration = 0;      // s
  long repetitions = 1;

  bool operator==(const PulseSequence&) const = default;
  std::uint64_t content_hash() const;
};

// Grammar (one directive per line, '#' comments):
//   duration <time>
//   repeat <count>
//   rise <time>
//   extinction <value> dB
//   channel <name> laser <label> [detune <freq>] sat <x> linewidth <freq>
//   pulse <channel> <t_on> <t_off>
// Quantities accept SI suffixes (ps ns us ms s, Hz kHz MHz GHz), attached or
// detached. When a scheme is given, laser labels are validated against it.
PulseSequence parse_sequence(std::string_view text, const LevelScheme* scheme = nullptr);

std::string serialize_sequence(const PulseSequence& sequence);

struct TimeTrace {
  std::vector<double> bin_edges;  // size bins + 1
  std::vector<double> counts;     // accumulated over repetitions
  std::uint64_t sequence_hash = 0;
  std::uint64_t scheme_hash = 0;
};

TimeTrace simulate_sequence(const LevelScheme& scheme, const PulseSequence& sequence,
                            const Environment& env, const DetectorModel& detector,
                            const PopulationVector& initial, const OdeOptions& opts = {});

struct TauPoint {
  double tau = 0;      // s, dark interval
  double h = 0;        // leading-edge excess counts above the plateau
  double plateau = 0;  // late-pulse steady level ("a" column in summaries)
};

// Template-driven relaxation experiment: the template's final pulse is the
// readout; it is shifted so the dark gap before it equals each tau.
std::vector<TauPoint> spin_t1_experiment(const LevelScheme& scheme, const Environment& env,
                                         const DetectorModel& detector,
                                         const std::vector<double>& tau_list,
                                         const PulseSequence& sequence_template, int jobs = 1);

// Zero-field pulse-pair experiment on line D; returns (gap, leading edge).
std::vector<TauPoint> orbital_t1_experiment(const LevelScheme& scheme, const Environment& env,
                                            const DetectorModel& detector,
                                            const std::vector<double>& gap_list,
                                            double pulse_width = 80e-9, int jobs = 1,
                                            const Laser& pulse_laser = Laser{"D1", 0.0, 5.0, 94e6},
                                            long repetitions = 2);

enum class ReadMode { Bright, Dark };

// Bright read: h0/(2a). Dark read: 1 - h0/(2a). Clamped to [0, 1]; the flag
// reports when clamping occurred.
double initialization_fidelity(double h0, double a, ReadMode mode, bool* out_of_range = nullptr);

std::string trace_to_csv(const TimeTrace& trace);
std::string tau_points_to_csv(const std::vector<TauPoint>& points);

}  // namespace siv

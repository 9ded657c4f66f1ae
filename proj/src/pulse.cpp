#include "pulse.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csv.hpp"
#include "error.hpp"
#include "hash.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "units.hpp"

namespace siv {

std::uint64_t PulseSequence::content_hash() const {
  return fnv1a64(serialize_sequence(*this));
}

namespace {

struct Token {
  std::string text;
  int column = 0;
};

std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size() || line[i] == '#') break;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '#') ++i;
    tokens.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return tokens;
}

[[noreturn]] void parse_fail(int line, int column, const std::string& message) {
  throw_config("sequence parse error at line " + std::to_string(line) + ", column " +
               std::to_string(column) + ": " + message);
}

// Consumes one quantity that may span one or two tokens ("10us" or "10 us").
double take_quantity(const std::vector<Token>& tokens, std::size_t& pos, int line,
                     UnitKind expected, const char* what) {
  if (pos >= tokens.size()) {
    parse_fail(line, tokens.empty() ? 1 : tokens.back().column, std::string("missing ") + what);
  }
  const Token& first = tokens[pos];
  std::optional<Quantity> q;
  if (pos + 1 < tokens.size()) {
    q = parse_quantity(first.text + " " + tokens[pos + 1].text);
    if (q && q->kind != UnitKind::None) {
      pos += 2;
    } else {
      q.reset();
    }
  }
  if (!q) {
    q = parse_quantity(first.text);
    if (q) ++pos;
  }
  if (!q) parse_fail(line, first.column, std::string("expected ") + what + ", got '" + first.text + "'");
  if (q->kind != expected && q->kind != UnitKind::None) {
    parse_fail(line, first.column, std::string(what) + " has " + unit_kind_name(q->kind) +
                                       " units where " + unit_kind_name(expected) +
                                       " was expected");
  }
  return q->value;
}

}  // namespace

PulseSequence parse_sequence(std::string_view text, const LevelScheme* scheme) {
  PulseSequence seq;
  seq.total_duration = 0;
  bool have_duration = false;

  struct PendingPulse {
    std::string channel;
    double t_on, t_off;
    int line, column;
  };
  std::vector<PendingPulse> pulses;

  std::istringstream stream{std::string(text)};
  std::string raw_line;
  int line_no = 0;
  while (std::getline(stream, raw_line)) {
    ++line_no;
    auto tokens = tokenize(raw_line);
    if (tokens.empty()) continue;
    const std::string& keyword = tokens[0].text;
    std::size_t pos = 1;

    if (keyword == "duration") {
      seq.total_duration = take_quantity(tokens, pos, line_no, UnitKind::Time, "duration");
      have_duration = true;
    } else if (keyword == "repeat") {
      const double n = take_quantity(tokens, pos, line_no, UnitKind::None, "repeat count");
      if (n < 1 || n != std::floor(n)) parse_fail(line_no, tokens[0].column, "repeat count must be a positive integer");
      seq.repetitions = static_cast<long>(n);
    } else if (keyword == "rise") {
      seq.rise_fall_time = take_quantity(tokens, pos, line_no, UnitKind::Time, "rise time");
      if (seq.rise_fall_time <= 0) parse_fail(line_no, tokens[0].column, "rise time must be > 0");
    } else if (keyword == "extinction") {
      seq.extinction_db = take_quantity(tokens, pos, line_no, UnitKind::Decibel, "extinction");
      if (seq.extinction_db <= 0) parse_fail(line_no, tokens[0].column, "extinction must be > 0 dB");
    } else if (keyword == "channel") {
      if (pos >= tokens.size()) parse_fail(line_no, tokens[0].column, "missing channel name");
      PulseChannel channel;
      channel.name = tokens[pos++].text;
      for (const PulseChannel& existing : seq.channels) {
        if (existing.name == channel.name) {
          parse_fail(line_no, tokens[1].column, "duplicate channel '" + channel.name + "'");
        }
      }
      if (pos >= tokens.size() || tokens[pos].text != "laser") {
        parse_fail(line_no, pos < tokens.size() ? tokens[pos].column : 1, "expected 'laser'");
      }
      ++pos;
      if (pos >= tokens.size()) parse_fail(line_no, tokens.back().column, "missing laser label");
      channel.laser.target = tokens[pos++].text;
      channel.laser.saturation = -1;
      channel.laser.linewidth_fwhm = -1;
      while (pos < tokens.size()) {
        const Token& key = tokens[pos];
        if (key.text == "detune") {
          ++pos;
          channel.laser.detuning =
              take_quantity(tokens, pos, line_no, UnitKind::Frequency, "detuning");
        } else if (key.text == "sat") {
          ++pos;
          channel.laser.saturation =
              take_quantity(tokens, pos, line_no, UnitKind::None, "saturation");
        } else if (key.text == "linewidth") {
          ++pos;
          channel.laser.linewidth_fwhm =
              take_quantity(tokens, pos, line_no, UnitKind::Frequency, "linewidth");
        } else {
          parse_fail(line_no, key.column, "unknown channel attribute '" + key.text + "'");
        }
      }
      if (channel.laser.saturation < 0) parse_fail(line_no, tokens[0].column, "channel is missing 'sat'");
      if (channel.laser.linewidth_fwhm <= 0) parse_fail(line_no, tokens[0].column, "channel is missing 'linewidth'");
      if (scheme) {
        bool known = false;
        for (const Transition& t : scheme->transitions) {
          if (t.label == channel.laser.target) {
            known = true;
            break;
          }
        }
        if (!known) {
          parse_fail(line_no, tokens[3].column,
                     "unknown laser label '" + channel.laser.target + "'");
        }
      }
      seq.channels.push_back(std::move(channel));
    } else if (keyword == "pulse") {
      if (pos >= tokens.size()) parse_fail(line_no, tokens[0].column, "missing channel name");
      PendingPulse pulse;
      pulse.channel = tokens[pos++].text;
      pulse.line = line_no;
      pulse.column = tokens[0].column;
      pulse.t_on = take_quantity(tokens, pos, line_no, UnitKind::Time, "pulse start");
      pulse.t_off = take_quantity(tokens, pos, line_no, UnitKind::Time, "pulse end");
      if (pulse.t_off <= pulse.t_on) {
        parse_fail(line_no, tokens[0].column, "t_off before t_on");
      }
      if (pulse.t_on < 0) parse_fail(line_no, tokens[0].column, "t_on must be >= 0");
      pulses.push_back(std::move(pulse));
    } else {
      parse_fail(line_no, tokens[0].column, "unknown directive '" + keyword + "'");
    }
  }

  if (!have_duration || seq.total_duration <= 0) {
    throw_config("sequence parse error: missing or non-positive 'duration'");
  }

  for (const PendingPulse& pulse : pulses) {
    PulseChannel* channel = nullptr;
    for (PulseChannel& c : seq.channels) {
      if (c.name == pulse.channel) channel = &c;
    }
    if (!channel) {
      parse_fail(pulse.line, pulse.column, "pulse references unknown channel '" + pulse.channel + "'");
    }
    if (pulse.t_off > seq.total_duration) {
      parse_fail(pulse.line, pulse.column, "pulse extends beyond the sequence duration");
    }
    channel->events.push_back({pulse.t_on, pulse.t_off});
  }
  for (PulseChannel& channel : seq.channels) {
    std::sort(channel.events.begin(), channel.events.end());
    for (std::size_t i = 1; i < channel.events.size(); ++i) {
      if (channel.events[i].first < channel.events[i - 1].second) {
        throw_config("sequence parse error: overlapping pulses on channel '" + channel.name +
                     "': [" + format_compact(channel.events[i - 1].first) + ", " +
                     format_compact(channel.events[i - 1].second) + "] and [" +
                     format_compact(channel.events[i].first) + ", " +
                     format_compact(channel.events[i].second) + "]");
      }
    }
  }
  return seq;
}

std::string serialize_sequence(const PulseSequence& sequence) {
  std::string out;
  out += "duration " + format_double(sequence.total_duration) + "\n";
  out += "repeat " + std::to_string(sequence.repetitions) + "\n";
  out += "rise " + format_double(sequence.rise_fall_time) + "\n";
  out += "extinction " + format_double(sequence.extinction_db) + " dB\n";
  for (const PulseChannel& channel : sequence.channels) {
    out += "channel " + channel.name + " laser " + channel.laser.target;
    if (channel.laser.detuning != 0) {
      out += " detune " + format_double(channel.laser.detuning);
    }
    out += " sat " + format_double(channel.laser.saturation);
    out += " linewidth " + format_double(channel.laser.linewidth_fwhm) + "\n";
  }
  for (const PulseChannel& channel : sequence.channels) {
    for (const auto& [t_on, t_off] : channel.events) {
      out += "pulse " + channel.name + " " + format_double(t_on) + " " + format_double(t_off) +
             "\n";
    }
  }
  return out;
}

namespace {

// Exponential switching profile: target toggles between the leakage floor and
// 1 at each event edge; the value relaxes toward the target with the ramp
// time constant.
struct IntensityProfile {
  struct Segment {
    double start_time;
    double start_value;
    double target;
  };
  std::vector<Segment> segments;
  double tau;

  static IntensityProfile build(const std::vector<std::pair<double, double>>& events,
                                double rise_fall, double leak) {
    IntensityProfile profile;
    profile.tau = rise_fall;
    profile.segments.push_back({0.0, leak, leak});
    auto value_at = [&](const Segment& seg, double t) {
      return seg.target + (seg.start_value - seg.target) * std::exp(-(t - seg.start_time) / rise_fall);
    };
    for (const auto& [t_on, t_off] : events) {
      const double at_on = value_at(profile.segments.back(), t_on);
      profile.segments.push_back({t_on, at_on, 1.0});
      const double at_off = value_at(profile.segments.back(), t_off);
      profile.segments.push_back({t_off, at_off, leak});
    }
    return profile;
  }

  double operator()(double t) const {
    const Segment* seg = &segments.front();
    for (const Segment& s : segments) {
      if (s.start_time <= t) seg = &s;
      else break;
    }
    return seg->target + (seg->start_value - seg->target) * std::exp(-(t - seg->start_time) / tau);
  }
};

}  // namespace

TimeTrace simulate_sequence(const LevelScheme& scheme, const PulseSequence& sequence,
                            const Environment& env, const DetectorModel& detector,
                            const PopulationVector& initial, const OdeOptions& opts) {
  if (sequence.total_duration <= 0) throw_config("sequence duration must be > 0");
  if (detector.bin_width <= 0) throw_config("detector bin width must be > 0");
  if (sequence.repetitions < 1) throw_config("repetitions must be >= 1");
  const int n = scheme.level_count();
  if (initial.p.size() != n) throw_invalid("initial population has wrong dimension");

  RateMatrix base = build_rate_matrix(scheme, {}, env);
  std::vector<Eigen::MatrixXd> drive_parts;
  std::vector<IntensityProfile> profiles;
  const double leak = std::pow(10.0, -sequence.extinction_db / 10.0);
  std::vector<double> breakpoints;
  for (const PulseChannel& channel : sequence.channels) {
    RateMatrix with_laser = build_rate_matrix(scheme, {channel.laser}, env);
    drive_parts.push_back(with_laser.generator - base.generator);
    profiles.push_back(IntensityProfile::build(channel.events, sequence.rise_fall_time, leak));
    for (const auto& [t_on, t_off] : channel.events) {
      breakpoints.push_back(t_on);
      breakpoints.push_back(t_off);
    }
  }

  auto generator = [&](double t, Eigen::MatrixXd& a) {
    a = base.generator;
    for (std::size_t c = 0; c < drive_parts.size(); ++c) {
      a += profiles[c](t) * drive_parts[c];
    }
  };

  const double duration = sequence.total_duration;
  const std::size_t bins = static_cast<std::size_t>(std::ceil(duration / detector.bin_width - 1e-9));

  // cyclic warm-up: the period map is linear, so assemble its propagator from
  // basis starts and drive to the fixed point by repeated squaring
  Eigen::VectorXd start = initial.p;
  if (sequence.repetitions > 1) {
    LinearOde<double> warm(generator, n, opts);
    warm.set_invariant(Eigen::RowVectorXd::Ones(n));
    Eigen::MatrixXd period(n, n);
    for (int c = 0; c < n; ++c) {
      Eigen::VectorXd basis = Eigen::VectorXd::Zero(n);
      basis[c] = 1.0;
      period.col(c) = warm.solve(basis, 0.0, {duration}, breakpoints)[0];
    }
    Eigen::MatrixXd power = period;
    for (int k = 0; k < 40; ++k) {
      Eigen::VectorXd next = power * start;
      power = power * power;
      const double moved = (next - start).lpNorm<1>();
      start = std::move(next);
      if (moved < 1e-13) break;
    }
    start = start.cwiseMax(0.0);
    start /= start.sum();
  }

  std::vector<double> output_times;
  output_times.reserve(2 * bins + 1);
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    edges[i] = std::min(i * detector.bin_width, duration);
  }
  for (std::size_t i = 0; i < bins; ++i) {
    output_times.push_back(edges[i]);
    output_times.push_back(0.5 * (edges[i] + edges[i + 1]));
  }
  output_times.push_back(edges[bins]);

  LinearOde<double> ode(generator, n, opts);
  ode.set_invariant(Eigen::RowVectorXd::Ones(n));
  auto states = ode.solve(start, 0.0, output_times, breakpoints);

  TimeTrace trace;
  trace.bin_edges = edges;
  trace.counts.resize(bins);
  trace.sequence_hash = sequence.content_hash();
  trace.scheme_hash = scheme.content_hash();

  auto rate_at = [&](std::size_t state_index) {
    return fluorescence_rate(PopulationVector{states[state_index]}, scheme, detector);
  };
  for (std::size_t i = 0; i < bins; ++i) {
    const double width = edges[i + 1] - edges[i];
    const double expected =
        width / 6.0 * (rate_at(2 * i) + 4.0 * rate_at(2 * i + 1) + rate_at(2 * i + 2)) +
        detector.background * width;
    trace.counts[i] = expected * static_cast<double>(sequence.repetitions);
  }

  if (detector.shot_noise) {
    for (std::size_t i = 0; i < bins; ++i) {
      CounterRng rng(detector.rng_seed, i);
      trace.counts[i] = static_cast<double>(poisson_sample(trace.counts[i], rng));
    }
  }
  return trace;
}

namespace {

struct ReadWindow {
  std::size_t channel_index = 0;
  std::size_t event_index = 0;
  double t_on = 0;
  double t_off = 0;
  double previous_end = 0;
};

ReadWindow find_readout(const PulseSequence& sequence) {
  ReadWindow window;
  bool found = false;
  for (std::size_t c = 0; c < sequence.channels.size(); ++c) {
    const auto& events = sequence.channels[c].events;
    for (std::size_t e = 0; e < events.size(); ++e) {
      if (!found || events[e].first > window.t_on) {
        window = {c, e, events[e].first, events[e].second, 0.0};
        found = true;
      }
    }
  }
  if (!found) throw_config("sequence template has no pulses");
  for (std::size_t c = 0; c < sequence.channels.size(); ++c) {
    const auto& events = sequence.channels[c].events;
    for (std::size_t e = 0; e < events.size(); ++e) {
      if (c == window.channel_index && e == window.event_index) continue;
      if (events[e].second <= window.t_on) {
        window.previous_end = std::max(window.previous_end, events[e].second);
      } else {
        throw_config("sequence template has no dark gap before the readout pulse");
      }
    }
  }
  return window;
}

struct EdgeExtraction {
  double h = 0;
  double plateau = 0;
};

// h = mean of the first three bins after the switching ramp (five time
// constants), minus the plateau taken over the last 10% of the pulse window.
// Skipping the ramp matters at sub-ns binning, where the nominal first bins
// sample the modulator edge rather than the emitter.
EdgeExtraction extract_leading_edge(const TimeTrace& trace, double window_start,
                                    double window_end, double ramp_time,
                                    bool poisson_noise = false) {
  const double lead_start = window_start + 5.0 * ramp_time;
  const double full_width = trace.bin_edges.size() > 1 ? trace.bin_edges[1] - trace.bin_edges[0] : 0;
  std::vector<double> counts;
  std::vector<double> lead_bins;
  for (std::size_t i = 0; i + 1 < trace.bin_edges.size(); ++i) {
    if (trace.bin_edges[i] < window_start - 1e-15 || trace.bin_edges[i + 1] > window_end + 1e-15) {
      continue;
    }
    // a trailing partial bin carries a count fragment; keep full bins only
    if (trace.bin_edges[i + 1] - trace.bin_edges[i] < 0.999 * full_width) continue;
    counts.push_back(trace.counts[i]);
    if (trace.bin_edges[i] >= lead_start - 1e-15 && lead_bins.size() < 3) {
      lead_bins.push_back(trace.counts[i]);
    }
  }
  if (counts.size() < 10 || lead_bins.size() < 3) {
    throw_numeric("readout window covers too few bins; shrink bin_width or lengthen the pulse");
  }
  const std::size_t tail = std::max<std::size_t>(3, counts.size() / 10);
  double plateau = 0, previous = 0;
  for (std::size_t i = counts.size() - tail; i < counts.size(); ++i) plateau += counts[i];
  plateau /= static_cast<double>(tail);
  for (std::size_t i = counts.size() - 2 * tail; i < counts.size() - tail; ++i) previous += counts[i];
  previous /= static_cast<double>(tail);
  const double lead = (lead_bins[0] + lead_bins[1] + lead_bins[2]) / 3.0;
  // tolerate the slow residual drift of a two-scale decay; flag only gross
  // misconfiguration where the readout window misses the fast decay
  const double drift = std::abs(plateau - previous);
  double allowance = std::max(0.02 * std::abs(plateau), 0.03 * std::abs(lead - plateau));
  if (poisson_noise) {
    // counts are Poisson; the two tail means scatter by sqrt(mean/n) each
    const double mean = std::max(0.5 * (plateau + previous), 1e-12);
    allowance += 6.0 * std::sqrt(mean / static_cast<double>(tail));
  }
  if (drift > allowance) {
    throw_numeric("plateau not reached during readout; extend the readout pulse");
  }
  return {lead - plateau, plateau};
}

}  // namespace

std::vector<TauPoint> spin_t1_experiment(const LevelScheme& scheme, const Environment& env,
                                         const DetectorModel& detector,
                                         const std::vector<double>& tau_list,
                                         const PulseSequence& sequence_template, int jobs) {
  for (double tau : tau_list) {
    if (!(tau >= 0)) throw_invalid("tau values must be >= 0");
  }
  const ReadWindow window = find_readout(sequence_template);
  const double margin = sequence_template.total_duration - window.t_off;
  if (margin < 0) throw_config("readout pulse extends beyond the sequence duration");

  RateMatrix dark = build_rate_matrix(scheme, {}, env);
  PopulationVector thermal = steady_state_populations(dark);

  std::vector<TauPoint> points(tau_list.size());
  parallel_for(tau_list.size(), jobs, [&](std::size_t k) {
    const double tau = tau_list[k];
    PulseSequence seq = sequence_template;
    auto& event = seq.channels[window.channel_index].events[window.event_index];
    // snap the readout start onto the bin grid so the leading-edge window
    // sits at the same depth into the pulse for every tau; report the dark
    // interval actually realized
    const double desired_on = window.previous_end + tau;
    const double snapped_on =
        std::round(desired_on / detector.bin_width) * detector.bin_width;
    const double shift = snapped_on - window.t_on;
    const double actual_tau = snapped_on - window.previous_end;
    event.first += shift;
    event.second += shift;
    seq.total_duration += shift;
    TimeTrace trace = simulate_sequence(scheme, seq, env, detector, thermal);
    EdgeExtraction edge = extract_leading_edge(trace, event.first, event.second,
                                               seq.rise_fall_time, detector.shot_noise);
    points[k] = {actual_tau, edge.h, edge.plateau};
  });
  return points;
}

std::vector<TauPoint> orbital_t1_experiment(const LevelScheme& scheme, const Environment& env,
                                            const DetectorModel& detector,
                                            const std::vector<double>& gap_list,
                                            double pulse_width, int jobs,
                                            const Laser& pulse_laser, long repetitions) {
  if (scheme.field.magnitude != 0.0) {
    throw_config("orbital t1 experiment requires a zero-field scheme");
  }
  if (!(pulse_width > 0)) throw_config("pulse width must be > 0");

  auto [down, up] = phonon_rates(scheme.params.ground_orbital_splitting, env);
  const double equilibration = down + up;
  if (!(equilibration > 0)) throw_config("orbital coupling must be > 0 for this experiment");
  const double reset_tail = 10.0 / equilibration;

  std::vector<TauPoint> points(gap_list.size());
  parallel_for(gap_list.size(), jobs, [&](std::size_t k) {
    const double gap = gap_list[k];
    if (!(gap >= 0)) throw_invalid("gap values must be >= 0");
    PulseChannel channel;
    channel.name = "d";
    channel.laser = pulse_laser;
    const double t0 = 20e-9;
    // bin-grid alignment of the second pulse, as in spin_t1_experiment
    const double second_on = std::round((t0 + pulse_width + gap) / detector.bin_width) *
                             detector.bin_width;
    const double actual_gap = second_on - t0 - pulse_width;
    channel.events = {{t0, t0 + pulse_width}, {second_on, second_on + pulse_width}};
    PulseSequence seq;
    seq.channels = {channel};
    seq.rise_fall_time = 1e-9;
    seq.extinction_db = 60.0;
    seq.total_duration = second_on + pulse_width + reset_tail;
    seq.repetitions = repetitions;  // > 1 converges onto the cyclic state

    RateMatrix dark = build_rate_matrix(scheme, {}, env);
    PopulationVector thermal = steady_state_populations(dark);
    TimeTrace trace = simulate_sequence(scheme, seq, env, detector, thermal);
    EdgeExtraction edge =
        extract_leading_edge(trace, channel.events[1].first, channel.events[1].second,
                             seq.rise_fall_time, detector.shot_noise);
    points[k] = {actual_gap, edge.h, edge.plateau};
  });
  return points;
}

double initialization_fidelity(double h0, double a, ReadMode mode, bool* out_of_range) {
  if (!(a > 0)) throw_invalid("initialization_fidelity requires a > 0");
  double fidelity = h0 / (2.0 * a);
  if (mode == ReadMode::Dark) fidelity = 1.0 - fidelity;
  bool clamped = false;
  if (fidelity < 0) {
    fidelity = 0;
    clamped = true;
  } else if (fidelity > 1) {
    fidelity = 1;
    clamped = true;
  }
  if (out_of_range) *out_of_range = clamped;
  return fidelity;
}

std::string trace_to_csv(const TimeTrace& trace) {
  CsvTable table;
  table.header = {"t_start_s", "t_end_s", "counts"};
  for (std::size_t i = 0; i < trace.counts.size(); ++i) {
    table.rows.push_back({format_double(trace.bin_edges[i]), format_double(trace.bin_edges[i + 1]),
                          format_double(trace.counts[i])});
  }
  return table.to_string();
}

std::string tau_points_to_csv(const std::vector<TauPoint>& points) {
  CsvTable table;
  table.header = {"tau_s", "h", "a"};
  for (const TauPoint& point : points) {
    table.rows.push_back(
        {format_double(point.tau), format_double(point.h), format_double(point.plateau)});
  }
  return table.to_string();
}

}  // namespace siv

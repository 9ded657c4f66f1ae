#include "level_scheme.hpp"

#include <algorithm>
#include <cmath>

#include "constants.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "hash.hpp"

namespace siv {

namespace {

void validate_inputs(const SivParameters& p, const MagneticConfig& f, const HyperfineConfig& hf) {
  auto finite_positive = [](double v, const char* name) {
    if (!std::isfinite(v) || v <= 0) {
      throw_config(std::string(name) + " must be finite and > 0, got " + format_compact(v));
    }
  };
  finite_positive(p.ground_orbital_splitting, "ground_orbital_splitting");
  finite_positive(p.excited_orbital_splitting, "excited_orbital_splitting");
  finite_positive(p.zpl_frequency, "zpl_frequency");
  finite_positive(p.g_ground_upper, "g_ground_upper");
  finite_positive(p.g_ground_lower, "g_ground_lower");
  finite_positive(p.g_excited_upper, "g_excited_upper");
  finite_positive(p.g_excited_lower, "g_excited_lower");
  finite_positive(p.radiative_lifetime, "radiative_lifetime");
  if (!std::isfinite(p.branching_zpl) || p.branching_zpl <= 0 || p.branching_zpl > 1) {
    throw_config("branching_zpl must be in (0, 1]");
  }
  if (!std::isfinite(p.branch_share_upper) || p.branch_share_upper < 0 || p.branch_share_upper > 1) {
    throw_config("branch_share_upper must be in [0, 1]");
  }
  if (!std::isfinite(f.magnitude) || f.magnitude < 0) {
    throw_config("field magnitude must be >= 0 gauss");
  }
  if (!std::isfinite(f.polar_angle) || f.polar_angle < 0 || f.polar_angle > kPi / 2) {
    throw_config("field polar_angle must be in [0, pi/2] rad");
  }
  if (!std::isfinite(f.mixing_scale) || f.mixing_scale <= 0) {
    throw_config("field mixing_scale must be > 0 gauss");
  }
  if (hf.enabled && (!std::isfinite(hf.coupling_a) || hf.coupling_a < 0)) {
    throw_config("hyperfine coupling must be >= 0 Hz");
  }
}

double branch_g(const SivParameters& p, Manifold m) {
  switch (m) {
    case Manifold::GroundLower: return p.g_ground_lower;
    case Manifold::GroundUpper: return p.g_ground_upper;
    case Manifold::ExcitedLower: return p.g_excited_lower;
    case Manifold::ExcitedUpper: return p.g_excited_upper;
  }
  return 0;
}

double branch_base(const SivParameters& p, Manifold m) {
  switch (m) {
    case Manifold::GroundLower: return 0.0;
    case Manifold::GroundUpper: return p.ground_orbital_splitting;
    case Manifold::ExcitedLower: return kExcitedBaseOffsetHz;
    case Manifold::ExcitedUpper: return kExcitedBaseOffsetHz + p.excited_orbital_splitting;
  }
  return 0;
}

std::string level_label(Manifold m, int spin, int nuclear) {
  std::string s;
  switch (m) {
    case Manifold::GroundLower: s = "gl"; break;
    case Manifold::GroundUpper: s = "gu"; break;
    case Manifold::ExcitedLower: s = "el"; break;
    case Manifold::ExcitedUpper: s = "eu"; break;
  }
  s += (spin > 0) ? '+' : '-';
  if (nuclear != 0) s += (nuclear > 0) ? ":n+" : ":n-";
  return s;
}

// Optical line letter per (excited branch, ground branch) pair, A-D in order
// of decreasing line frequency.
char line_letter(Manifold excited, Manifold ground) {
  if (excited == Manifold::ExcitedUpper) {
    return ground == Manifold::GroundLower ? 'A' : 'B';
  }
  return ground == Manifold::GroundLower ? 'C' : 'D';
}

}  // namespace

double spin_mixing_fraction(const MagneticConfig& field, double mixing_scale) {
  if (!std::isfinite(mixing_scale) || mixing_scale <= 0) {
    throw_config("mixing_scale must be > 0 gauss");
  }
  if (!std::isfinite(field.magnitude) || field.magnitude < 0) {
    throw_config("field magnitude must be >= 0 gauss");
  }
  const double off_axis = field.magnitude * std::sin(field.polar_angle);
  const double half_angle = 0.5 * std::atan(off_axis / mixing_scale);
  const double s = std::sin(half_angle);
  return s * s;
}

LevelScheme build_level_scheme(const SivParameters& params, const MagneticConfig& field,
                               const HyperfineConfig& hyperfine) {
  validate_inputs(params, field, hyperfine);

  LevelScheme scheme;
  scheme.params = params;
  scheme.field = field;
  scheme.hyperfine = hyperfine;
  scheme.mixing_fraction = spin_mixing_fraction(field, field.mixing_scale);

  const std::vector<int> nuclear_states = hyperfine.enabled ? std::vector<int>{-1, +1}
                                                            : std::vector<int>{0};
  const Manifold manifolds[4] = {Manifold::GroundLower, Manifold::GroundUpper,
                                 Manifold::ExcitedLower, Manifold::ExcitedUpper};

  // Level order: manifold, then spin, then nuclear projection. Within a
  // branch the spin-down sublevel sits lower for positive g.
  for (Manifold m : manifolds) {
    for (int spin : {-1, +1}) {
      for (int nuc : nuclear_states) {
        Level lvl;
        lvl.index = scheme.level_count();
        lvl.manifold = m;
        lvl.spin = spin;
        lvl.nuclear = nuc;
        lvl.label = level_label(m, spin, nuc);
        double e = branch_base(params, m);
        e += 0.5 * branch_g(params, m) * kBohrMagnetonHzPerGauss * field.magnitude * spin;
        if (!is_excited(m) && nuc != 0) {
          e += 0.5 * hyperfine.coupling_a * spin * nuc;
        }
        lvl.energy = e;
        scheme.levels.push_back(std::move(lvl));
      }
    }
  }

  // All optical lines, nuclear-spin conserving. Spin-conserving dipoles carry
  // weight (1 - eps), spin-flipping ones eps.
  const double eps = scheme.mixing_fraction;
  for (const Level& upper : scheme.levels) {
    if (!is_excited(upper.manifold)) continue;
    for (const Level& lower : scheme.levels) {
      if (is_excited(lower.manifold)) continue;
      if (lower.nuclear != upper.nuclear) continue;
      Transition t;
      t.lower = lower.index;
      t.upper = upper.index;
      t.frequency = upper.energy - lower.energy;
      t.spin_flipping = lower.spin != upper.spin;
      t.dipole_weight = t.spin_flipping ? eps : 1.0 - eps;
      scheme.transitions.push_back(std::move(t));
    }
  }

  // Labels: group per line letter and nuclear sector, number 1-4 by
  // decreasing frequency. Ties (zero field) resolve by level index.
  for (char letter : {'A', 'B', 'C', 'D'}) {
    for (int nuc : nuclear_states) {
      std::vector<Transition*> group;
      for (Transition& t : scheme.transitions) {
        const Level& lo = scheme.levels[t.lower];
        const Level& up = scheme.levels[t.upper];
        if (lo.nuclear != nuc) continue;
        if (line_letter(up.manifold, lo.manifold) != letter) continue;
        group.push_back(&t);
      }
      std::sort(group.begin(), group.end(), [](const Transition* a, const Transition* b) {
        if (a->frequency != b->frequency) return a->frequency > b->frequency;
        if (a->lower != b->lower) return a->lower < b->lower;
        return a->upper < b->upper;
      });
      for (std::size_t i = 0; i < group.size(); ++i) {
        std::string label;
        label += letter;
        label += static_cast<char>('1' + i);
        if (nuc != 0) label += (nuc > 0) ? '+' : '-';
        group[i]->label = std::move(label);
      }
    }
  }

  std::sort(scheme.transitions.begin(), scheme.transitions.end(),
            [](const Transition& a, const Transition& b) { return a.label < b.label; });
  return scheme;
}

const Transition& transition_lookup(const LevelScheme& scheme, const std::string& label) {
  for (const Transition& t : scheme.transitions) {
    if (t.label == label) return t;
  }
  std::string valid;
  for (const Transition& t : scheme.transitions) {
    if (!valid.empty()) valid += ", ";
    valid += t.label;
  }
  throw_config("unknown transition label '" + label + "'; valid labels: " + valid);
}

std::uint64_t LevelScheme::content_hash() const {
  std::uint64_t h = kFnvOffset;
  auto mix_d = [&h](double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    __builtin_memcpy(&bits, &v, sizeof(bits));
    h = fnv1a64_mix(h, bits);
  };
  mix_d(mixing_fraction);
  for (const Level& l : levels) {
    h = fnv1a64_mix(h, static_cast<std::uint64_t>(l.index));
    h = fnv1a64_mix(h, static_cast<std::uint64_t>(static_cast<int>(l.manifold)));
    h = fnv1a64_mix(h, static_cast<std::uint64_t>(l.spin + 2));
    h = fnv1a64_mix(h, static_cast<std::uint64_t>(l.nuclear + 2));
    mix_d(l.energy);
  }
  for (const Transition& t : transitions) {
    h = fnv1a64(t.label, h);
    h = fnv1a64_mix(h, static_cast<std::uint64_t>(t.lower));
    h = fnv1a64_mix(h, static_cast<std::uint64_t>(t.upper));
    mix_d(t.frequency);
    mix_d(t.dipole_weight);
  }
  mix_d(params.radiative_lifetime);
  mix_d(params.branch_share_upper);
  return h;
}

}  // namespace siv

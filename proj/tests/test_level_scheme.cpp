#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "error.hpp"
#include "level_scheme.hpp"

using namespace siv;

namespace {

LevelScheme aligned_scheme(double field_gauss = 4500.0) {
  SivParameters params;
  MagneticConfig field;
  field.magnitude = field_gauss;
  field.polar_angle = 0.0;
  return build_level_scheme(params, field, HyperfineConfig{});
}

double freq(const LevelScheme& s, const std::string& label) {
  return transition_lookup(s, label).frequency;
}

}  // namespace

TEST_CASE("zero field collapses each line to a single frequency") {
  LevelScheme scheme = aligned_scheme(0.0);
  REQUIRE(scheme.level_count() == 8);
  for (char letter : {'C', 'D'}) {
    std::set<double> freqs;
    for (const Transition& t : scheme.transitions) {
      if (t.label[0] == letter) freqs.insert(t.frequency);
    }
    CHECK(freqs.size() == 1);
  }
}

TEST_CASE("aligned 4.5 kG field resolves D2/D3 and orders D1>D2>D3>D4") {
  LevelScheme scheme = aligned_scheme();
  const double d1 = freq(scheme, "D1");
  const double d2 = freq(scheme, "D2");
  const double d3 = freq(scheme, "D3");
  const double d4 = freq(scheme, "D4");
  CHECK(d1 > d2);
  CHECK(d2 > d3);
  CHECK(d3 > d4);
  // defaults use unequal D-branch g-factors, so the inner pair is resolved
  CHECK(d2 - d3 > 1e9);
  // spin-flipping lines sit outermost
  CHECK(transition_lookup(scheme, "D1").spin_flipping);
  CHECK(transition_lookup(scheme, "D4").spin_flipping);
  CHECK_FALSE(transition_lookup(scheme, "D2").spin_flipping);
  CHECK_FALSE(transition_lookup(scheme, "D3").spin_flipping);
}

TEST_CASE("equal C-branch g-factors make C2 and C3 coincide") {
  LevelScheme scheme = aligned_scheme();
  REQUIRE(scheme.params.g_ground_lower == scheme.params.g_excited_lower);
  CHECK(freq(scheme, "C2") == doctest::Approx(freq(scheme, "C3")).epsilon(1e-12));
}

TEST_CASE("spin mixing fraction") {
  MagneticConfig field;
  field.magnitude = 4500.0;

  SUBCASE("aligned field gives exactly zero") {
    field.polar_angle = 0.0;
    CHECK(spin_mixing_fraction(field, 14.5e3) == 0.0);
  }

  SUBCASE("strictly increasing in angle, bounded below 1/2") {
    double prev = -1.0;
    for (double deg : {0.0, 5.0, 20.0, 45.0, 70.0, 90.0}) {
      field.polar_angle = deg * M_PI / 180.0;
      const double eps = spin_mixing_fraction(field, 14.5e3);
      CHECK(eps > prev);
      CHECK(eps < 0.5);
      prev = eps;
    }
  }

  SUBCASE("closed form at 20 degrees") {
    field.polar_angle = 20.0 * M_PI / 180.0;
    const double off_axis = 4500.0 * std::sin(field.polar_angle);
    const double expected = std::pow(std::sin(0.5 * std::atan(off_axis / 14.5e3)), 2);
    CHECK(spin_mixing_fraction(field, 14.5e3) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("misaligned scheme gives spin-flip transitions weight eps") {
  SivParameters params;
  MagneticConfig field;
  field.magnitude = 4500.0;
  field.polar_angle = 20.0 * M_PI / 180.0;
  LevelScheme scheme = build_level_scheme(params, field, HyperfineConfig{});
  const double eps = scheme.mixing_fraction;
  CHECK(eps > 0.0);
  CHECK(transition_lookup(scheme, "D1").dipole_weight == doctest::Approx(eps));
  CHECK(transition_lookup(scheme, "D2").dipole_weight == doctest::Approx(1.0 - eps));
}

TEST_CASE("transition lookup") {
  LevelScheme scheme = aligned_scheme();

  SUBCASE("D2 is the spin-conserving line within the D group") {
    const Transition& d2 = transition_lookup(scheme, "D2");
    CHECK_FALSE(d2.spin_flipping);
    CHECK(scheme.levels[d2.lower].manifold == Manifold::GroundUpper);
    CHECK(scheme.levels[d2.upper].manifold == Manifold::ExcitedLower);
  }

  SUBCASE("D1/D2 and D3/D4 form Lambda pairs sharing an upper level") {
    CHECK(transition_lookup(scheme, "D1").upper == transition_lookup(scheme, "D2").upper);
    CHECK(transition_lookup(scheme, "D3").upper == transition_lookup(scheme, "D4").upper);
    CHECK(transition_lookup(scheme, "D1").lower != transition_lookup(scheme, "D2").lower);
  }

  SUBCASE("C3 sits between C4 and C2") {
    const double c2 = freq(scheme, "C2");
    const double c3 = freq(scheme, "C3");
    const double c4 = freq(scheme, "C4");
    CHECK(c3 >= c4);
    CHECK(c3 <= c2);
  }

  SUBCASE("unknown label raises and names valid labels") {
    CHECK_THROWS_WITH_AS(transition_lookup(scheme, "Q7"),
                         doctest::Contains("unknown transition label 'Q7'"), SivError);
    try {
      transition_lookup(scheme, "Q7");
    } catch (const SivError& e) {
      CHECK(std::string(e.what()).find("D2") != std::string::npos);
    }
  }
}

TEST_CASE("label ordering holds for randomized fields and g-factors") {
  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> gdist(0.5, 3.0);
  std::uniform_real_distribution<double> bdist(100.0, 9000.0);
  std::uniform_real_distribution<double> adist(0.0, M_PI / 2);
  for (int trial = 0; trial < 100; ++trial) {
    SivParameters params;
    params.g_ground_lower = gdist(rng);
    params.g_ground_upper = gdist(rng);
    params.g_excited_lower = gdist(rng);
    params.g_excited_upper = gdist(rng);
    MagneticConfig field;
    field.magnitude = bdist(rng);
    field.polar_angle = adist(rng);
    LevelScheme scheme = build_level_scheme(params, field, HyperfineConfig{});
    for (char letter : {'A', 'B', 'C', 'D'}) {
      std::string base(1, letter);
      CHECK(freq(scheme, base + "1") > freq(scheme, base + "2"));
      CHECK(freq(scheme, base + "2") >= freq(scheme, base + "3"));
      CHECK(freq(scheme, base + "3") > freq(scheme, base + "4"));
    }
    // branching out of each excited level into each ground branch is normalized
    for (const Level& upper : scheme.levels) {
      if (!is_excited(upper.manifold)) continue;
      for (Manifold branch : {Manifold::GroundLower, Manifold::GroundUpper}) {
        double sum = 0;
        for (const Transition& t : scheme.transitions) {
          if (t.upper != upper.index) continue;
          if (scheme.levels[t.lower].manifold != branch) continue;
          sum += t.dipole_weight;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("rebuild with identical inputs is bit-identical") {
  SivParameters params;
  MagneticConfig field;
  field.magnitude = 3210.0;
  field.polar_angle = 0.31;
  HyperfineConfig hf;
  hf.enabled = true;
  hf.coupling_a = 34.5e6;
  LevelScheme a = build_level_scheme(params, field, hf);
  LevelScheme b = build_level_scheme(params, field, hf);
  CHECK(a.content_hash() == b.content_hash());
  REQUIRE(a.levels.size() == b.levels.size());
  for (std::size_t i = 0; i < a.levels.size(); ++i) {
    CHECK(a.levels[i].energy == b.levels[i].energy);
  }
}

TEST_CASE("hyperfine structure") {
  SivParameters params;
  MagneticConfig field;
  field.magnitude = 4500.0;
  HyperfineConfig hf;
  hf.enabled = true;
  hf.coupling_a = 34.5e6;
  LevelScheme scheme = build_level_scheme(params, field, hf);

  SUBCASE("sixteen levels and nuclear-conserving doubling of every line") {
    CHECK(scheme.level_count() == 16);
    CHECK(scheme.transitions.size() == 32);
    for (const Transition& t : scheme.transitions) {
      CHECK(scheme.levels[t.lower].nuclear == scheme.levels[t.upper].nuclear);
    }
  }

  SUBCASE("ground-state splitting differs by 2A between nuclear sectors") {
    const double split_plus = freq(scheme, "D1+") - freq(scheme, "D2+");
    const double split_minus = freq(scheme, "D1-") - freq(scheme, "D2-");
    CHECK(std::abs(split_plus - split_minus) == doctest::Approx(2 * hf.coupling_a).epsilon(1e-9));
  }

  SUBCASE("zero coupling is accepted and collapses the sectors") {
    hf.coupling_a = 0.0;
    LevelScheme degenerate = build_level_scheme(params, field, hf);
    CHECK(freq(degenerate, "D2+") == freq(degenerate, "D2-"));
  }
}

TEST_CASE("invalid inputs are rejected") {
  SivParameters params;
  MagneticConfig field;
  SUBCASE("negative lifetime") {
    params.radiative_lifetime = -1.0;
    CHECK_THROWS_AS(build_level_scheme(params, field, HyperfineConfig{}), SivError);
  }
  SUBCASE("non-finite splitting") {
    params.ground_orbital_splitting = std::nan("");
    CHECK_THROWS_AS(build_level_scheme(params, field, HyperfineConfig{}), SivError);
  }
  SUBCASE("angle out of range") {
    field.polar_angle = 2.0;
    CHECK_THROWS_AS(build_level_scheme(params, field, HyperfineConfig{}), SivError);
  }
  SUBCASE("negative field") {
    field.magnitude = -10.0;
    CHECK_THROWS_AS(build_level_scheme(params, field, HyperfineConfig{}), SivError);
  }
}

#include "presets.hpp"

#include <array>

#include "error.hpp"

namespace siv {

namespace {

struct Preset {
  const char* name;
  const char* text;
};

// Resonant-excitation scan across line D with a repump on D2. Without the
// pump only the two spin-conserving lines show; the pump makes the weak
// spin-flipping lines appear.
constexpr const char* kFig1d = R"(scenario = spectrum
field.magnitude = 4.5 kG
field.polar_angle = 1 deg
env.temperature = 4.5 K
env.orbital_t1_ref = 38 ns
env.spin_t1 = 2.4 ms
spectrum.reference = D2
spectrum.from = -16 GHz
spectrum.to = 14 GHz
spectrum.points = 400
spectrum.probe.saturation = 2
spectrum.probe.linewidth = 94 MHz
spectrum.pump.enabled = true
spectrum.pump.target = D2
spectrum.pump.saturation = 1
spectrum.pump.linewidth = 94 MHz
spectrum.feature_prominence = 0.005
)";

// Line C counterpart: the spin-conserving pair is nearly degenerate here, so
// the preset detunes the excited g-factor slightly from its ground partner.
constexpr const char* kFigS1LineC = R"(scenario = spectrum
field.magnitude = 4.5 kG
field.polar_angle = 1 deg
scheme.g_excited_lower = 2.26
env.temperature = 4.5 K
env.orbital_t1_ref = 38 ns
env.spin_t1 = 2.4 ms
spectrum.reference = C2
spectrum.from = -16 GHz
spectrum.to = 16 GHz
spectrum.points = 500
spectrum.probe.saturation = 2
spectrum.probe.linewidth = 94 MHz
spectrum.pump.enabled = true
spectrum.pump.target = C2
spectrum.pump.saturation = 1
spectrum.pump.linewidth = 94 MHz
spectrum.feature_prominence = 0.005
)";

// Spin initialization via D1, readout on the cycling D2 line. The decay of
// the leading edge across the dark interval gives the spin relaxation time.
constexpr const char* kFig2bSpinT1 = R"(scenario = spin-t1
field.magnitude = 4.5 kG
field.polar_angle = 3.2 deg
env.temperature = 4.5 K
env.orbital_t1_ref = 38 ns
env.spin_t1 = 2.4 ms
detector.efficiency = 1.5e-4
detector.bin_width = 6.4 us
spint1.init.target = D1
spint1.init.saturation = 0.87
spint1.init.linewidth = 94 MHz
spint1.init.duration = 200 us
spint1.read.target = D2
spint1.read.saturation = 2.0
spint1.read.linewidth = 94 MHz
spint1.read.duration = 3100 us
spint1.gap = 100 us
spint1.rise = 60 ns
spint1.extinction = 60 dB
spint1.repetitions = 100
spint1.taus = 0.1 ms, 0.3 ms, 0.8 ms, 1.6 ms, 3 ms, 6 ms, 10 ms
spint1.read_mode = bright
)";

// Zero-field pulse pairs on line D resolve the fast orbital relaxation.
constexpr const char* kFig2cOrbitalT1 = R"(scenario = orbital-t1
field.magnitude = 0 G
env.temperature = 4.5 K
env.orbital_t1_ref = 38 ns
env.spin_t1 = 2.4 ms
detector.efficiency = 1e-3
detector.bin_width = 200 ps
orbt1.pulse_width = 80 ns
orbt1.saturation = 5
orbt1.linewidth = 94 MHz
orbt1.gaps = 4 ns, 10 ns, 20 ns, 40 ns, 80 ns, 150 ns, 250 ns
)";

// Continuous-wave CPT on the D1/D2 Lambda pair.
constexpr const char* kFig3aCpt = R"(scenario = cpt
field.magnitude = 4.5 kG
field.polar_angle = 20 deg
env.temperature = 4.5 K
env.orbital_t1_ref = 38 ns
env.spin_t1 = 2.4 ms
cpt.leg1 = D2
cpt.leg2 = D1
cpt.pump_rabi = 8 MHz
cpt.probe_rabi = 4 MHz
cpt.gamma_mode = t2star
cpt.t2_star = 35 ns
cpt.scan.from = -40 MHz
cpt.scan.to = 40 MHz
cpt.scan.points = 401
cpt.fit_window = 12 MHz
)";

// Power series over the same Lambda pair; the zero-power extrapolation of the
// fitted widths removes the drive broadening.
constexpr const char* kFig3bPower = R"(scenario = cpt
field.magnitude = 4.5 kG
field.polar_angle = 20 deg
env.temperature = 4.5 K
env.orbital_t1_ref = 38 ns
env.spin_t1 = 2.4 ms
cpt.leg1 = D2
cpt.leg2 = D1
cpt.pump_rabi = 8 MHz
cpt.probe_rabi = 4 MHz
cpt.gamma_mode = t2star
cpt.t2_star = 35 ns
cpt.scan.from = -25 MHz
cpt.scan.to = 25 MHz
cpt.scan.points = 501
cpt.fit_window = 12 MHz
cpt.power_scales = 0.2, 0.4, 0.7, 1.0, 1.5
)";

// The narrowest dip: lowest drive power of the series.
constexpr const char* kFig3cNarrow = R"(scenario = cpt
field.magnitude = 4.5 kG
field.polar_angle = 20 deg
env.temperature = 4.5 K
env.orbital_t1_ref = 38 ns
env.spin_t1 = 2.4 ms
cpt.leg1 = D2
cpt.leg2 = D1
cpt.pump_rabi = 3.6 MHz
cpt.probe_rabi = 1.8 MHz
cpt.gamma_mode = t2star
cpt.t2_star = 35 ns
cpt.scan.from = -25 MHz
cpt.scan.to = 25 MHz
cpt.scan.points = 501
cpt.fit_window = 10 MHz
)";

// 29Si sites: the two nuclear-spin-conserving Lambda schemes sit at different
// two-photon detunings, splitting the dip in two.
constexpr const char* kFig3dHyperfine = R"(scenario = hyperfine
field.magnitude = 4.5 kG
field.polar_angle = 20 deg
hyperfine.enabled = true
hyperfine.coupling = 34.5 MHz
env.temperature = 4.5 K
env.orbital_t1_ref = 38 ns
env.spin_t1 = 2.4 ms
cpt.leg1 = D2
cpt.leg2 = D1
cpt.pump_rabi = 4 MHz
cpt.probe_rabi = 4 MHz
cpt.gamma_mode = t2star
cpt.t2_star = 35 ns
cpt.scan.from = -90 MHz
cpt.scan.to = 90 MHz
cpt.scan.points = 721
)";

// Misaligned field: the spin-flipping line is strong enough to read out
// directly, and relaxation is far faster.
constexpr const char* kFigS4Misaligned = R"(scenario = spin-t1
field.magnitude = 4.5 kG
field.polar_angle = 20 deg
env.temperature = 4.5 K
env.orbital_t1_ref = 38 ns
env.spin_t1 = 3.4 us
detector.efficiency = 1e-3
detector.bin_width = 10 ns
spint1.init.target = D1
spint1.init.saturation = 20
spint1.init.linewidth = 94 MHz
spint1.init.duration = 20 us
spint1.read.target = D1
spint1.read.saturation = 20
spint1.read.linewidth = 94 MHz
spint1.read.duration = 20 us
spint1.gap = 15 us
spint1.rise = 1 ns
spint1.extinction = 60 dB
spint1.repetitions = 1000
spint1.tail = 5 us
spint1.taus = 0.5 us, 1.5 us, 3 us, 5 us, 8 us, 13 us, 20 us
spint1.read_mode = dark
)";

// Zero-field orbital Lambda: pump on line C, probe scanned across line D.
constexpr const char* kFigS5OrbitalCpt = R"(scenario = orbital-cpt
field.magnitude = 0 G
env.temperature = 4.5 K
env.orbital_t1_ref = 38 ns
env.spin_t1 = 2.4 ms
ocpt.pump_rabi = 15 MHz
ocpt.probe_rabi = 15 MHz
ocpt.pump_detuning = 0 Hz
ocpt.scan.from = -40 MHz
ocpt.scan.to = 40 MHz
ocpt.scan.points = 321
)";

constexpr std::array<Preset, 10> kPresets = {{
    {"fig1d", kFig1d},
    {"figS1-lineC", kFigS1LineC},
    {"fig2b-spinT1", kFig2bSpinT1},
    {"fig2c-orbitalT1", kFig2cOrbitalT1},
    {"fig3a-cpt", kFig3aCpt},
    {"fig3b-power", kFig3bPower},
    {"fig3c-narrow", kFig3cNarrow},
    {"fig3d-hyperfine", kFig3dHyperfine},
    {"figS4-misaligned", kFigS4Misaligned},
    {"figS5-orbital-cpt", kFigS5OrbitalCpt},
}};

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  names.reserve(kPresets.size());
  for (const Preset& preset : kPresets) names.push_back(preset.name);
  return names;
}

bool preset_exists(const std::string& name) {
  for (const Preset& preset : kPresets) {
    if (name == preset.name) return true;
  }
  return false;
}

std::string preset_text(const std::string& name) {
  for (const Preset& preset : kPresets) {
    if (name == preset.name) return preset.text;
  }
  std::string known;
  for (const Preset& preset : kPresets) {
    if (!known.empty()) known += ", ";
    known += preset.name;
  }
  throw_config("unknown preset '" + name + "'; available: " + known);
}

}  // namespace siv

#include "units.hpp"

#include <cerrno>
#include <cstdlib>

#include "constants.hpp"

namespace siv {

namespace {

struct UnitEntry {
  const char* suffix;
  double scale;
  UnitKind kind;
};

constexpr UnitEntry kUnits[] = {
    {"THz", 1e12, UnitKind::Frequency}, {"GHz", 1e9, UnitKind::Frequency},
    {"MHz", 1e6, UnitKind::Frequency},  {"kHz", 1e3, UnitKind::Frequency},
    {"Hz", 1.0, UnitKind::Frequency},   {"ps", 1e-12, UnitKind::Time},
    {"ns", 1e-9, UnitKind::Time},       {"us", 1e-6, UnitKind::Time},
    {"ms", 1e-3, UnitKind::Time},       {"s", 1.0, UnitKind::Time},
    {"kG", 1e3, UnitKind::Field},       {"G", 1.0, UnitKind::Field},
    {"T", 1e4, UnitKind::Field},        {"K", 1.0, UnitKind::Temperature},
    {"deg", kPi / 180.0, UnitKind::Angle}, {"rad", 1.0, UnitKind::Angle},
    {"dB", 1.0, UnitKind::Decibel},
};

}  // namespace

std::optional<Quantity> parse_quantity(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;

  std::string buffer(text);
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(buffer.c_str(), &end);
  if (end == buffer.c_str() || errno == ERANGE) return std::nullopt;

  std::string_view rest(end);
  while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) rest.remove_prefix(1);
  if (rest.empty()) return Quantity{value, UnitKind::None};

  for (const UnitEntry& unit : kUnits) {
    if (rest == unit.suffix) return Quantity{value * unit.scale, unit.kind};
  }
  return std::nullopt;
}

const char* unit_kind_name(UnitKind kind) {
  switch (kind) {
    case UnitKind::None: return "dimensionless";
    case UnitKind::Frequency: return "frequency";
    case UnitKind::Time: return "time";
    case UnitKind::Field: return "magnetic field";
    case UnitKind::Temperature: return "temperature";
    case UnitKind::Angle: return "angle";
    case UnitKind::Decibel: return "decibel";
  }
  return "unknown";
}

}  // namespace siv

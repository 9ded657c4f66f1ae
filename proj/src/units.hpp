#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace siv {

enum class UnitKind { None, Frequency, Time, Field, Temperature, Angle, Decibel };

struct Quantity {
  double value = 0;  // in base units: Hz, s, gauss, K, rad, dB
  UnitKind kind = UnitKind::None;
};

// Recognizes "94MHz", "4.5", "20 deg" style tokens; returns nullopt when the
// text is not a number or carries an unknown suffix.
std::optional<Quantity> parse_quantity(std::string_view text);

const char* unit_kind_name(UnitKind kind);

}  // namespace siv

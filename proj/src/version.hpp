#pragma once

namespace siv {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace siv

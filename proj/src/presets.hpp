#pragma once

#include <string>
#include <vector>

namespace siv {

// Named configurations covering the standard set of experiments.
std::vector<std::string> preset_names();
bool preset_exists(const std::string& name);
std::string preset_text(const std::string& name);  // throws for unknown names

}  // namespace siv

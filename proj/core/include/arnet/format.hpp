#pragma once

#include <string>

namespace arnet {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_real(double value);

}  // namespace arnet

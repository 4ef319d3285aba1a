#pragma once

#include <string>

namespace bcareid {

// Shortest decimal that parses back to exactly v.
std::string format_double(double v);

}  // namespace bcareid

#include "bcareid/text.hpp"

#include <charconv>

namespace bcareid {

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace bcareid

#include "bcareid/errors.hpp"

namespace bcareid {

ParseError::ParseError(const std::string& w, std::size_t r, std::string col)
    : Error("parse", "row " + std::to_string(r) + ", column '" + col + "': " + w),
      row(r),
      column(std::move(col)) {}

}  // namespace bcareid

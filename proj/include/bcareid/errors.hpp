#pragma once

#include <stdexcept>
#include <string>

namespace bcareid {

// Every failure the toolkit reports derives from Error. kind() is a stable
// lowercase tag used in machine-parsable CLI error lines.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};
struct DataError : Error {
  explicit DataError(const std::string& w) : Error("data", w) {}
};
struct ParseError : Error {
  ParseError(const std::string& w, std::size_t row, std::string column);
  std::size_t row;
  std::string column;
};
struct TrainingError : Error {
  explicit TrainingError(const std::string& w) : Error("training", w) {}
};
struct BatchCompositionError : Error {
  explicit BatchCompositionError(const std::string& w) : Error("batch", w) {}
};
struct EvaluationError : Error {
  explicit EvaluationError(const std::string& w) : Error("evaluation", w) {}
};
struct AlignmentError : Error {
  explicit AlignmentError(const std::string& w) : Error("alignment", w) {}
};
struct CheckpointError : Error {
  explicit CheckpointError(const std::string& w) : Error("checkpoint", w) {}
};

}  // namespace bcareid

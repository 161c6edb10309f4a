#ifndef PILEKD_ERRORS_HPP_
#define PILEKD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace pilekd {

// Base error carrying a stable category tag. The CLI maps categories to exit
// codes and prints them as "error: <category>: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

class InvalidInputError : public Error {
 public:
  explicit InvalidInputError(const std::string& message)
      : Error("invalid-input", message) {}
};

class InvalidStateError : public Error {
 public:
  explicit InvalidStateError(const std::string& message)
      : Error("invalid-state", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error("config", message) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message)
      : Error("parse", message) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error("validation", message) {}
};

class AlignmentError : public Error {
 public:
  explicit AlignmentError(const std::string& message)
      : Error("alignment", message) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& message)
      : Error("training", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

}  // namespace pilekd

#endif  // PILEKD_ERRORS_HPP_

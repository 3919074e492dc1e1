#pragma once

#include <stdexcept>
#include <string>

namespace transfit {

/// Invalid argument or violated precondition (bad link index, u outside (0,1), ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input text. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Failure of a numerical routine. The kind lets callers branch without
/// matching on message text.
class NumericalError : public std::runtime_error {
 public:
  enum class Kind {
    MaxIterations,
    LineSearchFailure,
    NonFiniteLikelihood,
    InfeasibleParameters,
    OuterNonConvergence,
    SingularInformation,
    BootstrapUnreliable,
  };

  NumericalError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace transfit

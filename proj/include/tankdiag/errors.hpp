#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tankdiag {

/// Malformed configuration, model or CSV input. Carries the 1-based line
/// number when one is known (0 otherwise).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(format(source, line, what)), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& source, std::size_t line,
                            const std::string& what) {
    std::string msg = source;
    if (line > 0) msg += ":" + std::to_string(line);
    if (!msg.empty()) msg += ": ";
    return msg + what;
  }

  std::size_t line_;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A simulated state left the configured envelope (bad parameters).
class NumericalBlowup : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergedLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The only computational sequences for a redundant set need derivative
/// causality.
class NoIntegralMatching : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TooFewSamples : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace tankdiag

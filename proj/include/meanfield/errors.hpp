#ifndef MEANFIELD_ERRORS_HPP
#define MEANFIELD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace meanfield {

// Invalid user-supplied configuration (bad dims, negative sigma, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible array shapes between values that must agree.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Argument outside the mathematical domain of an operation.
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or unsupported file content.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Simulation escaped the sane coordinate range or produced non-finite values.
struct BlowupError : std::runtime_error {
  BlowupError(const std::string& msg, long step)
      : std::runtime_error(msg + " (step " + std::to_string(step) + ")"), step_index(step) {}
  long step_index;
};

// Training produced a non-finite loss or gradient.
struct DivergedError : std::runtime_error {
  explicit DivergedError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace meanfield

#endif

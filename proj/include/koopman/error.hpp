#pragma once

#include <stdexcept>
#include <string>

namespace koopman {

/// Which part of the workflow raised an error. The CLI maps these onto exit
/// codes (config = 2, data = 3, regression = 4).
enum class ErrorKind { config, data, lifting, regression, reconstruction };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::lifting: return "lifting";
    case ErrorKind::regression: return "regression";
    case ErrorKind::reconstruction: return "reconstruction";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Non-fatal diagnostic produced by validation and fitting routines.
struct Finding {
  std::string kind;
  std::string message;
  int trajectory = -1;
  int row = -1;
  int column = -1;
};

}  // namespace koopman

#pragma once

#include <stdexcept>
#include <string>

namespace heislab {

// Error categories double as CLI exit codes; precondition maps to 1.
enum class ErrorKind {
  config = 1,
  solver = 2,
  infeasible = 3,
  precondition = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error("[" + module + "] " + message),
        kind_(kind),
        module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

}  // namespace heislab

#pragma once

#include <stdexcept>
#include <string>

namespace brw {

// Invalid or inconsistent user input (config files, CLI arguments, bad keys).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A numerical procedure failed to converge or produced out-of-contract values.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Monte Carlo particle cap exceeded beyond the tolerated replica fraction.
struct ParticleCapError : std::runtime_error {
  explicit ParticleCapError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace brw

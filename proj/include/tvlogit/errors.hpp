#pragma once

#include <stdexcept>
#include <string>

namespace tvlogit {

// Inputs whose lengths do not line up.
struct DimensionError : std::invalid_argument {
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Inputs outside an operation's domain (non-finite values, bad parameters).
struct InputError : std::invalid_argument {
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// The requested minimizer does not exist: the objective keeps decreasing
// along some escape direction.
struct NonAttainableError : std::runtime_error {
  explicit NonAttainableError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tvlogit

#pragma once

#include <stdexcept>
#include <string>

namespace stackgrid {

// Bad input: malformed files, inconsistent scenario data, violated preconditions.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical breakdown: singular factorizations, condition-number blowups.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stackgrid

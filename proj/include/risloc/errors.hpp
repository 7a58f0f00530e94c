#pragma once

#include <stdexcept>
#include <string>

namespace risloc {

// Source and reflector (or UE and BS/RIS) coincide, angles are undefined.
class DegenerateGeometryError : public std::runtime_error {
 public:
  explicit DegenerateGeometryError(const std::string& what)
      : std::runtime_error(what) {}
};

// Tensor or matrix shapes do not line up.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& what)
      : std::runtime_error(what) {}
};

// Bad or missing configuration values.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Training blew up (NaN loss) or another numeric contract was violated.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace risloc

#pragma once

#include <stdexcept>
#include <string>

namespace hiddenvi {

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct NotPositiveDefinite : std::runtime_error {
  explicit NotPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};

struct ZeroMatrix : std::runtime_error {
  explicit ZeroMatrix(const std::string& what) : std::runtime_error(what) {}
};

struct SingularMatrix : std::runtime_error {
  explicit SingularMatrix(const std::string& what) : std::runtime_error(what) {}
};

struct UnsupportedModel : std::runtime_error {
  explicit UnsupportedModel(const std::string& what) : std::runtime_error(what) {}
};

struct NumericalBlowup : std::runtime_error {
  explicit NumericalBlowup(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidRegime : std::runtime_error {
  explicit InvalidRegime(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hiddenvi

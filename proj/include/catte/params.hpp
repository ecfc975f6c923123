#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "catte/autodiff.hpp"

namespace catte {

using ad::Matrix;

/// Bound parameters of one forward pass, indexed like the ParameterSet.
using BoundParams = std::vector<ad::Var>;

/// Ordered collection of named dense parameter blocks. Order is insertion
/// order and is what checkpoints and optimizers iterate over.
class ParameterSet {
 public:
  std::size_t add(std::string name, Matrix value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Matrix& value(std::size_t i) { return values_[i]; }
  const Matrix& value(std::size_t i) const { return values_[i]; }

  std::optional<std::size_t> find(const std::string& name) const;
  /// Throws LookupError for unknown names.
  std::size_t index(const std::string& name) const;

  /// Registers every block on the tape. Blocks for which `trainable`
  /// returns false become constants.
  BoundParams bind(ad::Tape& tape,
                   const std::function<bool(std::size_t)>& trainable = {}) const;

  Eigen::Index total_size() const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

}  // namespace catte

#include "catte/params.hpp"

#include "catte/errors.hpp"

namespace catte {

std::size_t ParameterSet::add(std::string name, Matrix value) {
  if (find(name)) throw StructuralError("duplicate parameter block '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::optional<std::size_t> ParameterSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t ParameterSet::index(const std::string& name) const {
  if (auto i = find(name)) return *i;
  throw LookupError("no parameter block named '" + name + "'");
}

BoundParams ParameterSet::bind(ad::Tape& tape,
                               const std::function<bool(std::size_t)>& trainable) const {
  BoundParams bound;
  bound.reserve(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!trainable || trainable(i)) {
      bound.push_back(tape.leaf(values_[i]));
    } else {
      bound.push_back(tape.constant(values_[i]));
    }
  }
  return bound;
}

Eigen::Index ParameterSet::total_size() const {
  Eigen::Index n = 0;
  for (const Matrix& v : values_) n += v.size();
  return n;
}

}  // namespace catte

#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ptrner/matrix.hpp"

namespace ptrner {

using ParamId = std::size_t;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

// Named dense tensors with matching gradient buffers. Ids are stable indexes,
// so layer descriptors stay valid when the set is copied.
class ParameterSet {
 public:
  ParamId add(std::string name, std::size_t rows, std::size_t cols);

  Parameter& operator[](ParamId id) { return params_[id]; }
  const Parameter& operator[](ParamId id) const { return params_[id]; }
  Matrix& value(ParamId id) { return params_[id].value; }
  const Matrix& value(ParamId id) const { return params_[id].value; }
  Matrix& grad(ParamId id) { return params_[id].grad; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

  // Throws Error for unknown names.
  ParamId find(const std::string& name) const;

  void zero_grad();
  double grad_norm() const;
  void scale_grad(double factor);

  void init_normal(ParamId id, double stddev, std::mt19937_64& rng);
  void init_constant(ParamId id, double value);
  // Row r, column 2i / 2i+1: scale * sin / cos(r / 10000^(2i / cols)).
  void init_sinusoidal(ParamId id, double scale);

 private:
  std::vector<Parameter> params_;
};

}  // namespace ptrner

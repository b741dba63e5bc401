#include "ptrner/params.hpp"

#include <algorithm>
#include <cmath>

#include "ptrner/errors.hpp"

namespace ptrner {

ParamId ParameterSet::add(std::string name, std::size_t rows, std::size_t cols) {
  params_.push_back({std::move(name), Matrix(rows, cols), Matrix(rows, cols)});
  return params_.size() - 1;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

ParamId ParameterSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw Error("no parameter named '" + name + "'");
}

void ParameterSet::zero_grad() {
  for (Parameter& p : params_) p.grad.set_zero();
}

double ParameterSet::grad_norm() const {
  double s = 0.0;
  for (const Parameter& p : params_)
    for (double g : p.grad.data) s += g * g;
  return std::sqrt(s);
}

void ParameterSet::scale_grad(double factor) {
  for (Parameter& p : params_)
    for (double& g : p.grad.data) g *= factor;
}

void ParameterSet::init_normal(ParamId id, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : params_[id].value.data) v = dist(rng);
}

void ParameterSet::init_constant(ParamId id, double value) {
  std::fill(params_[id].value.data.begin(), params_[id].value.data.end(), value);
}

void ParameterSet::init_sinusoidal(ParamId id, double scale) {
  Matrix& m = params_[id].value;
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      const double rate = std::pow(10000.0, -static_cast<double>(c - c % 2) / static_cast<double>(m.cols));
      const double angle = static_cast<double>(r) * rate;
      m(r, c) = scale * (c % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
}

}  // namespace ptrner

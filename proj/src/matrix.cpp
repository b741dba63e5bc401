#include "ptrner/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ptrner/kernels.hpp"

namespace ptrner {

void Matrix::set_zero() { std::fill(data.begin(), data.end(), 0.0); }

void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols) throw std::invalid_argument("matmul_acc: shape mismatch");
  kernels::active().gemm_nn(a.rows, b.cols, a.cols, a.data.data(), b.data.data(), c.data.data());
}

void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.cols != b.cols || c.rows != a.rows || c.cols != b.rows) throw std::invalid_argument("matmul_nt_acc: shape mismatch");
  kernels::active().gemm_nt(a.rows, b.rows, a.cols, a.data.data(), b.data.data(), c.data.data());
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols) throw std::invalid_argument("matmul_tn_acc: shape mismatch");
  kernels::active().gemm_tn(a.rows, b.cols, a.cols, a.data.data(), b.data.data(), c.data.data());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  matmul_acc(a, b, c);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.rows);
  matmul_nt_acc(a, b, c);
  return c;
}

double dot(std::span<const double> x, std::span<const double> y) {
  return kernels::active().dot(x.data(), y.data(), std::min(x.size(), y.size()));
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  kernels::active().axpy(a, x.data(), y.data(), std::min(x.size(), y.size()));
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

void softmax_inplace(std::span<double> v) {
  if (v.empty()) return;
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    s += x;
  }
  for (double& x : v) x /= s;
}

void log_softmax_inplace(std::span<double> v) {
  const double lse = log_sum_exp(v);
  for (double& x : v) x -= lse;
}

Matrix gather_rows(const Matrix& table, const std::vector<int>& ids) {
  Matrix out(ids.size(), table.cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto src = table.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void add_row_prefix(Matrix& x, const Matrix& positions) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto r = x.row(i);
    const auto p = positions.row(i);
    for (std::size_t c = 0; c < x.cols; ++c) r[c] += p[c];
  }
}

void scatter_add_rows(Matrix& table, const std::vector<int>& ids, const Matrix& rows) {
  for (std::size_t i = 0; i < ids.size(); ++i) axpy(1.0, rows.row(i), table.row(static_cast<std::size_t>(ids[i])));
}

}  // namespace ptrner

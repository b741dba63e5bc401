#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace ptrner {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows && c < cols);
    return data[r * cols + c];
  }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  void set_zero();

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// c += a * b
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c);
// c += a * b^T
void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c);
// c += a^T * b
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);

double dot(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<double> y);

// In-place numerically stable softmax / log-softmax over a vector.
void softmax_inplace(std::span<double> v);
void log_softmax_inplace(std::span<double> v);
double log_sum_exp(std::span<const double> v);

// Rows `ids` of `table`, in order.
Matrix gather_rows(const Matrix& table, const std::vector<int>& ids);
// x.row(i) += positions.row(i) for every row of x.
void add_row_prefix(Matrix& x, const Matrix& positions);
// table.row(ids[i]) += rows.row(i)
void scatter_add_rows(Matrix& table, const std::vector<int>& ids, const Matrix& rows);

}  // namespace ptrner

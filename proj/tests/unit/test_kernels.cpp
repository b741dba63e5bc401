#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ptrner/kernels.hpp"
#include "ptrner/matrix.hpp"

using namespace ptrner;

namespace {

struct Shape {
  std::size_t m, n, k;
};

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// Independent triple loop, no kernel involved.
std::vector<double> naive_nn(std::size_t m, std::size_t n, std::size_t k, const std::vector<double>& a,
                             const std::vector<double>& b) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      long double s = 0;
      for (std::size_t p = 0; p < k; ++p) s += static_cast<long double>(a[i * k + p]) * b[p * n + j];
      c[i * n + j] = static_cast<double>(s);
    }
  return c;
}

void check_close(const std::vector<double>& x, const std::vector<double>& y, double tol) {
  REQUIRE(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x[i] - y[i]) <= tol * (1.0 + std::abs(y[i])));
}

}  // namespace

TEST_CASE("scalar gemm variants agree with a naive product") {
  const kernels::KernelTable& s = kernels::scalar_table();
  std::mt19937_64 rng(5);
  for (auto [m, n, k] : std::vector<Shape>{{1, 1, 1}, {3, 5, 7}, {17, 9, 33}, {4, 64, 64}}) {
    const auto a = random_vec(rng, m * k), b = random_vec(rng, k * n);
    const auto want = naive_nn(m, n, k, a, b);
    std::vector<double> c(m * n, 0.0);
    s.gemm_nn(m, n, k, a.data(), b.data(), c.data());
    check_close(c, want, 1e-12);

    // b^T stored row-major as n x k
    std::vector<double> bt(n * k);
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
    std::vector<double> c2(m * n, 0.0);
    s.gemm_nt(m, n, k, a.data(), bt.data(), c2.data());
    check_close(c2, want, 1e-12);

    // a^T stored as k x m; gemm_tn computes (at)^T * b
    std::vector<double> at(k * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
    std::vector<double> c3(m * n, 0.0);
    s.gemm_tn(k, n, m, at.data(), b.data(), c3.data());
    check_close(c3, want, 1e-12);
  }
}

TEST_CASE("avx2 kernels match the scalar reference") {
  const kernels::KernelTable* v = kernels::avx2_table();
  if (v == nullptr) {
    MESSAGE("avx2 unavailable on this machine; skipped");
    return;
  }
  const kernels::KernelTable& s = kernels::scalar_table();
  std::mt19937_64 rng(9);
  for (std::size_t n : std::vector<std::size_t>{0, 1, 3, 4, 7, 15, 16, 17, 63, 64, 129}) {
    const auto x = random_vec(rng, n), y = random_vec(rng, n);
    CHECK(std::abs(v->dot(x.data(), y.data(), n) - s.dot(x.data(), y.data(), n)) <= 1e-12 * (1.0 + n));
    auto y1 = y, y2 = y;
    s.axpy(0.37, x.data(), y1.data(), n);
    v->axpy(0.37, x.data(), y2.data(), n);
    check_close(y2, y1, 1e-14);
  }
  for (auto [m, n, k] : std::vector<Shape>{{1, 1, 1}, {2, 3, 5}, {5, 17, 9}, {8, 64, 32}, {3, 33, 65}}) {
    const auto a = random_vec(rng, m * k), b = random_vec(rng, k * n), bt = random_vec(rng, n * k);
    const auto c0 = random_vec(rng, m * n);
    auto c1 = c0, c2 = c0;
    s.gemm_nn(m, n, k, a.data(), b.data(), c1.data());
    v->gemm_nn(m, n, k, a.data(), b.data(), c2.data());
    check_close(c2, c1, 1e-12);
    c1 = c0, c2 = c0;
    s.gemm_nt(m, n, k, a.data(), bt.data(), c1.data());
    v->gemm_nt(m, n, k, a.data(), bt.data(), c2.data());
    check_close(c2, c1, 1e-12);
    const auto at = random_vec(rng, k * m);
    auto d0 = random_vec(rng, m * n);
    auto d1 = d0, d2 = d0;
    s.gemm_tn(k, n, m, at.data(), b.data(), d1.data());
    v->gemm_tn(k, n, m, at.data(), b.data(), d2.data());
    check_close(d2, d1, 1e-12);
  }
}

TEST_CASE("select switches the active table") {
  const kernels::Isa before = kernels::active().isa;
  CHECK(kernels::select(kernels::Isa::Scalar));
  CHECK(kernels::active().isa == kernels::Isa::Scalar);
  if (kernels::avx2_table() != nullptr) {
    CHECK(kernels::select(kernels::Isa::Avx2));
    CHECK(kernels::active().isa == kernels::Isa::Avx2);
  } else {
    CHECK_FALSE(kernels::select(kernels::Isa::Avx2));
  }
  kernels::select(before);
}

TEST_CASE("softmax helpers") {
  std::vector<double> v{1000.0, 1000.0, 999.0};
  std::vector<double> p = v;
  softmax_inplace(p);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p[0] == doctest::Approx(1.0 / (2.0 + std::exp(-1.0))));
  CHECK(log_sum_exp(v) == doctest::Approx(1000.0 + std::log(2.0 + std::exp(-1.0))));
  std::vector<double> lp = v;
  log_softmax_inplace(lp);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::exp(lp[i]) == doctest::Approx(p[i]));
}

TEST_CASE("row helpers") {
  Matrix table(3, 2);
  for (std::size_t i = 0; i < 6; ++i) table.data[i] = static_cast<double>(i);
  const Matrix g = gather_rows(table, {2, 0, 2});
  CHECK(g.rows == 3);
  CHECK(g(0, 0) == 4.0);
  CHECK(g(1, 1) == 1.0);
  Matrix acc(3, 2);
  scatter_add_rows(acc, {2, 0, 2}, g);
  CHECK(acc(2, 0) == 8.0);
  CHECK(acc(0, 1) == 1.0);
  CHECK(acc(1, 0) == 0.0);
  Matrix x(2, 2);
  add_row_prefix(x, table);
  CHECK(x(1, 1) == 3.0);
}

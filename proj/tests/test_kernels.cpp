// Scalar/AVX2 kernel equivalence and correctness against naive oracles.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "paircon/core/rng.hpp"
#include "paircon/kernels/kernels.hpp"

namespace k = paircon::kernels;
using paircon::core::Rng;

namespace {

std::vector<float> random_vec(Rng& rng, int64_t n, float lo = -1.0f, float hi = 1.0f) {
  std::vector<float> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

// Independent oracle: naive j-inner triple loop, no shared code with kernels.
void naive_gemm_nn(int64_t m, int64_t n, int64_t kk, const float* a, const float* b, float* c) {
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t p = 0; p < kk; ++p)
        acc += static_cast<double>(a[i * kk + p]) * static_cast<double>(b[p * n + j]);
      c[i * n + j] = static_cast<float>(acc);
    }
}

void naive_gemm_nt(int64_t m, int64_t n, int64_t kk, const float* a, const float* b, float* c) {
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t p = 0; p < kk; ++p)
        acc += static_cast<double>(a[i * kk + p]) * static_cast<double>(b[j * kk + p]);
      c[i * n + j] = static_cast<float>(acc);
    }
}

void check_close(const std::vector<float>& got, const std::vector<float>& want, float tol) {
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i) {
    const float denom = 1.0f + std::fabs(want[i]);
    CHECK(std::fabs(got[i] - want[i]) / denom <= tol);
  }
}

struct BackendGuard {
  k::Backend saved = k::active_backend();
  ~BackendGuard() { k::set_backend(saved); }
};

const std::vector<int64_t> kLengths = {0, 1, 2, 7, 8, 9, 15, 16, 17, 31, 32, 33, 100, 257};

}  // namespace

TEST_CASE("gemm_nn matches naive oracle on both backends") {
  Rng rng(100);
  const int64_t shapes[][3] = {{1, 1, 1},  {2, 3, 4},   {6, 16, 8}, {7, 17, 9},
                               {13, 5, 21}, {32, 48, 19}, {5, 100, 3}, {40, 33, 64}};
  for (const auto& s : shapes) {
    const int64_t m = s[0], n = s[1], kk = s[2];
    const auto a = random_vec(rng, m * kk);
    const auto b = random_vec(rng, kk * n);
    std::vector<float> want(static_cast<size_t>(m * n));
    naive_gemm_nn(m, n, kk, a.data(), b.data(), want.data());

    for (k::Backend backend : {k::Backend::scalar, k::Backend::avx2}) {
      if (backend == k::Backend::avx2 && !k::cpu_supports_avx2()) continue;
      BackendGuard guard;
      k::set_backend(backend);
      std::vector<float> got(static_cast<size_t>(m * n), -7.0f);
      k::gemm_nn(m, n, kk, a.data(), b.data(), got.data(), false);
      check_close(got, want, 1e-5f);

      // accumulate=true adds on top of existing C
      std::vector<float> acc(static_cast<size_t>(m * n), 1.0f);
      k::gemm_nn(m, n, kk, a.data(), b.data(), acc.data(), true);
      std::vector<float> want_acc = want;
      for (auto& x : want_acc) x += 1.0f;
      check_close(acc, want_acc, 1e-5f);
    }
  }
}

TEST_CASE("gemm_nt matches naive oracle on both backends") {
  Rng rng(101);
  const int64_t shapes[][3] = {{1, 1, 1}, {3, 2, 5},  {6, 16, 8},  {16, 9, 2304},
                               {9, 4, 7}, {21, 13, 36}, {64, 10, 129}};
  for (const auto& s : shapes) {
    const int64_t m = s[0], n = s[1], kk = s[2];
    const auto a = random_vec(rng, m * kk);
    const auto b = random_vec(rng, n * kk);
    std::vector<float> want(static_cast<size_t>(m * n));
    naive_gemm_nt(m, n, kk, a.data(), b.data(), want.data());

    for (k::Backend backend : {k::Backend::scalar, k::Backend::avx2}) {
      if (backend == k::Backend::avx2 && !k::cpu_supports_avx2()) continue;
      BackendGuard guard;
      k::set_backend(backend);
      std::vector<float> got(static_cast<size_t>(m * n), -7.0f);
      k::gemm_nt(m, n, kk, a.data(), b.data(), got.data(), false);
      check_close(got, want, 1e-5f);
    }
  }
}

TEST_CASE("elementwise kernels agree across backends including ragged tails") {
  if (!k::cpu_supports_avx2()) return;
  Rng rng(102);
  for (int64_t n : kLengths) {
    const auto x = random_vec(rng, n, -2.0f, 2.0f);
    const auto y0 = random_vec(rng, n, -2.0f, 2.0f);
    const auto g = random_vec(rng, n, -2.0f, 2.0f);

    BackendGuard guard;

    k::set_backend(k::Backend::scalar);
    const float dot_s = k::dot(x.data(), y0.data(), n);
    auto axpy_s = y0;
    k::axpy(0.37f, x.data(), axpy_s.data(), n);
    auto scale_s = x;
    k::scale(-1.25f, scale_s.data(), n);
    std::vector<float> relu_s(static_cast<size_t>(n)), drelu_s(static_cast<size_t>(n));
    k::relu_forward(x.data(), relu_s.data(), n);
    k::relu_backward(x.data(), g.data(), drelu_s.data(), n);
    auto v_s = y0;
    auto p_s = x;
    k::sgd_momentum(v_s.data(), p_s.data(), g.data(), 0.9f, 0.05f, n);

    k::set_backend(k::Backend::avx2);
    const float dot_a = k::dot(x.data(), y0.data(), n);
    auto axpy_a = y0;
    k::axpy(0.37f, x.data(), axpy_a.data(), n);
    auto scale_a = x;
    k::scale(-1.25f, scale_a.data(), n);
    std::vector<float> relu_a(static_cast<size_t>(n)), drelu_a(static_cast<size_t>(n));
    k::relu_forward(x.data(), relu_a.data(), n);
    k::relu_backward(x.data(), g.data(), drelu_a.data(), n);
    auto v_a = y0;
    auto p_a = x;
    k::sgd_momentum(v_a.data(), p_a.data(), g.data(), 0.9f, 0.05f, n);

    CHECK(std::fabs(dot_a - dot_s) <= 1e-5f * (1.0f + std::fabs(dot_s)));
    check_close(axpy_a, axpy_s, 1e-6f);
    check_close(scale_a, scale_s, 0.0f);  // pure multiply, bitwise equal
    check_close(relu_a, relu_s, 0.0f);
    check_close(drelu_a, drelu_s, 0.0f);
    check_close(v_a, v_s, 1e-6f);
    check_close(p_a, p_s, 1e-6f);
  }
}

TEST_CASE("relu semantics") {
  const std::vector<float> x = {-1.0f, 0.0f, 2.5f, -0.0f};
  std::vector<float> y(4), dx(4);
  const std::vector<float> dy = {5.0f, 5.0f, 5.0f, 5.0f};
  k::relu_forward(x.data(), y.data(), 4);
  CHECK(y == std::vector<float>{0.0f, 0.0f, 2.5f, 0.0f});
  // Gradient is zero at exactly zero input.
  k::relu_backward(x.data(), dy.data(), dx.data(), 4);
  CHECK(dx == std::vector<float>{0.0f, 0.0f, 5.0f, 0.0f});
}

TEST_CASE("sgd_momentum double-precision hand check") {
  // v = mu v + g; p -= lr v, two steps.
  double v = 0.0, p = 1.0;
  const double g1 = 2.0, g2 = -1.0, mu = 0.9, lr = 0.1;
  k::sgd_momentum(&v, &p, &g1, mu, lr, 1);
  CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(p == doctest::Approx(1.0 - 0.1 * 2.0).epsilon(1e-12));
  k::sgd_momentum(&v, &p, &g2, mu, lr, 1);
  CHECK(v == doctest::Approx(0.9 * 2.0 - 1.0).epsilon(1e-12));
  CHECK(p == doctest::Approx(0.8 - 0.1 * 0.8).epsilon(1e-12));
}

TEST_CASE("double gemm matches double oracle") {
  Rng rng(103);
  const int64_t m = 7, n = 11, kk = 13;
  std::vector<double> a(static_cast<size_t>(m * kk)), b(static_cast<size_t>(kk * n));
  for (auto& x : a) x = rng.uniform(-1.0, 1.0);
  for (auto& x : b) x = rng.uniform(-1.0, 1.0);
  std::vector<double> got(static_cast<size_t>(m * n));
  k::gemm_nn(m, n, kk, a.data(), b.data(), got.data(), false);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int64_t p = 0; p < kk; ++p) acc += a[i * kk + p] * b[p * n + j];
      CHECK(got[i * n + j] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("backend reporting") {
  CHECK((k::active_backend() == k::Backend::scalar || k::active_backend() == k::Backend::avx2));
  CHECK(k::backend_name() != nullptr);
}

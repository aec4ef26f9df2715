// Scalar reference kernels. Compiled without ISA-specific flags; these define
// the semantics the SIMD variants are tested against.
#include <cstring>

#include "detail.hpp"

namespace paircon::kernels::detail_scalar {
namespace {

template <class T>
T dot_impl(const T* a, const T* b, int64_t n) {
  T acc = 0;
  for (int64_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class T>
void axpy_impl(T alpha, const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void scale_impl(T alpha, T* x, int64_t n) {
  for (int64_t i = 0; i < n; ++i) x[i] *= alpha;
}

template <class T>
void relu_forward_impl(const T* x, T* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
}

template <class T>
void relu_backward_impl(const T* x, const T* dy, T* dx, int64_t n) {
  for (int64_t i = 0; i < n; ++i) dx[i] = x[i] > T{0} ? dy[i] : T{0};
}

template <class T>
void sgd_momentum_impl(T* v, T* p, const T* g, T mu, T lr, int64_t n) {
  for (int64_t i = 0; i < n; ++i) {
    v[i] = mu * v[i] + g[i];
    p[i] -= lr * v[i];
  }
}

// i-p-j order: streams rows of B while C[i] stays hot.
template <class T>
void gemm_nn_impl(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c,
                  bool accumulate) {
  if (!accumulate) std::memset(c, 0, static_cast<size_t>(m * n) * sizeof(T));
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
void gemm_nt_impl(int64_t m, int64_t n, int64_t k, const T* a, const T* b, T* c,
                  bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const T d = dot_impl(arow, b + j * k, k);
      crow[j] = accumulate ? crow[j] + d : d;
    }
  }
}

}  // namespace

float dot(const float* a, const float* b, int64_t n) { return dot_impl(a, b, n); }
void axpy(float alpha, const float* x, float* y, int64_t n) { axpy_impl(alpha, x, y, n); }
void scale(float alpha, float* x, int64_t n) { scale_impl(alpha, x, n); }
void relu_forward(const float* x, float* y, int64_t n) { relu_forward_impl(x, y, n); }
void relu_backward(const float* x, const float* dy, float* dx, int64_t n) {
  relu_backward_impl(x, dy, dx, n);
}
void sgd_momentum(float* v, float* p, const float* g, float mu, float lr, int64_t n) {
  sgd_momentum_impl(v, p, g, mu, lr, n);
}
void gemm_nn(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate) {
  gemm_nn_impl(m, n, k, a, b, c, accumulate);
}
void gemm_nt(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate) {
  gemm_nt_impl(m, n, k, a, b, c, accumulate);
}

double dot(const double* a, const double* b, int64_t n) { return dot_impl(a, b, n); }
void axpy(double alpha, const double* x, double* y, int64_t n) { axpy_impl(alpha, x, y, n); }
void scale(double alpha, double* x, int64_t n) { scale_impl(alpha, x, n); }
void relu_forward(const double* x, double* y, int64_t n) { relu_forward_impl(x, y, n); }
void relu_backward(const double* x, const double* dy, double* dx, int64_t n) {
  relu_backward_impl(x, dy, dx, n);
}
void sgd_momentum(double* v, double* p, const double* g, double mu, double lr, int64_t n) {
  sgd_momentum_impl(v, p, g, mu, lr, n);
}
void gemm_nn(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  gemm_nn_impl(m, n, k, a, b, c, accumulate);
}
void gemm_nt(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  gemm_nt_impl(m, n, k, a, b, c, accumulate);
}

}  // namespace paircon::kernels::detail_scalar

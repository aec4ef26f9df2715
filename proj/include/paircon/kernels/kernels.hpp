// CPU compute kernels behind the numeric hot loops: a scalar reference
// implementation plus an AVX2+FMA variant compiled in its own translation
// unit and selected once at startup. float is the training path; double is
// served by the scalar path only (used by gradient checks).
//
// GEMM conventions (row-major, C is m x n):
//   gemm_nn: C (+)= A(m x k) * B(k x n)
//   gemm_nt: C (+)= A(m x k) * B(n x k)^T
#pragma once

#include <cstdint>

namespace paircon::kernels {

enum class Backend { scalar, avx2 };

// Backend chosen at startup: AVX2 when the CPU supports it, unless the
// environment variable PAIRCON_FORCE_SCALAR=1 is set.
Backend active_backend();
const char* backend_name();
bool cpu_supports_avx2();

// Test hook. Requesting avx2 on a CPU without it is an error.
void set_backend(Backend b);

float dot(const float* a, const float* b, int64_t n);
void axpy(float alpha, const float* x, float* y, int64_t n);  // y += alpha * x
void scale(float alpha, float* x, int64_t n);                 // x *= alpha
void relu_forward(const float* x, float* y, int64_t n);       // y = max(x, 0)
void relu_backward(const float* x, const float* dy, float* dx, int64_t n);  // dx = x > 0 ? dy : 0
// v = mu * v + g; p -= lr * v
void sgd_momentum(float* v, float* p, const float* g, float mu, float lr, int64_t n);
void gemm_nn(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate);
void gemm_nt(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate);

double dot(const double* a, const double* b, int64_t n);
void axpy(double alpha, const double* x, double* y, int64_t n);
void scale(double alpha, double* x, int64_t n);
void relu_forward(const double* x, double* y, int64_t n);
void relu_backward(const double* x, const double* dy, double* dx, int64_t n);
void sgd_momentum(double* v, double* p, const double* g, double mu, double lr, int64_t n);
void gemm_nn(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c,
             bool accumulate);
void gemm_nt(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c,
             bool accumulate);

}  // namespace paircon::kernels

// Internal declarations shared between the kernel dispatch unit and the
// per-backend translation units.
#pragma once

#include <cstdint>

namespace paircon::kernels::detail_scalar {

float dot(const float* a, const float* b, int64_t n);
void axpy(float alpha, const float* x, float* y, int64_t n);
void scale(float alpha, float* x, int64_t n);
void relu_forward(const float* x, float* y, int64_t n);
void relu_backward(const float* x, const float* dy, float* dx, int64_t n);
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

}  // namespace paircon::kernels::detail_scalar

namespace paircon::kernels::detail_avx2 {

float dot(const float* a, const float* b, int64_t n);
void axpy(float alpha, const float* x, float* y, int64_t n);
void scale(float alpha, float* x, int64_t n);
void relu_forward(const float* x, float* y, int64_t n);
void relu_backward(const float* x, const float* dy, float* dx, int64_t n);
void sgd_momentum(float* v, float* p, const float* g, float mu, float lr, int64_t n);
void gemm_nn(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate);
void gemm_nt(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate);

}  // namespace paircon::kernels::detail_avx2

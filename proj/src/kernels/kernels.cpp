// Backend selection and dispatch. The choice is made once (env override,
// then CPU probe) and can be switched explicitly by tests.
#include "paircon/kernels/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "detail.hpp"

namespace paircon::kernels {
namespace {

Backend probe_backend() {
  const char* force = std::getenv("PAIRCON_FORCE_SCALAR");
  if (force != nullptr && std::strcmp(force, "0") != 0) return Backend::scalar;
  return cpu_supports_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{probe_backend()};
  return slot;
}

}  // namespace

bool cpu_supports_avx2() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

const char* backend_name() {
  return active_backend() == Backend::avx2 ? "avx2" : "scalar";
}

void set_backend(Backend b) {
  if (b == Backend::avx2 && !cpu_supports_avx2())
    throw std::runtime_error("kernels: avx2 backend requested but CPU lacks AVX2/FMA");
  backend_slot().store(b, std::memory_order_relaxed);
}

float dot(const float* a, const float* b, int64_t n) {
  return active_backend() == Backend::avx2 ? detail_avx2::dot(a, b, n)
                                           : detail_scalar::dot(a, b, n);
}

void axpy(float alpha, const float* x, float* y, int64_t n) {
  if (active_backend() == Backend::avx2)
    detail_avx2::axpy(alpha, x, y, n);
  else
    detail_scalar::axpy(alpha, x, y, n);
}

void scale(float alpha, float* x, int64_t n) {
  if (active_backend() == Backend::avx2)
    detail_avx2::scale(alpha, x, n);
  else
    detail_scalar::scale(alpha, x, n);
}

void relu_forward(const float* x, float* y, int64_t n) {
  if (active_backend() == Backend::avx2)
    detail_avx2::relu_forward(x, y, n);
  else
    detail_scalar::relu_forward(x, y, n);
}

void relu_backward(const float* x, const float* dy, float* dx, int64_t n) {
  if (active_backend() == Backend::avx2)
    detail_avx2::relu_backward(x, dy, dx, n);
  else
    detail_scalar::relu_backward(x, dy, dx, n);
}

void sgd_momentum(float* v, float* p, const float* g, float mu, float lr, int64_t n) {
  if (active_backend() == Backend::avx2)
    detail_avx2::sgd_momentum(v, p, g, mu, lr, n);
  else
    detail_scalar::sgd_momentum(v, p, g, mu, lr, n);
}

void gemm_nn(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate) {
  if (active_backend() == Backend::avx2)
    detail_avx2::gemm_nn(m, n, k, a, b, c, accumulate);
  else
    detail_scalar::gemm_nn(m, n, k, a, b, c, accumulate);
}

void gemm_nt(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate) {
  if (active_backend() == Backend::avx2)
    detail_avx2::gemm_nt(m, n, k, a, b, c, accumulate);
  else
    detail_scalar::gemm_nt(m, n, k, a, b, c, accumulate);
}

double dot(const double* a, const double* b, int64_t n) { return detail_scalar::dot(a, b, n); }
void axpy(double alpha, const double* x, double* y, int64_t n) {
  detail_scalar::axpy(alpha, x, y, n);
}
void scale(double alpha, double* x, int64_t n) { detail_scalar::scale(alpha, x, n); }
void relu_forward(const double* x, double* y, int64_t n) { detail_scalar::relu_forward(x, y, n); }
void relu_backward(const double* x, const double* dy, double* dx, int64_t n) {
  detail_scalar::relu_backward(x, dy, dx, n);
}
void sgd_momentum(double* v, double* p, const double* g, double mu, double lr, int64_t n) {
  detail_scalar::sgd_momentum(v, p, g, mu, lr, n);
}
void gemm_nn(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  detail_scalar::gemm_nn(m, n, k, a, b, c, accumulate);
}
void gemm_nt(int64_t m, int64_t n, int64_t k, const double* a, const double* b, double* c,
             bool accumulate) {
  detail_scalar::gemm_nt(m, n, k, a, b, c, accumulate);
}

}  // namespace paircon::kernels

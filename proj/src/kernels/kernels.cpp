#include "spotlight/kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace spotlight::kern {

namespace {

#if defined(__x86_64__) || defined(_M_X64)
bool detect_avx2() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#else
bool detect_avx2() { return false; }
#endif

Backend initial_backend() {
  const char* env = std::getenv("SPOTLIGHT_KERNEL");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return Backend::Scalar;
  return detect_avx2() ? Backend::Avx2 : Backend::Scalar;
}

Backend g_backend = initial_backend();

}  // namespace

bool cpu_has_avx2() { return detect_avx2(); }

Backend active_backend() { return g_backend; }

Backend set_backend(Backend b) {
  if (b == Backend::Avx2 && !detect_avx2()) b = Backend::Scalar;
  g_backend = b;
  return g_backend;
}

#if defined(__x86_64__) || defined(_M_X64)
#define SPOTLIGHT_DISPATCH(fn, ...)                                     \
  if (g_backend == Backend::Avx2) return avx2::fn(__VA_ARGS__);         \
  return scalar::fn(__VA_ARGS__)
#else
#define SPOTLIGHT_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

void axpy(float a, const float* x, float* y, std::size_t n) {
  SPOTLIGHT_DISPATCH(axpy_f32, a, x, y, n);
}
void axpy(double a, const double* x, double* y, std::size_t n) {
  SPOTLIGHT_DISPATCH(axpy_f64, a, x, y, n);
}
float dot(const float* x, const float* y, std::size_t n) {
  SPOTLIGHT_DISPATCH(dot_f32, x, y, n);
}
double dot(const double* x, const double* y, std::size_t n) {
  SPOTLIGHT_DISPATCH(dot_f64, x, y, n);
}
void vadd(const float* x, const float* y, float* out, std::size_t n) {
  SPOTLIGHT_DISPATCH(vadd_f32, x, y, out, n);
}
void vadd(const double* x, const double* y, double* out, std::size_t n) {
  SPOTLIGHT_DISPATCH(vadd_f64, x, y, out, n);
}
void vmul(const float* x, const float* y, float* out, std::size_t n) {
  SPOTLIGHT_DISPATCH(vmul_f32, x, y, out, n);
}
void vmul(const double* x, const double* y, double* out, std::size_t n) {
  SPOTLIGHT_DISPATCH(vmul_f64, x, y, out, n);
}
void vscale(float a, float* x, std::size_t n) {
  SPOTLIGHT_DISPATCH(vscale_f32, a, x, n);
}
void vscale(double a, double* x, std::size_t n) {
  SPOTLIGHT_DISPATCH(vscale_f64, a, x, n);
}

#undef SPOTLIGHT_DISPATCH

}  // namespace spotlight::kern

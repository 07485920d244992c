#pragma once

// Data-parallel inner loops used by the tensor engine. Scalar reference
// kernels always exist; AVX2 variants are selected at runtime when the
// CPU supports them. The active backend can be forced for equivalence
// testing via set_backend() or the SPOTLIGHT_KERNEL environment variable
// (values: "scalar", "avx2").

#include <cstddef>

namespace spotlight::kern {

enum class Backend { Scalar, Avx2 };

Backend active_backend();
// Returns the backend actually selected (requests for an unsupported
// backend fall back to Scalar).
Backend set_backend(Backend b);
bool cpu_has_avx2();

// y[i] += a * x[i]
void axpy(float a, const float* x, float* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);

float dot(const float* x, const float* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);

// out[i] = x[i] + y[i]
void vadd(const float* x, const float* y, float* out, std::size_t n);
void vadd(const double* x, const double* y, double* out, std::size_t n);

// out[i] = x[i] * y[i]
void vmul(const float* x, const float* y, float* out, std::size_t n);
void vmul(const double* x, const double* y, double* out, std::size_t n);

// x[i] *= a
void vscale(float a, float* x, std::size_t n);
void vscale(double a, double* x, std::size_t n);

namespace scalar {
void axpy_f32(float a, const float* x, float* y, std::size_t n);
void axpy_f64(double a, const double* x, double* y, std::size_t n);
float dot_f32(const float* x, const float* y, std::size_t n);
double dot_f64(const double* x, const double* y, std::size_t n);
void vadd_f32(const float* x, const float* y, float* out, std::size_t n);
void vadd_f64(const double* x, const double* y, double* out, std::size_t n);
void vmul_f32(const float* x, const float* y, float* out, std::size_t n);
void vmul_f64(const double* x, const double* y, double* out, std::size_t n);
void vscale_f32(float a, float* x, std::size_t n);
void vscale_f64(double a, double* x, std::size_t n);
}  // namespace scalar

namespace avx2 {
// Compiled only on x86-64; callable only when cpu_has_avx2().
void axpy_f32(float a, const float* x, float* y, std::size_t n);
void axpy_f64(double a, const double* x, double* y, std::size_t n);
float dot_f32(const float* x, const float* y, std::size_t n);
double dot_f64(const double* x, const double* y, std::size_t n);
void vadd_f32(const float* x, const float* y, float* out, std::size_t n);
void vadd_f64(const double* x, const double* y, double* out, std::size_t n);
void vmul_f32(const float* x, const float* y, float* out, std::size_t n);
void vmul_f64(const double* x, const double* y, double* out, std::size_t n);
void vscale_f32(float a, float* x, std::size_t n);
void vscale_f64(double a, double* x, std::size_t n);
}  // namespace avx2

}  // namespace spotlight::kern

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "spotlight/kernels/kernels.hpp"

using namespace spotlight;

namespace {

template <typename S>
std::vector<S> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  std::vector<S> v(n);
  for (auto& x : v) x = static_cast<S>(d(rng));
  return v;
}

struct BackendGuard {
  kern::Backend saved;
  BackendGuard() : saved(kern::active_backend()) {}
  ~BackendGuard() { kern::set_backend(saved); }
};

}  // namespace

TEST_CASE("scalar kernels: basic identities") {
  std::vector<float> x = {1.0f, 2.0f, 3.0f};
  std::vector<float> y = {4.0f, 5.0f, 6.0f};
  CHECK(kern::scalar::dot_f32(x.data(), y.data(), 3) == doctest::Approx(32.0f));
  kern::scalar::axpy_f32(2.0f, x.data(), y.data(), 3);
  CHECK(y[0] == doctest::Approx(6.0f));
  CHECK(y[2] == doctest::Approx(12.0f));
}

TEST_CASE("avx2 variants match scalar reference") {
  if (!kern::cpu_has_avx2()) return;
  // Odd lengths exercise the vector body plus the remainder loop.
  for (std::size_t n : {1u, 7u, 8u, 9u, 64u, 233u}) {
    auto xf = random_vec<float>(n, 11 + static_cast<unsigned>(n));
    auto yf = random_vec<float>(n, 29 + static_cast<unsigned>(n));
    const float ds = kern::scalar::dot_f32(xf.data(), yf.data(), n);
    const float dv = kern::avx2::dot_f32(xf.data(), yf.data(), n);
    CHECK(std::abs(ds - dv) <= 1e-4f * (1.0f + std::abs(ds)));

    auto ys = yf;
    auto yv = yf;
    kern::scalar::axpy_f32(0.37f, xf.data(), ys.data(), n);
    kern::avx2::axpy_f32(0.37f, xf.data(), yv.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(ys[i] - yv[i]) <= 1e-5f * (1.0f + std::abs(ys[i])));
    }

    std::vector<float> os(n), ov(n);
    kern::scalar::vmul_f32(xf.data(), yf.data(), os.data(), n);
    kern::avx2::vmul_f32(xf.data(), yf.data(), ov.data(), n);
    CHECK(os == ov);
    kern::scalar::vadd_f32(xf.data(), yf.data(), os.data(), n);
    kern::avx2::vadd_f32(xf.data(), yf.data(), ov.data(), n);
    CHECK(os == ov);

    auto xd = random_vec<double>(n, 43 + static_cast<unsigned>(n));
    auto yd = random_vec<double>(n, 57 + static_cast<unsigned>(n));
    const double dds = kern::scalar::dot_f64(xd.data(), yd.data(), n);
    const double ddv = kern::avx2::dot_f64(xd.data(), yd.data(), n);
    CHECK(std::abs(dds - ddv) <= 1e-12 * (1.0 + std::abs(dds)));

    auto sd = xd;
    auto vd = xd;
    kern::scalar::vscale_f64(1.5, sd.data(), n);
    kern::avx2::vscale_f64(1.5, vd.data(), n);
    CHECK(sd == vd);
  }
}

TEST_CASE("backend selection falls back to scalar when unsupported") {
  BackendGuard guard;
  CHECK(kern::set_backend(kern::Backend::Scalar) == kern::Backend::Scalar);
  std::vector<float> x = {1.0f, 1.0f};
  CHECK(kern::dot(x.data(), x.data(), 2) == doctest::Approx(2.0f));
  const kern::Backend got = kern::set_backend(kern::Backend::Avx2);
  if (kern::cpu_has_avx2()) {
    CHECK(got == kern::Backend::Avx2);
  } else {
    CHECK(got == kern::Backend::Scalar);
  }
}

#include <cmath>
#include <vector>

#include "doctest.h"
#include "lesion/error.hpp"
#include "lesion/rng.hpp"
#include "lesion/simd.hpp"

using namespace lesion;

namespace {

std::vector<double> random_f64(Xoshiro256& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal() * 3.0;
  return v;
}

std::vector<float> random_f32(Xoshiro256& rng, std::size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

}  // namespace

TEST_SUITE("simd") {
  TEST_CASE("scalar table matches hand values") {
    const auto& k = simd::scalar_kernels();
    const double a[] = {1, 2, 3}, b[] = {4, 5, 6};
    CHECK(k.dot_f64(a, b, 3) == 32.0);
    CHECK(k.squared_distance_f64(a, b, 3) == 27.0);
    double y[] = {1, 1, 1};
    k.axpy_f64(2.0, a, y, 3);
    CHECK(y[0] == 3.0);
    CHECK(y[2] == 7.0);
    CHECK(k.dot_f64(a, b, 0) == 0.0);
  }

  TEST_CASE("every available variant agrees with the scalar reference") {
    const auto& ref = simd::scalar_kernels();
    Xoshiro256 rng(42);
    for (simd::Isa isa : simd::available_isas()) {
      CAPTURE(simd::isa_name(isa));
      const auto& k = simd::kernels_for(isa);
      for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 15u, 16u, 17u, 31u, 64u, 100u, 1001u}) {
        CAPTURE(n);
        const auto a = random_f64(rng, n), b = random_f64(rng, n);
        double mag = 0.0, dmag = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          mag += std::abs(a[i] * b[i]);
          dmag += (a[i] - b[i]) * (a[i] - b[i]);
        }
        CHECK(std::abs(k.dot_f64(a.data(), b.data(), n) - ref.dot_f64(a.data(), b.data(), n)) <= 1e-13 * (1 + mag));
        CHECK(std::abs(k.squared_distance_f64(a.data(), b.data(), n) -
                       ref.squared_distance_f64(a.data(), b.data(), n)) <= 1e-13 * (1 + dmag));

        auto y1 = random_f64(rng, n);
        auto y2 = y1;
        k.axpy_f64(0.37, a.data(), y1.data(), n);
        ref.axpy_f64(0.37, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-14 * (1 + std::abs(y2[i])));

        const auto fa = random_f32(rng, n), fb = random_f32(rng, n);
        float fmag = 0.0f;
        for (std::size_t i = 0; i < n; ++i) fmag += std::abs(fa[i] * fb[i]);
        CHECK(std::abs(k.dot_f32(fa.data(), fb.data(), n) - ref.dot_f32(fa.data(), fb.data(), n)) <=
              1e-5f * (1 + fmag));
        auto fy1 = random_f32(rng, n);
        auto fy2 = fy1;
        k.axpy_f32(-1.25f, fa.data(), fy1.data(), n);
        ref.axpy_f32(-1.25f, fa.data(), fy2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(fy1[i] - fy2[i]) <= 1e-6f * (1 + std::abs(fy2[i])));
      }
    }
  }

  TEST_CASE("active table can be switched and restored") {
    const simd::Isa before = simd::active_isa();
    simd::set_active_isa(simd::Isa::Scalar);
    CHECK(simd::active_isa() == simd::Isa::Scalar);
    const std::vector<double> a{1, 2}, b{3, 4};
    CHECK(simd::dot(std::span<const double>(a), std::span<const double>(b)) == 11.0);
    simd::set_active_isa(before);
    CHECK(simd::active_isa() == before);
  }

  TEST_CASE("scalar is always listed first") {
    const auto isas = simd::available_isas();
    REQUIRE(!isas.empty());
    CHECK(isas.front() == simd::Isa::Scalar);
  }
}

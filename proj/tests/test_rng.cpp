#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "lesion/rng.hpp"

using namespace lesion;

TEST_SUITE("rng") {
  // Reference outputs computed with an independent Python transcription of
  // the published splitmix64 / xoshiro256** / FNV-1a definitions.
  TEST_CASE("splitmix64 reference sequence from state 0") {
    std::uint64_t s = 0;
    CHECK(splitmix64(s) == 0xe220a8397b1dcdafULL);
    CHECK(splitmix64(s) == 0x6e789e6aa1b965f4ULL);
    CHECK(splitmix64(s) == 0x06c45d188009454fULL);
  }

  TEST_CASE("xoshiro256** reference sequence for seed 42") {
    Xoshiro256 rng(42);
    CHECK(rng.next() == 0x15780b2e0c2ec716ULL);
    CHECK(rng.next() == 0x6104d9866d113a7eULL);
    CHECK(rng.next() == 0xae17533239e499a1ULL);
    CHECK(rng.next() == 0xecb8ad4703b360a1ULL);
    CHECK(rng.next() == 0xfde6dc7fe2ec5e64ULL);
  }

  TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  }

  TEST_CASE("bounded draws stay in range and cover it") {
    Xoshiro256 rng(7);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
      const auto v = rng.below(7);
      REQUIRE(v < 7);
      ++hits[v];
    }
    for (int h : hits) CHECK(h > 800);
    CHECK(rng.below(1) == 0);
  }

  TEST_CASE("uniform and normal moments") {
    Xoshiro256 rng(3);
    double su = 0, sn = 0, sn2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      su += u;
      const double z = rng.normal();
      sn += z;
      sn2 += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("shuffle is a seeded permutation") {
    std::vector<int> a(50), b(50);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), 0);
    Xoshiro256 r1(9), r2(9);
    r1.shuffle(std::span<int>(a));
    r2.shuffle(std::span<int>(b));
    CHECK(a == b);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
    std::vector<int> id(50);
    std::iota(id.begin(), id.end(), 0);
    CHECK(a != id);
  }
}

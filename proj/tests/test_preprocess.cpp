#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "lesion/error.hpp"
#include "lesion/preprocess.hpp"
#include "lesion/rng.hpp"
#include "oracles.hpp"

using namespace lesion;

namespace {

Tensor3 random_tensor(Xoshiro256& rng, int h, int w) {
  Tensor3 t(h, w);
  for (auto& v : t.data) v = static_cast<double>(rng.below(256));
  return t;
}

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
  REQUIRE(a.height == b.height);
  REQUIRE(a.width == b.width);
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST_SUITE("preprocess") {
  TEST_CASE("center_rgb subtracts the per-channel mean") {
    RgbImage img(1, 1);
    img.at(0, 0, 0) = 10;
    img.at(0, 0, 1) = 20;
    img.at(0, 0, 2) = 30;
    const auto t = center_rgb(img, {1, 2, 3});
    CHECK(t.at(0, 0, 0) == 9.0);
    CHECK(t.at(0, 0, 1) == 18.0);
    CHECK(t.at(0, 0, 2) == 27.0);

    RgbImage flat(4, 5);
    std::fill(flat.pixels.begin(), flat.pixels.end(), std::uint8_t{200});
    const auto c = center_rgb(flat, kImageNetMean);
    CHECK(c.height == 4);
    CHECK(c.width == 5);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 5; ++x) {
        for (int ch = 0; ch < 3; ++ch) CHECK(c.at(y, x, ch) == 200.0 - kImageNetMean[ch]);
      }
    }
    const auto z = center_rgb(flat, {0, 0, 0});
    for (double v : z.data) CHECK(v == 200.0);
  }

  TEST_CASE("keys kernel values") {
    CHECK(keys_cubic(0.0) == 1.0);
    CHECK(keys_cubic(1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(keys_cubic(2.0) == 0.0);
    CHECK(keys_cubic(0.5) == doctest::Approx(0.5625));
    CHECK(keys_cubic(1.5) == doctest::Approx(-0.0625));
    CHECK(keys_cubic(-0.5) == keys_cubic(0.5));
  }

  TEST_CASE("resizing a constant image keeps the constant") {
    Tensor3 t(13, 9, -42.25);
    for (int side : {224, 227, 5}) {
      const auto r = resize_bicubic(t, side);
      CHECK(r.height == side);
      for (double v : r.data) CHECK(v == doctest::Approx(-42.25).epsilon(1e-12));
    }
  }

  TEST_CASE("4x4 ramp downsized to 2x2 stays inside the source range") {
    Tensor3 t(4, 4);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        for (int c = 0; c < 3; ++c) t.at(y, x, c) = 10.0 * x + y;
      }
    }
    const auto r = resize_bicubic(t, 2);
    for (double v : r.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 33.0);
    }
  }

  TEST_CASE("resize matches direct 4x4 summation to 1e-9") {
    Xoshiro256 rng(5);
    const auto src = random_tensor(rng, 8, 8);
    for (int side : {224, 227}) {
      CHECK(max_abs_diff(resize_bicubic(src, side), oracle::bicubic_direct(src, side)) < 1e-9);
    }
    const auto rect = random_tensor(rng, 11, 6);
    CHECK(max_abs_diff(resize_bicubic(rect, 17), oracle::bicubic_direct(rect, 17)) < 1e-9);
    CHECK(max_abs_diff(resize_bicubic(rect, 3), oracle::bicubic_direct(rect, 3)) < 1e-9);
  }

  TEST_CASE("degenerate inputs are rejected") {
    CHECK_THROWS_AS(resize_bicubic(Tensor3(1, 5), 224), ValidationError);
    CHECK_THROWS_AS(resize_bicubic(Tensor3(5, 1), 224), ValidationError);
    CHECK_THROWS_AS(apply_augment(Tensor3(3, 4), AugmentTag{1, false}), ValidationError);
  }

  TEST_CASE("augment transforms match pixelwise oracles") {
    Xoshiro256 rng(8);
    const auto t = random_tensor(rng, 6, 6);
    Tensor3 expect = t;
    for (int k = 0; k < 4; ++k) {
      CHECK(apply_augment(t, AugmentTag{k, false}) == expect);
      CHECK(apply_augment(t, AugmentTag{k, true}) == oracle::flip_h(expect));
      expect = oracle::rot90_ccw(expect);
    }
  }

  TEST_CASE("dihedral identities hold exactly") {
    Xoshiro256 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const auto t = random_tensor(rng, 5, 5);
      const AugmentTag r90{1, false}, flip{0, true};
      auto x = t;
      for (int i = 0; i < 4; ++i) x = apply_augment(x, r90);
      CHECK(x == t);
      CHECK(apply_augment(apply_augment(t, flip), flip) == t);
      CHECK(apply_augment(apply_augment(t, r90), r90) == apply_augment(t, AugmentTag{2, false}));
    }
  }

  TEST_CASE("augment yields eight distinct tags and images") {
    Xoshiro256 rng(12);
    const auto t = random_tensor(rng, 7, 7);
    const auto v = augment(t, "img");
    REQUIRE(v.size() == 8);
    std::set<std::string> names;
    for (std::size_t i = 0; i < v.size(); ++i) {
      names.insert(v[i].variant.name());
      CHECK(v[i].source_id == "img");
      CHECK(v[i].variant == all_augment_tags()[i]);
      for (std::size_t j = 0; j < i; ++j) CHECK_FALSE(v[i].tensor == v[j].tensor);
    }
    CHECK(names.size() == 8);
    CHECK(v[0].tensor == t);
  }

  TEST_CASE("tag names and variant ids round-trip") {
    const std::vector<std::string> expected{"r0", "r0f", "r90", "r90f", "r180", "r180f", "r270", "r270f"};
    for (std::size_t i = 0; i < 8; ++i) {
      const auto& tag = all_augment_tags()[i];
      CHECK(tag.name() == expected[i]);
      CHECK(AugmentTag::parse(expected[i]) == tag);
      const auto id = variant_id("ISIC_1", tag);
      CHECK(id == (tag.is_identity() ? "ISIC_1" : "ISIC_1#" + expected[i]));
      const auto [src, back] = parse_variant_id(id);
      CHECK(src == "ISIC_1");
      CHECK(back == tag);
    }
    CHECK_FALSE(AugmentTag::parse("r45").has_value());
    CHECK(all_augment_tags()[3].degrees() == 90);
  }
}

#include "lesion/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>

#include "lesion/error.hpp"

namespace lesion {

std::string AugmentTag::name() const {
  std::string out = "r" + std::to_string(degrees());
  if (flipped) out += 'f';
  return out;
}

std::optional<AugmentTag> AugmentTag::parse(std::string_view name) {
  for (const auto& tag : all_augment_tags()) {
    if (tag.name() == name) return tag;
  }
  return std::nullopt;
}

const std::array<AugmentTag, 8>& all_augment_tags() {
  static const std::array<AugmentTag, 8> tags{{{0, false}, {0, true}, {1, false}, {1, true},
                                               {2, false}, {2, true}, {3, false}, {3, true}}};
  return tags;
}

std::string variant_id(std::string_view source_id, const AugmentTag& tag) {
  if (tag.is_identity()) return std::string(source_id);
  return std::string(source_id) + "#" + tag.name();
}

std::pair<std::string, AugmentTag> parse_variant_id(std::string_view id) {
  const auto hash = id.rfind('#');
  if (hash != std::string_view::npos) {
    if (auto tag = AugmentTag::parse(id.substr(hash + 1))) {
      return {std::string(id.substr(0, hash)), *tag};
    }
  }
  return {std::string(id), AugmentTag{}};
}

Tensor3 center_rgb(const RgbImage& image, const MeanRgb& mean_rgb) {
  Tensor3 out(image.height, image.width);
  const std::size_t n = image.pixels.size();
  for (std::size_t i = 0; i < n; ++i) {
    out.data[i] = static_cast<double>(image.pixels[i]) - mean_rgb[i % kChannels];
  }
  return out;
}

double keys_cubic(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

namespace {

struct Taps {
  std::array<int, 4> index;
  std::array<double, 4> weight;
};

std::vector<Taps> make_taps(int in_size, int out_size) {
  std::vector<Taps> taps(out_size);
  const double scale = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    const double src = (o + 0.5) * scale - 0.5;
    const double base = std::floor(src);
    const double frac = src - base;
    for (int k = 0; k < 4; ++k) {
      const int idx = static_cast<int>(base) - 1 + k;
      taps[o].index[k] = std::clamp(idx, 0, in_size - 1);
      taps[o].weight[k] = keys_cubic(frac - (k - 1));
    }
  }
  return taps;
}

}  // namespace

Tensor3 resize_bicubic(const Tensor3& image, int side) {
  if (image.height < 2 || image.width < 2) {
    throw ValidationError("bicubic resize needs an image of at least 2x2, got " +
                          std::to_string(image.height) + "x" + std::to_string(image.width));
  }
  if (side < 1) throw ValidationError("resize target side must be positive");

  const auto col_taps = make_taps(image.width, side);
  const auto row_taps = make_taps(image.height, side);

  // Horizontal pass: H_in x side.
  Tensor3 tmp(image.height, side);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < side; ++x) {
      const Taps& t = col_taps[x];
      for (int c = 0; c < kChannels; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += t.weight[k] * image.at(y, t.index[k], c);
        tmp.at(y, x, c) = acc;
      }
    }
  }

  Tensor3 out(side, side);
  for (int y = 0; y < side; ++y) {
    const Taps& t = row_taps[y];
    for (int x = 0; x < side; ++x) {
      for (int c = 0; c < kChannels; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += t.weight[k] * tmp.at(t.index[k], x, c);
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

Tensor3 apply_augment(const Tensor3& image, const AugmentTag& tag) {
  if (image.height != image.width) {
    throw ValidationError("augmentation needs a square image, got " + std::to_string(image.height) +
                          "x" + std::to_string(image.width));
  }
  const int n = image.height;
  const int turns = ((tag.quarter_turns % 4) + 4) % 4;
  Tensor3 out(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      // Undo the flip, then the counter-clockwise rotation, to find the source pixel.
      const int fx = tag.flipped ? n - 1 - x : x;
      int sy = y, sx = fx;
      switch (turns) {
        case 1: sy = fx; sx = n - 1 - y; break;
        case 2: sy = n - 1 - y; sx = n - 1 - fx; break;
        case 3: sy = n - 1 - fx; sx = y; break;
        default: break;
      }
      for (int c = 0; c < kChannels; ++c) out.at(y, x, c) = image.at(sy, sx, c);
    }
  }
  return out;
}

std::vector<PreprocessedImage> augment(const Tensor3& image, std::string_view source_id) {
  std::vector<PreprocessedImage> out;
  out.reserve(8);
  for (const auto& tag : all_augment_tags()) {
    out.push_back({apply_augment(image, tag), std::string(source_id), tag});
  }
  return out;
}

}  // namespace lesion

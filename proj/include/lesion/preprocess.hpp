#pragma once

// Image normalisation, bicubic resizing and the eight-way dihedral
// augmentation. Pipeline order is decode -> center_rgb -> resize_bicubic ->
// augment.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lesion/image.hpp"

namespace lesion {

using MeanRgb = std::array<double, 3>;

// Canonical ImageNet training-set channel means.
inline constexpr MeanRgb kImageNetMean{123.68, 116.779, 103.939};

// Counter-clockwise rotation by `quarter_turns` * 90 degrees, followed by a
// horizontal (left-right) flip when `flipped` is set.
struct AugmentTag {
  int quarter_turns = 0;  // 0..3
  bool flipped = false;

  int degrees() const { return quarter_turns * 90; }
  bool is_identity() const { return quarter_turns == 0 && !flipped; }
  // Short form used in ids and cache indices: "r0", "r90f", ...
  std::string name() const;
  static std::optional<AugmentTag> parse(std::string_view name);

  friend bool operator==(const AugmentTag&, const AugmentTag&) = default;
  friend auto operator<=>(const AugmentTag&, const AugmentTag&) = default;
};

// All eight tags in canonical order: r0, r0f, r90, r90f, r180, r180f, r270, r270f.
const std::array<AugmentTag, 8>& all_augment_tags();

// "<source_id>#<tag>" for augmented instances; the identity variant keeps the
// bare source id.
std::string variant_id(std::string_view source_id, const AugmentTag& tag);
// Inverse of variant_id. Ids without a '#' suffix are identity variants.
std::pair<std::string, AugmentTag> parse_variant_id(std::string_view id);

struct PreprocessedImage {
  Tensor3 tensor;
  std::string source_id;
  AugmentTag variant;
};

Tensor3 center_rgb(const RgbImage& image, const MeanRgb& mean_rgb);

// Separable bicubic resampling with the Keys kernel (a = -0.5) on
// half-pixel-aligned grids; source taps outside the image clamp to the edge.
// Requires height, width >= 2 and side >= 1.
Tensor3 resize_bicubic(const Tensor3& image, int side);

// Keys cubic convolution weight, a = -0.5.
double keys_cubic(double t);

// Applies one dihedral transform. Requires a square input.
Tensor3 apply_augment(const Tensor3& image, const AugmentTag& tag);

// The eight variants of a square image in all_augment_tags() order.
std::vector<PreprocessedImage> augment(const Tensor3& image, std::string_view source_id);

}  // namespace lesion

#pragma once

// Ground-truth manifests, image lookup and reproducible train/holdout splits.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lesion/image.hpp"

namespace lesion {

// Declaration order is the serialisation order.
enum class LesionClass : std::uint8_t { Melanoma = 0, SeborrheicKeratosis = 1, Nevus = 2 };

inline constexpr std::array<LesionClass, 3> kAllClasses{
    LesionClass::Melanoma, LesionClass::SeborrheicKeratosis, LesionClass::Nevus};

inline constexpr std::size_t class_index(LesionClass c) { return static_cast<std::size_t>(c); }
std::string_view class_name(LesionClass c);

struct LabeledImage {
  std::string id;
  std::optional<LesionClass> label;
  std::filesystem::path path;
  // Empty unless the dataset was loaded with decode = true.
  RgbImage pixels;

  // Decoded pixels, reading `path` when they were not loaded eagerly.
  RgbImage load_pixels() const;
};

struct ClassCounts {
  std::array<std::size_t, 3> labeled{};
  std::size_t unlabeled = 0;

  std::size_t operator[](LesionClass c) const { return labeled[class_index(c)]; }
  std::size_t total() const { return labeled[0] + labeled[1] + labeled[2] + unlabeled; }
};

struct Dataset {
  std::vector<LabeledImage> images;
  // True when every entry carries a label (header had indicator columns).
  bool labeled = true;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  ClassCounts class_counts() const;
  // Index of `id`, if present.
  std::optional<std::size_t> find(std::string_view id) const;
};

struct LoadOptions {
  // Decode all pixels now. When false, files are only checked for existence
  // and a recognised raster signature; pixels are read on demand.
  bool decode = true;
  int workers = 1;
};

// Reads an ISIC 2017 style ground-truth CSV. Header must be exactly
// `image_id,melanoma,seborrheic_keratosis`, or `image_id` alone for unlabeled
// sets. Images resolve to `<image_dir>/<image_id>.<ext>` with ext one of
// jpg, jpeg, png (either case).
Dataset load_manifest(const std::filesystem::path& manifest_path, const std::filesystem::path& image_dir,
                      const LoadOptions& options = {});

// Parses manifest text without touching the filesystem (paths left empty).
Dataset parse_manifest(std::string_view csv_text, std::string_view source_name = "<manifest>");

// Writes the manifest back in the same schema (indicators as 0.0/1.0).
void write_manifest(const Dataset& dataset, const std::filesystem::path& manifest_path);
std::string format_manifest(const Dataset& dataset);

// Locates `<dir>/<id>.<ext>`; throws MissingImage.
std::filesystem::path resolve_image_path(const std::filesystem::path& image_dir, const std::string& id);

enum class SplitUnit { OriginalImage, AugmentedInstance };

std::string_view split_unit_name(SplitUnit unit);
SplitUnit parse_split_unit(std::string_view name);

struct DatasetSplit {
  // For AugmentedInstance these are variant ids ("<id>#r90f", see preprocess.hpp).
  std::vector<std::string> train_ids;
  std::vector<std::string> holdout_ids;
  std::uint64_t seed = 0;
  double fraction = 0.8;
  SplitUnit unit = SplitUnit::OriginalImage;
  bool stratified = false;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

// Random partition into train/holdout. Unstratified: |train| = round(fraction * N)
// over the chosen unit. Stratified: round(fraction * n_c) per class. Both lists
// keep dataset order.
DatasetSplit split(const Dataset& dataset, double fraction, std::uint64_t seed,
                   SplitUnit unit = SplitUnit::OriginalImage, bool stratify = false);

// Text record; `comment` becomes a '#' line after the magic line.
void write_split(const DatasetSplit& split, const std::filesystem::path& path, std::string_view comment = {});
DatasetSplit read_split(const std::filesystem::path& path);

}  // namespace lesion

#pragma once

// Seeded synthetic lesion images for tests and demos: a skin-toned
// background with one elliptical blob whose colour depends on the class.

#include <cstdint>
#include <filesystem>

#include "lesion/dataset.hpp"

namespace lesion {

struct SyntheticOptions {
  int per_class = 30;
  int side = 32;
  std::uint64_t seed = 1;
  bool labeled = true;          // write indicator columns
  std::string id_prefix = "SYN";
  // Per-pixel noise and per-image colour jitter, in 8-bit units.
  double pixel_noise = 10.0;
  double colour_jitter = 12.0;
};

RgbImage synthetic_image(LesionClass cls, int side, std::uint64_t seed, double pixel_noise, double colour_jitter);

// Writes `<dir>/images/<id>.png` and `<dir>/manifest.csv`; rows interleave
// the classes. Returns the dataset as written (paths filled, pixels empty).
Dataset write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticOptions& options);

}  // namespace lesion

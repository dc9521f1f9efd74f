#include "lesion/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "lesion/error.hpp"
#include "lesion/rng.hpp"

namespace lesion {
namespace {

namespace fs = std::filesystem;

constexpr std::array<double, 3> kSkin{215.0, 175.0, 155.0};
constexpr std::array<std::array<double, 3>, 3> kBlob{{
    {80.0, 45.0, 40.0},    // melanoma: dark brown-black
    {160.0, 120.0, 60.0},  // seborrheic keratosis: tan, yellowish
    {175.0, 105.0, 95.0},  // nevus: pinkish brown
}};

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

RgbImage synthetic_image(LesionClass cls, int side, std::uint64_t seed, double pixel_noise, double colour_jitter) {
  if (side < 2) throw ValidationError("synthetic images need side >= 2");
  Xoshiro256 rng(seed);
  std::array<double, 3> blob = kBlob[class_index(cls)];
  for (double& c : blob) c += colour_jitter * rng.normal();
  const double s = side;
  const double cy = s * (0.35 + 0.3 * rng.uniform());
  const double cx = s * (0.35 + 0.3 * rng.uniform());
  const double ry = s * (0.2 + 0.12 * rng.uniform());
  const double rx = s * (0.2 + 0.12 * rng.uniform());

  RgbImage img(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double dy = (y + 0.5 - cy) / ry, dx = (x + 0.5 - cx) / rx;
      const bool inside = dy * dy + dx * dx <= 1.0;
      for (int c = 0; c < 3; ++c) {
        const double base = inside ? blob[c] : kSkin[c];
        img.at(y, x, c) = to_byte(base + pixel_noise * rng.normal());
      }
    }
  }
  return img;
}

Dataset write_synthetic_dataset(const fs::path& dir, const SyntheticOptions& options) {
  if (options.per_class < 0) throw ValidationError("per_class must be nonnegative");
  const fs::path image_dir = dir / "images";
  fs::create_directories(image_dir);
  Dataset ds;
  ds.labeled = options.labeled;
  for (int i = 0; i < options.per_class; ++i) {
    for (LesionClass cls : kAllClasses) {
      char id[64];
      std::snprintf(id, sizeof id, "%s_%05d", options.id_prefix.c_str(),
                    i * 3 + static_cast<int>(class_index(cls)));
      LabeledImage li;
      li.id = id;
      if (options.labeled) li.label = cls;
      li.path = image_dir / (li.id + ".png");
      const std::uint64_t seed = options.seed ^ fnv1a64(li.id);
      write_png(li.path, synthetic_image(cls, options.side, seed, options.pixel_noise, options.colour_jitter));
      ds.images.push_back(std::move(li));
    }
  }
  write_manifest(ds, dir / "manifest.csv");
  return ds;
}

}  // namespace lesion

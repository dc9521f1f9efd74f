#pragma once

// Experiment configuration: a `key = value` text file, one setting per line,
// '#' starts a comment. Relative paths resolve against the file's directory.
// Recognised keys and defaults are listed in docs/config.md.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lesion/dataset.hpp"
#include "lesion/embedding.hpp"
#include "lesion/ensemble.hpp"
#include "lesion/preprocess.hpp"
#include "lesion/svm.hpp"

namespace lesion {

// `mock` / `mock:<seed>` select the built-in mock backend; anything else is
// an ONNX file path.
struct ModelSource {
  bool mock = false;
  std::optional<std::uint64_t> mock_seed;  // defaults to the experiment seed
  std::string path;

  friend bool operator==(const ModelSource&, const ModelSource&) = default;
};

struct ExperimentConfig {
  std::filesystem::path base_dir = ".";

  std::string train_manifest;
  std::string train_images;
  std::string test_manifest;
  std::string test_images;
  std::map<NetworkId, ModelSource> models;

  MeanRgb mean_rgb = kImageNetMean;

  double split_fraction = 0.8;
  std::optional<std::uint64_t> split_seed;
  SplitUnit split_unit = SplitUnit::OriginalImage;
  bool split_stratify = false;

  KernelSpec::Kind kernel = KernelSpec::Kind::Rbf;
  std::optional<double> gamma;  // RBF; unset means the data-driven default
  std::vector<double> c_grid{1.0};
  double tol = 1e-3;
  std::size_t cache_mb = 256;
  std::size_t max_iterations = 10'000'000;
  double calib_fraction = 0.2;

  Combine combine = Combine::AverageLayerClassifiers;

  int workers = 1;
  std::string out = "out";
  std::uint64_t seed = 0;

  // Sets one key from its text value; throws ValidationError for unknown keys
  // or bad values.
  void set(std::string_view key, std::string_view value);

  std::filesystem::path resolve(const std::string& path) const;
  std::filesystem::path out_dir() const { return resolve(out); }
  std::uint64_t effective_split_seed() const { return split_seed.value_or(seed); }
  std::uint64_t mock_seed(NetworkId network) const;

  // Every setting that can change results, one `key = value` line each in a
  // fixed order. Excludes `out` and `workers`.
  std::string canonical_text() const;
  // SHA-256 of canonical_text().
  std::string hash() const;
  // "config_sha256=<hex> seed=<n>"
  std::string provenance() const;
};

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                              std::string_view source_name = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace lesion

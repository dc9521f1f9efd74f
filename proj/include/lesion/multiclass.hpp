#pragma once

// One-vs-rest wrapper: three calibrated binary machines over standardised
// features.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lesion/dataset.hpp"
#include "lesion/platt.hpp"
#include "lesion/svm.hpp"

namespace lesion {

// Per-dimension affine map x -> (x - mean) / scale, fitted on training rows.
// Constant dimensions get scale 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const RowMatrix& x);
  std::vector<double> apply(std::span<const double> x) const;
  RowMatrix apply(const RowMatrix& x) const;

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

struct BinaryMachine {
  KernelSvmModel svm;
  PlattCalibrator calibrator;

  friend bool operator==(const BinaryMachine&, const BinaryMachine&) = default;
};

struct MultiClassSvm {
  Standardizer standardizer;
  std::array<BinaryMachine, 3> machines;  // indexed by class_index()

  std::size_t dim() const { return standardizer.mean.size(); }
  // Calibrated one-vs-rest probabilities q_c, one per class, in (0, 1).
  std::array<double, 3> class_probabilities(std::span<const double> x) const;

  friend bool operator==(const MultiClassSvm&, const MultiClassSvm&) = default;
};

struct OvrOptions {
  // RBF with gamma = 1 / (d * mean per-dimension variance of the standardised
  // training rows) unless `kernel` is set explicitly.
  std::optional<KernelSpec> kernel;
  // One value trains directly; several are compared per class by AUC on the
  // calibration rows (ties go to the smaller C).
  std::vector<double> c_grid{1.0};
  double tol = 1e-3;
  double calib_fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 10'000'000;
  std::size_t cache_bytes = std::size_t{256} << 20;
  int workers = 1;
};

// Row labels plus an optional group id per row (augmented variants of one
// source image share a group). Calibration rows are drawn per group,
// stratified by class, so no group straddles the SVM/calibration split.
struct OvrTrainingSet {
  RowMatrix features;
  std::vector<LesionClass> labels;
  std::vector<std::string> groups;  // empty: every row is its own group
};

struct OvrTrainReport {
  std::array<double, 3> chosen_c{};
  std::array<std::size_t, 3> support_vectors{};
  std::array<std::size_t, 3> iterations{};
  std::size_t svm_rows = 0;
  std::size_t calibration_rows = 0;
  double gamma = 0.0;
};

// Rows are put in a canonical order (by group, then features, then label)
// before anything else, so the result does not depend on input row order.
// Throws MissingClass when a class is absent from the data or from either
// side of the calibration split.
MultiClassSvm train_one_vs_rest(const OvrTrainingSet& data, const OvrOptions& options,
                                OvrTrainReport* report = nullptr);

// Serialisation (see docs/formats.md, "Classifier block").
void write_multiclass(std::ostream& out, const MultiClassSvm& model);
MultiClassSvm read_multiclass(std::istream& in);

// Standalone model file: magic "LSNSVM\0\0", u32 version, metadata string,
// then one classifier block.
void save_multiclass_file(const std::string& path, const MultiClassSvm& model, const std::string& metadata = "");
MultiClassSvm load_multiclass_file(const std::string& path, std::string* metadata = nullptr);

}  // namespace lesion

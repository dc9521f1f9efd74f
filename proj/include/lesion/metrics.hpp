#pragma once

// ROC/AUC and thresholded accuracy for the melanoma and seborrheic-keratosis
// binary problems, and the summary report over the five configurations.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lesion/dataset.hpp"
#include "lesion/scores.hpp"

namespace lesion {

// Mann-Whitney statistic with ties credited 1/2. Labels are 0/1; both must
// occur; scores must be finite. Computed from integer pair counts, so the
// result is exactly (2 * wins + ties) / (2 * N+ * N-).
double auc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last

  // Trapezoidal area.
  double area() const;
};

// One point per distinct score threshold, thresholds descending, ties grouped.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);

// Fraction of samples with (score >= threshold) == label. Throws on empty input.
double accuracy_at(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

struct ReportRow {
  std::string configuration;
  // Percentages in [0, 100], full precision.
  double melanoma_acc = 0.0;
  double sk_acc = 0.0;
  double melanoma_auc = 0.0;
  double sk_auc = 0.0;
  double avg_auc = 0.0;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::size_t samples = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
  // Per configuration: melanoma and SK ROC curves.
  std::map<std::string, std::pair<RocCurve, RocCurve>> curves;
};

struct ConfigurationPredictions {
  std::string name;
  std::vector<PredictionRow> rows;
};

using GroundTruth = std::map<std::string, LesionClass>;

// Labelled entries of `dataset`; throws ValidationError if none are labelled.
GroundTruth ground_truth(const Dataset& dataset);

// Scores every configuration against `truth`, rows in the given order. Every
// configuration must cover every truth id (MissingImage names the first gap
// in truth order); rows for ids absent from `truth` are ignored. Both binary
// problems need a positive and a negative case.
EvalReport build_report(const std::vector<ConfigurationPredictions>& predictions, const GroundTruth& truth);

// Plain-text table with one-decimal percentages.
std::string format_report_table(const EvalReport& report);
// JSON document with full-precision values; schema in docs/formats.md.
std::string report_json(const EvalReport& report);
EvalReport parse_report_json(const std::string& text);
// `fpr,tpr` per line, preceded by a header line.
std::string format_roc_csv(const RocCurve& curve, std::string_view comment = {});

}  // namespace lesion

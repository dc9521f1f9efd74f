#pragma once

// Batch subcommands over one experiment configuration.
//
// Output layout under the configured `out` directory:
//   features/<train|test>_<network>.feat/.idx   feature caches
//   split.txt                                   train/holdout split record
//   models/<key>.model                          four member artifacts
//   models/fusion.json                          fusion manifest
//   predictions/<holdout|test>_<key>.csv        one per configuration
//   report/<holdout|test>/report.json, table.txt, roc/<key>_<task>.csv

#include <filesystem>
#include <iosfwd>
#include <string>

#include "lesion/config.hpp"
#include "lesion/metrics.hpp"

namespace lesion {

enum class EvalSet { Test, Holdout };
std::string_view eval_set_name(EvalSet set);
EvalSet parse_eval_set(std::string_view name);

struct ExtractSummary {
  std::size_t written = 0;
  std::size_t up_to_date = 0;
};

// Feature caches for every (dataset, network): all eight variants for the
// training set, identity only for the test set. A cache whose recorded
// content hash matches the current inputs is left untouched.
ExtractSummary cmd_extract(const ExperimentConfig& config, std::ostream& log);

// Splits the training set, trains every classifier the five configurations
// need, writes the artifacts and the holdout predictions.
void cmd_train(const ExperimentConfig& config, std::ostream& log);

// Writes test predictions for the five configurations.
void cmd_predict(const ExperimentConfig& config, std::ostream& log);

// Scores the predictions of one set and writes the report files.
EvalReport cmd_evaluate(const ExperimentConfig& config, EvalSet set, std::ostream& log);

// Table text rendered from a previously written report.json.
std::string cmd_report(const ExperimentConfig& config, EvalSet set);

std::filesystem::path cache_base(const ExperimentConfig& config, std::string_view dataset, NetworkId network);
std::filesystem::path predictions_path(const ExperimentConfig& config, EvalSet set, std::string_view key);
std::filesystem::path report_dir(const ExperimentConfig& config, EvalSet set);

}  // namespace lesion

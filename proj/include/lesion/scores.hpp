#pragma once

// Per-image binary scores and the prediction CSV
// (`image_id,melanoma_score,sk_score`).

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lesion {

struct BinaryScores {
  double melanoma = 0.0;
  double seborrheic_keratosis = 0.0;

  friend bool operator==(const BinaryScores&, const BinaryScores&) = default;
};

struct PredictionRow {
  std::string image_id;
  BinaryScores scores;
};

// Rows in input order. Scores are printed in the shortest form that parses
// back to the same double. Lines starting with '#' are provenance comments;
// `comment` (if nonempty) is written as one such line before the header.
std::string format_predictions(const std::vector<PredictionRow>& rows, std::string_view comment = {});
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRow>& rows,
                       std::string_view comment = {});

// Throws ValidationError on a bad header, malformed numbers, scores outside
// [0, 1] or duplicate ids.
std::vector<PredictionRow> parse_predictions(std::string_view csv_text, std::string_view source_name = "<csv>");
std::vector<PredictionRow> read_predictions(const std::filesystem::path& path);

}  // namespace lesion

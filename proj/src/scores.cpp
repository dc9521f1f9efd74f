#include "lesion/scores.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "detail/text.hpp"
#include "lesion/error.hpp"

namespace lesion {
namespace {

constexpr std::string_view kHeader = "image_id,melanoma_score,sk_score";

void check_score(double v, const std::string& where) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw ValidationError(where + ": score " + text::format_double(v) + " outside [0, 1]");
  }
}

}  // namespace

std::string format_predictions(const std::vector<PredictionRow>& rows, std::string_view comment) {
  std::string out;
  if (!comment.empty()) {
    out += "# ";
    out += comment;
    out += '\n';
  }
  out += kHeader;
  out += '\n';
  for (const auto& r : rows) {
    check_score(r.scores.melanoma, r.image_id);
    check_score(r.scores.seborrheic_keratosis, r.image_id);
    out += r.image_id;
    out += ',';
    out += text::format_double(r.scores.melanoma);
    out += ',';
    out += text::format_double(r.scores.seborrheic_keratosis);
    out += '\n';
  }
  return out;
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRow>& rows,
                       std::string_view comment) {
  const std::string body = format_predictions(rows, comment);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open " + path.string() + " for writing");
  out << body;
  if (!out.flush()) throw RuntimeFailure("failed writing " + path.string());
}

std::vector<PredictionRow> parse_predictions(std::string_view csv, std::string_view source_name) {
  const std::string source(source_name);
  std::vector<PredictionRow> rows;
  std::unordered_set<std::string> seen;
  bool header_seen = false;
  text::for_each_line(csv, [&](std::size_t line_no, std::string_view raw) {
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') return;
    const std::string where = source + ":" + std::to_string(line_no);
    if (!header_seen) {
      if (line != kHeader) {
        throw ValidationError(where + ": expected header '" + std::string(kHeader) + "'");
      }
      header_seen = true;
      return;
    }
    const auto fields = text::split_fields(line);
    if (fields.size() != 3) throw ValidationError(where + ": expected 3 fields");
    PredictionRow r;
    r.image_id = std::string(fields[0]);
    if (r.image_id.empty()) throw ValidationError(where + ": empty image_id");
    const auto m = text::parse_double(fields[1]);
    const auto s = text::parse_double(fields[2]);
    if (!m || !s) throw ValidationError(where + ": malformed score");
    check_score(*m, where);
    check_score(*s, where);
    r.scores = {*m, *s};
    if (!seen.insert(r.image_id).second) throw DuplicateId(r.image_id);
    rows.push_back(std::move(r));
  });
  if (!header_seen) throw ValidationError(source + ": missing header");
  return rows;
}

std::vector<PredictionRow> read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open predictions file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_predictions(ss.str(), path.string());
}

}  // namespace lesion

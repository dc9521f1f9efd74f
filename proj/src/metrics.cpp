#include "lesion/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "detail/text.hpp"
#include "json.hpp"
#include "lesion/error.hpp"

namespace lesion {
namespace {

void check_binary_inputs(std::span<const double> scores, std::span<const int> labels, const char* what) {
  if (scores.size() != labels.size()) throw ValidationError(std::string(what) + ": score and label counts differ");
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw ValidationError(std::string(what) + ": scores must be finite");
    if (labels[i] == 1) {
      pos = true;
    } else if (labels[i] == 0) {
      neg = true;
    } else {
      throw ValidationError(std::string(what) + ": labels must be 0 or 1");
    }
  }
  if (!pos || !neg) throw ValidationError(std::string(what) + " needs both a positive and a negative label");
}

// Indices ordered by descending score (stable).
std::vector<std::size_t> descending(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  check_binary_inputs(scores, labels, "AUC");
  const auto idx = descending(scores);
  // Walk tie groups from the top; every positive in a group beats the
  // negatives in all later groups and ties the negatives in its own group.
  std::uint64_t total_pos = 0, total_neg = 0;
  for (int y : labels) (y == 1 ? total_pos : total_neg) += 1;
  std::uint64_t neg_above = 0, twice_credit = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::uint64_t gp = 0, gn = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1 ? gp : gn) += 1;
      ++j;
    }
    const std::uint64_t neg_below = total_neg - neg_above - gn;
    twice_credit += 2 * gp * neg_below + gp * gn;
    neg_above += gn;
    i = j;
  }
  return static_cast<double>(twice_credit) / (2.0 * static_cast<double>(total_pos) * static_cast<double>(total_neg));
}

double RocCurve::area() const {
  double a = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    a += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return a;
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_binary_inputs(scores, labels, "ROC");
  const auto idx = descending(scores);
  double np = 0.0, nn = 0.0;
  for (int y : labels) (y == 1 ? np : nn) += 1.0;
  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1 ? tp : fp) += 1.0;
      ++j;
    }
    curve.points.push_back({fp / nn, tp / np});
    i = j;
  }
  return curve;
}

double accuracy_at(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw ValidationError("accuracy: score and label counts differ");
  if (scores.empty()) throw ValidationError("accuracy of an empty set is undefined");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if ((scores[i] >= threshold) == (labels[i] == 1)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

GroundTruth ground_truth(const Dataset& dataset) {
  GroundTruth truth;
  for (const auto& img : dataset.images) {
    if (img.label) truth.emplace(img.id, *img.label);
  }
  if (truth.empty()) throw ValidationError("ground truth has no labelled images");
  return truth;
}

EvalReport build_report(const std::vector<ConfigurationPredictions>& predictions, const GroundTruth& truth) {
  if (truth.empty()) throw ValidationError("ground truth is empty");
  EvalReport report;
  report.samples = truth.size();

  std::vector<int> mel_labels, sk_labels;
  for (const auto& [id, cls] : truth) {
    mel_labels.push_back(cls == LesionClass::Melanoma ? 1 : 0);
    sk_labels.push_back(cls == LesionClass::SeborrheicKeratosis ? 1 : 0);
  }

  for (const auto& config : predictions) {
    std::map<std::string_view, const BinaryScores*> by_id;
    for (const auto& r : config.rows) by_id.emplace(r.image_id, &r.scores);
    std::vector<double> mel, sk;
    for (const auto& [id, cls] : truth) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw MissingImage(id);
      mel.push_back(it->second->melanoma);
      sk.push_back(it->second->seborrheic_keratosis);
    }
    ReportRow row;
    row.configuration = config.name;
    row.melanoma_acc = 100.0 * accuracy_at(mel, mel_labels);
    row.sk_acc = 100.0 * accuracy_at(sk, sk_labels);
    row.melanoma_auc = 100.0 * auc(mel, mel_labels);
    row.sk_auc = 100.0 * auc(sk, sk_labels);
    row.avg_auc = (row.melanoma_auc + row.sk_auc) / 2.0;
    report.rows.push_back(row);
    report.curves[config.name] = {roc_curve(mel, mel_labels), roc_curve(sk, sk_labels)};
  }
  return report;
}

std::string format_report_table(const EvalReport& report) {
  std::size_t width = 13;
  for (const auto& r : report.rows) width = std::max(width, r.configuration.size());
  auto pad = [](std::string s, std::size_t w, bool left) {
    if (s.size() < w) s = left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
    return s;
  };
  std::string out = pad("Configuration", width, true);
  for (const char* h : {"M-ACC", "SK-ACC", "M-AUC", "SK-AUC", "Avg-AUC"}) out += "  " + pad(h, 7, false);
  out += '\n';
  for (const auto& r : report.rows) {
    out += pad(r.configuration, width, true);
    for (double v : {r.melanoma_acc, r.sk_acc, r.melanoma_auc, r.sk_auc, r.avg_auc}) out += "  " + pad(fmt1(v), 7, false);
    out += '\n';
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["format"] = "lesion-report";
  j["version"] = 1;
  j["config_sha256"] = report.config_hash;
  j["seed"] = report.seed;
  j["samples"] = report.samples;
  j["threshold"] = 0.5;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json o;
    o["configuration"] = r.configuration;
    o["melanoma_acc"] = r.melanoma_acc;
    o["sk_acc"] = r.sk_acc;
    o["melanoma_auc"] = r.melanoma_auc;
    o["sk_auc"] = r.sk_auc;
    o["avg_auc"] = r.avg_auc;
    rows.push_back(std::move(o));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

EvalReport parse_report_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "lesion-report" || j.at("version") != 1) {
      throw ValidationError("not a version 1 lesion report");
    }
    EvalReport report;
    report.config_hash = j.at("config_sha256").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.samples = j.at("samples").get<std::size_t>();
    for (const auto& o : j.at("rows")) {
      ReportRow r;
      r.configuration = o.at("configuration").get<std::string>();
      r.melanoma_acc = o.at("melanoma_acc").get<double>();
      r.sk_acc = o.at("sk_acc").get<double>();
      r.melanoma_auc = o.at("melanoma_auc").get<double>();
      r.sk_auc = o.at("sk_auc").get<double>();
      r.avg_auc = o.at("avg_auc").get<double>();
      report.rows.push_back(std::move(r));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report JSON: ") + e.what());
  }
}

std::string format_roc_csv(const RocCurve& curve, std::string_view comment) {
  std::string out;
  if (!comment.empty()) {
    out += "# ";
    out += comment;
    out += '\n';
  }
  out += "fpr,tpr\n";
  for (const auto& p : curve.points) {
    out += text::format_double(p.fpr);
    out += ',';
    out += text::format_double(p.tpr);
    out += '\n';
  }
  return out;
}

}  // namespace lesion

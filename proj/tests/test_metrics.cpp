#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "lesion/error.hpp"
#include "lesion/metrics.hpp"
#include "lesion/rng.hpp"
#include "oracles.hpp"

using namespace lesion;

namespace {

struct Instance {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Scores drawn from a small grid so ties are common.
Instance random_instance(Xoshiro256& rng, std::size_t n) {
  Instance in;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = i == 0 ? 1 : i == 1 ? 0 : static_cast<int>(rng.below(2));
    in.labels.push_back(y);
    in.scores.push_back(static_cast<double>(rng.below(12)) / 11.0 + 0.1 * y * rng.uniform());
  }
  return in;
}

std::vector<PredictionRow> rows_for(const GroundTruth& truth, double noise, Xoshiro256& rng) {
  std::vector<PredictionRow> rows;
  for (const auto& [id, cls] : truth) {
    const double m = cls == LesionClass::Melanoma ? 0.8 : 0.2;
    const double s = cls == LesionClass::SeborrheicKeratosis ? 0.7 : 0.1;
    rows.push_back({id, {std::clamp(m + noise * rng.normal(), 0.0, 1.0), std::clamp(s + noise * rng.normal(), 0.0, 1.0)}});
  }
  return rows;
}

GroundTruth small_truth() {
  GroundTruth t;
  for (int i = 0; i < 12; ++i) t["id" + std::to_string(i)] = kAllClasses[i % 3];
  return t;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("auc hand examples") {
    CHECK(auc(std::vector<double>{0.9, 0.8, 0.7, 0.6}, std::vector<int>{1, 0, 1, 0}) == 0.75);
    CHECK(auc(std::vector<double>{0.9, 0.8, 0.1, 0.2}, std::vector<int>{1, 1, 0, 0}) == 1.0);
    CHECK(auc(std::vector<double>{0.4, 0.4, 0.4}, std::vector<int>{1, 0, 0}) == 0.5);
    CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), ValidationError);
    CHECK_THROWS_AS(auc(std::vector<double>{0.1, NAN}, std::vector<int>{1, 0}), ValidationError);
    CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 2}), ValidationError);
  }

  TEST_CASE("auc equals the pairwise oracle exactly") {
    Xoshiro256 rng(31);
    for (int t = 0; t < 300; ++t) {
      const auto in = random_instance(rng, 2 + rng.below(199));
      CHECK(auc(in.scores, in.labels) == oracle::pairwise_auc(in.scores, in.labels));
    }
  }

  TEST_CASE("auc symmetries") {
    Xoshiro256 rng(32);
    for (int t = 0; t < 50; ++t) {
      Instance in;
      for (int i = 0; i < 40; ++i) {
        in.labels.push_back(i < 2 ? i : static_cast<int>(rng.below(2)));
        in.scores.push_back(rng.normal());
      }
      std::vector<double> neg, mono;
      for (double s : in.scores) {
        neg.push_back(-s);
        mono.push_back(std::exp(3.0 * s) + 1.0);
      }
      CHECK(auc(in.scores, in.labels) + auc(neg, in.labels) == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(auc(mono, in.labels) == auc(in.scores, in.labels));
    }
  }

  TEST_CASE("roc curve shape and area") {
    Xoshiro256 rng(33);
    for (int t = 0; t < 100; ++t) {
      const auto in = random_instance(rng, 2 + rng.below(80));
      const auto c = roc_curve(in.scores, in.labels);
      REQUIRE(c.points.size() >= 2);
      CHECK(c.points.front().fpr == 0.0);
      CHECK(c.points.front().tpr == 0.0);
      CHECK(c.points.back().fpr == 1.0);
      CHECK(c.points.back().tpr == 1.0);
      for (std::size_t i = 1; i < c.points.size(); ++i) {
        CHECK(c.points[i].fpr >= c.points[i - 1].fpr);
        CHECK(c.points[i].tpr >= c.points[i - 1].tpr);
      }
      CHECK(std::abs(c.area() - auc(in.scores, in.labels)) < 1e-12);
    }
    const auto perfect = roc_curve(std::vector<double>{0.9, 0.8, 0.2}, std::vector<int>{1, 1, 0});
    bool corner = false;
    for (const auto& p : perfect.points) corner |= p.fpr == 0.0 && p.tpr == 1.0;
    CHECK(corner);
    const auto flat = roc_curve(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1});
    CHECK(flat.points.size() == 2);
  }

  TEST_CASE("accuracy at the 0.5 threshold") {
    CHECK(accuracy_at(std::vector<double>{0.6, 0.4, 0.7}, std::vector<int>{1, 1, 0}) == doctest::Approx(1.0 / 3));
    CHECK(accuracy_at(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 1}) == 1.0);
    CHECK(accuracy_at(std::vector<double>{1.0, 0.0}, std::vector<int>{1, 0}) == 1.0);
    CHECK_THROWS_AS(accuracy_at(std::vector<double>{}, std::vector<int>{}), ValidationError);
  }

  TEST_CASE("perfect single-sample-per-class report") {
    GroundTruth truth{{"m", LesionClass::Melanoma}, {"s", LesionClass::SeborrheicKeratosis}, {"n", LesionClass::Nevus}};
    ConfigurationPredictions p{"Fusion", {{"m", {1.0, 0.0}}, {"s", {0.0, 1.0}}, {"n", {0.0, 0.0}}}};
    const auto r = build_report({p}, truth);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.samples == 3);
    CHECK(r.rows[0].melanoma_acc == 100.0);
    CHECK(r.rows[0].sk_acc == 100.0);
    CHECK(r.rows[0].melanoma_auc == 100.0);
    CHECK(r.rows[0].sk_auc == 100.0);
    CHECK(r.rows[0].avg_auc == 100.0);
    CHECK(format_report_table(r).find("100.0") != std::string::npos);
  }

  TEST_CASE("report rows agree with the metric functions") {
    Xoshiro256 rng(34);
    const auto truth = small_truth();
    std::vector<ConfigurationPredictions> preds{{"A", rows_for(truth, 0.3, rng)}, {"B", rows_for(truth, 0.1, rng)}};
    // Extra ids outside the truth are ignored.
    preds[0].rows.push_back({"extra", {0.5, 0.5}});
    const auto r = build_report(preds, truth);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].configuration == "A");
    std::vector<double> ms, ss;
    std::vector<int> ml, sl;
    for (const auto& row : preds[1].rows) {
      ms.push_back(row.scores.melanoma);
      ss.push_back(row.scores.seborrheic_keratosis);
      ml.push_back(truth.at(row.image_id) == LesionClass::Melanoma);
      sl.push_back(truth.at(row.image_id) == LesionClass::SeborrheicKeratosis);
    }
    CHECK(r.rows[1].melanoma_auc == doctest::Approx(100.0 * oracle::pairwise_auc(ms, ml)).epsilon(1e-12));
    CHECK(r.rows[1].sk_auc == doctest::Approx(100.0 * oracle::pairwise_auc(ss, sl)).epsilon(1e-12));
    CHECK(r.rows[1].melanoma_acc == doctest::Approx(100.0 * accuracy_at(ms, ml)));
    for (const auto& row : r.rows) CHECK(std::abs(row.avg_auc - (row.melanoma_auc + row.sk_auc) / 2) < 1e-9);
    CHECK(r.curves.size() == 2);
  }

  TEST_CASE("a missing prediction names the id") {
    Xoshiro256 rng(35);
    const auto truth = small_truth();
    auto rows = rows_for(truth, 0.1, rng);
    rows.erase(rows.begin() + 4);
    try {
      build_report({{"X", rows}}, truth);
      FAIL("expected MissingImage");
    } catch (const MissingImage& e) {
      CHECK(e.id() == std::next(truth.begin(), 4)->first);
    }
  }

  TEST_CASE("table layout and JSON round-trip") {
    Xoshiro256 rng(36);
    const auto truth = small_truth();
    auto r = build_report({{"AlexNet FC8", rows_for(truth, 0.2, rng)}, {"Fusion", rows_for(truth, 0.2, rng)}}, truth);
    r.config_hash = "deadbeef";
    r.seed = 42;
    const auto table = format_report_table(r);
    CHECK(table.find("Configuration") != std::string::npos);
    CHECK(table.find("M-ACC") != std::string::npos);
    CHECK(table.find("Avg-AUC") != std::string::npos);
    CHECK(table.find("AlexNet FC8") < table.find("Fusion"));

    const auto text = report_json(r);
    const auto j = nlohmann::json::parse(text);
    CHECK(j.at("format") == "lesion-report");
    CHECK(j.at("config_sha256") == "deadbeef");
    CHECK(j.at("seed") == 42);
    CHECK(j.at("threshold") == 0.5);
    CHECK(j.at("rows").size() == 2);
    const auto back = parse_report_json(text);
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[1].melanoma_auc == r.rows[1].melanoma_auc);
    CHECK(back.rows[0].sk_acc == r.rows[0].sk_acc);
    CHECK(back.samples == r.samples);
    CHECK(back.seed == 42);
    CHECK_THROWS_AS(parse_report_json("{}"), ValidationError);
  }

  TEST_CASE("roc csv") {
    const auto c = roc_curve(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0});
    const auto csv = format_roc_csv(c, "seed=1");
    CHECK(csv.rfind("# seed=1\nfpr,tpr\n0,0\n", 0) == 0);
    CHECK(csv.find("\n1,1\n") != std::string::npos);
  }

  TEST_CASE("prediction csv round-trips exactly") {
    Xoshiro256 rng(37);
    std::vector<PredictionRow> rows;
    for (int i = 0; i < 50; ++i) rows.push_back({"p" + std::to_string(i), {rng.uniform(), rng.uniform()}});
    rows.push_back({"edge", {0.0, 1.0}});
    const auto text = format_predictions(rows, "config_sha256=ab seed=3");
    CHECK(text.rfind("# config_sha256=ab seed=3\nimage_id,melanoma_score,sk_score\n", 0) == 0);
    const auto back = parse_predictions(text);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(back[i].image_id == rows[i].image_id);
      CHECK(back[i].scores == rows[i].scores);
    }
    CHECK(format_predictions(back, "config_sha256=ab seed=3") == text);
  }

  TEST_CASE("prediction csv validation") {
    const std::string h = "image_id,melanoma_score,sk_score\n";
    CHECK(parse_predictions(h).empty());
    CHECK_THROWS_AS(parse_predictions("id,m,s\n"), ValidationError);
    CHECK_THROWS_AS(parse_predictions(h + "a,1.5,0\n"), ValidationError);
    CHECK_THROWS_AS(parse_predictions(h + "a,x,0\n"), ValidationError);
    CHECK_THROWS_AS(parse_predictions(h + "a,0.1\n"), ValidationError);
    CHECK_THROWS_AS(parse_predictions(h + "a,0.1,0.2\na,0.3,0.4\n"), DuplicateId);
  }
}

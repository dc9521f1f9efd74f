#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "lesion/error.hpp"
#include "lesion/feature_cache.hpp"
#include "lesion/pipeline.hpp"
#include "lesion/synthetic.hpp"
#include "oracles.hpp"

using namespace lesion;
namespace fs = std::filesystem;

namespace {

struct Experiment {
  oracle::TempDir dir;
  ExperimentConfig config;

  explicit Experiment(const std::string& tag, int train_per_class = 10, int test_per_class = 4,
                      const std::string& extra = "")
      : dir(tag) {
    SyntheticOptions tr;
    tr.per_class = train_per_class;
    tr.seed = 3;
    tr.id_prefix = "TR";
    write_synthetic_dataset(dir.path() / "train", tr);
    SyntheticOptions te = tr;
    te.per_class = test_per_class;
    te.seed = 4;
    te.id_prefix = "TE";
    write_synthetic_dataset(dir.path() / "test", te);
    config = parse_config(
        "train.manifest = train/manifest.csv\n"
        "train.images = train/images\n"
        "test.manifest = test/manifest.csv\n"
        "test.images = test/images\n"
        "model.alexnet = mock:1\n"
        "model.vgg16 = mock:2\n"
        "seed = 5\n" +
            extra,
        dir.path());
  }

  void run_all(std::ostream& log) {
    cmd_extract(config, log);
    cmd_train(config, log);
    cmd_predict(config, log);
  }
};

std::string slurp(const fs::path& p) { return oracle::read_file(p); }

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("extract writes caches once and then reuses them") {
    Experiment ex("pl_extract");
    std::ostringstream log;
    const auto first = cmd_extract(ex.config, log);
    CHECK(first.written == 4);
    CHECK(first.up_to_date == 0);
    const auto train = read_feature_cache(cache_base(ex.config, "train", NetworkId::AlexNet));
    CHECK(train.rows() == 30 * 8);
    CHECK(train.layers().size() == 3);
    const auto test = read_feature_cache(cache_base(ex.config, "test", NetworkId::VGG16));
    CHECK(test.rows() == 12);
    const auto mtime = fs::last_write_time(feature_file(cache_base(ex.config, "train", NetworkId::AlexNet)));

    const auto second = cmd_extract(ex.config, log);
    CHECK(second.written == 0);
    CHECK(second.up_to_date == 4);
    CHECK(fs::last_write_time(feature_file(cache_base(ex.config, "train", NetworkId::AlexNet))) == mtime);

    // A different mock seed invalidates that network's caches only.
    ex.config.set("model.alexnet", "mock:9");
    const auto third = cmd_extract(ex.config, log);
    CHECK(third.written == 2);
    CHECK(third.up_to_date == 2);
  }

  TEST_CASE("train before extract asks for extract") {
    Experiment ex("pl_order");
    std::ostringstream log;
    try {
      cmd_train(ex.config, log);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("extract") != std::string::npos);
    }
  }

  TEST_CASE("full run writes every artifact with provenance") {
    Experiment ex("pl_full", 10, 4, "split.stratify = true\n");
    std::ostringstream log;
    ex.run_all(log);
    const auto out = ex.config.out_dir();
    const auto prov = ex.config.provenance();
    CHECK(slurp(out / "split.txt").find(prov) != std::string::npos);
    for (const auto& spec : table_configurations()) {
      CAPTURE(spec.key);
      const auto test_csv = predictions_path(ex.config, EvalSet::Test, spec.key);
      const auto hold_csv = predictions_path(ex.config, EvalSet::Holdout, spec.key);
      REQUIRE(fs::exists(test_csv));
      REQUIRE(fs::exists(hold_csv));
      CHECK(slurp(test_csv).find(prov) != std::string::npos);
      CHECK(read_predictions(test_csv).size() == 12);
      if (spec.key != "fusion") CHECK(fs::exists(out / "models" / (spec.key + ".model")));
    }
    CHECK(read_predictions(predictions_path(ex.config, EvalSet::Holdout, "fusion")).size() == 6);

    const auto member = load_member(out / "models" / "vgg16_allfc.model");
    CHECK(member.layers.size() == 3);
    CHECK(member.classifiers.size() == 3);
    const auto meta = nlohmann::json::parse(member.metadata);
    CHECK(meta.at("config_sha256") == ex.config.hash());
    CHECK(meta.at("seed") == 5);
    REQUIRE(meta.at("classifiers").size() == 3);
    CHECK(meta.at("classifiers")[0].at("chosen_C").size() == 3);

    const auto fusion = nlohmann::json::parse(slurp(out / "models" / "fusion.json"));
    CHECK(fusion.at("members").size() == 2);

    const auto report = cmd_evaluate(ex.config, EvalSet::Test, log);
    REQUIRE(report.rows.size() == 5);
    CHECK(report.rows[4].configuration == "Fusion");
    CHECK(report.samples == 12);
    const auto dir = report_dir(ex.config, EvalSet::Test);
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "table.txt"));
    CHECK(fs::exists(dir / "roc" / "fusion_melanoma.csv"));
    CHECK(fs::exists(dir / "roc" / "alexnet_fc8_sk.csv"));
    CHECK(slurp(dir / "table.txt").find(cmd_report(ex.config, EvalSet::Test)) != std::string::npos);

    const auto hold = cmd_evaluate(ex.config, EvalSet::Holdout, log);
    CHECK(hold.samples == 6);
  }

  TEST_CASE("results do not depend on the output directory or worker count") {
    Experiment ex("pl_det");
    std::ostringstream log;
    ex.run_all(log);
    const auto first = ex.config.out_dir();
    ex.config.set("out", "second");
    ex.config.set("workers", "3");
    ex.run_all(log);
    const auto second = ex.config.out_dir();
    for (const auto& spec : table_configurations()) {
      CHECK(slurp(first / "predictions" / ("test_" + spec.key + ".csv")) ==
            slurp(second / "predictions" / ("test_" + spec.key + ".csv")));
    }
    CHECK(slurp(first / "models" / "alexnet_allfc.model") == slurp(second / "models" / "alexnet_allfc.model"));
  }

  TEST_CASE("an empty test manifest gives header-only predictions") {
    Experiment ex("pl_empty");
    {
      std::ofstream out(ex.dir.path() / "test" / "manifest.csv", std::ios::trunc);
      out << "image_id,melanoma,seborrheic_keratosis\n";
    }
    std::ostringstream log;
    ex.run_all(log);
    const auto csv = predictions_path(ex.config, EvalSet::Test, "fusion");
    CHECK(read_predictions(csv).empty());
    CHECK(log.str().find("warning") != std::string::npos);
  }

  TEST_CASE("concat-features, augmented-instance split and a C grid") {
    Experiment ex("pl_variants", 8, 3,
                  "ensemble.combine = concat-features\nsplit.unit = augmented-instance\nsplit.stratify = true\n"
                  "svm.C = 0.1, 1, 10\n");
    std::ostringstream log;
    ex.run_all(log);
    const auto member = load_member(ex.config.out_dir() / "models" / "alexnet_allfc.model");
    CHECK(member.combine == Combine::ConcatFeatures);
    CHECK(member.classifiers.size() == 1);
    CHECK(member.classifiers[0].dim() == 4096 + 4096 + 1000);
    const auto meta = nlohmann::json::parse(member.metadata);
    CHECK(meta.at("classifiers")[0].at("chosen_C").size() == 3);
    const auto rep = cmd_evaluate(ex.config, EvalSet::Holdout, log);
    // Stratified over augmented variants: 3 * (64 - round(0.8 * 64)).
    CHECK(rep.samples == 39);
  }

  TEST_CASE("configuration errors surface as validation errors") {
    Experiment ex("pl_bad");
    ex.config.models.erase(NetworkId::VGG16);
    std::ostringstream log;
    CHECK_THROWS_AS(cmd_extract(ex.config, log), ValidationError);

    Experiment missing("pl_missing");
    fs::remove(missing.dir.path() / "train" / "images" / "TR_00000.png");
    try {
      cmd_extract(missing.config, log);
      FAIL("expected MissingImage");
    } catch (const MissingImage& e) {
      CHECK(e.id() == "TR_00000");
    }
  }
}

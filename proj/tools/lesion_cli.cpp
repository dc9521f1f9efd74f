// lesion: batch front end for feature extraction, training, prediction and
// evaluation over one experiment config.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lesion/config.hpp"
#include "lesion/embedding.hpp"
#include "lesion/error.hpp"
#include "lesion/pipeline.hpp"
#include "lesion/synthetic.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
  std::string set = "test";
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "experiment config file")->required();
  cmd->add_option("--seed", f.seed, "experiment seed (overrides `seed`)");
  cmd->add_option("--out", f.out, "output directory (overrides `out`)");
  cmd->add_option("-D,--define", f.overrides, "extra `key=value` setting, applied after the file");
}

lesion::ExperimentConfig build_config(const CommonFlags& f) {
  auto cfg = lesion::load_config(f.config);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw lesion::ValidationError("-D expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) {
    // Relative to the working directory, not the config file.
    cfg.out = std::filesystem::absolute(f.out).string();
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skin-lesion classification from deep CNN features"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* extract = app.add_subcommand("extract", "write feature caches for the train and test sets");
  auto* train = app.add_subcommand("train", "split, train the classifiers and write model artifacts");
  auto* predict = app.add_subcommand("predict", "write test-set predictions for the five configurations");
  auto* evaluate = app.add_subcommand("evaluate", "score predictions and write the report");
  auto* report = app.add_subcommand("report", "print the table of a written report");
  auto* run = app.add_subcommand("run", "extract, train, predict and evaluate in sequence");
  for (auto* cmd : {extract, train, predict, evaluate, report, run}) add_common(cmd, flags);
  for (auto* cmd : {evaluate, report}) {
    cmd->add_option("--on", flags.set, "test or holdout")->check(CLI::IsMember({"test", "holdout"}));
  }

  std::string parity_model, parity_file, parity_network;
  double parity_tol = 1e-3;
  auto* parity = app.add_subcommand("parity", "compare an ONNX export against its parity sidecar");
  parity->add_option("--model", parity_model, "ONNX file")->required();
  parity->add_option("--network", parity_network, "alexnet or vgg16")->required();
  parity->add_option("--parity", parity_file, "parity sidecar")->required();
  parity->add_option("--tol", parity_tol, "maximum allowed absolute difference");

  lesion::SyntheticOptions synth_opts;
  std::string synth_dir;
  bool synth_unlabeled = false;
  auto* synth = app.add_subcommand("synth", "write a synthetic labelled image set");
  synth->add_option("--out", synth_dir, "directory for manifest.csv and images/")->required();
  synth->add_option("--per-class", synth_opts.per_class, "images per class");
  synth->add_option("--side", synth_opts.side, "image side in pixels");
  synth->add_option("--seed", synth_opts.seed, "generator seed");
  synth->add_option("--prefix", synth_opts.id_prefix, "image id prefix");
  synth->add_flag("--unlabeled", synth_unlabeled, "write an id-only manifest");

  CLI11_PARSE(app, argc, argv);

  try {
    if (parity->parsed()) {
      const auto backend = lesion::load_onnx_backend(parity_model, lesion::parse_network(parity_network));
      const double diff = lesion::parity_max_abs_diff(*backend, lesion::read_parity_file(parity_file));
      std::cout << "max_abs_diff " << diff << "\n";
      return diff <= parity_tol ? EXIT_SUCCESS : 2;
    }
    if (synth->parsed()) {
      synth_opts.labeled = !synth_unlabeled;
      const auto ds = lesion::write_synthetic_dataset(synth_dir, synth_opts);
      std::cerr << "wrote " << ds.size() << " images to " << synth_dir << "\n";
      return EXIT_SUCCESS;
    }
    const auto cfg = build_config(flags);
    const auto set = lesion::parse_eval_set(flags.set);
    if (extract->parsed()) lesion::cmd_extract(cfg, std::cerr);
    if (train->parsed()) lesion::cmd_train(cfg, std::cerr);
    if (predict->parsed()) lesion::cmd_predict(cfg, std::cerr);
    if (evaluate->parsed()) lesion::cmd_evaluate(cfg, set, std::cout);
    if (report->parsed()) std::cout << lesion::cmd_report(cfg, set);
    if (run->parsed()) {
      lesion::cmd_extract(cfg, std::cerr);
      lesion::cmd_train(cfg, std::cerr);
      lesion::cmd_predict(cfg, std::cerr);
      lesion::cmd_evaluate(cfg, lesion::EvalSet::Test, std::cout);
    }
  } catch (const lesion::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const lesion::RuntimeFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return EXIT_SUCCESS;
}

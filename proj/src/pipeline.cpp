#include "lesion/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "detail/parallel.hpp"
#include "json.hpp"
#include "lesion/error.hpp"
#include "lesion/feature_cache.hpp"
#include "lesion/hash.hpp"

namespace lesion {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr std::size_t kExtractBatch = 32;

std::string member_key(NetworkId network, const std::vector<LayerId>& layers) {
  return std::string(network_name(network)) + (layers.size() == 1 ? "_" + std::string(layer_name(layers[0])) : "_allfc");
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

void require_models(const ExperimentConfig& cfg) {
  for (NetworkId n : kAllNetworks) {
    require(cfg.models.count(n) != 0, "config sets no model for " + std::string(network_name(n)) +
                                          " (key model." + std::string(network_name(n)) + ")");
  }
}

Dataset load_dataset(const ExperimentConfig& cfg, const std::string& manifest, const std::string& images,
                     std::string_view which) {
  require(!manifest.empty(), "config sets no " + std::string(which) + ".manifest");
  require(!images.empty(), "config sets no " + std::string(which) + ".images");
  LoadOptions opts;
  opts.decode = false;
  opts.workers = cfg.workers;
  return load_manifest(cfg.resolve(manifest), cfg.resolve(images), opts);
}

std::unique_ptr<EmbeddingBackend> make_backend(const ExperimentConfig& cfg, NetworkId network) {
  const ModelSource& src = cfg.models.at(network);
  if (src.mock) return mock_backend(network, cfg.mock_seed(network));
  const fs::path path = cfg.resolve(src.path);
  require(fs::exists(path), "model file " + path.string() + " does not exist");
  return load_onnx_backend(path.string(), network);
}

std::string input_hash(const Dataset& ds, const EmbeddingBackend& backend, const MeanRgb& mean, bool augment) {
  Sha256 h;
  std::ostringstream head;
  head << "lesion-feature-inputs 1\n"
       << backend.fingerprint() << '\n'
       << backend.input_side() << '\n'
       << mean[0] << ' ' << mean[1] << ' ' << mean[2] << '\n'
       << (augment ? "augment" : "identity") << '\n';
  h.update(head.str());
  for (const auto& img : ds.images) {
    Sha256 file;
    file.update_file(img.path);
    h.update(img.id + " " + file.hex_digest() + "\n");
  }
  return h.hex_digest();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& body) {
  ensure_dir(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open " + path.string() + " for writing");
  out << body;
  if (!out.flush()) throw RuntimeFailure("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Loads a cache and checks it against the current inputs.
FeatureCache open_cache(const ExperimentConfig& cfg, std::string_view dataset, NetworkId network,
                        const std::string& expected_hash) {
  const fs::path base = cache_base(cfg, dataset, network);
  if (!fs::exists(feature_file(base)) || !fs::exists(index_file(base))) {
    throw ValidationError("feature cache " + feature_file(base).string() + " is missing; run `extract` first");
  }
  FeatureCache cache = read_feature_cache(base);
  if (cache.network() != network) throw ValidationError(feature_file(base).string() + " holds the wrong network");
  if (cache.content_hash() != expected_hash) {
    throw ValidationError("feature cache " + feature_file(base).string() +
                          " does not match the current images or model; run `extract` again");
  }
  for (LayerId l : kAllLayers) {
    if (!cache.has_layer(l) || cache.slice(l).dim != layer_dim(l)) {
      throw ValidationError(feature_file(base).string() + ": layer " + std::string(layer_name(l)) +
                            " missing or of the wrong dimension");
    }
  }
  return cache;
}

std::size_t cache_row(const FeatureCache& cache, const FeatureRowKey& key) {
  const auto row = cache.find(key.source_id, key.variant);
  if (!row) {
    throw ValidationError("feature cache for " + std::string(network_name(cache.network())) + " has no row for '" +
                          variant_id(key.source_id, key.variant) + "'; run `extract` again");
  }
  return *row;
}

RowMatrix gather_rows(const FeatureCache& cache, const std::vector<std::size_t>& rows,
                      const std::vector<LayerId>& layers) {
  std::size_t d = 0;
  for (LayerId l : layers) d += layer_dim(l);
  RowMatrix x(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto dst = x.row(i).begin();
    for (LayerId l : layers) {
      const auto src = cache.row(rows[i], l);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return x;
}

struct Sample {
  std::string output_id;
  FeatureRowKey key;
};

std::vector<Sample> samples_for(const std::vector<std::string>& ids, SplitUnit unit, bool all_variants) {
  std::vector<Sample> out;
  for (const auto& id : ids) {
    if (unit == SplitUnit::AugmentedInstance) {
      auto [source, tag] = parse_variant_id(id);
      out.push_back({id, {source, tag}});
    } else if (all_variants) {
      for (const auto& tag : all_augment_tags()) out.push_back({variant_id(id, tag), {id, tag}});
    } else {
      out.push_back({id, {id, AugmentTag{}}});
    }
  }
  return out;
}

using MemberMap = std::map<std::string, EnsembleMember>;

std::vector<PredictionRow> predict_configuration(const ConfigurationSpec& spec, const MemberMap& members,
                                                 const std::map<NetworkId, FeatureCache>& caches,
                                                 const std::vector<Sample>& samples, int workers) {
  std::vector<const EnsembleMember*> used;
  for (const auto& [net, layers] : spec.members) used.push_back(&members.at(member_key(net, layers)));

  std::vector<PredictionRow> rows(samples.size());
  detail::parallel_for(samples.size(), workers, [&](std::size_t i) {
    std::vector<ProbTriple> triples;
    for (const EnsembleMember* m : used) {
      const FeatureCache& cache = caches.at(m->network);
      const std::size_t row = cache_row(cache, samples[i].key);
      std::map<LayerId, std::vector<double>> owned;
      SampleFeatures features;
      for (LayerId l : m->layers) {
        const auto v = cache.row(row, l);
        auto& dst = owned[l];
        dst.assign(v.begin(), v.end());
        features[l] = dst;
      }
      triples.push_back(member_probabilities(*m, features));
    }
    rows[i] = {samples[i].output_id, binary_scores(fuse(triples))};
  });
  return rows;
}

MemberMap load_members(const ExperimentConfig& cfg) {
  MemberMap members;
  const fs::path dir = cfg.out_dir() / "models";
  for (const auto& spec : table_configurations()) {
    for (const auto& [net, layers] : spec.members) {
      const std::string key = member_key(net, layers);
      if (members.count(key)) continue;
      const fs::path path = dir / (key + ".model");
      require(fs::exists(path), "model artifact " + path.string() + " is missing; run `train` first");
      EnsembleMember m = load_member(path);
      require(m.network == net && m.layers == layers, path.string() + " does not hold the " + key + " member");
      members.emplace(key, std::move(m));
    }
  }
  const fs::path manifest = dir / "fusion.json";
  require(fs::exists(manifest), "fusion manifest " + manifest.string() + " is missing; run `train` first");
  return members;
}

void write_prediction_set(const ExperimentConfig& cfg, EvalSet set, const MemberMap& members,
                          const std::map<NetworkId, FeatureCache>& caches, const std::vector<Sample>& samples,
                          std::ostream& log) {
  for (const auto& spec : table_configurations()) {
    const auto rows = predict_configuration(spec, members, caches, samples, cfg.workers);
    const fs::path path = predictions_path(cfg, set, spec.key);
    ensure_dir(path.parent_path());
    write_predictions(path, rows, cfg.provenance());
    log << "wrote " << path.string() << " (" << rows.size() << " rows)\n";
  }
}

}  // namespace

std::string_view eval_set_name(EvalSet set) { return set == EvalSet::Test ? "test" : "holdout"; }

EvalSet parse_eval_set(std::string_view name) {
  if (name == "test") return EvalSet::Test;
  if (name == "holdout") return EvalSet::Holdout;
  throw ValidationError("unknown evaluation set '" + std::string(name) + "' (expected test or holdout)");
}

fs::path cache_base(const ExperimentConfig& cfg, std::string_view dataset, NetworkId network) {
  return cfg.out_dir() / "features" / (std::string(dataset) + "_" + std::string(network_name(network)));
}

fs::path predictions_path(const ExperimentConfig& cfg, EvalSet set, std::string_view key) {
  return cfg.out_dir() / "predictions" / (std::string(eval_set_name(set)) + "_" + std::string(key) + ".csv");
}

fs::path report_dir(const ExperimentConfig& cfg, EvalSet set) {
  return cfg.out_dir() / "report" / std::string(eval_set_name(set));
}

ExtractSummary cmd_extract(const ExperimentConfig& cfg, std::ostream& log) {
  require_models(cfg);
  struct Job {
    std::string name;
    Dataset data;
    bool augment;
  };
  std::vector<Job> jobs;
  Dataset train = load_dataset(cfg, cfg.train_manifest, cfg.train_images, "train");
  require(!train.empty(), "training manifest " + cfg.train_manifest + " lists no images");
  jobs.push_back({"train", std::move(train), true});
  if (!cfg.test_manifest.empty()) {
    Dataset test = load_dataset(cfg, cfg.test_manifest, cfg.test_images, "test");
    if (test.empty()) {
      log << "warning: test manifest " << cfg.test_manifest << " lists no images; nothing to extract\n";
    } else {
      jobs.push_back({"test", std::move(test), false});
    }
  }

  ExtractSummary summary;
  const std::vector<LayerId> layers(kAllLayers.begin(), kAllLayers.end());
  for (NetworkId net : kAllNetworks) {
    const auto backend = make_backend(cfg, net);
    for (const auto& job : jobs) {
      const fs::path base = cache_base(cfg, job.name, net);
      const std::string hash = input_hash(job.data, *backend, cfg.mean_rgb, job.augment);
      if (peek_feature_cache_hash(base) == hash) {
        log << feature_file(base).string() << " is up to date\n";
        ++summary.up_to_date;
        continue;
      }
      FeatureCache cache(net, layers, hash);
      const std::size_t n = job.data.size();
      for (std::size_t start = 0; start < n; start += kExtractBatch) {
        const std::size_t count = std::min(kExtractBatch, n - start);
        std::vector<std::vector<PreprocessedImage>> prepared(count);
        std::vector<std::vector<LayerOutputs>> outputs(count);
        detail::parallel_for(count, cfg.workers, [&](std::size_t k) {
          const LabeledImage& img = job.data.images[start + k];
          const auto variants =
              prepare_image(img.load_pixels(), img.id, backend->input_side(), cfg.mean_rgb, job.augment);
          for (const auto& v : variants) {
            outputs[k].push_back(backend->embed(v.tensor));
            prepared[k].push_back({Tensor3{}, v.source_id, v.variant});
          }
        });
        for (std::size_t k = 0; k < count; ++k) {
          for (std::size_t v = 0; v < prepared[k].size(); ++v) {
            cache.append({prepared[k][v].source_id, prepared[k][v].variant}, outputs[k][v]);
          }
        }
      }
      ensure_dir(base.parent_path());
      write_feature_cache(base, cache);
      log << "wrote " << feature_file(base).string() << " (" << cache.rows() << " rows)\n";
      ++summary.written;
    }
  }
  return summary;
}

void cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  require_models(cfg);
  const Dataset train = load_dataset(cfg, cfg.train_manifest, cfg.train_images, "train");
  require(!train.empty(), "training manifest " + cfg.train_manifest + " lists no images");
  require(train.labeled, "training manifest " + cfg.train_manifest + " carries no labels");

  const DatasetSplit sp =
      split(train, cfg.split_fraction, cfg.effective_split_seed(), cfg.split_unit, cfg.split_stratify);
  ensure_dir(cfg.out_dir());
  write_split(sp, cfg.out_dir() / "split.txt", cfg.provenance());
  log << "split: " << sp.train_ids.size() << " train, " << sp.holdout_ids.size() << " holdout ("
      << split_unit_name(sp.unit) << ")\n";

  std::map<std::string, LesionClass> label_of;
  for (const auto& img : train.images) label_of.emplace(img.id, *img.label);

  const std::vector<Sample> train_samples = samples_for(sp.train_ids, sp.unit, true);
  const std::vector<Sample> holdout_samples = samples_for(sp.holdout_ids, sp.unit, false);

  OvrOptions opts;
  if (cfg.kernel == KernelSpec::Kind::Linear) {
    opts.kernel = KernelSpec::linear();
  } else if (cfg.gamma) {
    opts.kernel = KernelSpec::rbf(*cfg.gamma);
  }
  opts.c_grid = cfg.c_grid;
  opts.tol = cfg.tol;
  opts.calib_fraction = cfg.calib_fraction;
  opts.seed = cfg.seed;
  opts.max_iterations = cfg.max_iterations;
  opts.cache_bytes = cfg.cache_mb << 20;
  opts.workers = cfg.workers;

  std::map<NetworkId, FeatureCache> caches;
  MemberMap members;
  const fs::path model_dir = cfg.out_dir() / "models";
  ensure_dir(model_dir);

  for (NetworkId net : kAllNetworks) {
    const auto backend = make_backend(cfg, net);
    const std::string hash = input_hash(train, *backend, cfg.mean_rgb, true);
    FeatureCache& cache = caches.emplace(net, open_cache(cfg, "train", net, hash)).first->second;

    OvrTrainingSet base;
    std::vector<std::size_t> rows;
    for (const auto& s : train_samples) {
      rows.push_back(cache_row(cache, s.key));
      base.labels.push_back(label_of.at(s.key.source_id));
      base.groups.push_back(s.key.source_id);
    }

    auto train_on = [&](const std::vector<LayerId>& layers, json& info) {
      OvrTrainingSet data = base;
      data.features = gather_rows(cache, rows, layers);
      OvrTrainReport rep;
      MultiClassSvm model = train_one_vs_rest(data, opts, &rep);
      json layer_names = json::array();
      for (LayerId l : layers) layer_names.push_back(layer_name(l));
      json c = json::object();
      json svs = json::object();
      for (LesionClass k : kAllClasses) {
        c[std::string(class_name(k))] = rep.chosen_c[class_index(k)];
        svs[std::string(class_name(k))] = rep.support_vectors[class_index(k)];
      }
      info = {{"layers", layer_names},
              {"kernel", cfg.kernel == KernelSpec::Kind::Rbf ? "rbf" : "linear"},
              {"gamma", rep.gamma},
              {"chosen_C", c},
              {"support_vectors", svs},
              {"svm_rows", rep.svm_rows},
              {"calibration_rows", rep.calibration_rows}};
      log << network_name(net) << " " << layer_names.dump() << ": C=" << c.dump() << " gamma=" << rep.gamma << "\n";
      return model;
    };

    std::map<LayerId, std::pair<MultiClassSvm, json>> per_layer;
    auto layer_model = [&](LayerId l) -> std::pair<MultiClassSvm, json>& {
      auto it = per_layer.find(l);
      if (it == per_layer.end()) {
        json info;
        MultiClassSvm m = train_on({l}, info);
        it = per_layer.emplace(l, std::make_pair(std::move(m), std::move(info))).first;
      }
      return it->second;
    };

    auto make_member = [&](const std::vector<LayerId>& layers) {
      EnsembleMember m;
      m.network = net;
      m.layers = layers;
      m.combine = layers.size() == 1 ? Combine::AverageLayerClassifiers : cfg.combine;
      json classifiers = json::array();
      if (m.combine == Combine::ConcatFeatures) {
        json info;
        m.classifiers.push_back(train_on(layers, info));
        classifiers.push_back(std::move(info));
      } else {
        for (LayerId l : layers) {
          auto& [model, info] = layer_model(l);
          m.classifiers.push_back(model);
          classifiers.push_back(info);
        }
      }
      json layer_names = json::array();
      for (LayerId l : layers) layer_names.push_back(layer_name(l));
      json meta = {{"config_sha256", cfg.hash()},
                   {"seed", cfg.seed},
                   {"network", network_name(net)},
                   {"layers", layer_names},
                   {"combine", combine_name(m.combine)},
                   {"split_seed", sp.seed},
                   {"split_unit", split_unit_name(sp.unit)},
                   {"train_images", sp.train_ids.size()},
                   {"train_rows", rows.size()},
                   {"calib_fraction", cfg.calib_fraction},
                   {"tol", cfg.tol},
                   {"feature_content_hash", cache.content_hash()},
                   {"classifiers", classifiers}};
      m.metadata = meta.dump();
      return m;
    };

    for (const auto& layers : {std::vector<LayerId>{LayerId::FC8},
                               std::vector<LayerId>{LayerId::FC6, LayerId::FC7, LayerId::FC8}}) {
      const std::string key = member_key(net, layers);
      EnsembleMember m = make_member(layers);
      save_member(model_dir / (key + ".model"), m);
      log << "wrote " << (model_dir / (key + ".model")).string() << "\n";
      members.emplace(key, std::move(m));
    }
  }

  json fusion = {{"format", "lesion-fusion"},
                 {"version", 1},
                 {"config_sha256", cfg.hash()},
                 {"seed", cfg.seed},
                 {"rule", "mean"},
                 {"members", json::array({member_key(NetworkId::AlexNet, {LayerId::FC6, LayerId::FC7, LayerId::FC8}) + ".model",
                                          member_key(NetworkId::VGG16, {LayerId::FC6, LayerId::FC7, LayerId::FC8}) + ".model"})}};
  write_text(model_dir / "fusion.json", fusion.dump(2) + "\n");

  if (!holdout_samples.empty()) write_prediction_set(cfg, EvalSet::Holdout, members, caches, holdout_samples, log);
}

void cmd_predict(const ExperimentConfig& cfg, std::ostream& log) {
  require_models(cfg);
  const Dataset test = load_dataset(cfg, cfg.test_manifest, cfg.test_images, "test");
  if (test.empty()) {
    log << "warning: test manifest " << cfg.test_manifest << " lists no images; writing header-only predictions\n";
    for (const auto& spec : table_configurations()) {
      const fs::path path = predictions_path(cfg, EvalSet::Test, spec.key);
      ensure_dir(path.parent_path());
      write_predictions(path, {}, cfg.provenance());
    }
    return;
  }
  const MemberMap members = load_members(cfg);
  std::map<NetworkId, FeatureCache> caches;
  for (NetworkId net : kAllNetworks) {
    const auto backend = make_backend(cfg, net);
    caches.emplace(net, open_cache(cfg, "test", net, input_hash(test, *backend, cfg.mean_rgb, false)));
  }
  std::vector<std::string> ids;
  for (const auto& img : test.images) ids.push_back(img.id);
  write_prediction_set(cfg, EvalSet::Test, members, caches, samples_for(ids, SplitUnit::OriginalImage, false), log);
}

EvalReport cmd_evaluate(const ExperimentConfig& cfg, EvalSet set, std::ostream& log) {
  GroundTruth truth;
  if (set == EvalSet::Test) {
    const Dataset test = load_dataset(cfg, cfg.test_manifest, cfg.test_images, "test");
    require(test.labeled, "test manifest " + cfg.test_manifest + " carries no labels; cannot evaluate");
    truth = ground_truth(test);
  } else {
    const Dataset train = load_dataset(cfg, cfg.train_manifest, cfg.train_images, "train");
    const DatasetSplit sp = read_split(cfg.out_dir() / "split.txt");
    for (const auto& id : sp.holdout_ids) {
      const auto idx = train.find(parse_variant_id(id).first);
      if (!idx) throw MissingImage(id);
      truth.emplace(id, *train.images[*idx].label);
    }
  }

  std::vector<ConfigurationPredictions> preds;
  for (const auto& spec : table_configurations()) {
    const fs::path path = predictions_path(cfg, set, spec.key);
    require(fs::exists(path), "predictions " + path.string() + " are missing");
    preds.push_back({spec.name, read_predictions(path)});
  }
  EvalReport report = build_report(preds, truth);
  report.config_hash = cfg.hash();
  report.seed = cfg.seed;

  const fs::path dir = report_dir(cfg, set);
  write_text(dir / "report.json", report_json(report));
  const std::string table = format_report_table(report);
  write_text(dir / "table.txt", "# " + cfg.provenance() + "\n" + table);
  for (const auto& spec : table_configurations()) {
    const auto& [mel, sk] = report.curves.at(spec.name);
    write_text(dir / "roc" / (spec.key + "_melanoma.csv"), format_roc_csv(mel, cfg.provenance()));
    write_text(dir / "roc" / (spec.key + "_sk.csv"), format_roc_csv(sk, cfg.provenance()));
  }
  log << table;
  return report;
}

std::string cmd_report(const ExperimentConfig& cfg, EvalSet set) {
  const fs::path path = report_dir(cfg, set) / "report.json";
  require(fs::exists(path), "report " + path.string() + " is missing; run `evaluate` first");
  return format_report_table(parse_report_json(read_text(path)));
}

}  // namespace lesion

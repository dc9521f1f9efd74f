#include <algorithm>
#include "lesion/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "detail/text.hpp"
#include "lesion/error.hpp"
#include "lesion/hash.hpp"

namespace lesion {
namespace {

double parse_real(std::string_view key, std::string_view value) {
  const auto v = text::parse_double(value);
  if (!v || !std::isfinite(*v)) throw ValidationError(std::string(key) + ": expected a number, got '" + std::string(value) + "'");
  return *v;
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  const auto v = text::parse_int<std::uint64_t>(value);
  if (!v) throw ValidationError(std::string(key) + ": expected a nonnegative integer, got '" + std::string(value) + "'");
  return *v;
}

double parse_fraction(std::string_view key, std::string_view value) {
  const double v = parse_real(key, value);
  if (!(v > 0.0 && v < 1.0)) throw ValidationError(std::string(key) + " must lie in (0, 1)");
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ValidationError(std::string(key) + ": expected true or false");
}

ModelSource parse_model(std::string_view value) {
  ModelSource m;
  if (value == "mock") {
    m.mock = true;
  } else if (value.starts_with("mock:")) {
    m.mock = true;
    const auto seed = text::parse_int<std::uint64_t>(value.substr(5));
    if (!seed) throw ValidationError("model: bad mock seed in '" + std::string(value) + "'");
    m.mock_seed = *seed;
  } else if (value.empty()) {
    throw ValidationError("model path is empty");
  } else {
    m.path = std::string(value);
  }
  return m;
}

std::string model_text(const ModelSource& m) {
  if (!m.mock) return m.path;
  return m.mock_seed ? "mock:" + std::to_string(*m.mock_seed) : "mock";
}

}  // namespace

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  value = text::trim(value);
  if (key == "train.manifest") {
    train_manifest = value;
  } else if (key == "train.images") {
    train_images = value;
  } else if (key == "test.manifest") {
    test_manifest = value;
  } else if (key == "test.images") {
    test_images = value;
  } else if (key.starts_with("model.")) {
    models[parse_network(key.substr(6))] = parse_model(value);
  } else if (key == "preprocess.mean_rgb") {
    const auto parts = text::split_fields(value);
    if (parts.size() != 3) throw ValidationError("preprocess.mean_rgb: expected three comma-separated numbers");
    for (std::size_t c = 0; c < 3; ++c) mean_rgb[c] = parse_real(key, parts[c]);
  } else if (key == "split.fraction") {
    split_fraction = parse_fraction(key, value);
  } else if (key == "split.seed") {
    split_seed = parse_u64(key, value);
  } else if (key == "split.unit") {
    split_unit = parse_split_unit(value);
  } else if (key == "split.stratify") {
    split_stratify = parse_bool(key, value);
  } else if (key == "svm.kernel") {
    if (value == "rbf") {
      kernel = KernelSpec::Kind::Rbf;
    } else if (value == "linear") {
      kernel = KernelSpec::Kind::Linear;
    } else {
      throw ValidationError("svm.kernel: expected rbf or linear");
    }
  } else if (key == "svm.gamma") {
    if (value == "auto") {
      gamma.reset();
    } else {
      gamma = parse_real(key, value);
      if (!(*gamma > 0.0)) throw ValidationError("svm.gamma must be positive");
    }
  } else if (key == "svm.C") {
    std::vector<double> grid;
    for (auto part : text::split_fields(value)) {
      const double c = parse_real(key, part);
      if (!(c > 0.0)) throw ValidationError("svm.C values must be positive");
      grid.push_back(c);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    c_grid = std::move(grid);
  } else if (key == "svm.tol") {
    tol = parse_real(key, value);
    if (!(tol >= 1e-6 && tol <= 1e-2)) throw ValidationError("svm.tol must lie in [1e-6, 1e-2]");
  } else if (key == "svm.cache_mb") {
    cache_mb = parse_u64(key, value);
    if (cache_mb == 0) throw ValidationError("svm.cache_mb must be positive");
  } else if (key == "svm.max_iter") {
    max_iterations = parse_u64(key, value);
    if (max_iterations == 0) throw ValidationError("svm.max_iter must be positive");
  } else if (key == "calib.fraction") {
    calib_fraction = parse_fraction(key, value);
  } else if (key == "ensemble.combine") {
    combine = parse_combine(value);
  } else if (key == "workers") {
    const auto w = parse_u64(key, value);
    if (w == 0 || w > 1024) throw ValidationError("workers must lie in [1, 1024]");
    workers = static_cast<int>(w);
  } else if (key == "out") {
    if (value.empty()) throw ValidationError("out is empty");
    out = value;
  } else if (key == "seed") {
    seed = parse_u64(key, value);
  } else {
    throw ValidationError("unknown configuration key '" + std::string(key) + "'");
  }
}

std::filesystem::path ExperimentConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

std::uint64_t ExperimentConfig::mock_seed(NetworkId network) const {
  const auto it = models.find(network);
  if (it != models.end() && it->second.mock_seed) return *it->second.mock_seed;
  return seed;
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream o;
  o << "train.manifest = " << train_manifest << '\n'
    << "train.images = " << train_images << '\n'
    << "test.manifest = " << test_manifest << '\n'
    << "test.images = " << test_images << '\n';
  for (NetworkId n : kAllNetworks) {
    const auto it = models.find(n);
    o << "model." << network_name(n) << " = " << (it == models.end() ? "" : model_text(it->second)) << '\n';
  }
  o << "preprocess.mean_rgb = " << text::format_double(mean_rgb[0]) << ',' << text::format_double(mean_rgb[1])
    << ',' << text::format_double(mean_rgb[2]) << '\n'
    << "split.fraction = " << text::format_double(split_fraction) << '\n'
    << "split.seed = " << effective_split_seed() << '\n'
    << "split.unit = " << split_unit_name(split_unit) << '\n'
    << "split.stratify = " << (split_stratify ? "true" : "false") << '\n'
    << "svm.kernel = " << (kernel == KernelSpec::Kind::Rbf ? "rbf" : "linear") << '\n'
    << "svm.gamma = " << (gamma ? text::format_double(*gamma) : "auto") << '\n'
    << "svm.C = ";
  for (std::size_t i = 0; i < c_grid.size(); ++i) o << (i ? "," : "") << text::format_double(c_grid[i]);
  o << '\n'
    << "svm.tol = " << text::format_double(tol) << '\n'
    << "svm.cache_mb = " << cache_mb << '\n'
    << "svm.max_iter = " << max_iterations << '\n'
    << "calib.fraction = " << text::format_double(calib_fraction) << '\n'
    << "ensemble.combine = " << combine_name(combine) << '\n'
    << "seed = " << seed << '\n';
  return o.str();
}

std::string ExperimentConfig::hash() const { return sha256_hex(canonical_text()); }

std::string ExperimentConfig::provenance() const {
  return "config_sha256=" + hash() + " seed=" + std::to_string(seed);
}

ExperimentConfig parse_config(std::string_view body, const std::filesystem::path& base_dir,
                              std::string_view source_name) {
  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  const std::string source(source_name);
  text::for_each_line(body, [&](std::size_t line_no, std::string_view raw) {
    const auto hash_pos = raw.find('#');
    const auto line = text::trim(raw.substr(0, hash_pos));
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      cfg.set(text::trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path().empty() ? "." : path.parent_path(), path.string());
}

}  // namespace lesion

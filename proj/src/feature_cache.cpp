#include "lesion/feature_cache.hpp"

#include <fstream>
#include <sstream>

#include "detail/binio.hpp"
#include "lesion/error.hpp"

namespace lesion {

namespace fs = std::filesystem;

FeatureCache::FeatureCache(NetworkId network, std::vector<LayerId> layers, std::string content_hash)
    : network_(network), content_hash_(std::move(content_hash)) {
  for (LayerId l : layers) {
    layers_.push_back({l, cols_, layer_dim(l)});
    cols_ += layer_dim(l);
  }
}

bool FeatureCache::has_layer(LayerId layer) const {
  for (const auto& s : layers_) {
    if (s.layer == layer) return true;
  }
  return false;
}

const LayerSlice& FeatureCache::slice(LayerId layer) const {
  for (const auto& s : layers_) {
    if (s.layer == layer) return s;
  }
  throw ValidationError("feature cache has no " + std::string(layer_name(layer)) + " columns");
}

std::span<const float> FeatureCache::row(std::size_t index, LayerId layer) const {
  const LayerSlice& s = slice(layer);
  return {data_.data() + index * cols_ + s.offset, s.dim};
}

std::optional<std::size_t> FeatureCache::find(const std::string& source_id, const AugmentTag& variant) const {
  auto it = lookup_.find(variant_id(source_id, variant));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

void FeatureCache::append(const FeatureRowKey& key, const LayerOutputs& outputs) {
  const std::size_t base = data_.size();
  data_.resize(base + cols_);
  for (const auto& s : layers_) {
    auto it = outputs.find(s.layer);
    if (it == outputs.end()) throw MissingLayer(std::string(layer_name(s.layer)));
    if (it->second.size() != s.dim) throw ValidationError("layer dimension mismatch while caching features");
    std::copy(it->second.begin(), it->second.end(), data_.begin() + static_cast<std::ptrdiff_t>(base + s.offset));
  }
  if (!lookup_.emplace(variant_id(key.source_id, key.variant), keys_.size()).second) {
    data_.resize(base);
    throw DuplicateId(variant_id(key.source_id, key.variant));
  }
  keys_.push_back(key);
}

fs::path feature_file(const fs::path& base) { return fs::path(base.string() + ".feat"); }
fs::path index_file(const fs::path& base) { return fs::path(base.string() + ".idx"); }

namespace {

struct Header {
  NetworkId network = NetworkId::AlexNet;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<LayerSlice> layers;
  std::string hash;
};

Header read_header(std::istream& in, const std::string& where) {
  auto bad = [&](const std::string& what) { return ValidationError("feature cache '" + where + "': " + what); };
  std::string line;
  if (!std::getline(in, line) || line != "lesion-features 1") throw bad("bad magic line");
  Header h;
  while (std::getline(in, line) && !line.empty()) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "network") {
      std::string name;
      ls >> name;
      h.network = parse_network(name);
    } else if (key == "rows") {
      ls >> h.rows;
    } else if (key == "cols") {
      ls >> h.cols;
    } else if (key == "layer") {
      std::string name;
      LayerSlice s{};
      if (!(ls >> name >> s.offset >> s.dim)) throw bad("malformed layer line");
      s.layer = parse_layer(name);
      h.layers.push_back(s);
    } else if (key == "content_hash") {
      ls >> h.hash;
    } else {
      throw bad("unknown header key '" + key + "'");
    }
    if (ls.fail()) throw bad("malformed header line '" + line + "'");
  }
  return h;
}

}  // namespace

void write_feature_cache(const fs::path& base, const FeatureCache& cache) {
  const fs::path feat = feature_file(base), idx = index_file(base);
  const fs::path feat_tmp = feat.string() + ".tmp", idx_tmp = idx.string() + ".tmp";
  try {
    {
      std::ofstream out(feat_tmp, std::ios::binary);
      if (!out) throw RuntimeFailure("cannot write '" + feat_tmp.string() + "'");
      out << "lesion-features 1\n"
          << "network " << network_name(cache.network()) << '\n'
          << "rows " << cache.rows() << '\n'
          << "cols " << cache.cols() << '\n';
      for (const auto& s : cache.layers()) out << "layer " << layer_name(s.layer) << ' ' << s.offset << ' ' << s.dim << '\n';
      out << "content_hash " << cache.content_hash() << "\n\n";
      binio::put_array(out, cache.data().data(), cache.data().size());
      if (!out) throw RuntimeFailure("write failed for '" + feat_tmp.string() + "'");
    }
    {
      std::ofstream out(idx_tmp, std::ios::binary);
      if (!out) throw RuntimeFailure("cannot write '" + idx_tmp.string() + "'");
      out << "row,source_id,variant\n";
      for (std::size_t i = 0; i < cache.rows(); ++i) {
        out << i << ',' << cache.keys()[i].source_id << ',' << cache.keys()[i].variant.name() << '\n';
      }
    }
    fs::rename(idx_tmp, idx);
    fs::rename(feat_tmp, feat);
  } catch (...) {
    std::error_code ec;
    fs::remove(feat_tmp, ec);
    fs::remove(idx_tmp, ec);
    throw;
  }
}

FeatureCache read_feature_cache(const fs::path& base) {
  const fs::path feat = feature_file(base), idx = index_file(base);
  std::ifstream in(feat, std::ios::binary);
  if (!in) throw ValidationError("feature cache '" + feat.string() + "' is missing; run `extract` first");
  const Header h = read_header(in, feat.string());

  std::vector<LayerId> layers;
  for (const auto& s : h.layers) layers.push_back(s.layer);
  FeatureCache cache(h.network, layers, h.hash);
  for (std::size_t i = 0; i < h.layers.size(); ++i) {
    if (cache.layers()[i].offset != h.layers[i].offset || cache.layers()[i].dim != h.layers[i].dim) {
      throw ValidationError("feature cache '" + feat.string() + "': layer layout does not match declared dimensions");
    }
  }
  if (cache.cols() != h.cols) throw ValidationError("feature cache '" + feat.string() + "': column count mismatch");

  std::ifstream ix(idx, std::ios::binary);
  if (!ix) throw ValidationError("feature index '" + idx.string() + "' is missing");
  std::string line;
  if (!std::getline(ix, line) || line != "row,source_id,variant") {
    throw ValidationError("feature index '" + idx.string() + "': bad header");
  }
  std::vector<FeatureRowKey> keys;
  while (std::getline(ix, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(','), c2 = line.rfind(',');
    if (c1 == std::string::npos || c1 == c2) throw ValidationError("feature index '" + idx.string() + "': bad row");
    auto tag = AugmentTag::parse(line.substr(c2 + 1));
    if (!tag) throw ValidationError("feature index '" + idx.string() + "': bad variant");
    keys.push_back({line.substr(c1 + 1, c2 - c1 - 1), *tag});
  }
  if (keys.size() != h.rows) throw ValidationError("feature index row count does not match '" + feat.string() + "'");

  std::vector<float> row(h.cols);
  LayerOutputs outputs;
  for (const auto& key : keys) {
    binio::get_array(in, row.data(), row.size());
    for (const auto& s : cache.layers()) {
      outputs[s.layer].assign(row.begin() + static_cast<std::ptrdiff_t>(s.offset),
                              row.begin() + static_cast<std::ptrdiff_t>(s.offset + s.dim));
    }
    cache.append(key, outputs);
  }
  return cache;
}

std::optional<std::string> peek_feature_cache_hash(const fs::path& base) {
  std::error_code ec;
  if (!fs::exists(index_file(base), ec)) return std::nullopt;
  std::ifstream in(feature_file(base), std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return read_header(in, feature_file(base).string()).hash;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace lesion

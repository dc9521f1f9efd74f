#pragma once

// On-disk feature matrices, one per (dataset, network).
//
// <base>.feat  ASCII header terminated by an empty line, then rows*cols
//              little-endian float32 values, row-major:
//                lesion-features 1
//                network <alexnet|vgg16>
//                rows <R>
//                cols <C>
//                layer <name> <offset> <dim>     (one line per layer)
//                content_hash <sha256 hex>
//                <empty line>
// <base>.idx   CSV with header `row,source_id,variant`, one line per row;
//              variant is an AugmentTag name (r0, r90f, ...).

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lesion/embedding.hpp"

namespace lesion {

struct FeatureRowKey {
  std::string source_id;
  AugmentTag variant;

  friend bool operator==(const FeatureRowKey&, const FeatureRowKey&) = default;
};

struct LayerSlice {
  LayerId layer;
  std::size_t offset;
  std::size_t dim;

  friend bool operator==(const LayerSlice&, const LayerSlice&) = default;
};

class FeatureCache {
 public:
  FeatureCache() = default;
  FeatureCache(NetworkId network, std::vector<LayerId> layers, std::string content_hash);

  NetworkId network() const { return network_; }
  const std::vector<LayerSlice>& layers() const { return layers_; }
  const std::string& content_hash() const { return content_hash_; }
  std::size_t rows() const { return keys_.size(); }
  std::size_t cols() const { return cols_; }
  const std::vector<FeatureRowKey>& keys() const { return keys_; }
  const std::vector<float>& data() const { return data_; }

  bool has_layer(LayerId layer) const;
  const LayerSlice& slice(LayerId layer) const;
  std::span<const float> row(std::size_t index, LayerId layer) const;
  std::optional<std::size_t> find(const std::string& source_id, const AugmentTag& variant) const;

  // Appends the layer vectors of one image variant; every cached layer must be present.
  void append(const FeatureRowKey& key, const LayerOutputs& outputs);

  friend bool operator==(const FeatureCache&, const FeatureCache&) = default;

 private:
  NetworkId network_ = NetworkId::AlexNet;
  std::vector<LayerSlice> layers_;
  std::string content_hash_;
  std::size_t cols_ = 0;
  std::vector<FeatureRowKey> keys_;
  std::vector<float> data_;
  std::map<std::string, std::size_t> lookup_;  // variant_id -> row
};

std::filesystem::path feature_file(const std::filesystem::path& base);
std::filesystem::path index_file(const std::filesystem::path& base);

// Writes both files through temporaries renamed into place.
void write_feature_cache(const std::filesystem::path& base, const FeatureCache& cache);
FeatureCache read_feature_cache(const std::filesystem::path& base);
// Content hash from the header, or nullopt if either file is missing or unreadable.
std::optional<std::string> peek_feature_cache_hash(const std::filesystem::path& base);

}  // namespace lesion

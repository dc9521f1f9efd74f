#pragma once

// Deep-feature extraction from the fully-connected layers of pre-trained
// networks, behind a pluggable inference backend.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lesion/preprocess.hpp"

namespace lesion {

enum class NetworkId : std::uint8_t { AlexNet = 0, VGG16 = 1 };
enum class LayerId : std::uint8_t { FC6 = 0, FC7 = 1, FC8 = 2 };

inline constexpr std::array<NetworkId, 2> kAllNetworks{NetworkId::AlexNet, NetworkId::VGG16};
inline constexpr std::array<LayerId, 3> kAllLayers{LayerId::FC6, LayerId::FC7, LayerId::FC8};

// 227 for AlexNet, 224 for VGG-16.
int input_side(NetworkId network);
// 4096 for FC6/FC7, 1000 for FC8.
std::size_t layer_dim(LayerId layer);

std::string_view network_name(NetworkId network);  // "alexnet", "vgg16"
std::string_view layer_name(LayerId layer);        // "fc6", "fc7", "fc8"
NetworkId parse_network(std::string_view name);
LayerId parse_layer(std::string_view name);

class FeatureVector {
 public:
  // Throws ValidationError unless values.size() == layer_dim(layer) and all
  // entries are finite.
  FeatureVector(std::vector<float> values, NetworkId network, LayerId layer, std::string source_id,
                AugmentTag variant);

  std::span<const float> values() const { return values_; }
  NetworkId network() const { return network_; }
  LayerId layer() const { return layer_; }
  const std::string& source_id() const { return source_id_; }
  const AugmentTag& variant() const { return variant_; }

 private:
  std::vector<float> values_;
  NetworkId network_;
  LayerId layer_;
  std::string source_id_;
  AugmentTag variant_;
};

using LayerOutputs = std::map<LayerId, std::vector<float>>;

// Inference backend for one network. embed() must be deterministic and safe
// to call concurrently from several threads.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;

  virtual NetworkId network() const = 0;
  virtual int input_side() const = 0;
  virtual std::map<LayerId, std::size_t> layer_dims() const = 0;
  // Returns every available layer for a side x side mean-centred RGB tensor.
  virtual LayerOutputs embed(const Tensor3& tensor) const = 0;
  // Stable identity of the weights, used for cache invalidation.
  virtual std::string fingerprint() const = 0;
};

// Deterministic stand-in for a real network. The input is average-pooled
// onto an 8x8 grid per channel (a fixed linear map of the flattened tensor),
// scaled by 1/64, and each layer is tanh(W_l * pooled + b_l) with Gaussian
// W_l, b_l drawn from a generator seeded by (network, layer, seed).
std::unique_ptr<EmbeddingBackend> mock_backend(NetworkId network, std::uint64_t seed);

// Loads an ONNX export with graph input `input` and outputs fc6/fc7/fc8.
// See onnx_backend.cpp for the accepted operator set.
std::unique_ptr<EmbeddingBackend> load_onnx_backend(const std::string& model_path, NetworkId network);

// One FeatureVector per (image, layer), image-major, layers in LayerId order.
// Throws SideMismatch naming the first offending image.
std::vector<FeatureVector> extract_features(const EmbeddingBackend& backend,
                                            std::span<const PreprocessedImage> images,
                                            const std::set<LayerId>& layers, int workers = 1);

// Mean-centre, resize to the backend side and produce either all eight
// augmented variants or only the identity variant.
std::vector<PreprocessedImage> prepare_image(const RgbImage& image, std::string_view source_id, int side,
                                             const MeanRgb& mean_rgb, bool augment_variants);

// Cross-runtime parity record: a fixed input tensor with reference outputs.
//
// Layout: ASCII header lines terminated by an empty line, then raw
// little-endian float32 blocks in header order.
//   lesion-parity 1
//   input 1 3 <side> <side>      (NCHW)
//   fc6 4096
//   fc7 4096
//   fc8 1000
//   <empty line>
struct ParityRecord {
  int side = 0;
  std::vector<float> input_nchw;
  LayerOutputs outputs;
};

ParityRecord read_parity_file(const std::string& path);
void write_parity_file(const std::string& path, const ParityRecord& record);
// Maximum absolute difference between backend outputs and the record.
double parity_max_abs_diff(const EmbeddingBackend& backend, const ParityRecord& record);

// HWC <-> NCHW float conversion for backend inputs.
std::vector<float> to_nchw(const Tensor3& tensor);
Tensor3 from_nchw(std::span<const float> data, int side);

}  // namespace lesion

#include "lesion/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "detail/binio.hpp"
#include "detail/parallel.hpp"
#include "lesion/error.hpp"

namespace lesion {

int input_side(NetworkId network) { return network == NetworkId::AlexNet ? 227 : 224; }

std::size_t layer_dim(LayerId layer) { return layer == LayerId::FC8 ? 1000 : 4096; }

std::string_view network_name(NetworkId network) {
  return network == NetworkId::AlexNet ? "alexnet" : "vgg16";
}

std::string_view layer_name(LayerId layer) {
  switch (layer) {
    case LayerId::FC6: return "fc6";
    case LayerId::FC7: return "fc7";
    case LayerId::FC8: return "fc8";
  }
  return "?";
}

NetworkId parse_network(std::string_view name) {
  if (name == "alexnet") return NetworkId::AlexNet;
  if (name == "vgg16") return NetworkId::VGG16;
  throw ValidationError("unknown network '" + std::string(name) + "' (expected alexnet or vgg16)");
}

LayerId parse_layer(std::string_view name) {
  for (LayerId l : kAllLayers) {
    if (layer_name(l) == name) return l;
  }
  throw ValidationError("unknown layer '" + std::string(name) + "' (expected fc6, fc7 or fc8)");
}

FeatureVector::FeatureVector(std::vector<float> values, NetworkId network, LayerId layer, std::string source_id,
                             AugmentTag variant)
    : values_(std::move(values)),
      network_(network),
      layer_(layer),
      source_id_(std::move(source_id)),
      variant_(variant) {
  if (values_.size() != layer_dim(layer_)) {
    throw ValidationError(std::string(layer_name(layer_)) + " vector for '" + source_id_ + "' has length " +
                          std::to_string(values_.size()) + ", expected " + std::to_string(layer_dim(layer_)));
  }
  if (!std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); })) {
    throw ValidationError(std::string(layer_name(layer_)) + " vector for '" + source_id_ + "' is not finite");
  }
}

std::vector<FeatureVector> extract_features(const EmbeddingBackend& backend,
                                            std::span<const PreprocessedImage> images,
                                            const std::set<LayerId>& layers, int workers) {
  const int side = backend.input_side();
  for (const auto& img : images) {
    if (img.tensor.height != side || img.tensor.width != side) {
      throw SideMismatch(img.source_id, side, img.tensor.height != side ? img.tensor.height : img.tensor.width);
    }
  }
  std::vector<LayerOutputs> outputs(images.size());
  detail::parallel_for(images.size(), workers, [&](std::size_t i) { outputs[i] = backend.embed(images[i].tensor); });

  std::vector<FeatureVector> out;
  out.reserve(images.size() * layers.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (LayerId layer : layers) {
      auto it = outputs[i].find(layer);
      if (it == outputs[i].end()) throw MissingLayer(std::string(layer_name(layer)));
      out.emplace_back(std::move(it->second), backend.network(), layer, images[i].source_id, images[i].variant);
    }
  }
  return out;
}

std::vector<PreprocessedImage> prepare_image(const RgbImage& image, std::string_view source_id, int side,
                                             const MeanRgb& mean_rgb, bool augment_variants) {
  Tensor3 resized = resize_bicubic(center_rgb(image, mean_rgb), side);
  if (augment_variants) return augment(resized, source_id);
  std::vector<PreprocessedImage> out;
  out.push_back({std::move(resized), std::string(source_id), AugmentTag{}});
  return out;
}

std::vector<float> to_nchw(const Tensor3& tensor) {
  const std::size_t plane = static_cast<std::size_t>(tensor.height) * tensor.width;
  std::vector<float> out(plane * kChannels);
  for (int y = 0; y < tensor.height; ++y) {
    for (int x = 0; x < tensor.width; ++x) {
      for (int c = 0; c < kChannels; ++c) {
        out[c * plane + static_cast<std::size_t>(y) * tensor.width + x] = static_cast<float>(tensor.at(y, x, c));
      }
    }
  }
  return out;
}

Tensor3 from_nchw(std::span<const float> data, int side) {
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  if (data.size() != plane * kChannels) throw ValidationError("NCHW buffer does not match side");
  Tensor3 t(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      for (int c = 0; c < kChannels; ++c) t.at(y, x, c) = data[c * plane + static_cast<std::size_t>(y) * side + x];
    }
  }
  return t;
}

ParityRecord read_parity_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read parity file '" + path + "'");
  auto bad = [&](const std::string& what) { return ValidationError("parity file '" + path + "': " + what); };
  std::string line;
  if (!std::getline(in, line) || line != "lesion-parity 1") throw bad("bad magic line");

  ParityRecord rec;
  std::vector<std::pair<std::string, std::size_t>> blocks;
  while (std::getline(in, line) && !line.empty()) {
    std::istringstream ls(line);
    std::string name;
    ls >> name;
    if (name == "input") {
      int n = 0, c = 0, h = 0, w = 0;
      if (!(ls >> n >> c >> h >> w) || n != 1 || c != 3 || h != w || h < 1) throw bad("bad input shape");
      rec.side = h;
      blocks.emplace_back(name, static_cast<std::size_t>(3) * h * w);
    } else {
      std::size_t dim = 0;
      if (!(ls >> dim)) throw bad("bad block line '" + line + "'");
      blocks.emplace_back(name, dim);
    }
  }
  if (rec.side == 0) throw bad("missing input block");
  for (const auto& [name, count] : blocks) {
    std::vector<float> values(count);
    binio::get_array(in, values.data(), count);
    if (name == "input") {
      rec.input_nchw = std::move(values);
    } else {
      rec.outputs[parse_layer(name)] = std::move(values);
    }
  }
  return rec;
}

void write_parity_file(const std::string& path, const ParityRecord& record) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write parity file '" + path + "'");
  out << "lesion-parity 1\n";
  out << "input 1 3 " << record.side << ' ' << record.side << '\n';
  for (const auto& [layer, values] : record.outputs) out << layer_name(layer) << ' ' << values.size() << '\n';
  out << '\n';
  binio::put_array(out, record.input_nchw.data(), record.input_nchw.size());
  for (const auto& [layer, values] : record.outputs) binio::put_array(out, values.data(), values.size());
}

double parity_max_abs_diff(const EmbeddingBackend& backend, const ParityRecord& record) {
  if (record.side != backend.input_side()) {
    throw SideMismatch("parity tensor", backend.input_side(), record.side);
  }
  const LayerOutputs got = backend.embed(from_nchw(record.input_nchw, record.side));
  double worst = 0.0;
  for (const auto& [layer, expected] : record.outputs) {
    auto it = got.find(layer);
    if (it == got.end()) throw MissingLayer(std::string(layer_name(layer)));
    if (it->second.size() != expected.size()) throw ValidationError("parity dimension mismatch");
    for (std::size_t i = 0; i < expected.size(); ++i) {
      worst = std::max(worst, static_cast<double>(std::abs(it->second[i] - expected[i])));
    }
  }
  return worst;
}

}  // namespace lesion

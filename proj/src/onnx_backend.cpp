#include "lesion/error.hpp"
#include "lesion/embedding.hpp"
#include "lesion/hash.hpp"
#include "lesion/onnx_model.hpp"

namespace lesion {
namespace {

constexpr const char* kInputName = "input";

class OnnxBackend final : public EmbeddingBackend {
 public:
  OnnxBackend(onnx::Model model, NetworkId network, std::string fingerprint)
      : model_(std::move(model)), network_(network), fingerprint_(std::move(fingerprint)) {}

  NetworkId network() const override { return network_; }
  int input_side() const override { return lesion::input_side(network_); }

  std::map<LayerId, std::size_t> layer_dims() const override {
    std::map<LayerId, std::size_t> dims;
    for (LayerId l : kAllLayers) dims[l] = layer_dim(l);
    return dims;
  }

  LayerOutputs embed(const Tensor3& tensor) const override {
    const int side = input_side();
    if (tensor.height != side || tensor.width != side) throw SideMismatch("<tensor>", side, tensor.height);
    std::map<std::string, onnx::Tensor> feeds;
    feeds.emplace(kInputName, onnx::Tensor::from_floats({1, 3, side, side}, to_nchw(tensor)));
    std::vector<std::string> wanted;
    for (LayerId l : kAllLayers) wanted.emplace_back(layer_name(l));
    auto results = model_.run(feeds, wanted);

    LayerOutputs out;
    for (LayerId l : kAllLayers) {
      auto& t = results.at(std::string(layer_name(l)));
      if (t.floats.size() != layer_dim(l)) {
        throw RuntimeFailure("output '" + std::string(layer_name(l)) + "' produced " +
                             std::to_string(t.floats.size()) + " values, expected " + std::to_string(layer_dim(l)));
      }
      out.emplace(l, std::move(t.floats));
    }
    return out;
  }

  std::string fingerprint() const override { return fingerprint_; }

 private:
  onnx::Model model_;
  NetworkId network_;
  std::string fingerprint_;
};

}  // namespace

std::unique_ptr<EmbeddingBackend> load_onnx_backend(const std::string& model_path, NetworkId network) {
  onnx::Model model = onnx::Model::load(model_path);

  const onnx::ValueInfo* input = nullptr;
  for (const auto& in : model.inputs()) {
    if (in.name == kInputName) input = &in;
  }
  if (input == nullptr) throw ValidationError("model '" + model_path + "' has no graph input named 'input'");
  const int side = input_side(network);
  if (!input->shape.empty()) {
    const std::vector<std::int64_t> expected{1, 3, side, side};
    bool ok = input->shape.size() == 4;
    for (std::size_t i = 0; ok && i < 4; ++i) ok = input->shape[i] == -1 || input->shape[i] == expected[i];
    if (!ok) {
      throw ValidationError("model '" + model_path + "' input shape does not accept 1x3x" + std::to_string(side) +
                            "x" + std::to_string(side) + " for " + std::string(network_name(network)));
    }
  }
  for (LayerId layer : kAllLayers) {
    const std::string name(layer_name(layer));
    const onnx::ValueInfo* out = model.find_output(name);
    if (out == nullptr) throw MissingLayer(name);
    if (out->shape.empty() || out->shape.back() < 0) {
      throw ValidationError("model '" + model_path + "' does not declare the dimension of output '" + name + "'");
    }
    const auto declared = static_cast<std::size_t>(out->shape.back());
    if (declared != layer_dim(layer)) {
      throw ValidationError("output '" + name + "' declares dimension " + std::to_string(declared) + ", expected " +
                            std::to_string(layer_dim(layer)));
    }
  }
  const std::string fp = "onnx:" + std::string(network_name(network)) + ":" + Sha256().update_file(model_path).hex_digest();
  return std::make_unique<OnnxBackend>(std::move(model), network, fp);
}

}  // namespace lesion

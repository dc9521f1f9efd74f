#include <cmath>

#include "lesion/embedding.hpp"
#include "lesion/error.hpp"
#include "lesion/rng.hpp"
#include "lesion/simd.hpp"

namespace lesion {
namespace {

constexpr int kGrid = 8;
constexpr std::size_t kPooled = static_cast<std::size_t>(kGrid) * kGrid * kChannels;
constexpr double kInputScale = 1.0 / 64.0;

class MockBackend final : public EmbeddingBackend {
 public:
  MockBackend(NetworkId network, std::uint64_t seed) : network_(network), seed_(seed) {
    for (LayerId layer : kAllLayers) {
      const std::string name = "mock/" + std::string(network_name(network)) + "/" + std::string(layer_name(layer));
      Xoshiro256 rng(fnv1a64(name) ^ (seed * 0x9e3779b97f4a7c15ULL));
      Projection& p = projections_[static_cast<std::size_t>(layer)];
      const std::size_t rows = layer_dim(layer);
      p.weights.resize(rows * kPooled);
      p.bias.resize(rows);
      const double w_scale = 1.0 / std::sqrt(static_cast<double>(kPooled));
      for (double& w : p.weights) w = rng.normal() * w_scale;
      for (double& b : p.bias) b = 0.1 * rng.normal();
    }
  }

  NetworkId network() const override { return network_; }
  int input_side() const override { return lesion::input_side(network_); }

  std::map<LayerId, std::size_t> layer_dims() const override {
    std::map<LayerId, std::size_t> dims;
    for (LayerId l : kAllLayers) dims[l] = layer_dim(l);
    return dims;
  }

  LayerOutputs embed(const Tensor3& tensor) const override {
    const auto pooled = pool(tensor);
    LayerOutputs out;
    for (LayerId layer : kAllLayers) {
      const Projection& p = projections_[static_cast<std::size_t>(layer)];
      const std::size_t rows = layer_dim(layer);
      std::vector<float> v(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const double z = simd::dot(std::span<const double>(p.weights.data() + r * kPooled, kPooled), pooled) + p.bias[r];
        v[r] = static_cast<float>(std::tanh(z));
      }
      out.emplace(layer, std::move(v));
    }
    return out;
  }

  std::string fingerprint() const override {
    return "mock:" + std::string(network_name(network_)) + ":" + std::to_string(seed_);
  }

 private:
  struct Projection {
    std::vector<double> weights;  // rows x kPooled
    std::vector<double> bias;
  };

  std::vector<double> pool(const Tensor3& t) const {
    if (t.height < kGrid || t.width < kGrid) throw ValidationError("mock backend input smaller than pooling grid");
    std::vector<double> out(kPooled, 0.0);
    for (int gy = 0; gy < kGrid; ++gy) {
      const int y0 = gy * t.height / kGrid, y1 = (gy + 1) * t.height / kGrid;
      for (int gx = 0; gx < kGrid; ++gx) {
        const int x0 = gx * t.width / kGrid, x1 = (gx + 1) * t.width / kGrid;
        const double inv = kInputScale / (static_cast<double>(y1 - y0) * (x1 - x0));
        for (int c = 0; c < kChannels; ++c) {
          double acc = 0.0;
          for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) acc += t.at(y, x, c);
          }
          out[(static_cast<std::size_t>(gy) * kGrid + gx) * kChannels + c] = acc * inv;
        }
      }
    }
    return out;
  }

  NetworkId network_;
  std::uint64_t seed_;
  std::array<Projection, 3> projections_;
};

}  // namespace

std::unique_ptr<EmbeddingBackend> mock_backend(NetworkId network, std::uint64_t seed) {
  return std::make_unique<MockBackend>(network, seed);
}

}  // namespace lesion

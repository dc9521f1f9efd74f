#include "lesion/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "detail/binio.hpp"
#include "lesion/error.hpp"

namespace lesion {
namespace {

constexpr char kMagic[8] = {'L', 'S', 'N', 'M', 'E', 'M', 'B', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr double kSimplexTol = 1e-9;

}  // namespace

ProbTriple::ProbTriple(const std::array<double, 3>& p) : p_(p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("probability outside [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTol) throw ValidationError("probabilities do not sum to 1");
}

ProbTriple ProbTriple::normalized(const std::array<double, 3>& q) {
  double sum = 0.0;
  for (double v : q) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError("class scores must be finite and nonnegative");
    sum += v;
  }
  if (!(sum > 0.0)) throw ValidationError("class scores sum to zero");
  return ProbTriple({q[0] / sum, q[1] / sum, q[2] / sum});
}

ProbTriple fuse(std::span<const ProbTriple> members) {
  if (members.empty()) throw ValidationError("fusion needs at least one member");
  std::vector<std::array<double, 3>> sorted;
  sorted.reserve(members.size());
  for (const auto& m : members) sorted.push_back(m.values());
  std::sort(sorted.begin(), sorted.end());
  std::array<double, 3> sum{};
  for (const auto& t : sorted) {
    for (std::size_t c = 0; c < 3; ++c) sum[c] += t[c];
  }
  const double n = static_cast<double>(sorted.size());
  std::array<double, 3> mean{};
  for (std::size_t c = 0; c < 3; ++c) mean[c] = std::min(1.0, sum[c] / n);
  return ProbTriple(mean);
}

BinaryScores binary_scores(const ProbTriple& p) {
  return {p[LesionClass::Melanoma], p[LesionClass::SeborrheicKeratosis]};
}

std::string_view combine_name(Combine c) {
  return c == Combine::ConcatFeatures ? "concat-features" : "average-layer-classifiers";
}

Combine parse_combine(std::string_view name) {
  if (name == "average-layer-classifiers") return Combine::AverageLayerClassifiers;
  if (name == "concat-features") return Combine::ConcatFeatures;
  throw ValidationError("unknown combine mode '" + std::string(name) +
                        "' (expected average-layer-classifiers or concat-features)");
}

void EnsembleMember::validate() const {
  if (layers.empty()) throw ValidationError("ensemble member has no layers");
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (!(layers[i - 1] < layers[i])) throw ValidationError("member layers must be ascending and distinct");
  }
  const std::size_t expected = combine == Combine::ConcatFeatures ? 1 : layers.size();
  if (classifiers.size() != expected) {
    throw ValidationError("member has " + std::to_string(classifiers.size()) + " classifiers, expected " +
                          std::to_string(expected));
  }
  if (combine == Combine::ConcatFeatures) {
    std::size_t d = 0;
    for (LayerId l : layers) d += layer_dim(l);
    if (classifiers[0].dim() != d) throw ValidationError("concatenated classifier dimension mismatch");
  } else {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (classifiers[i].dim() != layer_dim(layers[i])) {
        throw ValidationError("classifier for " + std::string(layer_name(layers[i])) + " has dimension " +
                              std::to_string(classifiers[i].dim()));
      }
    }
  }
}

ProbTriple member_probabilities(const EnsembleMember& member, const SampleFeatures& features) {
  auto layer_vector = [&](LayerId l) {
    const auto it = features.find(l);
    if (it == features.end()) throw MissingLayer(std::string(layer_name(l)));
    return it->second;
  };

  if (member.combine == Combine::ConcatFeatures) {
    std::vector<double> x;
    for (LayerId l : member.layers) {
      const auto v = layer_vector(l);
      x.insert(x.end(), v.begin(), v.end());
    }
    return ProbTriple::normalized(member.classifiers.at(0).class_probabilities(x));
  }

  std::vector<ProbTriple> per_layer;
  for (std::size_t i = 0; i < member.layers.size(); ++i) {
    per_layer.push_back(
        ProbTriple::normalized(member.classifiers.at(i).class_probabilities(layer_vector(member.layers[i]))));
  }
  if (per_layer.size() == 1) return per_layer[0];
  std::array<double, 3> sum{};
  for (const auto& t : per_layer) {
    for (std::size_t c = 0; c < 3; ++c) sum[c] += t.values()[c];
  }
  return ProbTriple::normalized(sum);
}

void save_member(const std::filesystem::path& path, const EnsembleMember& member) {
  member.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof kMagic);
  binio::put<std::uint32_t>(out, kVersion);
  binio::put<std::uint8_t>(out, static_cast<std::uint8_t>(member.network));
  binio::put<std::uint8_t>(out, static_cast<std::uint8_t>(member.combine));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(member.layers.size()));
  for (LayerId l : member.layers) binio::put<std::uint8_t>(out, static_cast<std::uint8_t>(l));
  binio::put_string(out, member.metadata);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(member.classifiers.size()));
  for (const auto& c : member.classifiers) write_multiclass(out, c);
  if (!out.flush()) throw RuntimeFailure("failed writing " + path.string());
}

EnsembleMember load_member(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model artifact " + path.string());
  try {
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + 8, kMagic)) throw ValidationError("not a member artifact");
    const auto version = binio::get<std::uint32_t>(in);
    if (version != kVersion) throw ValidationError("unsupported artifact version " + std::to_string(version));
    EnsembleMember m;
    const auto net = binio::get<std::uint8_t>(in);
    const auto comb = binio::get<std::uint8_t>(in);
    if (net > 1 || comb > 1) throw ValidationError("bad network or combine code");
    m.network = static_cast<NetworkId>(net);
    m.combine = static_cast<Combine>(comb);
    const auto nl = binio::get<std::uint32_t>(in);
    if (nl == 0 || nl > 3) throw ValidationError("bad layer count");
    for (std::uint32_t i = 0; i < nl; ++i) {
      const auto l = binio::get<std::uint8_t>(in);
      if (l > 2) throw ValidationError("bad layer code");
      m.layers.push_back(static_cast<LayerId>(l));
    }
    m.metadata = binio::get_string(in);
    const auto nc = binio::get<std::uint32_t>(in);
    if (nc == 0 || nc > 3) throw ValidationError("bad classifier count");
    for (std::uint32_t i = 0; i < nc; ++i) m.classifiers.push_back(read_multiclass(in));
    m.validate();
    return m;
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

const std::vector<ConfigurationSpec>& table_configurations() {
  using enum LayerId;
  static const std::vector<ConfigurationSpec> configs = {
      {"AlexNet FC8", "alexnet_fc8", {{NetworkId::AlexNet, {FC8}}}},
      {"AlexNet All FC", "alexnet_allfc", {{NetworkId::AlexNet, {FC6, FC7, FC8}}}},
      {"VGG16 FC8", "vgg16_fc8", {{NetworkId::VGG16, {FC8}}}},
      {"VGG16 All FC", "vgg16_allfc", {{NetworkId::VGG16, {FC6, FC7, FC8}}}},
      {"Fusion", "fusion", {{NetworkId::AlexNet, {FC6, FC7, FC8}}, {NetworkId::VGG16, {FC6, FC7, FC8}}}},
  };
  return configs;
}

}  // namespace lesion

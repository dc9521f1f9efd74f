#pragma once

// Per-(network, layer set) ensemble members, probability fusion and the
// derived binary scores.

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lesion/embedding.hpp"
#include "lesion/multiclass.hpp"
#include "lesion/scores.hpp"

namespace lesion {

// Class probabilities indexed by class_index(); entries in [0, 1] summing to 1
// within 1e-9.
class ProbTriple {
 public:
  ProbTriple() : p_{1.0 / 3, 1.0 / 3, 1.0 / 3} {}
  // Throws ValidationError if `p` is not on the simplex.
  explicit ProbTriple(const std::array<double, 3>& p);

  // p_c = q_c / sum(q). q must be finite, nonnegative, with a positive sum.
  static ProbTriple normalized(const std::array<double, 3>& q);

  double operator[](LesionClass c) const { return p_[class_index(c)]; }
  const std::array<double, 3>& values() const { return p_; }

  friend bool operator==(const ProbTriple&, const ProbTriple&) = default;

 private:
  std::array<double, 3> p_;
};

// Arithmetic mean per class. Triples are summed in sorted order, so the
// result does not depend on member order. Throws on an empty list.
ProbTriple fuse(std::span<const ProbTriple> members);

BinaryScores binary_scores(const ProbTriple& p);

enum class Combine : std::uint8_t {
  AverageLayerClassifiers = 0,  // one classifier per layer, triples averaged
  ConcatFeatures = 1,           // one classifier on the concatenated layers
};

std::string_view combine_name(Combine c);  // "average-layer-classifiers", "concat-features"
Combine parse_combine(std::string_view name);

struct EnsembleMember {
  NetworkId network = NetworkId::AlexNet;
  std::vector<LayerId> layers;  // ascending, nonempty, no repeats
  Combine combine = Combine::AverageLayerClassifiers;
  // AverageLayerClassifiers: one per entry of `layers`; ConcatFeatures: one.
  std::vector<MultiClassSvm> classifiers;
  // Free-form provenance (JSON text) stored alongside the classifiers.
  std::string metadata;

  // Throws ValidationError when the fields are inconsistent.
  void validate() const;
};

// Layer vectors for one sample, keyed by layer.
using SampleFeatures = std::map<LayerId, std::span<const double>>;

// Throws MissingLayer when a required layer vector is absent.
ProbTriple member_probabilities(const EnsembleMember& member, const SampleFeatures& features);

// Member artifact: magic "LSNMEMB\0", u32 version, u8 network, u8 combine,
// u32 layer count, u8 layer ids, metadata string, u32 classifier count,
// classifier blocks. See docs/formats.md.
void save_member(const std::filesystem::path& path, const EnsembleMember& member);
EnsembleMember load_member(const std::filesystem::path& path);

// The five reported configurations.
struct ConfigurationSpec {
  std::string name;  // display name, e.g. "VGG16 FC8"
  std::string key;   // file stem, e.g. "vgg16_fc8"
  // (network, layers) per member; Fusion has two.
  std::vector<std::pair<NetworkId, std::vector<LayerId>>> members;
};

const std::vector<ConfigurationSpec>& table_configurations();

}  // namespace lesion

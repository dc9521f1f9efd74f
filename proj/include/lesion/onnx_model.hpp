#pragma once

// Minimal ONNX graph interpreter covering the operators that appear in
// exported AlexNet/VGG-style classifiers:
//
//   Conv, Relu, MaxPool, AveragePool, GlobalAveragePool, LRN, Flatten,
//   Reshape, Gemm, MatMul, Add, Sub, Mul, Div, Softmax, Concat, Constant,
//   Dropout, Identity
//
// Float tensors are float32; int64 tensors are only used as shapes.
// Inference is single-image, 2-D spatial, default domain only.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lesion::onnx {

struct Tensor {
  enum class Type { Float, Int64 };

  Type type = Type::Float;
  std::vector<std::int64_t> shape;
  std::vector<float> floats;
  std::vector<std::int64_t> ints;

  static Tensor from_floats(std::vector<std::int64_t> shape, std::vector<float> values);
  static Tensor from_ints(std::vector<std::int64_t> shape, std::vector<std::int64_t> values);
  std::size_t numel() const;
};

struct Attribute {
  float f = 0.0f;
  std::int64_t i = 0;
  std::string s;
  std::vector<float> floats;
  std::vector<std::int64_t> ints;
  std::optional<Tensor> t;
};

struct Node {
  std::string op_type;
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, Attribute> attributes;
};

struct ValueInfo {
  std::string name;
  // Declared dims; -1 for symbolic or unknown. Empty when no shape is declared.
  std::vector<std::int64_t> shape;
};

class Model {
 public:
  // Throws ValidationError on unreadable or malformed files, unsupported
  // tensor encodings and operators outside the supported set.
  static Model load(const std::filesystem::path& path);
  static Model parse(std::string_view bytes);

  const std::vector<ValueInfo>& inputs() const { return inputs_; }
  const std::vector<ValueInfo>& outputs() const { return outputs_; }
  const ValueInfo* find_output(std::string_view name) const;
  std::int64_t opset() const { return opset_; }
  const std::vector<Node>& nodes() const { return nodes_; }

  // Evaluates the graph and returns the requested values. Throws
  // RuntimeFailure for shape errors during evaluation.
  std::map<std::string, Tensor> run(const std::map<std::string, Tensor>& feeds,
                                    const std::vector<std::string>& wanted) const;

 private:
  std::int64_t opset_ = 0;
  std::vector<Node> nodes_;
  std::map<std::string, Tensor> initializers_;
  std::vector<ValueInfo> inputs_;
  std::vector<ValueInfo> outputs_;
};

}  // namespace lesion::onnx

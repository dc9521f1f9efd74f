#include <cmath>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "lesion/embedding.hpp"
#include "lesion/error.hpp"
#include "lesion/onnx_model.hpp"
#include "onnx/onnx.pb.h"
#include "oracles.hpp"

using namespace lesion;
namespace lx = lesion::onnx;

namespace {

const std::filesystem::path kData = LESION_TEST_DATA;

lx::Tensor tensor_from_json(const nlohmann::json& j) {
  return lx::Tensor::from_floats(j.at("shape").get<std::vector<std::int64_t>>(),
                                   j.at("data").get<std::vector<float>>());
}

// Graph builder for structural cases the fixtures do not cover.
struct GraphBuilder {
  ::onnx::ModelProto proto;

  explicit GraphBuilder(std::int64_t opset = 13) {
    proto.set_ir_version(8);
    auto* op = proto.add_opset_import();
    op->set_version(opset);
  }

  ::onnx::GraphProto* graph() { return proto.mutable_graph(); }

  void value(google::protobuf::RepeatedPtrField<::onnx::ValueInfoProto>* list, const std::string& name,
             const std::vector<std::int64_t>& dims) {
    auto* vi = list->Add();
    vi->set_name(name);
    auto* tt = vi->mutable_type()->mutable_tensor_type();
    tt->set_elem_type(::onnx::TensorProto::FLOAT);
    for (auto d : dims) tt->mutable_shape()->add_dim()->set_dim_value(d);
  }
  void input(const std::string& name, const std::vector<std::int64_t>& dims) {
    value(graph()->mutable_input(), name, dims);
  }
  void output(const std::string& name, const std::vector<std::int64_t>& dims) {
    value(graph()->mutable_output(), name, dims);
  }
  ::onnx::NodeProto* node(const std::string& op, std::vector<std::string> ins, std::vector<std::string> outs) {
    auto* n = graph()->add_node();
    n->set_op_type(op);
    for (auto& s : ins) n->add_input(s);
    for (auto& s : outs) n->add_output(s);
    return n;
  }
  static void attr_s(::onnx::NodeProto* n, const std::string& name, const std::string& v) {
    auto* a = n->add_attribute();
    a->set_name(name);
    a->set_type(::onnx::AttributeProto::STRING);
    a->set_s(v);
  }
  static void attr_ints(::onnx::NodeProto* n, const std::string& name, const std::vector<std::int64_t>& v) {
    auto* a = n->add_attribute();
    a->set_name(name);
    a->set_type(::onnx::AttributeProto::INTS);
    for (auto x : v) a->add_ints(x);
  }
  void initializer(const std::string& name, const std::vector<std::int64_t>& dims, const std::vector<float>& v) {
    auto* t = graph()->add_initializer();
    t->set_name(name);
    t->set_data_type(::onnx::TensorProto::FLOAT);
    for (auto d : dims) t->add_dims(d);
    for (float x : v) t->add_float_data(x);
  }

  std::string bytes() const { return proto.SerializeAsString(); }
  void save(const std::filesystem::path& p) const {
    std::ofstream out(p, std::ios::binary);
    out << bytes();
  }
};

GraphBuilder backend_stub(const std::string& input_name, std::int64_t side, std::int64_t fc8_dim, bool with_fc8) {
  GraphBuilder g;
  g.input(input_name, {1, 3, side, side});
  g.output("fc6", {1, 4096});
  g.output("fc7", {1, 4096});
  if (with_fc8) g.output("fc8", {1, fc8_dim});
  return g;
}

}  // namespace

TEST_SUITE("onnx") {
  TEST_CASE("operator cases match onnxruntime") {
    std::ifstream in(kData / "onnx_ops" / "cases.json");
    REQUIRE(in);
    const auto cases = nlohmann::json::parse(in);
    REQUIRE(cases.size() >= 20);
    for (const auto& c : cases) {
      const std::string name = c.at("name");
      CAPTURE(name);
      const auto model = lx::Model::load(kData / "onnx_ops" / (name + ".onnx"));
      std::map<std::string, lx::Tensor> feeds;
      for (const auto& [k, v] : c.at("inputs").items()) feeds.emplace(k, tensor_from_json(v));
      std::vector<std::string> wanted;
      for (const auto& [k, v] : c.at("outputs").items()) wanted.push_back(k);
      const auto got = model.run(feeds, wanted);
      for (const auto& [k, v] : c.at("outputs").items()) {
        const auto expect = tensor_from_json(v);
        const auto& t = got.at(k);
        CHECK(t.shape == expect.shape);
        REQUIRE(t.floats.size() == expect.floats.size());
        double worst = 0.0;
        for (std::size_t i = 0; i < t.floats.size(); ++i) {
          worst = std::max(worst, std::abs(double(t.floats[i]) - expect.floats[i]) / (1.0 + std::abs(expect.floats[i])));
        }
        CHECK(worst < 1e-5);
      }
    }
  }

  TEST_CASE("tiny AlexNet-shaped model reproduces the onnxruntime parity record") {
    const auto be = load_onnx_backend((kData / "tiny_alexnet.onnx").string(), NetworkId::AlexNet);
    CHECK(be->input_side() == 227);
    CHECK(be->fingerprint().rfind("onnx:alexnet:", 0) == 0);
    const auto rec = read_parity_file((kData / "tiny_alexnet.parity").string());
    CHECK(rec.side == 227);
    CHECK(rec.outputs.size() == 3);
    CHECK(parity_max_abs_diff(*be, rec) < 1e-3);
  }

  TEST_CASE("extra graph outputs can be evaluated on request") {
    const auto model = lx::Model::load(kData / "tiny_alexnet.onnx");
    CHECK(model.opset() == 13);
    const auto rec = read_parity_file((kData / "tiny_alexnet.parity").string());
    std::map<std::string, lx::Tensor> feeds;
    feeds.emplace("input", lx::Tensor::from_floats({1, 3, 227, 227}, rec.input_nchw));
    const auto out = model.run(feeds, {"prob"});
    double sum = 0.0;
    for (float v : out.at("prob").floats) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    CHECK_THROWS_AS(model.run(feeds, {"no_such_value"}), RuntimeFailure);
  }

  TEST_CASE("the same model gives a different fingerprint per network") {
    oracle::TempDir tmp("onnx_fp");
    backend_stub("input", 224, 1000, true).save(tmp.path() / "v.onnx");
    const auto vgg = load_onnx_backend((tmp.path() / "v.onnx").string(), NetworkId::VGG16);
    CHECK(vgg->input_side() == 224);
    CHECK(vgg->fingerprint().rfind("onnx:vgg16:", 0) == 0);
  }

  TEST_CASE("backend loading validates the interface") {
    oracle::TempDir tmp("onnx_iface");
    const auto path = (tmp.path() / "m.onnx").string();

    backend_stub("input", 227, 1000, false).save(path);
    try {
      load_onnx_backend(path, NetworkId::AlexNet);
      FAIL("expected MissingLayer");
    } catch (const MissingLayer& e) {
      CHECK(std::string(e.what()).find("fc8") != std::string::npos);
    }

    backend_stub("input", 227, 999, true).save(path);
    CHECK_THROWS_AS(load_onnx_backend(path, NetworkId::AlexNet), ValidationError);

    backend_stub("data", 227, 1000, true).save(path);
    CHECK_THROWS_AS(load_onnx_backend(path, NetworkId::AlexNet), ValidationError);

    backend_stub("input", 227, 1000, true).save(path);
    CHECK_THROWS_AS(load_onnx_backend(path, NetworkId::VGG16), ValidationError);
    CHECK_NOTHROW(load_onnx_backend(path, NetworkId::AlexNet));

    CHECK_THROWS_AS(load_onnx_backend((tmp.path() / "absent.onnx").string(), NetworkId::AlexNet), ValidationError);
  }

  TEST_CASE("malformed or unsupported graphs are rejected at load") {
    CHECK_THROWS_AS(lx::Model::parse("\xff\xff\xff garbage"), ValidationError);

    GraphBuilder tanh;
    tanh.input("x", {1, 4});
    tanh.output("y", {1, 4});
    tanh.node("Tanh", {"x"}, {"y"});
    try {
      lx::Model::parse(tanh.bytes());
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("Tanh") != std::string::npos);
    }

    GraphBuilder custom;
    custom.input("x", {1, 4});
    custom.output("y", {1, 4});
    custom.node("Relu", {"x"}, {"y"})->set_domain("com.example");
    CHECK_THROWS_AS(lx::Model::parse(custom.bytes()), ValidationError);

    GraphBuilder external;
    external.input("x", {1, 2});
    external.output("y", {1, 2});
    auto* t = external.graph()->add_initializer();
    t->set_name("w");
    t->set_data_type(::onnx::TensorProto::FLOAT);
    t->add_dims(2);
    t->set_data_location(::onnx::TensorProto::EXTERNAL);
    external.node("Add", {"x", "w"}, {"y"});
    CHECK_THROWS_AS(lx::Model::parse(external.bytes()), ValidationError);
  }

  TEST_CASE("unsupported attributes and bad shapes fail at run time") {
    GraphBuilder same;
    same.input("x", {1, 1, 4, 4});
    same.output("y", {1, 1, 4, 4});
    same.initializer("w", {1, 1, 3, 3}, std::vector<float>(9, 1.0f));
    GraphBuilder::attr_s(same.node("Conv", {"x", "w"}, {"y"}), "auto_pad", "SAME_UPPER");
    const auto m1 = lx::Model::parse(same.bytes());
    std::map<std::string, lx::Tensor> feeds;
    feeds.emplace("x", lx::Tensor::from_floats({1, 1, 4, 4}, std::vector<float>(16, 1.0f)));
    CHECK_THROWS_AS(m1.run(feeds, {"y"}), RuntimeFailure);

    GraphBuilder gemm;
    gemm.input("x", {1, 3});
    gemm.output("y", {1, 2});
    gemm.initializer("w", {4, 2}, std::vector<float>(8, 1.0f));
    gemm.node("Gemm", {"x", "w"}, {"y"});
    const auto m2 = lx::Model::parse(gemm.bytes());
    std::map<std::string, lx::Tensor> f2;
    f2.emplace("x", lx::Tensor::from_floats({1, 3}, {1, 2, 3}));
    CHECK_THROWS_AS(m2.run(f2, {"y"}), RuntimeFailure);

    GraphBuilder pool;
    pool.input("x", {1, 1, 2, 2});
    pool.output("y", {1, 1, 1, 1});
    GraphBuilder::attr_ints(pool.node("MaxPool", {"x"}, {"y"}), "kernel_shape", {3, 3});
    const auto m3 = lx::Model::parse(pool.bytes());
    std::map<std::string, lx::Tensor> f3;
    f3.emplace("x", lx::Tensor::from_floats({1, 1, 2, 2}, {1, 2, 3, 4}));
    CHECK_THROWS_AS(m3.run(f3, {"y"}), RuntimeFailure);
  }

  TEST_CASE("a hand-computed convolution") {
    GraphBuilder g;
    g.input("x", {1, 1, 3, 3});
    g.output("y", {1, 1, 2, 2});
    g.initializer("w", {1, 1, 2, 2}, {1, 0, 0, -1});
    g.initializer("b", {1}, {0.5f});
    g.node("Conv", {"x", "w", "b"}, {"y"});
    const auto m = lx::Model::parse(g.bytes());
    std::map<std::string, lx::Tensor> feeds;
    feeds.emplace("x", lx::Tensor::from_floats({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 10}));
    const auto y = m.run(feeds, {"y"}).at("y");
    CHECK(y.shape == std::vector<std::int64_t>{1, 1, 2, 2});
    // x[i][j] - x[i+1][j+1] + 0.5
    CHECK(y.floats == std::vector<float>{-3.5f, -3.5f, -3.5f, -4.5f});
  }
}

#include "lesion/onnx_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "lesion/error.hpp"
#include "lesion/simd.hpp"
#include "onnx/onnx.pb.h"

namespace lesion::onnx {

Tensor Tensor::from_floats(std::vector<std::int64_t> shape, std::vector<float> values) {
  Tensor t;
  t.type = Type::Float;
  t.shape = std::move(shape);
  t.floats = std::move(values);
  return t;
}

Tensor Tensor::from_ints(std::vector<std::int64_t> shape, std::vector<std::int64_t> values) {
  Tensor t;
  t.type = Type::Int64;
  t.shape = std::move(shape);
  t.ints = std::move(values);
  return t;
}

std::size_t Tensor::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::int64_t d) { return a * static_cast<std::size_t>(d); });
}

namespace {

const std::set<std::string, std::less<>> kSupportedOps{
    "Conv",    "Relu",   "MaxPool", "AveragePool", "GlobalAveragePool", "LRN",      "Flatten",
    "Reshape", "Gemm",   "MatMul",  "Add",         "Sub",               "Mul",      "Div",
    "Softmax", "Concat", "Constant", "Dropout",    "Identity"};

template <typename T>
std::vector<T> read_raw(const std::string& raw, std::size_t count, const std::string& name) {
  if (raw.size() != count * sizeof(T)) throw ValidationError("initializer '" + name + "' raw_data size mismatch");
  std::vector<T> out(count);
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

Tensor convert_tensor(const ::onnx::TensorProto& proto) {
  const std::string& name = proto.name();
  if (proto.data_location() == ::onnx::TensorProto::EXTERNAL) {
    throw ValidationError("tensor '" + name + "' uses external data, which is not supported");
  }
  Tensor t;
  t.shape.assign(proto.dims().begin(), proto.dims().end());
  const std::size_t count = t.numel();
  switch (proto.data_type()) {
    case ::onnx::TensorProto::FLOAT:
      t.type = Tensor::Type::Float;
      if (proto.has_raw_data()) {
        t.floats = read_raw<float>(proto.raw_data(), count, name);
      } else {
        t.floats.assign(proto.float_data().begin(), proto.float_data().end());
      }
      break;
    case ::onnx::TensorProto::DOUBLE: {
      t.type = Tensor::Type::Float;
      std::vector<double> d = proto.has_raw_data()
                                  ? read_raw<double>(proto.raw_data(), count, name)
                                  : std::vector<double>(proto.double_data().begin(), proto.double_data().end());
      t.floats.assign(d.begin(), d.end());
      break;
    }
    case ::onnx::TensorProto::INT64:
      t.type = Tensor::Type::Int64;
      if (proto.has_raw_data()) {
        t.ints = read_raw<std::int64_t>(proto.raw_data(), count, name);
      } else {
        t.ints.assign(proto.int64_data().begin(), proto.int64_data().end());
      }
      break;
    case ::onnx::TensorProto::INT32: {
      t.type = Tensor::Type::Int64;
      std::vector<std::int32_t> v = proto.has_raw_data()
                                        ? read_raw<std::int32_t>(proto.raw_data(), count, name)
                                        : std::vector<std::int32_t>(proto.int32_data().begin(), proto.int32_data().end());
      t.ints.assign(v.begin(), v.end());
      break;
    }
    default:
      throw ValidationError("tensor '" + name + "' has unsupported data type " + std::to_string(proto.data_type()));
  }
  const std::size_t got = t.type == Tensor::Type::Float ? t.floats.size() : t.ints.size();
  if (got != count) throw ValidationError("tensor '" + name + "' element count does not match its dims");
  return t;
}

ValueInfo convert_value_info(const ::onnx::ValueInfoProto& proto) {
  ValueInfo info;
  info.name = proto.name();
  if (proto.has_type() && proto.type().has_tensor_type() && proto.type().tensor_type().has_shape()) {
    for (const auto& dim : proto.type().tensor_type().shape().dim()) {
      info.shape.push_back(dim.has_dim_value() ? dim.dim_value() : -1);
    }
  }
  return info;
}

// ---------------------------------------------------------------------------
// Operator helpers

[[noreturn]] void fail(const Node& node, const std::string& what) {
  throw RuntimeFailure(node.op_type + " node '" + node.name + "': " + what);
}

std::int64_t attr_i(const Node& n, const std::string& key, std::int64_t fallback) {
  auto it = n.attributes.find(key);
  return it == n.attributes.end() ? fallback : it->second.i;
}

float attr_f(const Node& n, const std::string& key, float fallback) {
  auto it = n.attributes.find(key);
  return it == n.attributes.end() ? fallback : it->second.f;
}

std::vector<std::int64_t> attr_ints(const Node& n, const std::string& key, std::vector<std::int64_t> fallback) {
  auto it = n.attributes.find(key);
  return it == n.attributes.end() ? fallback : it->second.ints;
}

std::string attr_s(const Node& n, const std::string& key, std::string fallback) {
  auto it = n.attributes.find(key);
  return it == n.attributes.end() ? fallback : it->second.s;
}

const Tensor& float_input(const Node& n, const std::vector<const Tensor*>& in, std::size_t k) {
  if (k >= in.size() || in[k] == nullptr) fail(n, "missing input " + std::to_string(k));
  if (in[k]->type != Tensor::Type::Float) fail(n, "input " + std::to_string(k) + " must be float");
  return *in[k];
}

struct Window2d {
  std::int64_t kh, kw, sh, sw, dh, dw, pt, pl, pb, pr;
};

Window2d window_from(const Node& n, std::int64_t kh, std::int64_t kw) {
  const auto strides = attr_ints(n, "strides", {1, 1});
  const auto dil = attr_ints(n, "dilations", {1, 1});
  auto pads = attr_ints(n, "pads", {0, 0, 0, 0});
  const std::string auto_pad = attr_s(n, "auto_pad", "NOTSET");
  if (auto_pad != "NOTSET" && auto_pad != "VALID") fail(n, "auto_pad=" + auto_pad + " is not supported");
  if (auto_pad == "VALID") pads = {0, 0, 0, 0};
  if (strides.size() != 2 || dil.size() != 2 || pads.size() != 4) fail(n, "only 2-D windows are supported");
  return {kh, kw, strides[0], strides[1], dil[0], dil[1], pads[0], pads[1], pads[2], pads[3]};
}

std::int64_t pooled_extent(std::int64_t in, std::int64_t k, std::int64_t s, std::int64_t d, std::int64_t pb,
                           std::int64_t pe, bool ceil_mode) {
  const std::int64_t span = in + pb + pe - ((k - 1) * d + 1);
  if (span < 0) return 0;
  std::int64_t out = (ceil_mode ? (span + s - 1) / s : span / s) + 1;
  if (ceil_mode && (out - 1) * s >= in + pb) --out;
  return out;
}

Tensor op_conv(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& x = float_input(n, in, 0);
  const Tensor& w = float_input(n, in, 1);
  const Tensor* b = in.size() > 2 ? in[2] : nullptr;
  if (x.shape.size() != 4 || w.shape.size() != 4) fail(n, "expects NCHW input and OIHW weights");
  const std::int64_t batch = x.shape[0], ic = x.shape[1], ih = x.shape[2], iw = x.shape[3];
  const std::int64_t oc = w.shape[0], kh = w.shape[2], kw = w.shape[3];
  const std::int64_t group = attr_i(n, "group", 1);
  if (ic % group != 0 || oc % group != 0 || w.shape[1] != ic / group) fail(n, "channel/group mismatch");
  const Window2d win = window_from(n, kh, kw);
  const std::int64_t oh = pooled_extent(ih, kh, win.sh, win.dh, win.pt, win.pb, false);
  const std::int64_t ow = pooled_extent(iw, kw, win.sw, win.dw, win.pl, win.pr, false);
  if (oh <= 0 || ow <= 0) fail(n, "output would be empty");

  const std::int64_t icg = ic / group, ocg = oc / group;
  const std::int64_t kdim = icg * kh * kw;
  Tensor y = Tensor::from_floats({batch, oc, oh, ow}, std::vector<float>(static_cast<std::size_t>(batch * oc * oh * ow)));

  // im2col over blocks of output rows to bound the scratch buffer.
  const std::int64_t max_col = std::int64_t{1} << 23;
  const std::int64_t rows_per_block = std::max<std::int64_t>(1, max_col / std::max<std::int64_t>(1, kdim * ow));
  std::vector<float> col;
  const auto& kern = simd::active();

  for (std::int64_t bi = 0; bi < batch; ++bi) {
    for (std::int64_t g = 0; g < group; ++g) {
      for (std::int64_t r0 = 0; r0 < oh; r0 += rows_per_block) {
        const std::int64_t r1 = std::min(oh, r0 + rows_per_block);
        const std::int64_t pix = (r1 - r0) * ow;
        col.assign(static_cast<std::size_t>(kdim * pix), 0.0f);
        for (std::int64_t c = 0; c < icg; ++c) {
          const float* plane = x.floats.data() + ((bi * ic + g * icg + c) * ih) * iw;
          for (std::int64_t ky = 0; ky < kh; ++ky) {
            for (std::int64_t kx = 0; kx < kw; ++kx) {
              float* dst = col.data() + ((c * kh + ky) * kw + kx) * pix;
              for (std::int64_t oy = r0; oy < r1; ++oy) {
                const std::int64_t iy = oy * win.sh - win.pt + ky * win.dh;
                float* drow = dst + (oy - r0) * ow;
                if (iy < 0 || iy >= ih) continue;
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                  const std::int64_t ix = ox * win.sw - win.pl + kx * win.dw;
                  if (ix >= 0 && ix < iw) drow[ox] = plane[iy * iw + ix];
                }
              }
            }
          }
        }
        for (std::int64_t o = 0; o < ocg; ++o) {
          const std::int64_t oc_idx = g * ocg + o;
          float* out = y.floats.data() + ((bi * oc + oc_idx) * oh + r0) * ow;
          const float* wrow = w.floats.data() + oc_idx * kdim;
          for (std::int64_t k = 0; k < kdim; ++k) {
            if (wrow[k] != 0.0f) kern.axpy_f32(wrow[k], col.data() + k * pix, out, static_cast<std::size_t>(pix));
          }
          if (b != nullptr) {
            const float bias = b->floats.at(static_cast<std::size_t>(oc_idx));
            for (std::int64_t p = 0; p < pix; ++p) out[p] += bias;
          }
        }
      }
    }
  }
  return y;
}

Tensor op_pool(const Node& n, const std::vector<const Tensor*>& in, bool is_max) {
  const Tensor& x = float_input(n, in, 0);
  if (x.shape.size() != 4) fail(n, "expects NCHW input");
  const auto ks = attr_ints(n, "kernel_shape", {});
  if (ks.size() != 2) fail(n, "kernel_shape must have two entries");
  const Window2d win = window_from(n, ks[0], ks[1]);
  const bool ceil_mode = attr_i(n, "ceil_mode", 0) != 0;
  const bool include_pad = attr_i(n, "count_include_pad", 0) != 0;
  const std::int64_t nc = x.shape[0] * x.shape[1], ih = x.shape[2], iw = x.shape[3];
  const std::int64_t oh = pooled_extent(ih, win.kh, win.sh, win.dh, win.pt, win.pb, ceil_mode);
  const std::int64_t ow = pooled_extent(iw, win.kw, win.sw, win.dw, win.pl, win.pr, ceil_mode);
  if (oh <= 0 || ow <= 0) fail(n, "output would be empty");
  Tensor y = Tensor::from_floats({x.shape[0], x.shape[1], oh, ow}, std::vector<float>(static_cast<std::size_t>(nc * oh * ow)));
  for (std::int64_t p = 0; p < nc; ++p) {
    const float* plane = x.floats.data() + p * ih * iw;
    float* out = y.floats.data() + p * oh * ow;
    for (std::int64_t oy = 0; oy < oh; ++oy) {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        float sum = 0.0f;
        std::int64_t count = 0, padded_count = 0;
        for (std::int64_t ky = 0; ky < win.kh; ++ky) {
          const std::int64_t iy = oy * win.sh - win.pt + ky * win.dh;
          for (std::int64_t kx = 0; kx < win.kw; ++kx) {
            const std::int64_t ix = ox * win.sw - win.pl + kx * win.dw;
            // Padding region (explicit pads only, not ceil-mode overhang).
            if (iy < ih + win.pb && ix < iw + win.pr) ++padded_count;
            if (iy < 0 || iy >= ih || ix < 0 || ix >= iw) continue;
            const float v = plane[iy * iw + ix];
            best = std::max(best, v);
            sum += v;
            ++count;
          }
        }
        if (is_max) {
          out[oy * ow + ox] = best;
        } else {
          const std::int64_t denom = include_pad ? padded_count : count;
          out[oy * ow + ox] = denom > 0 ? sum / static_cast<float>(denom) : 0.0f;
        }
      }
    }
  }
  return y;
}

Tensor op_global_avg_pool(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& x = float_input(n, in, 0);
  if (x.shape.size() != 4) fail(n, "expects NCHW input");
  const std::int64_t nc = x.shape[0] * x.shape[1], hw = x.shape[2] * x.shape[3];
  Tensor y = Tensor::from_floats({x.shape[0], x.shape[1], 1, 1}, std::vector<float>(static_cast<std::size_t>(nc)));
  for (std::int64_t p = 0; p < nc; ++p) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < hw; ++i) acc += x.floats[p * hw + i];
    y.floats[p] = static_cast<float>(acc / static_cast<double>(hw));
  }
  return y;
}

Tensor op_lrn(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& x = float_input(n, in, 0);
  if (x.shape.size() != 4) fail(n, "expects NCHW input");
  const float alpha = attr_f(n, "alpha", 1e-4f);
  const float beta = attr_f(n, "beta", 0.75f);
  const float bias = attr_f(n, "bias", 1.0f);
  const std::int64_t size = attr_i(n, "size", 0);
  if (size < 1) fail(n, "size attribute is required");
  const std::int64_t batch = x.shape[0], c = x.shape[1], hw = x.shape[2] * x.shape[3];
  const std::int64_t lo = (size - 1) / 2, hi = size - 1 - lo;
  Tensor y = Tensor::from_floats(x.shape, std::vector<float>(x.floats.size()));
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const std::int64_t c0 = std::max<std::int64_t>(0, ch - lo), c1 = std::min(c - 1, ch + hi);
      for (std::int64_t i = 0; i < hw; ++i) {
        float sq = 0.0f;
        for (std::int64_t k = c0; k <= c1; ++k) {
          const float v = x.floats[(b * c + k) * hw + i];
          sq += v * v;
        }
        const std::size_t idx = static_cast<std::size_t>((b * c + ch) * hw + i);
        y.floats[idx] = x.floats[idx] / std::pow(bias + alpha / static_cast<float>(size) * sq, beta);
      }
    }
  }
  return y;
}

Tensor op_flatten(const Node& n, const std::vector<const Tensor*>& in, std::int64_t opset) {
  if (in.empty() || in[0] == nullptr) fail(n, "missing input");
  const Tensor& x = *in[0];
  const std::int64_t rank = static_cast<std::int64_t>(x.shape.size());
  std::int64_t axis = attr_i(n, "axis", 1);
  if (axis < 0) axis += rank;
  if (axis < 0 || axis > rank) fail(n, "axis out of range");
  (void)opset;
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t i = 0; i < rank; ++i) (i < axis ? outer : inner) *= x.shape[i];
  Tensor y = x;
  y.shape = {outer, inner};
  return y;
}

Tensor op_reshape(const Node& n, const std::vector<const Tensor*>& in) {
  if (in.size() < 2 || in[0] == nullptr || in[1] == nullptr) fail(n, "needs data and shape inputs");
  const Tensor& x = *in[0];
  if (in[1]->type != Tensor::Type::Int64) fail(n, "shape input must be int64");
  std::vector<std::int64_t> shape = in[1]->ints;
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0) {
      if (i >= x.shape.size()) fail(n, "0 dim beyond input rank");
      shape[i] = x.shape[i];
    }
    if (shape[i] == -1) {
      if (infer >= 0) fail(n, "more than one -1 dim");
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  const auto total = static_cast<std::int64_t>(x.numel());
  if (infer >= 0) {
    if (known == 0 || total % known != 0) fail(n, "cannot infer -1 dim");
    shape[infer] = total / known;
  }
  Tensor y = x;
  y.shape = shape;
  if (static_cast<std::int64_t>(y.numel()) != total) fail(n, "element count changes");
  return y;
}

// Row-major C[m x n] += A[m x k] * B[k x n].
void gemm_nn(std::int64_t m, std::int64_t k, std::int64_t nn, const float* a, const float* b, float* c) {
  const auto& kern = simd::active();
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t p = 0; p < k; ++p) {
      const float av = a[i * k + p];
      if (av != 0.0f) kern.axpy_f32(av, b + p * nn, c + i * nn, static_cast<std::size_t>(nn));
    }
  }
}

// Row-major C[m x n] += A[m x k] * B^T where B is [n x k].
void gemm_nt(std::int64_t m, std::int64_t k, std::int64_t nn, const float* a, const float* b, float* c) {
  const auto& kern = simd::active();
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < nn; ++j) c[i * nn + j] += kern.dot_f32(a + i * k, b + j * k, static_cast<std::size_t>(k));
  }
}

std::vector<float> transpose(const Tensor& t) {
  const std::int64_t r = t.shape[0], c = t.shape[1];
  std::vector<float> out(t.floats.size());
  for (std::int64_t i = 0; i < r; ++i) {
    for (std::int64_t j = 0; j < c; ++j) out[j * r + i] = t.floats[i * c + j];
  }
  return out;
}

Tensor op_gemm(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& a = float_input(n, in, 0);
  const Tensor& b = float_input(n, in, 1);
  const Tensor* c = in.size() > 2 ? in[2] : nullptr;
  if (a.shape.size() != 2 || b.shape.size() != 2) fail(n, "A and B must be matrices");
  const float alpha = attr_f(n, "alpha", 1.0f), beta = attr_f(n, "beta", 1.0f);
  const bool ta = attr_i(n, "transA", 0) != 0, tb = attr_i(n, "transB", 0) != 0;
  const std::int64_t m = ta ? a.shape[1] : a.shape[0];
  const std::int64_t k = ta ? a.shape[0] : a.shape[1];
  const std::int64_t nn = tb ? b.shape[0] : b.shape[1];
  if ((tb ? b.shape[1] : b.shape[0]) != k) fail(n, "inner dimensions differ");

  std::vector<float> a_rows = ta ? transpose(a) : a.floats;
  Tensor y = Tensor::from_floats({m, nn}, std::vector<float>(static_cast<std::size_t>(m * nn), 0.0f));
  if (tb) {
    gemm_nt(m, k, nn, a_rows.data(), b.floats.data(), y.floats.data());
  } else {
    gemm_nn(m, k, nn, a_rows.data(), b.floats.data(), y.floats.data());
  }
  if (alpha != 1.0f) {
    for (float& v : y.floats) v *= alpha;
  }
  if (c != nullptr && beta != 0.0f) {
    // Unidirectional broadcast of C to [m, n].
    std::vector<std::int64_t> cs = c->shape;
    while (cs.size() < 2) cs.insert(cs.begin(), 1);
    if ((cs[0] != 1 && cs[0] != m) || (cs[1] != 1 && cs[1] != nn)) fail(n, "C is not broadcastable");
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t j = 0; j < nn; ++j) {
        const std::int64_t ci = (cs[0] == 1 ? 0 : i) * cs[1] + (cs[1] == 1 ? 0 : j);
        y.floats[i * nn + j] += beta * c->floats[ci];
      }
    }
  }
  return y;
}

Tensor op_matmul(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& a = float_input(n, in, 0);
  const Tensor& b = float_input(n, in, 1);
  if (b.shape.size() != 2 || a.shape.empty()) fail(n, "only [..., k] x [k, n] products are supported");
  const std::int64_t k = a.shape.back();
  if (b.shape[0] != k) fail(n, "inner dimensions differ");
  const std::int64_t m = static_cast<std::int64_t>(a.numel()) / std::max<std::int64_t>(k, 1);
  const std::int64_t nn = b.shape[1];
  std::vector<std::int64_t> shape(a.shape.begin(), a.shape.end() - 1);
  shape.push_back(nn);
  Tensor y = Tensor::from_floats(shape, std::vector<float>(static_cast<std::size_t>(m * nn), 0.0f));
  gemm_nn(m, k, nn, a.floats.data(), b.floats.data(), y.floats.data());
  return y;
}

Tensor op_binary(const Node& n, const std::vector<const Tensor*>& in) {
  const Tensor& a = float_input(n, in, 0);
  const Tensor& b = float_input(n, in, 1);
  const std::size_t rank = std::max(a.shape.size(), b.shape.size());
  auto padded = [rank](const std::vector<std::int64_t>& s) {
    std::vector<std::int64_t> out(rank - s.size(), 1);
    out.insert(out.end(), s.begin(), s.end());
    return out;
  };
  const auto sa = padded(a.shape), sb = padded(b.shape);
  std::vector<std::int64_t> so(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (sa[i] != sb[i] && sa[i] != 1 && sb[i] != 1) fail(n, "shapes are not broadcastable");
    so[i] = std::max(sa[i], sb[i]);
  }
  auto strides = [rank](const std::vector<std::int64_t>& s) {
    std::vector<std::int64_t> st(rank, 0);
    std::int64_t acc = 1;
    for (std::size_t i = rank; i-- > 0;) {
      st[i] = s[i] == 1 ? 0 : acc;
      acc *= s[i];
    }
    return st;
  };
  const auto sta = strides(sa), stb = strides(sb);
  Tensor y = Tensor::from_floats(so, {});
  y.floats.resize(y.numel());
  const std::string& op = n.op_type;
  std::vector<std::int64_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < y.floats.size(); ++flat) {
    std::int64_t ia = 0, ib = 0;
    for (std::size_t d = 0; d < rank; ++d) {
      ia += idx[d] * sta[d];
      ib += idx[d] * stb[d];
    }
    const float x = a.floats[ia], z = b.floats[ib];
    y.floats[flat] = op == "Add" ? x + z : op == "Sub" ? x - z : op == "Mul" ? x * z : x / z;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < so[d]) break;
      idx[d] = 0;
    }
  }
  return y;
}

Tensor op_softmax(const Node& n, const std::vector<const Tensor*>& in, std::int64_t opset) {
  const Tensor& x = float_input(n, in, 0);
  const std::int64_t rank = static_cast<std::int64_t>(x.shape.size());
  std::int64_t axis = attr_i(n, "axis", opset >= 13 ? -1 : 1);
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) fail(n, "axis out of range");
  std::int64_t outer = 1, len = 1, inner = 1;
  for (std::int64_t i = 0; i < rank; ++i) {
    if (opset >= 13) {
      (i < axis ? outer : i == axis ? len : inner) *= x.shape[i];
    } else {
      (i < axis ? outer : len) *= x.shape[i];
    }
  }
  Tensor y = x;
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t r = 0; r < inner; ++r) {
      float mx = -std::numeric_limits<float>::infinity();
      for (std::int64_t l = 0; l < len; ++l) mx = std::max(mx, x.floats[(o * len + l) * inner + r]);
      double sum = 0.0;
      for (std::int64_t l = 0; l < len; ++l) {
        float& v = y.floats[(o * len + l) * inner + r];
        v = std::exp(v - mx);
        sum += v;
      }
      for (std::int64_t l = 0; l < len; ++l) y.floats[(o * len + l) * inner + r] /= static_cast<float>(sum);
    }
  }
  return y;
}

Tensor op_concat(const Node& n, const std::vector<const Tensor*>& in) {
  if (in.empty()) fail(n, "no inputs");
  const Tensor& first = float_input(n, in, 0);
  const std::int64_t rank = static_cast<std::int64_t>(first.shape.size());
  std::int64_t axis = attr_i(n, "axis", 0);
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) fail(n, "axis out of range");
  std::int64_t outer = 1, inner = 1, total_axis = 0;
  for (std::int64_t i = 0; i < axis; ++i) outer *= first.shape[i];
  for (std::int64_t i = axis + 1; i < rank; ++i) inner *= first.shape[i];
  for (std::size_t k = 0; k < in.size(); ++k) {
    const Tensor& t = float_input(n, in, k);
    if (static_cast<std::int64_t>(t.shape.size()) != rank) fail(n, "rank mismatch");
    total_axis += t.shape[axis];
  }
  std::vector<std::int64_t> shape = first.shape;
  shape[axis] = total_axis;
  Tensor y = Tensor::from_floats(shape, {});
  y.floats.reserve(y.numel());
  for (std::int64_t o = 0; o < outer; ++o) {
    for (const Tensor* t : in) {
      const std::int64_t chunk = t->shape[axis] * inner;
      y.floats.insert(y.floats.end(), t->floats.begin() + o * chunk, t->floats.begin() + (o + 1) * chunk);
    }
  }
  return y;
}

}  // namespace

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read model file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const ValidationError& e) {
    throw ValidationError("model file '" + path.string() + "': " + e.what());
  }
}

Model Model::parse(std::string_view bytes) {
  ::onnx::ModelProto proto;
  if (!proto.ParseFromArray(bytes.data(), static_cast<int>(bytes.size()))) {
    throw ValidationError("not a valid ONNX protobuf");
  }
  if (!proto.has_graph()) throw ValidationError("ONNX model has no graph");

  Model model;
  for (const auto& op : proto.opset_import()) {
    if (op.domain().empty() || op.domain() == "ai.onnx") model.opset_ = op.version();
  }
  const auto& graph = proto.graph();
  for (const auto& init : graph.initializer()) model.initializers_.emplace(init.name(), convert_tensor(init));
  for (const auto& vi : graph.input()) {
    if (!model.initializers_.contains(vi.name())) model.inputs_.push_back(convert_value_info(vi));
  }
  for (const auto& vi : graph.output()) model.outputs_.push_back(convert_value_info(vi));

  for (const auto& np : graph.node()) {
    Node node;
    node.op_type = np.op_type();
    node.name = np.name().empty() ? np.op_type() : np.name();
    if (!np.domain().empty() && np.domain() != "ai.onnx") {
      throw ValidationError("operator domain '" + np.domain() + "' is not supported");
    }
    if (!kSupportedOps.contains(node.op_type)) {
      throw ValidationError("unsupported operator '" + node.op_type + "' in node '" + node.name + "'");
    }
    node.inputs.assign(np.input().begin(), np.input().end());
    node.outputs.assign(np.output().begin(), np.output().end());
    for (const auto& ap : np.attribute()) {
      Attribute a;
      a.f = ap.f();
      a.i = ap.i();
      a.s = ap.s();
      a.floats.assign(ap.floats().begin(), ap.floats().end());
      a.ints.assign(ap.ints().begin(), ap.ints().end());
      if (ap.has_t()) a.t = convert_tensor(ap.t());
      node.attributes.emplace(ap.name(), std::move(a));
    }
    model.nodes_.push_back(std::move(node));
  }
  return model;
}

const ValueInfo* Model::find_output(std::string_view name) const {
  for (const auto& o : outputs_) {
    if (o.name == name) return &o;
  }
  return nullptr;
}

std::map<std::string, Tensor> Model::run(const std::map<std::string, Tensor>& feeds,
                                         const std::vector<std::string>& wanted) const {
  std::map<std::string, Tensor> values;
  auto lookup = [&](const std::string& name) -> const Tensor* {
    if (name.empty()) return nullptr;
    if (auto it = values.find(name); it != values.end()) return &it->second;
    if (auto it = feeds.find(name); it != feeds.end()) return &it->second;
    if (auto it = initializers_.find(name); it != initializers_.end()) return &it->second;
    throw RuntimeFailure("value '" + name + "' is not defined before use");
  };
  for (const auto& in : inputs_) {
    if (!feeds.contains(in.name)) throw RuntimeFailure("graph input '" + in.name + "' was not fed");
  }

  // Last use of each value, so intermediates can be released early.
  std::map<std::string, std::size_t> last_use;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (const auto& name : nodes_[i].inputs) last_use[name] = i;
  }
  const std::set<std::string> keep(wanted.begin(), wanted.end());

  for (std::size_t ni = 0; ni < nodes_.size(); ++ni) {
    const Node& n = nodes_[ni];
    std::vector<const Tensor*> in;
    in.reserve(n.inputs.size());
    for (const auto& name : n.inputs) in.push_back(lookup(name));

    Tensor out;
    const std::string& op = n.op_type;
    if (op == "Conv") {
      out = op_conv(n, in);
    } else if (op == "Relu") {
      out = float_input(n, in, 0);
      for (float& v : out.floats) v = std::max(v, 0.0f);
    } else if (op == "MaxPool") {
      out = op_pool(n, in, true);
    } else if (op == "AveragePool") {
      out = op_pool(n, in, false);
    } else if (op == "GlobalAveragePool") {
      out = op_global_avg_pool(n, in);
    } else if (op == "LRN") {
      out = op_lrn(n, in);
    } else if (op == "Flatten") {
      out = op_flatten(n, in, opset_);
    } else if (op == "Reshape") {
      out = op_reshape(n, in);
    } else if (op == "Gemm") {
      out = op_gemm(n, in);
    } else if (op == "MatMul") {
      out = op_matmul(n, in);
    } else if (op == "Add" || op == "Sub" || op == "Mul" || op == "Div") {
      out = op_binary(n, in);
    } else if (op == "Softmax") {
      out = op_softmax(n, in, opset_);
    } else if (op == "Concat") {
      out = op_concat(n, in);
    } else if (op == "Constant") {
      auto it = n.attributes.find("value");
      if (it == n.attributes.end() || !it->second.t) fail(n, "only the 'value' tensor form is supported");
      out = *it->second.t;
    } else if (op == "Dropout" || op == "Identity") {
      if (in.empty() || in[0] == nullptr) fail(n, "missing input");
      out = *in[0];
    }
    if (n.outputs.empty()) fail(n, "node has no outputs");
    values[n.outputs[0]] = std::move(out);

    for (const auto& name : n.inputs) {
      auto lu = last_use.find(name);
      if (lu != last_use.end() && lu->second == ni && !keep.contains(name)) values.erase(name);
    }
  }

  std::map<std::string, Tensor> result;
  for (const auto& name : wanted) {
    auto it = values.find(name);
    if (it == values.end()) throw RuntimeFailure("requested value '" + name + "' was not produced");
    result.emplace(name, it->second);
  }
  return result;
}

}  // namespace lesion::onnx

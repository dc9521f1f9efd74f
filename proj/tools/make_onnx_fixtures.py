#!/usr/bin/env python3
"""Generate ONNX test fixtures with onnxruntime reference outputs.

Writes into tests/data:
  onnx_ops/<case>.onnx   one small graph per operator configuration
  onnx_ops/cases.json    inputs and onnxruntime outputs for every case
  tiny_alexnet.onnx      AlexNet-shaped net (input 1x3x227x227, fc6/fc7/fc8)
  tiny_alexnet.parity    parity sidecar in the lesion-parity 1 format

Requires numpy, onnx and onnxruntime. Re-running reproduces the same bytes.
"""

import argparse
import json
import pathlib

import numpy as np
import onnx
import onnxruntime as ort
from onnx import TensorProto, helper, numpy_helper

OPSET = 13


def make_model(nodes, inputs, outputs, initializers=(), opset=OPSET, check=True):
    graph = helper.make_graph(
        nodes,
        "g",
        [helper.make_tensor_value_info(n, TensorProto.FLOAT, s) for n, s in inputs],
        [helper.make_tensor_value_info(n, TensorProto.FLOAT, s) for n, s in outputs],
        initializer=[numpy_helper.from_array(np.asarray(v), k) for k, v in initializers],
    )
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", opset)], producer_name="fixtures")
    model.ir_version = 8
    if check:
        onnx.checker.check_model(model)
    return model


def run(model, feeds):
    sess = ort.InferenceSession(model.SerializeToString(), providers=["CPUExecutionProvider"])
    names = [o.name for o in sess.get_outputs()]
    return dict(zip(names, sess.run(names, feeds)))


def rand(rng, *shape, scale=1.0):
    return (rng.standard_normal(shape) * scale).astype(np.float32)


def op_cases(rng):
    x = rand(rng, 1, 4, 9, 9)
    cases = []

    def add(name, nodes, inputs, outputs, feeds, inits=(), opset=OPSET):
        # Output shapes are taken from a first onnxruntime run.
        probe = make_model(nodes, inputs, [(n, None) for n, _ in outputs], inits, opset, check=False)
        shapes = {k: list(v.shape) for k, v in run(probe, feeds).items()}
        outputs = [(n, shapes[n]) for n, _ in outputs]
        cases.append((name, make_model(nodes, inputs, outputs, inits, opset), feeds))

    w = rand(rng, 6, 4, 3, 3)
    b = rand(rng, 6)
    add("conv_pads_strides",
        [helper.make_node("Conv", ["x", "w", "b"], ["y"], kernel_shape=[3, 3], pads=[1, 2, 0, 1], strides=[2, 1])],
        [("x", [1, 4, 9, 9])], [("y", None)], {"x": x}, [("w", w), ("b", b)])
    wg = rand(rng, 6, 2, 3, 3)
    add("conv_group_dilation",
        [helper.make_node("Conv", ["x", "w"], ["y"], group=2, dilations=[2, 2], pads=[2, 2, 2, 2])],
        [("x", [1, 4, 9, 9])], [("y", None)], {"x": x}, [("w", wg)])
    add("conv_valid",
        [helper.make_node("Conv", ["x", "w", "b"], ["y"], auto_pad="VALID", strides=[3, 3])],
        [("x", [1, 4, 9, 9])], [("y", None)], {"x": x}, [("w", w), ("b", b)])
    add("maxpool_ceil",
        [helper.make_node("MaxPool", ["x"], ["y"], kernel_shape=[3, 3], strides=[2, 2], ceil_mode=1)],
        [("x", [1, 4, 9, 9])], [("y", None)], {"x": x})
    x8 = rand(rng, 1, 2, 8, 8)
    add("maxpool_ceil_partial",
        [helper.make_node("MaxPool", ["x"], ["y"], kernel_shape=[3, 3], strides=[2, 2], ceil_mode=1)],
        [("x", [1, 2, 8, 8])], [("y", None)], {"x": x8})
    add("maxpool_pads",
        [helper.make_node("MaxPool", ["x"], ["y"], kernel_shape=[2, 2], strides=[2, 2], pads=[1, 1, 1, 1])],
        [("x", [1, 2, 8, 8])], [("y", None)], {"x": x8})
    add("avgpool_exclude_pad",
        [helper.make_node("AveragePool", ["x"], ["y"], kernel_shape=[3, 3], strides=[2, 2], pads=[1, 1, 1, 1])],
        [("x", [1, 4, 9, 9])], [("y", None)], {"x": x})
    add("avgpool_include_pad",
        [helper.make_node("AveragePool", ["x"], ["y"], kernel_shape=[3, 3], strides=[2, 2], pads=[1, 1, 1, 1],
                          count_include_pad=1)],
        [("x", [1, 4, 9, 9])], [("y", None)], {"x": x})
    add("avgpool_ceil",
        [helper.make_node("AveragePool", ["x"], ["y"], kernel_shape=[3, 3], strides=[2, 2], ceil_mode=1)],
        [("x", [1, 2, 8, 8])], [("y", None)], {"x": x8})
    add("global_avgpool",
        [helper.make_node("GlobalAveragePool", ["x"], ["y"])],
        [("x", [1, 4, 9, 9])], [("y", None)], {"x": x})
    xl = rand(rng, 1, 7, 3, 3, scale=20.0)
    add("lrn_defaults",
        [helper.make_node("LRN", ["x"], ["y"], size=5)],
        [("x", [1, 7, 3, 3])], [("y", None)], {"x": xl})
    add("lrn_params",
        [helper.make_node("LRN", ["x"], ["y"], size=3, alpha=0.01, beta=0.5, bias=2.0)],
        [("x", [1, 7, 3, 3])], [("y", None)], {"x": xl})
    add("relu_flatten",
        [helper.make_node("Relu", ["x"], ["r"]), helper.make_node("Flatten", ["r"], ["y"])],
        [("x", [1, 4, 9, 9])], [("y", None)], {"x": x})
    a = rand(rng, 1, 12)
    wt = rand(rng, 5, 12)
    c = rand(rng, 5)
    add("gemm_transb",
        [helper.make_node("Gemm", ["a", "w", "c"], ["y"], transB=1, alpha=0.5, beta=2.0)],
        [("a", [1, 12])], [("y", None)], {"a": a}, [("w", wt), ("c", c)])
    at = rand(rng, 12, 1)
    add("gemm_transa_scalar_bias",
        [helper.make_node("Gemm", ["a", "w", "c"], ["y"], transA=1)],
        [("a", [12, 1])], [("y", None)], {"a": at}, [("w", wt.T.copy()), ("c", np.array([0.25], np.float32))])
    add("gemm_no_bias",
        [helper.make_node("Gemm", ["a", "w"], ["y"])],
        [("a", [1, 12])], [("y", None)], {"a": a}, [("w", wt.T.copy())])
    add("matmul_add_broadcast",
        [helper.make_node("MatMul", ["a", "w"], ["m"]), helper.make_node("Add", ["m", "c"], ["y"])],
        [("a", [1, 12])], [("y", None)], {"a": a}, [("w", wt.T.copy()), ("c", c)])
    s = rand(rng, 1, 4, 1, 1)
    add("arith_broadcast",
        [helper.make_node("Sub", ["x", "s"], ["t1"]),
         helper.make_node("Mul", ["t1", "k"], ["t2"]),
         helper.make_node("Div", ["t2", "d"], ["y"])],
        [("x", [1, 4, 9, 9])], [("y", None)], {"x": x},
        [("s", s), ("k", np.array([1.5], np.float32)), ("d", (np.abs(rand(rng, 9)) + 0.5).astype(np.float32))])
    add("softmax_default_axis",
        [helper.make_node("Softmax", ["a"], ["y"])],
        [("a", [1, 12])], [("y", None)], {"a": a * 4})
    add("softmax_opset11_4d",
        [helper.make_node("Softmax", ["x"], ["y"])],
        [("x", [1, 4, 9, 9])], [("y", None)], {"x": x}, opset=11)
    add("concat_reshape",
        [helper.make_node("Flatten", ["x"], ["f"]),
         helper.make_node("Reshape", ["x", "shape"], ["r"]),
         helper.make_node("Concat", ["f", "r"], ["y"], axis=1)],
        [("x", [1, 4, 9, 9])], [("y", None)], {"x": x}, [("shape", np.array([1, -1], np.int64))])
    add("reshape_zero_dim",
        [helper.make_node("Reshape", ["x", "shape"], ["y"])],
        [("x", [1, 4, 9, 9])], [("y", None)], {"x": x}, [("shape", np.array([0, 36, 0], np.int64))])
    add("constant_dropout_identity",
        [helper.make_node("Constant", [], ["k"], value=numpy_helper.from_array(rand(rng, 1, 12), "k")),
         helper.make_node("Add", ["a", "k"], ["s"]),
         helper.make_node("Dropout", ["s"], ["d"]),
         helper.make_node("Identity", ["d"], ["y"])],
        [("a", [1, 12])], [("y", None)], {"a": a})
    return cases


def tiny_alexnet(rng):
    def he(*shape, fan_in):
        return rand(rng, *shape, scale=np.sqrt(2.0 / fan_in))

    inits = {
        "w1": he(8, 3, 11, 11, fan_in=3 * 121) * 0.05, "b1": rand(rng, 8, scale=0.1),
        "w2": he(16, 4, 5, 5, fan_in=100), "b2": rand(rng, 16, scale=0.1),
        "w3": he(16, 16, 3, 3, fan_in=144),
        "shift3": rand(rng, 1, 16, 1, 1, scale=0.1),
        "scale3": np.array([0.8], np.float32),
        "shape2d": np.array([1, -1], np.int64),
        "p6": he(800, 8, fan_in=800), "w6": he(4096, 8, fan_in=8), "b6": rand(rng, 4096, scale=0.1),
        "a7": he(4096, 8, fan_in=4096), "c7": he(8, 4096, fan_in=8), "b7": rand(rng, 4096, scale=0.1),
        "p8": he(4096, 8, fan_in=4096), "w8": he(8, 1000, fan_in=8), "b8": rand(rng, 1000, scale=0.1),
    }
    N = helper.make_node
    nodes = [
        N("Conv", ["input", "w1", "b1"], ["c1"], kernel_shape=[11, 11], strides=[4, 4], pads=[2, 2, 2, 2]),
        N("Relu", ["c1"], ["r1"]),
        N("LRN", ["r1"], ["n1"], size=5, alpha=1e-4, beta=0.75, bias=2.0),
        N("MaxPool", ["n1"], ["p1"], kernel_shape=[3, 3], strides=[2, 2], ceil_mode=1),
        N("Conv", ["p1", "w2", "b2"], ["c2"], kernel_shape=[5, 5], pads=[2, 2, 2, 2], group=2),
        N("Relu", ["c2"], ["r2"]),
        N("AveragePool", ["r2"], ["p2"], kernel_shape=[3, 3], strides=[2, 2], pads=[1, 1, 1, 1]),
        N("Conv", ["p2", "w3"], ["c3"], kernel_shape=[3, 3], dilations=[2, 2], pads=[2, 2, 2, 2]),
        N("Add", ["c3", "shift3"], ["c3b"]),
        N("Mul", ["c3b", "scale3"], ["c3s"]),
        N("Relu", ["c3s"], ["r3"]),
        N("MaxPool", ["r3"], ["p3"], kernel_shape=[2, 2], strides=[2, 2]),
        N("Flatten", ["p3"], ["flat"]),
        N("GlobalAveragePool", ["r3"], ["gap"]),
        N("Reshape", ["gap", "shape2d"], ["gap2"]),
        N("Concat", ["flat", "gap2"], ["feat"], axis=1),
        N("MatMul", ["feat", "p6"], ["z6"]),
        N("Gemm", ["z6", "w6", "b6"], ["g6"], transB=1),
        N("Relu", ["g6"], ["r6"]),
        N("Dropout", ["r6"], ["fc6"]),
        N("MatMul", ["fc6", "a7"], ["z7"]),
        N("MatMul", ["z7", "c7"], ["m7"]),
        N("Add", ["m7", "b7"], ["s7"]),
        N("Relu", ["s7"], ["r7"]),
        N("Identity", ["r7"], ["fc7"]),
        N("MatMul", ["fc7", "p8"], ["z8"]),
        N("Gemm", ["z8", "w8", "b8"], ["fc8"], alpha=0.5),
        N("Softmax", ["fc8"], ["prob"]),
    ]
    model = make_model(nodes, [("input", [1, 3, 227, 227])],
                       [("fc6", [1, 4096]), ("fc7", [1, 4096]), ("fc8", [1, 1000]), ("prob", [1, 1000])],
                       inits.items())
    return model


def write_parity(path, x, outputs):
    with open(path, "wb") as f:
        f.write(b"lesion-parity 1\n")
        f.write(f"input 1 3 {x.shape[2]} {x.shape[3]}\n".encode())
        for name in ("fc6", "fc7", "fc8"):
            f.write(f"{name} {outputs[name].size}\n".encode())
        f.write(b"\n")
        f.write(x.astype("<f4").tobytes())
        for name in ("fc6", "fc7", "fc8"):
            f.write(outputs[name].astype("<f4").tobytes())


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default_out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"
    parser.add_argument("--out", type=pathlib.Path, default=default_out)
    parser.add_argument("--seed", type=int, default=20170301)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    ops_dir = args.out / "onnx_ops"
    ops_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for name, model, feeds in op_cases(rng):
        onnx.save(model, ops_dir / f"{name}.onnx")
        outs = run(model, feeds)
        manifest.append({
            "name": name,
            "inputs": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in feeds.items()},
            "outputs": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in outs.items()},
        })
    (ops_dir / "cases.json").write_text(json.dumps(manifest, indent=1) + "\n")

    model = tiny_alexnet(rng)
    onnx.save(model, args.out / "tiny_alexnet.onnx")
    x = rng.uniform(-120.0, 140.0, size=(1, 3, 227, 227)).astype(np.float32)
    outs = run(model, {"input": x})
    write_parity(args.out / "tiny_alexnet.parity", x, outs)
    for name in ("fc6", "fc7", "fc8"):
        v = outs[name]
        print(f"{name}: nonzero={np.count_nonzero(v)} max={np.abs(v).max():.4g}")


if __name__ == "__main__":
    main()

"""Sequential networks: layer specs, shape inference, parameters, prefixes.

A network is an ordered layer list plus a parameter store. Shapes are
computed once at build time and every runtime activation is checked
against that table implicitly by the ops themselves. Teacher networks
are deep-frozen at load; a frozen forward records no tape.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from . import tensor as T
from .errors import BuildError, ContractError, FormatError, IncompatibilityError
from .rng import generator
from .tensor import Parameter, Tensor

if TYPE_CHECKING:
    from .partition import Partition

KINDS = ("affine", "conv2d", "relu", "avgpool2d", "flatten", "projector1x1")

CHECKPOINT_MAGIC = b"SKDW"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    """One layer: a kind plus its kind-specific hyperparameters."""

    kind: str
    out: int = 0          # affine/conv2d/projector1x1 output width
    kernel: int = 0       # conv2d kernel extent (square)
    stride: int = 1
    padding: int = 0
    window: int = 0       # avgpool2d

    def to_json(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("affine", "projector1x1"):
            d["out"] = self.out
        elif self.kind == "conv2d":
            d.update(out=self.out, kernel=self.kernel, stride=self.stride, padding=self.padding)
        elif self.kind == "avgpool2d":
            d["window"] = self.window
        return d

    @staticmethod
    def from_json(d: dict) -> "LayerSpec":
        kind = d.get("kind")
        if kind not in KINDS:
            raise BuildError(f"unknown layer kind {kind!r}")
        return LayerSpec(
            kind=kind,
            out=int(d.get("out", 0)),
            kernel=int(d.get("kernel", 0)),
            stride=int(d.get("stride", 1)),
            padding=int(d.get("padding", 0)),
            window=int(d.get("window", 0)),
        )


def affine_spec(out: int) -> LayerSpec:
    return LayerSpec("affine", out=out)


def conv_spec(out: int, kernel: int, stride: int = 1, padding: int = 0) -> LayerSpec:
    return LayerSpec("conv2d", out=out, kernel=kernel, stride=stride, padding=padding)


def relu_spec() -> LayerSpec:
    return LayerSpec("relu")


def pool_spec(window: int) -> LayerSpec:
    return LayerSpec("avgpool2d", window=window)


def flatten_spec() -> LayerSpec:
    return LayerSpec("flatten")


def projector_spec(out: int) -> LayerSpec:
    return LayerSpec("projector1x1", out=out)


@dataclass
class Activation:
    """An intermediate feature map and the layer index that produced it."""

    tensor: Tensor
    layer: int  # -1 for the raw input


def _out_shape(spec: LayerSpec, shape: tuple[int, ...], index: int) -> tuple[int, ...]:
    """Output shape (without batch dim) of one layer, or BuildError."""
    kind = spec.kind
    if kind == "relu":
        return shape
    if kind == "flatten":
        return (int(np.prod(shape)),)
    if kind == "avgpool2d":
        if len(shape) != 3:
            raise BuildError(f"layer {index}: avgpool2d needs a CxHxW input, got {shape}")
        c, h, w = shape
        if spec.window < 1 or h % spec.window or w % spec.window:
            raise BuildError(f"layer {index}: avgpool2d window {spec.window} does not divide {h}x{w}")
        return (c, h // spec.window, w // spec.window)
    if kind == "conv2d":
        if len(shape) != 3:
            raise BuildError(f"layer {index}: conv2d needs a CxHxW input, got {shape}")
        c, h, w = shape
        k, s, p = spec.kernel, spec.stride, spec.padding
        if spec.out < 1 or k < 1 or s < 1 or p < 0:
            raise BuildError(f"layer {index}: bad conv2d hyperparameters {spec}")
        if k > h + 2 * p or k > w + 2 * p or (h + 2 * p - k) % s or (w + 2 * p - k) % s:
            raise BuildError(f"layer {index}: conv2d {k}x{k}/s{s}/p{p} does not fit input {h}x{w}")
        return (spec.out, (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1)
    if kind == "affine":
        if len(shape) != 1:
            raise BuildError(f"layer {index}: affine needs a flat input, got {shape} (missing flatten?)")
        if spec.out < 1:
            raise BuildError(f"layer {index}: affine output extent must be positive")
        return (spec.out,)
    if kind == "projector1x1":
        if spec.out < 1:
            raise BuildError(f"layer {index}: projector output extent must be positive")
        if len(shape) == 3:
            return (spec.out, shape[1], shape[2])
        if len(shape) == 1:
            return (spec.out,)
        raise BuildError(f"layer {index}: projector1x1 needs CxHxW or flat input, got {shape}")
    raise BuildError(f"layer {index}: unknown kind {spec.kind!r}")


class Network:
    """Ordered layers, their parameters, and the build-time shape table."""

    def __init__(self, layers: list[LayerSpec], input_shape: tuple[int, ...], class_count: int,
                 shapes: list[tuple[int, ...]], params: dict[str, Parameter]):
        self.layers = layers
        self.input_shape = input_shape
        self.class_count = class_count
        self.shapes = shapes  # shapes[i] = output shape of layer i, batch dim excluded
        self.params = params  # insertion-ordered by layer

    # -- introspection ------------------------------------------------------

    def shape_after(self, index: int) -> tuple[int, ...]:
        """Shape after layer ``index``; index -1 gives the input shape."""
        return self.input_shape if index < 0 else self.shapes[index]

    def width_after(self, index: int) -> int:
        """Channel count (spatial) or flat width after layer ``index``."""
        return self.shape_after(index)[0]

    def layer_params(self, index: int) -> list[Parameter]:
        prefix = f"L{index:02d}."
        return [p for pid, p in self.params.items() if pid.startswith(prefix)]

    @property
    def trainable(self) -> bool:
        return any(p.trainable for p in self.params.values())

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    @property
    def dtype(self) -> np.dtype:
        for p in self.params.values():
            return p.dtype
        return np.dtype(np.float32)

    # -- lifecycle ----------------------------------------------------------

    def freeze(self) -> None:
        for p in self.params.values():
            p.freeze()

    def astype(self, dtype) -> "Network":
        """Copy of this network with parameters cast to ``dtype``."""
        clone = build_network(list(self.layers), self.input_shape, self.class_count, dtype=dtype)
        for pid, p in self.params.items():
            clone.params[pid].data = p.data.astype(dtype)
            clone.params[pid].trainable = p.trainable
            clone.params[pid].requires_grad = p.trainable
        return clone

    def state(self) -> dict[str, np.ndarray]:
        return {pid: p.data.copy() for pid, p in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for pid, p in self.params.items():
            if pid not in state:
                raise ContractError(f"state missing parameter {pid}")
            if state[pid].shape != p.data.shape:
                raise ContractError(f"state shape mismatch for {pid}")
            p.data = state[pid].astype(p.dtype).copy()

    # -- execution ----------------------------------------------------------

    def apply_layer(self, index: int, x: Tensor) -> Tensor:
        spec = self.layers[index]
        kind = spec.kind
        if kind == "relu":
            return T.relu(x)
        if kind == "flatten":
            return T.flatten(x)
        if kind == "avgpool2d":
            return T.avgpool2d(x, spec.window)
        w = self.params[f"L{index:02d}.w"]
        b = self.params[f"L{index:02d}.b"]
        if kind == "conv2d":
            return T.channel_bias(T.conv2d(x, w, stride=spec.stride, padding=spec.padding), b)
        if kind == "affine" or (kind == "projector1x1" and len(self.shape_after(index)) == 1):
            return T.affine(x, w, b)
        if kind == "projector1x1":
            return T.channel_bias(T.conv2d(x, w, stride=1, padding=0), b)
        raise ContractError(f"cannot apply layer {index} of kind {kind}")

    def forward(self, x: Tensor) -> Tensor:
        for i in range(len(self.layers)):
            x = self.apply_layer(i, x)
        return x

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        """Class predictions for a raw input batch (no tape)."""
        logits = self.forward(Tensor(inputs.astype(self.dtype, copy=False)))
        return np.argmax(logits.data, axis=1)


def build_network(specs: list[LayerSpec], input_shape, class_count: int, dtype=np.float32) -> Network:
    """Validate the shape chain and allocate zeroed parameters."""
    if not specs:
        raise BuildError("empty layer list: a classifier head is required")
    if class_count < 2:
        raise BuildError(f"class count must be at least 2, got {class_count}")
    input_shape = tuple(int(e) for e in input_shape)
    if not input_shape or any(e < 1 for e in input_shape):
        raise BuildError(f"bad input shape {input_shape}")

    shapes: list[tuple[int, ...]] = []
    params: dict[str, Parameter] = {}
    shape = input_shape
    dtype = np.dtype(dtype)
    for i, spec in enumerate(specs):
        out = _out_shape(spec, shape, i)
        if spec.kind == "affine" or (spec.kind == "projector1x1" and len(shape) == 1):
            w = np.zeros((shape[0], spec.out), dtype=dtype)
            b = np.zeros((spec.out,), dtype=dtype)
            params[f"L{i:02d}.w"] = Parameter(w, f"L{i:02d}.w")
            params[f"L{i:02d}.b"] = Parameter(b, f"L{i:02d}.b")
        elif spec.kind == "conv2d":
            w = np.zeros((spec.out, shape[0], spec.kernel, spec.kernel), dtype=dtype)
            b = np.zeros((spec.out,), dtype=dtype)
            params[f"L{i:02d}.w"] = Parameter(w, f"L{i:02d}.w")
            params[f"L{i:02d}.b"] = Parameter(b, f"L{i:02d}.b")
        elif spec.kind == "projector1x1":
            w = np.zeros((spec.out, shape[0], 1, 1), dtype=dtype)
            b = np.zeros((spec.out,), dtype=dtype)
            params[f"L{i:02d}.w"] = Parameter(w, f"L{i:02d}.w")
            params[f"L{i:02d}.b"] = Parameter(b, f"L{i:02d}.b")
        shapes.append(out)
        shape = out

    last = specs[-1]
    if last.kind != "affine":
        raise BuildError(f"final layer must be an affine head, got {last.kind!r}")
    if shapes[-1] != (class_count,):
        raise BuildError(f"head produces {shapes[-1]}, expected ({class_count},) logits")
    return Network(list(specs), input_shape, class_count, shapes, params)


def _fan_in(spec: LayerSpec, in_shape: tuple[int, ...]) -> int:
    if spec.kind == "conv2d":
        return in_shape[0] * spec.kernel * spec.kernel
    return in_shape[0]  # affine and projector1x1


def init_params(net: Network, seed: int) -> None:
    """Scaled uniform fan-in init: w ~ U(+-sqrt(6/fan_in)), biases zero.

    Each layer draws from its own seed-derived stream, so a layer's
    initial values depend only on (seed, layer index, weight shape).
    """
    for i, spec in enumerate(net.layers):
        wid = f"L{i:02d}.w"
        if wid not in net.params:
            continue
        w = net.params[wid]
        bound = float(np.sqrt(6.0 / _fan_in(spec, net.shape_after(i - 1))))
        rng = generator(seed, i)
        w.data = rng.uniform(-bound, bound, size=w.data.shape).astype(w.dtype)
        b = net.params[f"L{i:02d}.b"]
        b.data = np.zeros_like(b.data)


def forward_prefix(net: Network, x: Tensor, through_block: int, partition: "Partition") -> Activation:
    """Apply blocks 1..through_block in order; block 0 is the identity."""
    from .partition import align_partition

    part = align_partition(partition, net)
    if through_block < 0 or through_block > part.k:
        raise ContractError(f"through_block {through_block} out of range 0..{part.k}")
    if through_block == 0:
        return Activation(x, -1)
    end = part.boundaries[through_block - 1]
    for i in range(end):
        x = net.apply_layer(i, x)
    return Activation(x, end - 1)


def apply_block(net: Network, x: Tensor, block: int, partition: "Partition") -> Tensor:
    """Apply just block ``block`` (0-based) to an activation."""
    from .partition import align_partition

    part = align_partition(partition, net)
    if block < 0 or block >= part.k:
        raise ContractError(f"block {block} out of range 0..{part.k - 1}")
    start = 0 if block == 0 else part.boundaries[block - 1]
    for i in range(start, part.boundaries[block]):
        x = net.apply_layer(i, x)
    return x


def insert_projectors(student: Network, teacher: Network, partition: "Partition") -> Network:
    """Append width-matching projectors at mismatched student boundaries.

    The returned network carries fresh zeroed parameters; call
    ``init_params`` afterwards. When every boundary width already
    matches, the student is returned unchanged.
    """
    from .partition import align_partition

    tpart = align_partition(partition, teacher)
    spart = align_partition(partition, student)
    inserts: list[tuple[int, LayerSpec]] = []  # (insert before this student layer index, spec)
    for i in range(tpart.k - 1):
        t_shape = teacher.shape_after(tpart.boundaries[i] - 1)
        s_end = spart.boundaries[i]
        s_shape = student.shape_after(s_end - 1)
        if len(t_shape) != len(s_shape):
            raise IncompatibilityError(f"boundary {i + 1}: teacher shape {t_shape} vs student shape {s_shape}")
        if t_shape[1:] != s_shape[1:]:
            raise IncompatibilityError(
                f"boundary {i + 1}: spatial extents differ, teacher {t_shape} vs student {s_shape}"
            )
        if t_shape[0] != s_shape[0]:
            inserts.append((s_end, projector_spec(t_shape[0])))
    if not inserts:
        return student

    specs = list(student.layers)
    for pos, spec in sorted(inserts, reverse=True):
        specs.insert(pos, spec)
    return build_network(specs, student.input_shape, student.class_count, dtype=student.dtype)


def clone_architecture(net: Network, dtype=None) -> Network:
    """Fresh zero-parameter network with the same layer specs."""
    return build_network(list(net.layers), net.input_shape, net.class_count,
                         dtype=dtype or net.dtype)


# --- architecture files and checkpoints ------------------------------------

def save_arch(net: Network, path) -> None:
    doc = {
        "input_shape": list(net.input_shape),
        "class_count": net.class_count,
        "layers": [spec.to_json() for spec in net.layers],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_arch(path, dtype=np.float32) -> Network:
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("input_shape", "class_count", "layers"):
        if key not in doc:
            raise BuildError(f"architecture file {path}: missing key {key!r}")
    specs = [LayerSpec.from_json(d) for d in doc["layers"]]
    return build_network(specs, tuple(doc["input_shape"]), int(doc["class_count"]), dtype=dtype)


def save_checkpoint(net: Network, path) -> None:
    """Write parameters as little-endian records in layer order."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(bytes([CHECKPOINT_VERSION]))
        for pid, p in net.params.items():
            ident = pid.encode("utf-8")
            fh.write(struct.pack("<I", len(ident)))
            fh.write(ident)
            fh.write(struct.pack("<I", p.data.ndim))
            fh.write(struct.pack(f"<{p.data.ndim}I", *p.data.shape))
            fh.write(np.ascontiguousarray(p.data, dtype="<f4").tobytes())


def load_checkpoint(net: Network, path) -> None:
    """Load a checkpoint into an already-built network, matching by id."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r} at offset 0")
    if len(blob) < 5:
        raise FormatError(f"{path}: truncated header at offset {len(blob)}")
    if blob[4] != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported version {blob[4]} at offset 4")
    off = 5
    seen: set[str] = set()
    while off < len(blob):
        if off + 4 > len(blob):
            raise FormatError(f"{path}: truncated id length at offset {off}")
        (id_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        if off + id_len > len(blob):
            raise FormatError(f"{path}: truncated id at offset {off}")
        pid = blob[off : off + id_len].decode("utf-8")
        off += id_len
        if off + 4 > len(blob):
            raise FormatError(f"{path}: truncated rank at offset {off}")
        (rank,) = struct.unpack_from("<I", blob, off)
        off += 4
        if off + 4 * rank > len(blob):
            raise FormatError(f"{path}: truncated extents at offset {off}")
        extents = struct.unpack_from(f"<{rank}I", blob, off)
        off += 4 * rank
        count = int(np.prod(extents)) if rank else 1
        if off + 4 * count > len(blob):
            raise FormatError(f"{path}: truncated elements at offset {off}")
        data = np.frombuffer(blob, dtype="<f4", count=count, offset=off).reshape(extents)
        off += 4 * count
        if pid not in net.params:
            raise FormatError(f"{path}: unknown parameter {pid!r} at offset {off}")
        p = net.params[pid]
        if p.data.shape != tuple(extents):
            raise FormatError(f"{path}: parameter {pid!r} has extents {extents}, expected {p.data.shape}")
        p.data = data.astype(p.dtype).copy()
        seen.add(pid)
    missing = set(net.params) - seen
    if missing:
        raise FormatError(f"{path}: checkpoint missing parameters {sorted(missing)}")

"""Small fully-connected classifier split into a feature extractor and a
linear head.

Hidden layers use ReLU (subgradient 0 at the kink); the last hidden layer is
the "feature" layer, where any feature-space loss injects its gradient.  The
final affine layer produces logits.  The same class serves as the stage-1
aligner and the stage-2 student.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .numeric import Rng, as_matrix, matmul

CHECKPOINT_MAGIC = "spcl-ckpt v1"


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_dims: tuple[int, ...]
    num_classes: int
    init_seed: int = 0
    init_scale_rule: str = "scaled-by-fan-in"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(w) for w in self.hidden_dims))
        dims = (self.input_dim, *self.hidden_dims, self.num_classes)
        if any(w < 1 for w in dims):
            raise ValueError(f"all layer widths must be >= 1, got {dims}")
        if not self.hidden_dims:
            raise ValueError("at least one hidden layer is required")
        if self.init_scale_rule != "scaled-by-fan-in":
            raise ValueError(f"unknown init_scale_rule {self.init_scale_rule!r}")

    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per layer, feature extractor first, head last."""
        dims = (self.input_dim, *self.hidden_dims, self.num_classes)
        return [(dims[i], dims[i + 1]) for i in range(len(dims) - 1)]


def default_spec(input_dim: int, num_classes: int, init_seed: int = 0) -> MlpSpec:
    """The house architecture: input -> 64 -> 32 -> classes, 32-wide feature layer."""
    return MlpSpec(input_dim, (64, 32), num_classes, init_seed)


@dataclass
class MlpModel:
    spec: MlpSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        expected = self.spec.layer_dims()
        if len(self.weights) != len(expected) or len(self.biases) != len(expected):
            raise ValueError(
                f"expected {len(expected)} layers, got {len(self.weights)} weights "
                f"and {len(self.biases)} biases"
            )
        for k, (fan_in, fan_out) in enumerate(expected):
            w, b = self.weights[k], self.biases[k]
            if w.shape != (fan_in, fan_out):
                raise ValueError(f"layer {k}: weight shape {w.shape} != {(fan_in, fan_out)}")
            if b.shape != (fan_out,):
                raise ValueError(f"layer {k}: bias shape {b.shape} != {(fan_out,)}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {k}: non-finite parameters")

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "MlpModel":
        return MlpModel(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class ForwardTrace:
    """Cached intermediates of one forward pass, consumed by backward()."""

    inputs: np.ndarray
    pre_activations: list[np.ndarray]  # one per hidden layer
    activations: list[np.ndarray]  # post-ReLU, one per hidden layer
    features: np.ndarray  # last hidden activation
    logits: np.ndarray


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def init_model(spec: MlpSpec) -> MlpModel:
    """Weights ~ N(0, 1/fan_in) drawn layer by layer in row-major order from a
    generator seeded at ``init_seed``; biases start at zero."""
    rng = Rng(spec.init_seed)
    weights, biases = [], []
    for fan_in, fan_out in spec.layer_dims():
        scale = 1.0 / np.sqrt(fan_in)
        weights.append(rng.gaussian_matrix(fan_in, fan_out, scale=scale))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MlpModel(spec, weights, biases)


def forward(model: MlpModel, x: np.ndarray) -> ForwardTrace:
    """Run the network on a batch, caching everything backward() needs."""
    x = as_matrix(x, "input batch")
    if x.shape[1] != model.spec.input_dim:
        raise ValueError(
            f"input has {x.shape[1]} columns, model expects {model.spec.input_dim}"
        )
    pre, act = [], []
    a = x
    for k in range(model.num_layers - 1):
        z = matmul(a, model.weights[k]) + model.biases[k]
        a = np.maximum(z, 0.0)
        pre.append(z)
        act.append(a)
    logits = matmul(a, model.weights[-1]) + model.biases[-1]
    return ForwardTrace(inputs=x, pre_activations=pre, activations=act, features=a, logits=logits)


def backward(
    model: MlpModel,
    trace: ForwardTrace,
    dloss_dlogits: np.ndarray,
    dloss_dfeatures: np.ndarray | None = None,
) -> Gradients:
    """Exact parameter gradients of a scalar loss given its logit gradient and,
    optionally, an extra gradient injected at the feature layer (the two
    contributions are summed there)."""
    dlogits = np.asarray(dloss_dlogits, dtype=np.float64)
    if dlogits.shape != trace.logits.shape:
        raise ValueError(f"dloss_dlogits shape {dlogits.shape} != logits {trace.logits.shape}")

    n_layers = model.num_layers
    dW: list[np.ndarray | None] = [None] * n_layers
    db: list[np.ndarray | None] = [None] * n_layers

    dW[-1] = matmul(np.ascontiguousarray(trace.features.T), dlogits)
    db[-1] = dlogits.sum(axis=0)

    da = matmul(dlogits, np.ascontiguousarray(model.weights[-1].T))
    if dloss_dfeatures is not None:
        dfeat = np.asarray(dloss_dfeatures, dtype=np.float64)
        if dfeat.shape != trace.features.shape:
            raise ValueError(
                f"dloss_dfeatures shape {dfeat.shape} != features {trace.features.shape}"
            )
        da = da + dfeat

    for k in range(n_layers - 2, -1, -1):
        dz = da * (trace.pre_activations[k] > 0.0)
        prev = trace.inputs if k == 0 else trace.activations[k - 1]
        dW[k] = matmul(np.ascontiguousarray(prev.T), dz)
        db[k] = dz.sum(axis=0)
        if k > 0:
            da = matmul(dz, np.ascontiguousarray(model.weights[k].T))
    return Gradients(weights=dW, biases=db)  # type: ignore[arg-type]


def save_checkpoint(model: MlpModel, path: str | os.PathLike) -> None:
    """Text checkpoint: magic line, layer count, per-layer ``rows cols``, then
    per layer the weight rows and the bias line at 17 significant digits."""
    lines = [CHECKPOINT_MAGIC, str(model.num_layers)]
    for w in model.weights:
        lines.append(f"{w.shape[0]} {w.shape[1]}")
    for w, b in zip(model.weights, model.biases):
        for i in range(w.shape[0]):
            lines.append(" ".join(f"{v:.17g}" for v in w[i]))
        lines.append(" ".join(f"{v:.17g}" for v in b))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path: str | os.PathLike, expected_spec: MlpSpec | None = None) -> MlpModel:
    """Bit-exact inverse of :func:`save_checkpoint`.

    When ``expected_spec`` is given, its layer shapes must match the file.
    The reconstructed spec carries init_seed 0 (initialization state is not
    part of a trained checkpoint).
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    pos = 0

    def take(what: str) -> str:
        nonlocal pos
        if pos >= len(lines):
            raise ValueError(f"{path}: truncated checkpoint: expected {what} at line {pos + 1}")
        line = lines[pos]
        pos += 1
        return line

    if take("magic header") != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic line)")
    try:
        n_layers = int(take("layer count"))
    except ValueError:
        raise ValueError(f"{path}: layer count line is not an integer") from None
    if n_layers < 2:
        raise ValueError(f"{path}: need at least 2 layers, got {n_layers}")

    shapes = []
    for k in range(n_layers):
        toks = take(f"shape of layer {k}").split()
        if len(toks) != 2:
            raise ValueError(f"{path}: line {pos}: layer shape must be 'rows cols'")
        try:
            shapes.append((int(toks[0]), int(toks[1])))
        except ValueError:
            raise ValueError(f"{path}: line {pos}: layer shape must be two integers") from None
    for k in range(n_layers - 1):
        if shapes[k][1] != shapes[k + 1][0]:
            raise ValueError(
                f"{path}: layer {k} output {shapes[k][1]} != layer {k + 1} input {shapes[k + 1][0]}"
            )

    def parse_row(expect: int, what: str) -> np.ndarray:
        toks = take(what).split()
        if len(toks) != expect:
            raise ValueError(
                f"{path}: line {pos}: expected {expect} values for {what}, found {len(toks)}"
            )
        try:
            return np.array([float(t) for t in toks], dtype=np.float64)
        except ValueError:
            raise ValueError(f"{path}: line {pos}: non-numeric value in {what}") from None

    weights, biases = [], []
    for k, (rows, cols) in enumerate(shapes):
        w = np.empty((rows, cols), dtype=np.float64)
        for i in range(rows):
            w[i] = parse_row(cols, f"layer {k} weight row {i}")
        weights.append(w)
        biases.append(parse_row(cols, f"layer {k} bias"))

    spec = MlpSpec(
        input_dim=shapes[0][0],
        hidden_dims=tuple(s[1] for s in shapes[:-1]),
        num_classes=shapes[-1][1],
        init_seed=0,
    )
    if expected_spec is not None and spec.layer_dims() != expected_spec.layer_dims():
        raise ValueError(
            f"{path}: checkpoint layers {spec.layer_dims()} do not match "
            f"expected {expected_spec.layer_dims()}"
        )
    return MlpModel(spec if expected_spec is None else expected_spec, weights, biases)

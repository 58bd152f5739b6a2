"""Two-layer Q-network with hand-written forward and backward passes.

Architecture: ``256 -> 128`` linear, ReLU, dropout, ``128 -> 4`` linear.
Dropout is inverted: at train time kept units are divided by ``1 - rate``,
so evaluation uses the activations as they are. Everything runs in float64.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np

from g2048.rng import Rng

N_IN = 256
N_HIDDEN = 128
N_OUT = 4
PARAM_NAMES = ("layer1.weights", "layer1.bias", "layer2.weights", "layer2.bias")
MODEL_MAGIC = "Q48-MODEL"
MODEL_VERSION = "v1"


class Mode(enum.Enum):
    TRAIN = "train"
    EVAL = "eval"


class ModelFormatError(ValueError):
    pass


@dataclass
class LinearLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(f"shape mismatch: weights {self.weights.shape}, bias {self.bias.shape}")

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: Rng) -> "LinearLayer":
        bound = np.sqrt(6.0 / n_in)
        return cls(rng.uniform(-bound, bound, (n_out, n_in)), np.zeros(n_out))


@dataclass
class QNetwork:
    layer1: LinearLayer
    layer2: LinearLayer
    dropout_rate: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.layer1.weights.shape != (N_HIDDEN, N_IN) or self.layer2.weights.shape != (N_OUT, N_HIDDEN):
            raise ValueError("QNetwork architecture is fixed at 256 -> 128 -> 4")

    @classmethod
    def init(cls, rng: Rng, dropout_rate: float = 0.2) -> "QNetwork":
        """Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)) weights, zero biases."""
        return cls(LinearLayer.init(N_IN, N_HIDDEN, rng), LinearLayer.init(N_HIDDEN, N_OUT, rng), dropout_rate)

    def params(self) -> dict[str, np.ndarray]:
        return {
            "layer1.weights": self.layer1.weights,
            "layer1.bias": self.layer1.bias,
            "layer2.weights": self.layer2.weights,
            "layer2.bias": self.layer2.bias,
        }

    def copy(self) -> "QNetwork":
        return QNetwork(
            LinearLayer(self.layer1.weights.copy(), self.layer1.bias.copy()),
            LinearLayer(self.layer2.weights.copy(), self.layer2.bias.copy()),
            self.dropout_rate,
        )

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x, Mode.EVAL)[0]


init = QNetwork.init


@dataclass
class ForwardCache:
    mode: Mode
    x: np.ndarray
    pre1: np.ndarray
    hidden: np.ndarray  # post ReLU and dropout
    mask: np.ndarray | None  # inverted-dropout multipliers, None when not applied


def forward(net: QNetwork, x: np.ndarray, mode: Mode = Mode.EVAL, rng: Rng | None = None):
    """Q-values for one input ``(256,)`` or a batch ``(B, 256)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != N_IN or x.ndim not in (1, 2):
        raise ValueError(f"expected input of shape (256,) or (B, 256), got {x.shape}")
    pre1 = x @ net.layer1.weights.T + net.layer1.bias
    hidden = np.maximum(pre1, 0.0)
    mask = None
    if mode is Mode.TRAIN and net.dropout_rate > 0.0:
        if rng is None:
            raise ValueError("train-mode forward with dropout needs an rng")
        keep = rng.random_array(hidden.shape) >= net.dropout_rate
        mask = keep / (1.0 - net.dropout_rate)
        hidden = hidden * mask
    q = hidden @ net.layer2.weights.T + net.layer2.bias
    return q, ForwardCache(mode, x, pre1, hidden, mask)


def backward(net: QNetwork, cache: ForwardCache, grad_q: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of ``sum(q * grad_q)`` w.r.t. every parameter.

    For a batched cache the gradients are summed over the batch.
    """
    if cache.mode is not Mode.TRAIN:
        raise ValueError("backward needs the cache of a train-mode forward")
    grad_q = np.asarray(grad_q, dtype=np.float64)
    if grad_q.shape[-1] != N_OUT or grad_q.shape[:-1] != cache.x.shape[:-1]:
        raise ValueError(f"grad_q shape {grad_q.shape} does not match cached batch")
    x, hidden = np.atleast_2d(cache.x), np.atleast_2d(cache.hidden)
    g = np.atleast_2d(grad_q)
    d_w2 = g.T @ hidden
    d_b2 = g.sum(axis=0)
    d_hidden = g @ net.layer2.weights
    if cache.mask is not None:
        d_hidden = d_hidden * np.atleast_2d(cache.mask)
    d_pre1 = d_hidden * (np.atleast_2d(cache.pre1) > 0.0)
    d_w1 = d_pre1.T @ x
    d_b1 = d_pre1.sum(axis=0)
    return {"layer1.weights": d_w1, "layer1.bias": d_b1, "layer2.weights": d_w2, "layer2.bias": d_b2}


def mse_td_loss(q_sa: float, target: float) -> tuple[float, float]:
    """Squared TD error and its derivative with respect to ``q_sa``."""
    diff = target - q_sa
    return diff * diff, -2.0 * diff


# ---------------------------------------------------------------------------
# Adam


@dataclass
class OptimizerState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_network(cls, net: QNetwork, **kwargs) -> "OptimizerState":
        params = net.params()
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            **kwargs,
        )


def optimizer_step(net: QNetwork, opt: OptimizerState, grads: dict[str, np.ndarray], lr: float) -> QNetwork:
    """Bias-corrected Adam update, applied in place; returns ``net``."""
    opt.step += 1
    c1 = 1.0 - opt.beta1**opt.step
    c2 = 1.0 - opt.beta2**opt.step
    for name, p in net.params().items():
        g = grads[name]
        m, v = opt.m[name], opt.v[name]
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)
    return net


# ---------------------------------------------------------------------------
# model files


def save(net: QNetwork, path: str | os.PathLike) -> None:
    """Write the line-oriented text format.

    Header ``Q48-MODEL v1 in=256 hidden=128 out=4 dropout=<rate>``, then for
    each parameter a line ``<name> <rows> <cols>`` followed by its values,
    one matrix row per line (a bias is a single row). Values use ``repr`` so
    float64 round-trips exactly.
    """
    lines = [f"{MODEL_MAGIC} {MODEL_VERSION} in={N_IN} hidden={N_HIDDEN} out={N_OUT} dropout={net.dropout_rate!r}"]
    for name, p in net.params().items():
        mat = np.atleast_2d(p)
        lines.append(f"{name} {mat.shape[0]} {mat.shape[1]}")
        lines.extend(" ".join(repr(float(v)) for v in row) for row in mat)
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def _parse_header(line: str) -> float:
    parts = line.split()
    if len(parts) != 6 or parts[0] != MODEL_MAGIC:
        raise ModelFormatError(f"not a model file header: {line!r}")
    if parts[1] != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {parts[1]!r}")
    fields = dict(p.split("=", 1) for p in parts[2:] if "=" in p)
    dims = {"in": N_IN, "hidden": N_HIDDEN, "out": N_OUT}
    for key, expected in dims.items():
        if fields.get(key) != str(expected):
            raise ModelFormatError(f"model has {key}={fields.get(key)}, expected {expected}")
    try:
        return float(fields["dropout"])
    except (KeyError, ValueError) as exc:
        raise ModelFormatError("bad dropout field in header") from exc


def load(path: str | os.PathLike) -> QNetwork:
    with open(path, encoding="ascii") as f:
        lines = f.read().splitlines()
    if not lines:
        raise ModelFormatError(f"{path}: empty model file")
    dropout = _parse_header(lines[0])
    expected = {
        "layer1.weights": (N_HIDDEN, N_IN),
        "layer1.bias": (1, N_HIDDEN),
        "layer2.weights": (N_OUT, N_HIDDEN),
        "layer2.bias": (1, N_OUT),
    }
    params = {}
    pos = 1
    for name in PARAM_NAMES:
        if pos >= len(lines):
            raise ModelFormatError(f"{path}: missing block {name}")
        head = lines[pos].split()
        if len(head) != 3 or head[0] != name or (int(head[1]), int(head[2])) != expected[name]:
            raise ModelFormatError(f"{path}: bad block header {lines[pos]!r}, expected {name} {expected[name]}")
        rows, cols = expected[name]
        block = lines[pos + 1 : pos + 1 + rows]
        if len(block) != rows:
            raise ModelFormatError(f"{path}: truncated block {name}")
        try:
            mat = np.array([[float(v) for v in row.split()] for row in block], dtype=np.float64)
        except ValueError as exc:
            raise ModelFormatError(f"{path}: non-numeric value in {name}") from exc
        if mat.shape != (rows, cols) or not np.all(np.isfinite(mat)):
            raise ModelFormatError(f"{path}: block {name} has shape {mat.shape} or non-finite values")
        params[name] = mat
        pos += 1 + rows
    if any(line.strip() for line in lines[pos:]):
        raise ModelFormatError(f"{path}: trailing data after last block")
    return QNetwork(
        LinearLayer(params["layer1.weights"], params["layer1.bias"][0]),
        LinearLayer(params["layer2.weights"], params["layer2.bias"][0]),
        dropout,
    )

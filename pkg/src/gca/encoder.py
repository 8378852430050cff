"""Two-layer graph convolutional encoder and MLP projection head.

The architecture is fixed, so the backward pass is written out by hand
instead of going through an autodiff tape. Finite-difference checks in
the test suite guard every formula here.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from gca.graph import NormAdjacency

ACTIVATIONS = ("relu", "prelu", "leaky_fixed")

# deterministic stand-in for randomized leaky units: fixed slope at the
# midpoint of the usual [1/8, 1/3] sampling interval
LEAKY_FIXED_SLOPE = 0.229

PRELU_INIT_SLOPE = 0.25

_ALIASES = {"rrelu": "leaky_fixed"}


def resolve_activation(name: str) -> str:
    """Canonical activation name; unknown names raise."""
    canon = _ALIASES.get(name.lower(), name.lower())
    if canon not in ACTIVATIONS:
        raise ValueError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}")
    return canon


def default_slopes(activation: str) -> np.ndarray:
    """Initial negative-branch slopes for the two encoder layers."""
    canon = resolve_activation(activation)
    if canon == "relu":
        return np.zeros(2)
    if canon == "prelu":
        return np.full(2, PRELU_INIT_SLOPE)
    return np.full(2, LEAKY_FIXED_SLOPE)


@dataclass
class ModelParams:
    """Encoder weights (W1, W2), projector weights (G1, b1, G2, b2) and
    the activation choice with its per-layer negative slopes.

    Slopes are trainable only for prelu; relu keeps them at zero and
    leaky_fixed treats them as constants.
    """

    W1: np.ndarray
    W2: np.ndarray
    G1: np.ndarray
    b1: np.ndarray
    G2: np.ndarray
    b2: np.ndarray
    activation: str = "relu"
    slopes: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self) -> None:
        self.activation = resolve_activation(self.activation)
        f, h = self.W1.shape
        h2, fp = self.W2.shape
        if h2 != h:
            raise ValueError("W1 and W2 disagree on the hidden width")
        for name, mat in (("G1", self.G1), ("G2", self.G2)):
            if mat.shape != (fp, fp):
                raise ValueError(f"{name} must be {fp}x{fp}, got {mat.shape}")
        if self.b1.shape != (fp,) or self.b2.shape != (fp,):
            raise ValueError("projector biases must match the output width")
        if self.slopes.shape != (2,):
            raise ValueError("one slope per encoder layer expected")
        for name in ("W1", "W2", "G1", "b1", "G2", "b2", "slopes"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite entries in parameter {name}")

    @property
    def num_features(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W2.shape[1]

    def weight_items(self) -> list[tuple[str, np.ndarray]]:
        """Parameters subject to weight decay."""
        return [("W1", self.W1), ("W2", self.W2), ("G1", self.G1), ("G2", self.G2)]

    def param_items(self) -> list[tuple[str, np.ndarray]]:
        """All trainable tensors in a fixed order."""
        items = [
            ("W1", self.W1),
            ("W2", self.W2),
            ("G1", self.G1),
            ("b1", self.b1),
            ("G2", self.G2),
            ("b2", self.b2),
        ]
        if self.activation == "prelu":
            items.append(("slopes", self.slopes))
        return items


@dataclass(frozen=True)
class ForwardTrace:
    """Intermediates cached by encode for the backward pass."""

    s: NormAdjacency
    x: np.ndarray      # input features, float64
    pre1: np.ndarray   # S (X W1)
    a1: np.ndarray     # act(pre1)
    pre2: np.ndarray   # S (a1 W2)
    h: np.ndarray      # act(pre2)


def _act(pre: np.ndarray, slope: float) -> np.ndarray:
    return np.where(pre > 0.0, pre, slope * pre)


def _act_deriv(pre: np.ndarray, slope: float) -> np.ndarray:
    return np.where(pre > 0.0, 1.0, slope)


def encode(
    params: ModelParams, s: NormAdjacency, x: np.ndarray
) -> tuple[np.ndarray, ForwardTrace]:
    """H = act(S act(S X W1) W2); returns embeddings and the trace."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape != (s.shape[0], params.num_features):
        raise ValueError(
            f"feature matrix {x.shape} does not match adjacency {s.shape} "
            f"and parameter width {params.num_features}"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        pre1 = s @ (x @ params.W1)
        a1 = _act(pre1, params.slopes[0])
        if not np.all(np.isfinite(a1)):
            raise ValueError("non-finite values after encoder layer 1")
        pre2 = s @ (a1 @ params.W2)
        h = _act(pre2, params.slopes[1])
        if not np.all(np.isfinite(h)):
            raise ValueError("non-finite values after encoder layer 2")
    return h, ForwardTrace(s=s, x=x, pre1=pre1, a1=a1, pre2=pre2, h=h)


def project(params: ModelParams, h: np.ndarray) -> np.ndarray:
    """Z = relu(h G1 + b1) G2 + b2, applied row-wise."""
    hidden = np.maximum(h @ params.G1 + params.b1, 0.0)
    return hidden @ params.G2 + params.b2


def zero_gradients(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in params.param_items()}


def _accumulate(
    params: ModelParams,
    trace: ForwardTrace,
    grad_z: np.ndarray,
    grads: dict[str, np.ndarray],
) -> None:
    hp = trace.h @ params.G1 + params.b1
    r = np.maximum(hp, 0.0)

    grads["G2"] += r.T @ grad_z
    grads["b2"] += grad_z.sum(axis=0)
    d_hp = (grad_z @ params.G2.T) * (hp > 0.0)
    grads["G1"] += trace.h.T @ d_hp
    grads["b1"] += d_hp.sum(axis=0)
    d_h = d_hp @ params.G1.T

    s_t = trace.s.T
    d_pre2 = d_h * _act_deriv(trace.pre2, params.slopes[1])
    d_a1w2 = s_t @ d_pre2
    grads["W2"] += trace.a1.T @ d_a1w2
    d_a1 = d_a1w2 @ params.W2.T
    d_pre1 = d_a1 * _act_deriv(trace.pre1, params.slopes[0])
    grads["W1"] += trace.x.T @ (s_t @ d_pre1)

    if params.activation == "prelu":
        grads["slopes"][0] += np.sum(d_a1 * np.minimum(trace.pre1, 0.0))
        grads["slopes"][1] += np.sum(d_h * np.minimum(trace.pre2, 0.0))


def backward(
    params: ModelParams,
    traces: list[ForwardTrace],
    grads_z: list[np.ndarray],
) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every trainable tensor, given
    the loss gradient w.r.t. each view's projected output Z.

    Views are accumulated sequentially in list order so the result does
    not depend on scheduling.
    """
    if len(traces) != len(grads_z):
        raise ValueError("one upstream gradient per trace required")
    grads = zero_gradients(params)
    for trace, grad_z in zip(traces, grads_z):
        if grad_z.shape != (trace.h.shape[0], params.out_dim):
            raise ValueError("upstream gradient shape does not match the trace")
        _accumulate(params, trace, grad_z, grads)
    return grads


_MAGIC = b"GCACKPT\x00"
_VERSION = 1
_ACT_CODES = {"relu": 0, "prelu": 1, "leaky_fixed": 2}
_ACT_NAMES = {code: name for name, code in _ACT_CODES.items()}


def save_checkpoint(params: ModelParams, path: str) -> None:
    """Binary little-endian dump: header (shapes, activation, slopes)
    followed by the six matrices row-major as 64-bit reals."""
    f, h, fp = params.num_features, params.hidden_dim, params.out_dim
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, _ACT_CODES[params.activation]))
        fh.write(struct.pack("<QQQ", f, h, fp))
        fh.write(struct.pack("<dd", *params.slopes))
        for _, arr in (
            ("W1", params.W1),
            ("W2", params.W2),
            ("G1", params.G1),
            ("b1", params.b1),
            ("G2", params.G2),
            ("b2", params.b2),
        ):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str) -> ModelParams:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path} is not a model checkpoint")
        version, act_code = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        if act_code not in _ACT_NAMES:
            raise ValueError(f"unknown activation code {act_code}")
        f, h, fp = struct.unpack("<QQQ", fh.read(24))
        slopes = np.array(struct.unpack("<dd", fh.read(16)))

        def read_array(shape: tuple[int, ...]) -> np.ndarray:
            count = int(np.prod(shape))
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"{path} is truncated")
            return np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)

        params = ModelParams(
            W1=read_array((f, h)),
            W2=read_array((h, fp)),
            G1=read_array((fp, fp)),
            b1=read_array((fp,)),
            G2=read_array((fp, fp)),
            b2=read_array((fp,)),
            activation=_ACT_NAMES[act_code],
            slopes=slopes,
        )
        if fh.read(1):
            raise ValueError(f"{path} has trailing bytes")
        return params

"""Parameter initialization, Adam, and the contrastive training loop.

A run is fully determined by (graph, config): one generator seeded from
the config drives initialization and every per-epoch Bernoulli draw in a
fixed order.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from gca.augment import AugmentationPlan, build_plan, sample_view
from gca.centrality import MEASURES, compute_centrality
from gca.encoder import (
    ModelParams,
    backward,
    default_slopes,
    encode,
    project,
    resolve_activation,
)
from gca.graph import Graph, normalized_adjacency
from gca.objective import contrastive_objective

# ablation switches: (adaptive_topology, adaptive_attribute)
VARIANTS = {
    "gca": (True, True),
    "gca-t": (False, True),
    "gca-a": (True, False),
    "gca-t-a": (False, False),
}


class TrainingDivergedError(RuntimeError):
    """Raised when the objective stops being finite; carries the epoch."""

    def __init__(self, message: str, epoch: int) -> None:
        super().__init__(message)
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    p_e1: float = 0.2
    p_e2: float = 0.4
    p_f1: float = 0.1
    p_f2: float = 0.1
    p_tau: float = 0.7
    tau: float = 0.6
    learning_rate: float = 0.01
    epochs: int = 200
    hidden_dim: int = 32
    activation: str = "prelu"
    weight_decay: float = 1e-5
    centrality_measure: str = "degree"
    adaptive_topology: bool = True
    adaptive_attribute: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("p_e1", "p_e2", "p_f1", "p_f2"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {value}")
        if not 0.0 < self.p_tau < 1.0:
            raise ValueError(f"p_tau must lie in (0, 1), got {self.p_tau}")
        if self.tau <= 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")
        if self.hidden_dim < 1:
            raise ValueError(f"hidden_dim must be at least 1, got {self.hidden_dim}")
        if self.weight_decay < 0.0:
            raise ValueError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        if self.centrality_measure not in MEASURES:
            raise ValueError(
                f"unknown centrality_measure {self.centrality_measure!r}; "
                f"expected one of {MEASURES}"
            )
        resolve_activation(self.activation)

    def with_variant(self, variant: str) -> "TrainConfig":
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; expected one of {sorted(VARIANTS)}")
        topo, attr = VARIANTS[variant]
        return dataclasses.replace(self, adaptive_topology=topo, adaptive_attribute=attr)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def parse_config(text: str) -> TrainConfig:
    """Flat ``key = value`` lines; '#' starts a comment; unknown keys are
    errors so hyperparameter typos cannot silently change a run."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        kind = _FIELD_TYPES[key]
        if kind == "bool":
            word = value.lower()
            if word not in _BOOL_WORDS:
                raise ValueError(f"config line {lineno}: {key} expects true/false, got {value!r}")
            values[key] = _BOOL_WORDS[word]
        elif kind == "int":
            values[key] = int(value)
        elif kind == "float":
            values[key] = float(value)
        else:
            values[key] = value
    return TrainConfig(**values)


def format_config(config: TrainConfig) -> str:
    lines = []
    for f in dataclasses.fields(TrainConfig):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def glorot_init(shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Uniform on +-sqrt(6 / (fan_in + fan_out))."""
    fan_in, fan_out = shape
    if fan_in < 1 or fan_out < 1:
        raise ValueError(f"positive dimensions required, got {shape}")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(
    num_features: int, hidden_dim: int, activation: str, rng: np.random.Generator
) -> ModelParams:
    """Glorot-initialized weights, zero biases, default slopes. Draw
    order (W1, W2, G1, G2) is part of the determinism contract."""
    return ModelParams(
        W1=glorot_init((num_features, hidden_dim), rng),
        W2=glorot_init((hidden_dim, hidden_dim), rng),
        G1=glorot_init((hidden_dim, hidden_dim), rng),
        b1=np.zeros(hidden_dim),
        G2=glorot_init((hidden_dim, hidden_dim), rng),
        b2=np.zeros(hidden_dim),
        activation=activation,
        slopes=default_slopes(activation),
    )


# parameters subject to weight decay (weight matrices only)
_DECAYED = frozenset({"W1", "W2", "G1", "G2"})


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: ModelParams) -> AdamState:
    return AdamState(
        m={name: np.zeros_like(arr) for name, arr in params.param_items()},
        v={name: np.zeros_like(arr) for name, arr in params.param_items()},
    )


def adam_step(
    state: AdamState,
    params: ModelParams,
    grads: dict[str, np.ndarray],
    lr: float,
    weight_decay: float = 0.0,
) -> tuple[ModelParams, AdamState]:
    """One in-place Adam update; weight decay is folded into the gradient
    (g <- g + wd * theta) for weight matrices, never biases or slopes."""
    state.t += 1
    correct1 = 1.0 - state.beta1**state.t
    correct2 = 1.0 - state.beta2**state.t
    for name, arr in params.param_items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for parameter {name}")
        if weight_decay != 0.0 and name in _DECAYED:
            g = g + weight_decay * arr
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[name] / correct1
        v_hat = state.v[name] / correct2
        arr -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


def build_view_plans(
    graph: Graph, config: TrainConfig
) -> tuple[AugmentationPlan, AugmentationPlan]:
    """The two views share one centrality computation and differ only in
    their budgets."""
    nc = None
    if config.adaptive_topology or config.adaptive_attribute:
        nc = compute_centrality(graph, config.centrality_measure)
    plans = []
    for p_e, p_f in ((config.p_e1, config.p_f1), (config.p_e2, config.p_f2)):
        plans.append(
            build_plan(
                graph,
                config.centrality_measure,
                p_e,
                p_f,
                config.p_tau,
                adaptive_topology=config.adaptive_topology,
                adaptive_attribute=config.adaptive_attribute,
                nc=nc,
            )
        )
    return plans[0], plans[1]


def train(graph: Graph, config: TrainConfig) -> tuple[ModelParams, np.ndarray]:
    """Contrastive training; returns final parameters and the per-epoch
    loss series (the negated objective, so lower is better)."""
    rng = np.random.default_rng(config.seed)
    plan1, plan2 = build_view_plans(graph, config)
    params = init_params(graph.num_features, config.hidden_dim, config.activation, rng)
    state = init_adam(params)
    history = np.empty(config.epochs)

    for epoch in range(config.epochs):
        view1 = sample_view(graph, plan1, rng)
        view2 = sample_view(graph, plan2, rng)
        try:
            h1, trace1 = encode(params, normalized_adjacency(view1), view1.features)
            h2, trace2 = encode(params, normalized_adjacency(view2), view2.features)
            z1 = project(params, h1)
            z2 = project(params, h2)
            report = contrastive_objective(z1, z2, config.tau)
        except ValueError as exc:
            if "non-finite" in str(exc) or "zero norm" in str(exc):
                raise TrainingDivergedError(
                    f"training diverged at epoch {epoch}: {exc}", epoch
                ) from exc
            raise
        if not np.isfinite(report.J):
            raise TrainingDivergedError(
                f"training diverged at epoch {epoch}: objective is not finite", epoch
            )
        history[epoch] = -report.J
        grads = backward(params, [trace1, trace2], [-report.grad_U, -report.grad_V])
        adam_step(state, params, grads, config.learning_rate, config.weight_decay)
    return params, history


def embed(params: ModelParams, graph: Graph) -> np.ndarray:
    """Encoder output on the original uncorrupted graph; this is the
    representation the probe consumes, not the projected rows."""
    h, _ = encode(params, normalized_adjacency(graph), graph.features)
    return h


def write_loss_csv(history: np.ndarray, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(history):
            fh.write(f"{epoch},{float(loss)!r}\n")

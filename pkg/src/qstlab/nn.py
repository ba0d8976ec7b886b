"""Small feed-forward networks and the zeroth-order training machinery.

Three heads share one flat parameter vector: per-particle bank weights,
per-particle perturbation sizes, and a per-step guess score. Episodes
contain sampling and keep-the-best selections, so training uses an
antithetic evolution-strategies gradient estimate with common random
numbers instead of backpropagation; any smooth first-order optimizer then
applies, and Adam is provided.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

EPSILON_MAX = 0.5
CHECKPOINT_FORMAT = "qstlab-checkpoint"
CHECKPOINT_VERSION = 1

# Particle features: L1 distance, L2 distance, log1p(copies), log1p(step).
N_PARTICLE_FEATURES = 4
# Score features: weighted L1/L2, min L1/L2, weight entropy, log1p(copies), log1p(step).
N_SCORE_FEATURES = 7

# Fixed affine input scalings keep tanh units out of saturation at init;
# they are constants of the architecture, not trained.
_PARTICLE_SHIFT = np.array([0.5, 0.35, 7.0, 1.5])
_PARTICLE_SCALE = np.array([0.5, 0.35, 3.5, 1.0])
_SCORE_SHIFT = np.array([0.5, 0.35, 0.5, 0.35, 3.0, 7.0, 1.5])
_SCORE_SCALE = np.array([0.5, 0.35, 0.5, 0.35, 2.0, 3.5, 1.0])


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of one fully-connected network."""

    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    activation: str = "tanh"
    output_squash: str = "none"

    def __post_init__(self):
        dims = (self.input_dim, *self.hidden, self.output_dim)
        if any(d <= 0 for d in dims):
            raise ValueError("all layer widths must be positive")
        if self.activation not in ("tanh", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output_squash not in ("none", "sigmoid", "softplus"):
            raise ValueError(f"unknown output squash {self.output_squash!r}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = (self.input_dim, *self.hidden, self.output_dim)
        return list(zip(dims[:-1], dims[1:]))

    @property
    def n_params(self) -> int:
        return sum(fan_in * fan_out + fan_out for fan_in, fan_out in self.layer_dims)


def default_specs() -> dict[str, MlpSpec]:
    return {
        "weight_net": MlpSpec(N_PARTICLE_FEATURES, (32, 32), 1),
        "epsilon_net": MlpSpec(N_PARTICLE_FEATURES, (32, 32), 1, output_squash="sigmoid"),
        "score_net": MlpSpec(N_SCORE_FEATURES, (32, 32), 1),
    }


@dataclass
class ModelParameters:
    """Flat parameter vector with named per-head slices."""

    values: np.ndarray
    slices: dict[str, tuple[int, int]]
    specs: dict[str, MlpSpec]
    version: int = CHECKPOINT_VERSION
    init_seed: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        stops = sorted(self.slices.values())
        if stops[0][0] != 0 or stops[-1][1] != self.values.size or any(
            a[1] != b[0] for a, b in zip(stops[:-1], stops[1:])
        ):
            raise ValueError("named slices must partition the parameter vector")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("parameters must be finite")

    def head(self, name: str, values: np.ndarray | None = None) -> np.ndarray:
        start, stop = self.slices[name]
        return (self.values if values is None else values)[start:stop]

    def with_values(self, values: np.ndarray) -> "ModelParameters":
        return ModelParameters(values, self.slices, self.specs, self.version, self.init_seed)


def init_model(seed: int, specs: dict[str, MlpSpec] | None = None) -> ModelParameters:
    """Fan-in-scaled uniform initialization; biases start at zero."""
    specs = dict(specs or default_specs())
    rng = np.random.default_rng(seed)
    chunks = []
    slices = {}
    offset = 0
    for name, spec in specs.items():
        parts = []
        for fan_in, fan_out in spec.layer_dims:
            bound = 1.0 / np.sqrt(fan_in)
            parts.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
            parts.append(np.zeros(fan_out))
        theta = np.concatenate(parts)
        slices[name] = (offset, offset + theta.size)
        offset += theta.size
        chunks.append(theta)
    return ModelParameters(np.concatenate(chunks), slices, specs, init_seed=seed)


def mlp_forward(spec: MlpSpec, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Forward pass for one network; ``x`` is ``(input_dim,)`` or ``(N, input_dim)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != spec.input_dim:
        raise ValueError(f"input width {x.shape[1]} does not match spec input_dim {spec.input_dim}")
    if theta.shape != (spec.n_params,):
        raise ValueError(f"parameter slice has size {theta.size}, spec needs {spec.n_params}")
    h = x
    pos = 0
    layers = spec.layer_dims
    for i, (fan_in, fan_out) in enumerate(layers):
        w = theta[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = theta[pos : pos + fan_out]
        pos += fan_out
        h = h @ w + b
        if i < len(layers) - 1:
            h = np.tanh(h) if spec.activation == "tanh" else np.maximum(h, 0.0)
    if spec.output_squash == "sigmoid":
        h = 1.0 / (1.0 + np.exp(-h))
    elif spec.output_squash == "softplus":
        h = np.logaddexp(0.0, h)
    return h


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max())
    return z / z.sum()


def weight_head(model: ModelParameters, features: np.ndarray) -> np.ndarray:
    """Bank weights: per-particle logits softmaxed across the bank."""
    x = (features - _PARTICLE_SHIFT) / _PARTICLE_SCALE
    logits = mlp_forward(model.specs["weight_net"], model.head("weight_net"), x)[:, 0]
    return softmax(logits)


def epsilon_head(model: ModelParameters, features: np.ndarray, eps_max: float = EPSILON_MAX) -> np.ndarray:
    """Per-particle perturbation sizes in (0, eps_max)."""
    x = (features - _PARTICLE_SHIFT) / _PARTICLE_SCALE
    squashed = mlp_forward(model.specs["epsilon_net"], model.head("epsilon_net"), x)[:, 0]
    return eps_max * squashed


def score_head(model: ModelParameters, summary: np.ndarray) -> float:
    """Scalar guess score from bank-level distance and weight summaries."""
    x = (np.asarray(summary, dtype=float) - _SCORE_SHIFT) / _SCORE_SCALE
    return float(mlp_forward(model.specs["score_net"], model.head("score_net"), x)[0, 0])


def estimate_gradient(
    loss_fn,
    values: np.ndarray,
    rng: np.random.Generator,
    n_probes: int = 8,
    sigma: float = 0.05,
) -> np.ndarray:
    """Antithetic evolution-strategies gradient estimate.

    ``loss_fn(values, seed)`` must be deterministic given its arguments;
    each probe evaluates the +/- pair with a shared episode seed (common
    random numbers). Probes with non-finite losses are dropped and logged.
    """
    grad = np.zeros_like(values)
    used = 0
    for _ in range(n_probes):
        u = rng.standard_normal(values.size)
        seed = int(rng.integers(0, 2**63 - 1))
        loss_plus = loss_fn(values + sigma * u, seed)
        loss_minus = loss_fn(values - sigma * u, seed)
        if not (np.isfinite(loss_plus) and np.isfinite(loss_minus)):
            logger.warning("dropping probe with non-finite loss (%r, %r)", loss_plus, loss_minus)
            continue
        grad += ((loss_plus - loss_minus) / (2.0 * sigma)) * u
        used += 1
    return grad / max(used, 1)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)

    def to_dict(self) -> dict:
        return {"m": self.m.tolist(), "v": self.v.tolist(), "t": self.t}

    @classmethod
    def from_dict(cls, data: dict) -> "AdamState":
        return cls(np.asarray(data["m"], float), np.asarray(data["v"], float), int(data["t"]))


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(
    values: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    hyper: AdamHyper = AdamHyper(),
) -> tuple[np.ndarray, AdamState]:
    """One adaptive-moment descent step with bias correction."""
    t = state.t + 1
    m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grad
    v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * grad**2
    m_hat = m / (1.0 - hyper.beta1**t)
    v_hat = v / (1.0 - hyper.beta2**t)
    return values - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps), AdamState(m, v, t)


def _spec_to_dict(spec: MlpSpec) -> dict:
    return {
        "input_dim": spec.input_dim,
        "hidden": list(spec.hidden),
        "output_dim": spec.output_dim,
        "activation": spec.activation,
        "output_squash": spec.output_squash,
    }


def _spec_from_dict(data: dict) -> MlpSpec:
    return MlpSpec(
        int(data["input_dim"]),
        tuple(int(h) for h in data["hidden"]),
        int(data["output_dim"]),
        data["activation"],
        data["output_squash"],
    )


def save_checkpoint(path, model: ModelParameters, config_hash: str = "", training: dict | None = None) -> None:
    """Write a JSON checkpoint; float lists round-trip exactly through repr."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": model.version,
        "init_seed": model.init_seed,
        "config_hash": config_hash,
        "specs": {name: _spec_to_dict(spec) for name, spec in model.specs.items()},
        "slices": {name: list(span) for name, span in model.slices.items()},
        "values": model.values.tolist(),
        "training": training or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path) -> tuple[ModelParameters, dict]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    model = ModelParameters(
        np.asarray(doc["values"], dtype=float),
        {name: tuple(span) for name, span in doc["slices"].items()},
        {name: _spec_from_dict(spec) for name, spec in doc["specs"].items()},
        version=int(doc["version"]),
        init_seed=int(doc["init_seed"]),
    )
    return model, doc.get("training", {})


def params_digest(values: np.ndarray) -> str:
    """Short content hash of a parameter vector, for logs and result files."""
    return hashlib.sha256(np.asarray(values, float).tobytes()).hexdigest()[:12]

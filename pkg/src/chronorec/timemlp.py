"""Two-branch MLP mapping a query profile to a citing-time distribution.

Each input branch (content, node) runs through its own ReLU layer then a
sigmoid layer; the two 50-wide sigmoid outputs are concatenated, passed
through a shared ReLU layer, and projected to a softmax over the time slices.
The output layer carries no bias. Branch weights are separate per input:
the two feature spaces are unrelated, so sharing would be meaningless.

Training is cross-entropy under Adam. Everything here is plain numpy and
deterministic for a fixed seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from chronorec import binio
from chronorec.errors import DataError, NumericalError
from chronorec.profiles import QueryProfile

log = logging.getLogger(__name__)

HIDDEN = (70, 50, 80)
LOG_CLAMP = 1e-12

_MODEL_MAGIC = b"CRMLP1\n"


@dataclass
class MlpParams:
    """All learnable tensors. Branch layers are per-input; the trunk is shared."""

    w1_content: np.ndarray
    b1_content: np.ndarray
    w2_content: np.ndarray
    b2_content: np.ndarray
    w1_node: np.ndarray
    b1_node: np.ndarray
    w2_node: np.ndarray
    b2_node: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    w4: np.ndarray  # no output bias

    @property
    def in_dim(self) -> int:
        return self.w1_content.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w4.shape[0]

    def items(self) -> list[tuple[str, np.ndarray]]:
        """Fixed-order (name, array) pairs; the order pins update determinism."""
        return [
            ("w1_content", self.w1_content),
            ("b1_content", self.b1_content),
            ("w2_content", self.w2_content),
            ("b2_content", self.b2_content),
            ("w1_node", self.w1_node),
            ("b1_node", self.b1_node),
            ("w2_node", self.w2_node),
            ("b2_node", self.b2_node),
            ("w3", self.w3),
            ("b3", self.b3),
            ("w4", self.w4),
        ]

    def copy(self) -> "MlpParams":
        return MlpParams(**{name: arr.copy() for name, arr in self.items()})

    def save(self, path: str | Path) -> None:
        with Path(path).open("wb") as fh:
            fh.write(_MODEL_MAGIC)
            binio.write_u64(fh, self.in_dim)
            binio.write_u64(fh, self.out_dim)
            for dim in (self.w1_content.shape[0], self.w2_content.shape[0], self.w3.shape[0]):
                binio.write_u64(fh, dim)
            for _, arr in self.items():
                binio.write_array(fh, arr)

    @classmethod
    def load(cls, path: str | Path) -> "MlpParams":
        with Path(path).open("rb") as fh:
            binio.expect_magic(fh, _MODEL_MAGIC, "mlp model")
            for _ in range(5):  # header dims are redundant with array shapes
                binio.read_u64(fh)
            arrays = {name: binio.read_array(fh) for name in _PARAM_NAMES}
        return cls(**arrays)

    def dump_text(self, path: str | Path) -> None:
        """Human-diffable dump: one block per tensor."""
        with Path(path).open("w", encoding="utf-8") as fh:
            for name, arr in self.items():
                fh.write(f"# {name} shape={arr.shape}\n")
                for row in np.atleast_2d(arr):
                    fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


_PARAM_NAMES = (
    "w1_content", "b1_content", "w2_content", "b2_content",
    "w1_node", "b1_node", "w2_node", "b2_node",
    "w3", "b3", "w4",
)


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise DataError("learning_rate must be > 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise DataError("adam betas must lie in (0, 1)")


def _glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def init_params(
    m: int, t: int, seed: int = 0, hidden: tuple[int, int, int] = HIDDEN
) -> MlpParams:
    h1, h2, h3 = hidden
    rng = np.random.default_rng(seed)
    return MlpParams(
        w1_content=_glorot(rng, h1, m), b1_content=np.zeros(h1),
        w2_content=_glorot(rng, h2, h1), b2_content=np.zeros(h2),
        w1_node=_glorot(rng, h1, m), b1_node=np.zeros(h1),
        w2_node=_glorot(rng, h2, h1), b2_node=np.zeros(h2),
        w3=_glorot(rng, h3, 2 * h2), b3=np.zeros(h3),
        w4=_glorot(rng, t, h3),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=1, keepdims=True)


def _forward_batch(params: MlpParams, xc: np.ndarray, xn: np.ndarray):
    z1c = xc @ params.w1_content.T + params.b1_content
    a1c = np.maximum(z1c, 0.0)
    z1n = xn @ params.w1_node.T + params.b1_node
    a1n = np.maximum(z1n, 0.0)
    a2c = _sigmoid(a1c @ params.w2_content.T + params.b2_content)
    a2n = _sigmoid(a1n @ params.w2_node.T + params.b2_node)
    concat = np.concatenate([a2c, a2n], axis=1)
    z3 = concat @ params.w3.T + params.b3
    a3 = np.maximum(z3, 0.0)
    probs = _softmax_rows(a3 @ params.w4.T)
    cache = (xc, xn, z1c, a1c, z1n, a1n, a2c, a2n, concat, z3, a3)
    return probs, cache


def forward(params: MlpParams, profile: QueryProfile) -> np.ndarray:
    """Predicted citing-time distribution for one profile."""
    xc = np.asarray(profile.x_content, dtype=np.float64)[None, :]
    xn = np.asarray(profile.x_node, dtype=np.float64)[None, :]
    if xc.shape[1] != params.in_dim or xn.shape[1] != params.in_dim:
        raise DataError(
            f"profile dim {xc.shape[1]}/{xn.shape[1]} does not match model m={params.in_dim}"
        )
    probs, _ = _forward_batch(params, xc, xn)
    return probs[0]


predict = forward


def loss(true_p: np.ndarray, pred_p: np.ndarray) -> float:
    """Cross-entropy -sum(p * log p_hat), with log input clamped at 1e-12."""
    true_p = np.asarray(true_p, dtype=np.float64)
    pred_p = np.asarray(pred_p, dtype=np.float64)
    if true_p.shape != pred_p.shape:
        raise DataError(f"loss length mismatch {true_p.shape} vs {pred_p.shape}")
    return float(-(true_p * np.log(np.maximum(pred_p, LOG_CLAMP))).sum())


def entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p > 0
    return float(-(p[nz] * np.log(p[nz])).sum())


def _backward_batch(params: MlpParams, cache, probs: np.ndarray, true_p: np.ndarray):
    """Mean-over-batch gradients of the cross-entropy."""
    xc, xn, z1c, a1c, z1n, a1n, a2c, a2n, concat, z3, a3 = cache
    batch = probs.shape[0]
    h2 = a2c.shape[1]

    dz4 = (probs - true_p) / batch
    dw4 = dz4.T @ a3
    da3 = dz4 @ params.w4
    dz3 = da3 * (z3 > 0.0)
    dw3 = dz3.T @ concat
    db3 = dz3.sum(axis=0)
    dconcat = dz3 @ params.w3

    grads = {"w3": dw3, "b3": db3, "w4": dw4}
    for branch, x, z1, a1, a2, w2 in (
        ("content", xc, z1c, a1c, a2c, params.w2_content),
        ("node", xn, z1n, a1n, a2n, params.w2_node),
    ):
        da2 = dconcat[:, :h2] if branch == "content" else dconcat[:, h2:]
        dz2 = da2 * a2 * (1.0 - a2)
        grads[f"w2_{branch}"] = dz2.T @ a1
        grads[f"b2_{branch}"] = dz2.sum(axis=0)
        da1 = dz2 @ w2
        dz1 = da1 * (z1 > 0.0)
        grads[f"w1_{branch}"] = dz1.T @ x
        grads[f"b1_{branch}"] = dz1.sum(axis=0)
    return grads


def gradients(
    params: MlpParams, profile: QueryProfile, true_p: np.ndarray
) -> dict[str, np.ndarray]:
    """Exact analytic gradients of the loss for one example, keyed by
    parameter name."""
    xc = np.asarray(profile.x_content, dtype=np.float64)[None, :]
    xn = np.asarray(profile.x_node, dtype=np.float64)[None, :]
    probs, cache = _forward_batch(params, xc, xn)
    return _backward_batch(params, cache, probs, np.asarray(true_p)[None, :])


@dataclass
class TrainResult:
    params: MlpParams
    epoch_losses: list[float] = field(default_factory=list)


def train(
    dataset: list[tuple[QueryProfile, np.ndarray]],
    config: TrainConfig,
    t: int | None = None,
    init: MlpParams | None = None,
) -> TrainResult:
    """Adam over shuffled minibatches; returns final params and the per-epoch
    mean loss trace. Aborts with diagnostics if the loss goes non-finite."""
    if not dataset:
        raise DataError("training dataset is empty")
    xc = np.stack([np.asarray(p.x_content, dtype=np.float64) for p, _ in dataset])
    xn = np.stack([np.asarray(p.x_node, dtype=np.float64) for p, _ in dataset])
    truth = np.stack([np.asarray(y, dtype=np.float64) for _, y in dataset])
    n, m = xc.shape
    t = t if t is not None else truth.shape[1]
    if truth.shape[1] != t:
        raise DataError(f"truth width {truth.shape[1]} != t={t}")

    params = init.copy() if init is not None else init_params(m, t, seed=config.seed)
    moment1 = {name: np.zeros_like(arr) for name, arr in params.items()}
    moment2 = {name: np.zeros_like(arr) for name, arr in params.items()}
    rng = np.random.default_rng(config.seed)

    result = TrainResult(params=params)
    adam_step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            probs, cache = _forward_batch(params, xc[batch], xn[batch])
            clamped = np.maximum(probs, LOG_CLAMP)
            batch_loss = float(-(truth[batch] * np.log(clamped)).sum())
            if not np.isfinite(batch_loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, step {adam_step}: "
                    f"lr={config.learning_rate}, max|w4|={np.abs(params.w4).max():g}. "
                    "Lower the learning rate or check the inputs for NaN."
                )
            epoch_loss += batch_loss
            grads = _backward_batch(params, cache, probs, truth[batch])
            adam_step += 1
            bias1 = 1.0 - config.beta1**adam_step
            bias2 = 1.0 - config.beta2**adam_step
            for name, arr in params.items():
                g = grads[name]
                moment1[name] = config.beta1 * moment1[name] + (1 - config.beta1) * g
                moment2[name] = config.beta2 * moment2[name] + (1 - config.beta2) * g * g
                m_hat = moment1[name] / bias1
                v_hat = moment2[name] / bias2
                arr -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
        result.epoch_losses.append(epoch_loss / n)
    return result

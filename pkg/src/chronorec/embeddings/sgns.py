"""Skip-gram-with-negative-sampling primitives shared by both embedding
trainers.

The pair-level loss/gradient functions are pure numpy so tests can check the
analytic gradients against finite differences. The training loop itself is a
sequential per-pair SGD kernel (JIT-compiled): one (input, positive,
negatives) example at a time, exactly the gradients of :func:`pair_loss`.
Sequential order makes training deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def pair_loss(u: np.ndarray, v_pos: np.ndarray, v_negs: np.ndarray) -> float:
    """Negative-sampling loss for one (input, positive, negatives) example:
    -log s(u.v_pos) - sum_j log s(-u.v_neg_j)."""
    loss = -log_sigmoid(np.dot(u, v_pos))
    if len(v_negs):
        loss = loss - log_sigmoid(-(v_negs @ u)).sum()
    return float(loss)


def pair_grads(
    u: np.ndarray, v_pos: np.ndarray, v_negs: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of :func:`pair_loss` w.r.t. (u, v_pos, v_negs)."""
    g_pos = sigmoid(np.dot(u, v_pos)) - 1.0
    du = g_pos * v_pos
    dv_pos = g_pos * u
    if len(v_negs):
        g_neg = sigmoid(v_negs @ u)
        du = du + g_neg @ v_negs
        dv_negs = g_neg[:, None] * u[None, :]
    else:
        dv_negs = np.zeros_like(v_negs)
    return du, dv_pos, dv_negs


@njit(cache=True)
def _sgd_pairs(inputs, outputs, centers, positives, negatives, lr, update_outputs):
    """Sequential SGD over the block's pairs at one learning rate.

    Implements exactly the pair gradients: the input row accumulates its full
    gradient before being touched, output rows update in place against the
    pre-update input row. Returns the summed pre-update loss.
    """
    dim = inputs.shape[1]
    k = negatives.shape[1]
    total = 0.0
    work = np.empty(dim)
    for b in range(centers.shape[0]):
        u = inputs[centers[b]]
        for d in range(dim):
            work[d] = 0.0
        for j in range(k + 1):
            if j == 0:
                row = positives[b]
                label = 1.0
            else:
                row = negatives[b, j - 1]
                label = 0.0
            v = outputs[row]
            dot = 0.0
            for d in range(dim):
                dot += u[d] * v[d]
            if dot >= 0.0:
                f = 1.0 / (1.0 + np.exp(-dot))
                # log(sigmoid(x)) and log(1-sigmoid(x)), stable branches
                log_f = -np.log1p(np.exp(-dot))
                log_1mf = -dot - np.log1p(np.exp(-dot))
            else:
                e = np.exp(dot)
                f = e / (1.0 + e)
                log_f = dot - np.log1p(e)
                log_1mf = -np.log1p(e)
            total += -log_f if label == 1.0 else -log_1mf
            g = lr * (label - f)  # descend: -(f - label)
            for d in range(dim):
                work[d] += g * v[d]
            if update_outputs:
                for d in range(dim):
                    v[d] += g * u[d]
        for d in range(dim):
            u[d] += work[d]
    return total


def sgd_block(
    inputs: np.ndarray,
    outputs: np.ndarray,
    centers: np.ndarray,
    positives: np.ndarray,
    negatives: np.ndarray,
    lr: float,
    update_outputs: bool = True,
) -> float:
    """Run one block of per-pair SGD updates; returns the mean loss measured
    before each pair's update."""
    if len(centers) == 0:
        return 0.0
    total = _sgd_pairs(
        inputs,
        outputs,
        np.ascontiguousarray(centers, dtype=np.int64),
        np.ascontiguousarray(positives, dtype=np.int64),
        np.ascontiguousarray(negatives, dtype=np.int64),
        float(lr),
        update_outputs,
    )
    return float(total / len(centers))


class NegativeSampler:
    """Draws negatives from the smoothed unigram distribution freq**0.75."""

    def __init__(self, counts: np.ndarray, power: float = 0.75) -> None:
        weights = np.asarray(counts, dtype=np.float64) ** power
        total = weights.sum()
        if total <= 0:
            raise ValueError("negative sampler needs at least one positive count")
        self._cum = np.cumsum(weights / total)
        self._cum[-1] = 1.0

    def draw(self, rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        r = rng.random(shape)
        return np.searchsorted(self._cum, r, side="right")


@dataclass
class LossTrace:
    """Per-block loss bookkeeping with per-epoch aggregation."""

    batches: list[tuple[int, float, int]] = field(default_factory=list)

    def add(self, epoch: int, mean_loss: float, n_examples: int) -> None:
        self.batches.append((epoch, mean_loss, n_examples))

    def epoch_mean(self, epoch: int) -> float:
        rows = [(m, n) for e, m, n in self.batches if e == epoch]
        total = sum(m * n for m, n in rows)
        count = sum(n for _, n in rows)
        return total / count if count else float("nan")

    def epoch_means(self) -> list[float]:
        epochs = sorted({e for e, _, _ in self.batches})
        return [self.epoch_mean(e) for e in epochs]

    def half_means(self, epoch: int) -> tuple[float, float]:
        """Mean loss over the first and second half of one epoch's blocks."""
        rows = [(m, n) for e, m, n in self.batches if e == epoch]
        mid = len(rows) // 2
        first, second = rows[:mid], rows[mid:]

        def mean(part: list[tuple[float, int]]) -> float:
            count = sum(n for _, n in part)
            return sum(m * n for m, n in part) / count if count else float("nan")

        return mean(first), mean(second)


def linear_lr(step: int, total_steps: int, lr0: float, lr_min: float) -> float:
    """Linear decay from lr0 at step 0 to lr_min at the final step."""
    if total_steps <= 1:
        return lr0
    frac = min(step / (total_steps - 1), 1.0)
    return lr0 + (lr_min - lr0) * frac

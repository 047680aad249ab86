"""Reference mathematics of the auxiliary objectives, framework-free.

Both auxiliary losses are sums of per-type binary cross-entropies over
sigmoid heads: the turn-switch heads read a four-block mixture of adjacent
turn-marker vectors (previous; current; difference; elementwise product),
the column heads read each column-marker vector directly.  The combined
objective is decoder loss + alpha * turn loss + beta * column loss; the
published operating point is alpha = 0.5, beta = 8.

Sums are unnormalized over turns/columns (batch reduction is the
trainer's business) and every BCE is computed in the log-sum-exp form on
logits, never sigmoid-then-log.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_TURN_TYPES = 17
N_COLUMN_TYPES = 11

DEFAULT_ALPHA = 0.5
DEFAULT_BETA = 8.0


@dataclass(frozen=True)
class TurnVectors:
    """T turn-marker vectors, one per turn; the t=0 vector is implicit zero."""

    vectors: np.ndarray  # (T, d)

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1:
            raise ValueError("turn vectors must be (T >= 1, d)")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class ColumnVectors:
    vectors: np.ndarray  # (M, d)

    def __post_init__(self):
        if self.vectors.ndim != 2:
            raise ValueError("column vectors must be (M, d)")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class AuxHeadParams:
    """Affine heads: 17 maps from 4d and 11 maps from d, plus loss weights."""

    tsp_weight: np.ndarray  # (17, 4d)
    tsp_bias: np.ndarray    # (17,)
    csp_weight: np.ndarray  # (11, d)
    csp_bias: np.ndarray    # (11,)
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if self.tsp_weight.shape[0] != N_TURN_TYPES or self.tsp_bias.shape != (N_TURN_TYPES,):
            raise ValueError(f"turn heads must count exactly {N_TURN_TYPES}")
        if self.csp_weight.shape[0] != N_COLUMN_TYPES or self.csp_bias.shape != (N_COLUMN_TYPES,):
            raise ValueError(f"column heads must count exactly {N_COLUMN_TYPES}")
        if self.tsp_weight.shape[1] != 4 * self.csp_weight.shape[1]:
            raise ValueError("turn heads read dimension 4d, column heads dimension d")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("loss weights must be non-negative")

    @property
    def dim(self) -> int:
        return self.csp_weight.shape[1]

    @classmethod
    def zeros(cls, d: int, alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA):
        return cls(
            tsp_weight=np.zeros((N_TURN_TYPES, 4 * d)),
            tsp_bias=np.zeros(N_TURN_TYPES),
            csp_weight=np.zeros((N_COLUMN_TYPES, d)),
            csp_bias=np.zeros(N_COLUMN_TYPES),
            alpha=alpha,
            beta=beta,
        )

    @classmethod
    def random(cls, d: int, rng: np.random.Generator,
               alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA):
        return cls(
            tsp_weight=rng.normal(0, 0.5, (N_TURN_TYPES, 4 * d)),
            tsp_bias=rng.normal(0, 0.5, N_TURN_TYPES),
            csp_weight=rng.normal(0, 0.5, (N_COLUMN_TYPES, d)),
            csp_bias=rng.normal(0, 0.5, N_COLUMN_TYPES),
            alpha=alpha,
            beta=beta,
        )


@dataclass(frozen=True)
class LossBreakdown:
    l_dec: float
    l_tsp: float
    l_csp: float
    l_total: float


def feature_mix(t_prev: np.ndarray, t_curr: np.ndarray) -> np.ndarray:
    """[prev ; curr ; curr - prev ; prev * curr], dimension 4d."""
    t_prev = np.asarray(t_prev, dtype=np.float64)
    t_curr = np.asarray(t_curr, dtype=np.float64)
    if t_prev.shape != t_curr.shape or t_prev.ndim != 1:
        raise ValueError(f"mismatched vector shapes {t_prev.shape} vs {t_curr.shape}")
    return np.concatenate([t_prev, t_curr, t_curr - t_prev, t_prev * t_curr])


def bce_with_logits(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Elementwise stable binary cross-entropy on logits."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    return np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))


def _turn_mixtures(turns: TurnVectors) -> np.ndarray:
    vectors = np.asarray(turns.vectors, dtype=np.float64)
    padded = np.vstack([np.zeros((1, vectors.shape[1])), vectors])
    prev, curr = padded[:-1], padded[1:]
    return np.hstack([prev, curr, curr - prev, prev * curr])  # (T, 4d)


def tsp_logits(turns: TurnVectors, params: AuxHeadParams) -> np.ndarray:
    """(T, 17) head activations, one row per turn transition."""
    return _turn_mixtures(turns) @ params.tsp_weight.T + params.tsp_bias


def tsp_loss(turns: TurnVectors, labels: np.ndarray, params: AuxHeadParams) -> float:
    """Summed BCE over all turns and all 17 operation types."""
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != (turns.count, N_TURN_TYPES):
        raise ValueError(f"labels must be (T, {N_TURN_TYPES}), got {labels.shape}")
    return float(np.sum(bce_with_logits(tsp_logits(turns, params), labels)))


def tsp_loss_grads(
    turns: TurnVectors, labels: np.ndarray, params: AuxHeadParams
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic d(loss)/d(weight), d(loss)/d(bias) for the turn heads."""
    labels = np.asarray(labels, dtype=np.float64)
    mix = _turn_mixtures(turns)  # (T, 4d)
    z = mix @ params.tsp_weight.T + params.tsp_bias  # (T, 17)
    delta = 1.0 / (1.0 + np.exp(-z)) - labels
    return delta.T @ mix, delta.sum(axis=0)


def csp_logits(columns: ColumnVectors, params: AuxHeadParams) -> np.ndarray:
    return np.asarray(columns.vectors, dtype=np.float64) @ params.csp_weight.T + params.csp_bias


def csp_loss(columns: ColumnVectors, labels: np.ndarray, params: AuxHeadParams) -> float:
    """Summed BCE over all columns and all 11 change types."""
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != (columns.count, N_COLUMN_TYPES):
        raise ValueError(f"labels must be (M, {N_COLUMN_TYPES}), got {labels.shape}")
    if columns.count == 0:
        return 0.0
    return float(np.sum(bce_with_logits(csp_logits(columns, params), labels)))


def csp_loss_grads(
    columns: ColumnVectors, labels: np.ndarray, params: AuxHeadParams
) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels, dtype=np.float64)
    vectors = np.asarray(columns.vectors, dtype=np.float64)
    z = vectors @ params.csp_weight.T + params.csp_bias
    delta = 1.0 / (1.0 + np.exp(-z)) - labels
    return delta.T @ vectors, delta.sum(axis=0)


def combined_loss(
    l_dec: float,
    l_tsp: float,
    l_csp: float,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
) -> LossBreakdown:
    """Total objective l_dec + alpha * l_tsp + beta * l_csp."""
    components = (l_dec, l_tsp, l_csp, alpha, beta)
    if not all(np.isfinite(c) for c in components):
        raise ValueError(f"non-finite loss component in {components}")
    if alpha < 0 or beta < 0:
        raise ValueError("loss weights must be non-negative")
    total = l_dec + alpha * l_tsp + beta * l_csp
    return LossBreakdown(l_dec=l_dec, l_tsp=l_tsp, l_csp=l_csp, l_total=total)


def grad_check(loss_fn, grad: np.ndarray, x0: np.ndarray, epsilon: float = 1e-6) -> float:
    """Max relative error between ``grad`` and central differences of
    ``loss_fn`` at ``x0``; error is measured against max(1, |analytic|,
    |numeric|) per coordinate."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != x0.shape:
        raise ValueError(f"gradient shape {grad.shape} != parameter shape {x0.shape}")
    worst = 0.0
    flat = x0.ravel()
    for i in range(flat.size):
        step = np.zeros_like(flat)
        step[i] = epsilon
        plus = loss_fn((flat + step).reshape(x0.shape))
        minus = loss_fn((flat - step).reshape(x0.shape))
        numeric = (plus - minus) / (2 * epsilon)
        analytic = grad.ravel()[i]
        err = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
        worst = max(worst, err)
    return worst


def _pack(params: AuxHeadParams) -> np.ndarray:
    return np.concatenate([
        params.tsp_weight.ravel(), params.tsp_bias,
        params.csp_weight.ravel(), params.csp_bias,
    ])


def _unpack(flat: np.ndarray, d: int, alpha: float, beta: float) -> AuxHeadParams:
    sizes = [N_TURN_TYPES * 4 * d, N_TURN_TYPES, N_COLUMN_TYPES * d, N_COLUMN_TYPES]
    offsets = np.cumsum([0] + sizes)
    return AuxHeadParams(
        tsp_weight=flat[offsets[0]:offsets[1]].reshape(N_TURN_TYPES, 4 * d),
        tsp_bias=flat[offsets[1]:offsets[2]].copy(),
        csp_weight=flat[offsets[2]:offsets[3]].reshape(N_COLUMN_TYPES, d),
        csp_bias=flat[offsets[3]:offsets[4]].copy(),
        alpha=alpha,
        beta=beta,
    )


def aux_grad_check(
    rng: np.random.Generator,
    d: int,
    n_turns: int = 3,
    n_columns: int = 5,
    epsilon: float = 1e-6,
) -> float:
    """Gradient check of both auxiliary losses on one random instance;
    returns the max relative error over every head weight and bias."""
    turns = TurnVectors(rng.normal(0, 1, (n_turns, d)))
    columns = ColumnVectors(rng.normal(0, 1, (n_columns, d)))
    tsp_labels = (rng.random((n_turns, N_TURN_TYPES)) < 0.3).astype(float)
    csp_labels = (rng.random((n_columns, N_COLUMN_TYPES)) < 0.3).astype(float)
    params = AuxHeadParams.random(d, rng)

    def loss_at(flat: np.ndarray) -> float:
        p = _unpack(flat, d, params.alpha, params.beta)
        return tsp_loss(turns, tsp_labels, p) + csp_loss(columns, csp_labels, p)

    tsp_dw, tsp_db = tsp_loss_grads(turns, tsp_labels, params)
    csp_dw, csp_db = csp_loss_grads(columns, csp_labels, params)
    analytic = np.concatenate([tsp_dw.ravel(), tsp_db, csp_dw.ravel(), csp_db])
    return grad_check(loss_at, analytic, _pack(params), epsilon)


def turn_label_array(labels) -> np.ndarray:
    """(T, 17) float array from TurnSwitchLabel objects or raw bit rows."""
    rows = [list(getattr(label, "bits", label)) for label in labels]
    return np.asarray(rows, dtype=np.float64)


def column_label_array(label) -> np.ndarray:
    """(M, 11) float array from a ColumnChangeLabel or raw bit matrix."""
    rows = getattr(label, "rows", label)
    return np.asarray([list(r) for r in rows], dtype=np.float64)

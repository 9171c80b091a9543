"""The four training loss terms and their gradients w.r.t. current features.

Every term returns (value, gradient) where the gradient is taken with
respect to the current model's features only; memories and historical
features are constants. All terms use the batch-mean convention so the
optimization direction is invariant to batch size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyBatch, EmptyMemory, LabelOutOfRange, ShapeMismatch
from .memory import NO_MATCH, IdentityMemory


@dataclass(frozen=True)
class LossBreakdown:
    """Per-batch loss terms; total is always their plain sum."""

    id: float
    id_hist: float
    kd: float
    mkd: float
    total: float

    @classmethod
    def of(cls, id: float, id_hist: float = 0.0, kd: float = 0.0, mkd: float = 0.0) -> "LossBreakdown":
        return cls(float(id), float(id_hist), float(kd), float(mkd),
                   float(id) + float(id_hist) + float(kd) + float(mkd))

    def as_row(self) -> tuple[float, float, float, float, float]:
        return (self.id, self.id_hist, self.kd, self.mkd, self.total)


def _log_softmax(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise stable log-softmax; returns (logp, p)."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsum
    return logp, np.exp(logp)


def loss_id(
    F: np.ndarray, labels: np.ndarray, memory: IdentityMemory, tau: float
) -> tuple[float, np.ndarray]:
    """Cluster contrastive loss against the current-camera memory.

    Mean over the batch of -log softmax_j(F_i . M_j / tau) at j = label_i.
    The memory receives no gradient.
    """
    F = np.asarray(F, dtype=np.float64)
    labels = np.asarray(labels)
    B = F.shape[0]
    if B == 0:
        raise EmptyBatch("loss_id on an empty batch")
    if len(memory) == 0:
        raise EmptyMemory("loss_id needs a nonempty memory")
    if labels.shape != (B,):
        raise ShapeMismatch(f"labels shape {labels.shape} vs batch {B}")
    if labels.min() < 0 or labels.max() >= len(memory):
        raise LabelOutOfRange(f"labels must lie in [0, {len(memory)})")
    logits = (F @ memory.rows.T) / tau
    logp, p = _log_softmax(logits)
    idx = np.arange(B)
    value = float(-logp[idx, labels].mean())
    grad = (p @ memory.rows - memory.rows[labels]) / (tau * B)
    return value, grad


def loss_id_hist(
    F: np.ndarray, hist_labels: np.ndarray, hist: IdentityMemory, tau: float
) -> tuple[float, np.ndarray]:
    """Contrastive loss against the frozen historical memory, gated so that
    only samples with a matched historical label contribute. The sum of the
    matched terms is divided by the full batch size."""
    F = np.asarray(F, dtype=np.float64)
    hist_labels = np.asarray(hist_labels)
    B = F.shape[0]
    if B == 0:
        raise EmptyBatch("loss_id_hist on an empty batch")
    grad = np.zeros_like(F)
    mask = hist_labels != NO_MATCH
    if len(hist) == 0 or not mask.any():
        return 0.0, grad
    y = hist_labels[mask]
    if y.min() < 0 or y.max() >= len(hist):
        raise LabelOutOfRange(f"historical labels must lie in [0, {len(hist)})")
    logits = (F[mask] @ hist.rows.T) / tau
    logp, p = _log_softmax(logits)
    idx = np.arange(y.shape[0])
    value = float(-logp[idx, y].sum() / B)
    grad[mask] = (p @ hist.rows - hist.rows[y]) / (tau * B)
    return value, grad


def loss_kd(
    Fc: np.ndarray, Fh: np.ndarray, gates: np.ndarray
) -> tuple[float, np.ndarray]:
    """Gated squared-distance distillation between current and historical
    embeddings; the historical side is constant."""
    Fc = np.asarray(Fc, dtype=np.float64)
    Fh = np.asarray(Fh, dtype=np.float64)
    gates = np.asarray(gates, dtype=np.float64)
    if Fc.shape != Fh.shape:
        raise ShapeMismatch(f"feature shapes differ: {Fc.shape} vs {Fh.shape}")
    B = Fc.shape[0]
    if B == 0:
        raise EmptyBatch("loss_kd on an empty batch")
    if gates.shape != (B,):
        raise ShapeMismatch(f"gates shape {gates.shape} vs batch {B}")
    diff = Fc - Fh
    value = float((gates * (diff * diff).sum(axis=1)).sum() / B)
    grad = 2.0 * gates[:, None] * diff / B
    return value, grad


def loss_mkd(
    middles_c: Sequence[np.ndarray],
    middles_h: Sequence[np.ndarray],
    gates: np.ndarray,
) -> tuple[float, tuple[np.ndarray, ...]]:
    """Middle-layer distillation over taps 2 and 3: half the gated squared
    distance summed over taps, batch-mean normalized."""
    if len(middles_c) != len(middles_h):
        raise ShapeMismatch("middle feature lists differ in length")
    gates = np.asarray(gates, dtype=np.float64)
    value = 0.0
    grads = []
    B = None
    for hc, hh in zip(middles_c, middles_h):
        hc = np.asarray(hc, dtype=np.float64)
        hh = np.asarray(hh, dtype=np.float64)
        if hc.shape != hh.shape:
            raise ShapeMismatch(f"middle shapes differ: {hc.shape} vs {hh.shape}")
        if B is None:
            B = hc.shape[0]
            if B == 0:
                raise EmptyBatch("loss_mkd on an empty batch")
            if gates.shape != (B,):
                raise ShapeMismatch(f"gates shape {gates.shape} vs batch {B}")
        diff = hc - hh
        value += float((gates * (diff * diff).sum(axis=1)).sum() / (2.0 * B))
        grads.append(gates[:, None] * diff / B)
    return value, tuple(grads)


def loss_total(
    id: float, id_hist: float = 0.0, kd: float = 0.0, mkd: float = 0.0
) -> LossBreakdown:
    """Unweighted sum of the four terms."""
    return LossBreakdown.of(id, id_hist, kd, mkd)

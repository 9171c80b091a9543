"""Small multi-block encoder with analytic gradients.

Blocks 1..L-1 are affine maps followed by tanh; block L is affine, and its
output is L2-normalized into the final embedding. Middle-layer features are
tapped at blocks 2 and 3 so that internal representations can be distilled,
not just the output embedding. Everything is plain numpy with explicit
reverse-mode gradients, which keeps finite-difference checks exact and the
whole model serializable as JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateEmbedding, DimensionMismatch, ShapeMismatch, StaleCache

# Blocks whose outputs are exposed as middle features.
MIDDLE_TAPS = (2, 3)

DEGENERATE_NORM = 1e-9


@dataclass
class EncoderParams:
    """weights[l] is (d_{l+1}, d_l); biases[l] is (d_{l+1},). L = len(weights)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases):
            raise ShapeMismatch("weights and biases must pair up")
        if len(self.weights) < 3:
            raise ConfigError("encoder needs at least 3 blocks so taps 2 and 3 exist")
        self.weights = [np.asarray(W, dtype=np.float64) for W in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ShapeMismatch(f"block {l + 1} has inconsistent shapes")
            if l > 0 and W.shape[1] != self.weights[l - 1].shape[0]:
                raise ShapeMismatch(f"block {l + 1} input dim breaks the chain")

    @property
    def n_blocks(self) -> int:
        return len(self.weights)

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def embed_dim(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "EncoderParams":
        return EncoderParams([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order (weights then biases per block)."""
        out: list[np.ndarray] = []
        for W, b in zip(self.weights, self.biases):
            out.append(W)
            out.append(b)
        return out


@dataclass
class ParamGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for W, b in zip(self.weights, self.biases):
            out.append(W)
            out.append(b)
        return out

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(a))) if a.size else 0.0 for a in self.arrays())


def init_encoder(widths: list[int], rng: np.random.Generator) -> EncoderParams:
    """Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.

    widths is the full chain [input_dim, d_1, ..., d_L].
    """
    if len(widths) < 4:
        raise ConfigError(f"widths {widths} would give fewer than 3 blocks")
    weights = []
    biases = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return EncoderParams(weights, biases)


@dataclass
class ForwardCache:
    params: EncoderParams
    hs: list[np.ndarray]        # hs[0] = input, hs[l] = tanh block l output, l < L
    z: np.ndarray               # final affine output, pre-normalization
    znorm: np.ndarray           # (B, 1) row norms of z
    embeddings: np.ndarray      # z / znorm


@dataclass
class BatchFeatures:
    middles: tuple[np.ndarray, np.ndarray]   # tap 2, tap 3
    embeddings: np.ndarray                   # (B, embed_dim), unit rows
    cache: ForwardCache


@dataclass
class FeaturePack:
    middle_2: np.ndarray
    middle_3: np.ndarray
    embedding: np.ndarray


def _tap_output(cache: ForwardCache, tap: int) -> np.ndarray:
    # Tap L is the pre-normalization affine output; earlier taps are tanh outputs.
    if tap == cache.params.n_blocks:
        return cache.z
    return cache.hs[tap]


def forward_batch(params: EncoderParams, X: np.ndarray) -> BatchFeatures:
    """Run the encoder over a (B, input_dim) batch."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise ShapeMismatch(f"input shape {X.shape} vs encoder input dim {params.input_dim}")
    L = params.n_blocks
    hs = [X]
    for l in range(L - 1):
        hs.append(np.tanh(hs[-1] @ params.weights[l].T + params.biases[l]))
    z = hs[-1] @ params.weights[-1].T + params.biases[-1]
    znorm = np.linalg.norm(z, axis=1, keepdims=True)
    if np.any(znorm < DEGENERATE_NORM):
        raise DegenerateEmbedding("pre-normalization output has near-zero norm")
    emb = z / znorm
    cache = ForwardCache(params, hs, z, znorm, emb)
    middles = (_tap_output(cache, MIDDLE_TAPS[0]), _tap_output(cache, MIDDLE_TAPS[1]))
    return BatchFeatures(middles, emb, cache)


def forward(params: EncoderParams, x: np.ndarray) -> FeaturePack:
    """Single-sample convenience wrapper around forward_batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeMismatch(f"expected a single input vector, got shape {x.shape}")
    out = forward_batch(params, x[None, :])
    return FeaturePack(out.middles[0][0], out.middles[1][0], out.embeddings[0])


def backward(
    params: EncoderParams,
    cache: ForwardCache,
    grad_embedding: np.ndarray,
    grad_middle_2: np.ndarray | None = None,
    grad_middle_3: np.ndarray | None = None,
) -> ParamGrads:
    """Exact reverse-mode parameter gradients for a batch.

    grad_embedding is dLoss/d(embedding) per sample; middle gradients, when
    given, are injected at taps 2 and 3. The normalization Jacobian
    (I - f f^T)/|z| is applied row-wise before the affine chain.
    """
    if cache.params is not params:
        raise StaleCache("forward cache does not belong to these parameters")
    L = params.n_blocks
    F = cache.embeddings
    gF = np.asarray(grad_embedding, dtype=np.float64)
    if gF.shape != F.shape:
        raise ShapeMismatch(f"grad_embedding shape {gF.shape} vs embeddings {F.shape}")
    tap_grads: dict[int, np.ndarray] = {}
    for tap, g in zip(MIDDLE_TAPS, (grad_middle_2, grad_middle_3)):
        if g is None:
            continue
        g = np.asarray(g, dtype=np.float64)
        expected = _tap_output(cache, tap).shape
        if g.shape != expected:
            raise ShapeMismatch(f"tap {tap} gradient shape {g.shape} vs features {expected}")
        tap_grads[tap] = g

    gz = (gF - np.sum(gF * F, axis=1, keepdims=True) * F) / cache.znorm
    if L in tap_grads:
        gz = gz + tap_grads[L]
    gW: list[np.ndarray] = [np.empty(0)] * L
    gb: list[np.ndarray] = [np.empty(0)] * L
    gW[L - 1] = gz.T @ cache.hs[L - 1]
    gb[L - 1] = gz.sum(axis=0)
    gh = gz @ params.weights[L - 1]
    for l in range(L - 2, -1, -1):
        h = cache.hs[l + 1]
        if (l + 1) in tap_grads:
            gh = gh + tap_grads[l + 1]
        ga = gh * (1.0 - h * h)
        gW[l] = ga.T @ cache.hs[l]
        gb[l] = ga.sum(axis=0)
        gh = ga @ params.weights[l]
    return ParamGrads(gW, gb)


def zero_grads(params: EncoderParams) -> ParamGrads:
    return ParamGrads(
        [np.zeros_like(W) for W in params.weights],
        [np.zeros_like(b) for b in params.biases],
    )


def grad_check(params: EncoderParams, loss_closure, step: float = 1e-5) -> float:
    """Max relative error between the closure's analytic parameter gradients
    and central finite differences.

    loss_closure(params) -> (scalar value, ParamGrads). The error metric per
    entry is |analytic - numeric| / max(1, |numeric|).
    """
    _, grads = loss_closure(params)
    max_err = 0.0
    for arr, g in zip(params.arrays(), grads.arrays()):
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            fp = loss_closure(params)[0]
            flat[k] = orig - step
            fm = loss_closure(params)[0]
            flat[k] = orig
            numeric = (fp - fm) / (2.0 * step)
            err = abs(gflat[k] - numeric) / max(1.0, abs(numeric))
            if err > max_err:
                max_err = err
    return max_err


class Adam:
    """Adam with L2 weight decay folded into the gradient; per-call lr allows
    an external step schedule."""

    def __init__(
        self,
        params: EncoderParams,
        lr: float = 3.5e-4,
        weight_decay: float = 5e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = [np.zeros_like(a) for a in params.arrays()]
        self._v = [np.zeros_like(a) for a in params.arrays()]
        self._t = 0

    def step(self, params: EncoderParams, grads: ParamGrads, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self._t += 1
        bc1 = 1.0 - self.beta1 ** self._t
        bc2 = 1.0 - self.beta2 ** self._t
        for theta, g, m, v in zip(params.arrays(), grads.arrays(), self._m, self._v):
            g = g + self.weight_decay * theta
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            theta -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def save_encoder(params: EncoderParams, path: str | Path) -> None:
    doc = {
        "widths": params.widths,
        "blocks": [
            {"W": [[float(v) for v in row] for row in W], "b": [float(v) for v in b]}
            for W, b in zip(params.weights, params.biases)
        ],
    }
    Path(path).write_text(json.dumps(doc))


def load_encoder(path: str | Path) -> EncoderParams:
    doc = json.loads(Path(path).read_text())
    widths = [int(w) for w in doc["widths"]]
    weights = []
    biases = []
    for l, block in enumerate(doc["blocks"]):
        W = np.array(block["W"], dtype=np.float64)
        b = np.array(block["b"], dtype=np.float64)
        if W.shape != (widths[l + 1], widths[l]):
            raise DimensionMismatch(f"block {l + 1} shape {W.shape} disagrees with widths")
        weights.append(W)
        biases.append(b)
    return EncoderParams(weights, biases)

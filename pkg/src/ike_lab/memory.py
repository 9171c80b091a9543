"""Identity memory: one unit-norm embedding row per identity, plus the rules
that score, build, and evolve it (momentum blending and merge/expansion)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    DegenerateMean,
    DimensionMismatch,
    EmptyBatch,
    EmptyMemory,
    IndexOutOfRange,
    MissingLabel,
    ShapeMismatch,
)

if TYPE_CHECKING:
    from .datasets import CameraDataset
    from .encoder import EncoderParams

# Sentinel for "no matching historical identity".
NO_MATCH = -1

# Rows are kept on the unit sphere to this tolerance.
UNIT_TOL = 1e-9

# Norms below this cannot be normalized meaningfully.
DEGENERATE_NORM = 1e-9


@dataclass
class IdentityMemory:
    """A bank of per-identity embeddings.

    rows: (n, dim) float64 array, each row unit L2 norm.
    provenance: optional per-row ground-truth identity tags. Diagnostics
        only; no algorithm reads them.
    """

    rows: np.ndarray
    provenance: list[int] | None = None

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ShapeMismatch(f"memory rows must be 2-D, got shape {rows.shape}")
        self.rows = rows
        if self.provenance is not None:
            self.provenance = [int(g) for g in self.provenance]
            if len(self.provenance) != rows.shape[0]:
                raise ShapeMismatch(
                    f"provenance length {len(self.provenance)} != row count {rows.shape[0]}"
                )

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def copy(self) -> "IdentityMemory":
        prov = None if self.provenance is None else list(self.provenance)
        return IdentityMemory(self.rows.copy(), prov)

    def max_unit_error(self) -> float:
        """Largest |norm - 1| over rows; 0 for an empty memory."""
        if len(self) == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.norm(self.rows, axis=1) - 1.0)))


def empty_memory(dim: int, track_provenance: bool = True) -> IdentityMemory:
    """Memory with zero identities, e.g. the history before the first camera."""
    return IdentityMemory(np.zeros((0, dim)), [] if track_provenance else None)


def cosine_scores(f: np.ndarray, memory: IdentityMemory) -> np.ndarray:
    """Similarity of one embedding against every memory row.

    Rows and f are unit vectors, so the dot product is the cosine; higher
    means more similar.
    """
    if len(memory) == 0:
        raise EmptyMemory("cannot score against a memory with no identities")
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (memory.dim,):
        raise ShapeMismatch(f"embedding shape {f.shape} vs memory dim {memory.dim}")
    return memory.rows @ f


def init_memory(params: "EncoderParams", dataset: "CameraDataset") -> IdentityMemory:
    """Build a memory from a dataset: row y = normalized mean embedding of
    all images labelled y. Row order follows the label index."""
    from .encoder import forward_batch

    if dataset.X.shape[0] == 0:
        raise EmptyBatch("cannot initialize a memory from an empty dataset")
    labels = np.asarray(dataset.labels)
    n_ids = int(dataset.n_ids)
    feats = forward_batch(params, dataset.X).embeddings
    rows = np.zeros((n_ids, feats.shape[1]))
    for y in range(n_ids):
        mask = labels == y
        if not mask.any():
            raise MissingLabel(f"label {y} has no images")
        mean = feats[mask].mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm < DEGENERATE_NORM:
            raise DegenerateMean(f"mean feature of identity {y} has norm {norm:g}")
        rows[y] = mean / norm
    prov = None
    if dataset.label_to_global is not None:
        prov = [int(g) for g in dataset.label_to_global]
    return IdentityMemory(rows, prov)


def momentum_update(
    memory: IdentityMemory, idx: int, f: np.ndarray, omega: float
) -> IdentityMemory:
    """In-place blend of one row toward a fresh feature:

        row <- normalize(omega * row + (1 - omega) * f)

    omega is the fraction of the old row kept. All other rows untouched.
    """
    if not 0 <= idx < len(memory):
        raise IndexOutOfRange(f"identity index {idx} outside [0, {len(memory)})")
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (memory.dim,):
        raise ShapeMismatch(f"feature shape {f.shape} vs memory dim {memory.dim}")
    blended = omega * memory.rows[idx] + (1.0 - omega) * f
    norm = float(np.linalg.norm(blended))
    if norm < DEGENERATE_NORM:
        raise DegenerateMean(f"momentum blend for identity {idx} collapsed to norm {norm:g}")
    memory.rows[idx] = blended / norm
    return memory


def iku_merge(
    hist: IdentityMemory, cur: IdentityMemory, assoc, lam: float
) -> IdentityMemory:
    """Evolve the historical memory with the current one.

    Matched current identity j (assoc target t >= 0): the historical row t
    becomes normalize(lam * hist[t] + (1 - lam) * cur[j]). Unmatched rows of
    cur are appended in ascending j. Blends always read the original hist
    row, so a duplicated target (possible with non-mutual association maps)
    resolves to the last j deterministically.
    """
    matches = np.asarray(getattr(assoc, "matches", assoc), dtype=np.int64)
    if hist.dim != cur.dim:
        raise ShapeMismatch(f"history dim {hist.dim} != current dim {cur.dim}")
    if matches.shape != (len(cur),):
        raise ShapeMismatch(
            f"association length {matches.shape} vs current identity count {len(cur)}"
        )
    rows = hist.rows.copy()
    unmatched: list[int] = []
    for j in range(len(cur)):
        t = int(matches[j])
        if t == NO_MATCH:
            unmatched.append(j)
            continue
        if not 0 <= t < len(hist):
            raise IndexOutOfRange(f"match target {t} outside historical memory")
        blended = lam * hist.rows[t] + (1.0 - lam) * cur.rows[j]
        norm = float(np.linalg.norm(blended))
        if norm < DEGENERATE_NORM:
            raise DegenerateMean(f"merge of identity {j} into row {t} collapsed")
        rows[t] = blended / norm
    if unmatched:
        rows = np.concatenate([rows, cur.rows[unmatched]], axis=0)
    prov = None
    if hist.provenance is not None and cur.provenance is not None:
        prov = list(hist.provenance) + [cur.provenance[j] for j in unmatched]
    return IdentityMemory(rows, prov)


def save_memory(memory: IdentityMemory, path: str | Path) -> None:
    """Write a snapshot as JSON; floats round-trip bit-faithfully."""
    doc = {
        "dim": memory.dim,
        "rows": [[float(v) for v in row] for row in memory.rows],
        "provenance": memory.provenance,
    }
    Path(path).write_text(json.dumps(doc))


def load_memory(path: str | Path) -> IdentityMemory:
    doc = json.loads(Path(path).read_text())
    dim = int(doc["dim"])
    rows = doc["rows"]
    for i, row in enumerate(rows):
        if len(row) != dim:
            raise DimensionMismatch(f"row {i} has {len(row)} values, expected {dim}")
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return IdentityMemory(arr, doc.get("provenance"))

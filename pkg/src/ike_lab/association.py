"""Matching current identities against the historical memory.

The production matcher is cycle-consistent (mutual argmax): identity i of
the current memory is paired with historical row j only when each is the
other's best cosine match. Unmatched identities carry NO_MATCH.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import EmptyMemory, LabelOutOfRange, MissingProvenance, ShapeMismatch
from .memory import NO_MATCH, IdentityMemory

if TYPE_CHECKING:
    from .datasets import CameraDataset


@dataclass
class AssociationMap:
    """matches[i] = historical row index for current identity i, or NO_MATCH."""

    matches: np.ndarray

    def __post_init__(self) -> None:
        self.matches = np.asarray(self.matches, dtype=np.int64)

    def __len__(self) -> int:
        return self.matches.shape[0]

    def gates(self) -> np.ndarray:
        """Per-identity 0/1 gate: 0 iff unmatched."""
        return (self.matches != NO_MATCH).astype(np.float64)

    def matched_count(self) -> int:
        return int(np.count_nonzero(self.matches != NO_MATCH))

    def to_json_dict(self) -> dict:
        return {"matches": [None if m == NO_MATCH else int(m) for m in self.matches]}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "AssociationMap":
        return cls(np.array([NO_MATCH if m is None else int(m) for m in doc["matches"]]))


def all_unmatched(n_current: int) -> AssociationMap:
    return AssociationMap(np.full(n_current, NO_MATCH, dtype=np.int64))


def _score_matrix(cur: IdentityMemory, hist: IdentityMemory) -> np.ndarray:
    if cur.dim != hist.dim:
        raise ShapeMismatch(f"current dim {cur.dim} != historical dim {hist.dim}")
    return cur.rows @ hist.rows.T


def cycle_match(
    cur: IdentityMemory, hist: IdentityMemory, min_score: float | None = None
) -> AssociationMap:
    """Mutual-argmax matching between the two memories.

    matches[i] = j iff row j is the best historical match of cur[i] AND
    row i is the best current match of hist[j]; otherwise NO_MATCH. Ties
    break toward the lowest index on both sides. An empty history yields
    all NO_MATCH. min_score, when set, additionally rejects pairs whose
    best score falls below it (off by default; experimentation knob).
    """
    if len(cur) == 0:
        raise EmptyMemory("cycle_match requires a nonempty current memory")
    if len(hist) == 0:
        return all_unmatched(len(cur))
    scores = _score_matrix(cur, hist)
    fwd = scores.argmax(axis=1)
    bwd = scores.argmax(axis=0)
    mutual = bwd[fwd] == np.arange(len(cur))
    matches = np.where(mutual, fwd, NO_MATCH).astype(np.int64)
    if min_score is not None:
        best = scores[np.arange(len(cur)), fwd]
        matches[best < min_score] = NO_MATCH
    return AssociationMap(matches)


def one_way_match(cur: IdentityMemory, hist: IdentityMemory) -> AssociationMap:
    """Plain argmax assignment: every current identity takes its best
    historical row, with no mutuality requirement. Used by the ablation
    that disables cycle matching; the result need not be injective."""
    if len(cur) == 0:
        raise EmptyMemory("one_way_match requires a nonempty current memory")
    if len(hist) == 0:
        return all_unmatched(len(cur))
    scores = _score_matrix(cur, hist)
    return AssociationMap(scores.argmax(axis=1).astype(np.int64))


@dataclass
class AugmentedSample:
    """One image carrying both its local label and the matched historical
    label (NO_MATCH when the identity is unmatched)."""

    input: np.ndarray
    local_label: int
    hist_label: int
    global_id: int | None = None


def augment_dataset(dataset: "CameraDataset", assoc: AssociationMap) -> list[AugmentedSample]:
    """Attach per-sample historical labels via the association map."""
    labels = np.asarray(dataset.labels)
    if labels.size and (labels.min() < 0 or labels.max() >= len(assoc)):
        raise LabelOutOfRange(
            f"labels span [{labels.min()}, {labels.max()}] but association has {len(assoc)} entries"
        )
    out = []
    for i in range(dataset.X.shape[0]):
        y = int(labels[i])
        g = None if dataset.global_ids is None else int(dataset.global_ids[i])
        out.append(AugmentedSample(dataset.X[i], y, int(assoc.matches[y]), g))
    return out


@dataclass
class AssociationPrecision:
    precision: float | None
    discovered: int
    correct: int


def association_precision(
    assoc: AssociationMap, cur_globals, hist_globals
) -> AssociationPrecision:
    """Fraction of discovered matches whose ground-truth identities agree.

    Undefined (None) when nothing was discovered. Requires provenance tags
    on both sides, so this is a synthetic-mode diagnostic.
    """
    if cur_globals is None or hist_globals is None:
        raise MissingProvenance("association precision needs identity tags on both sides")
    cur_globals = [int(g) for g in cur_globals]
    hist_globals = [int(g) for g in hist_globals]
    if len(cur_globals) != len(assoc):
        raise ShapeMismatch(
            f"{len(cur_globals)} current tags vs {len(assoc)} association entries"
        )
    discovered = 0
    correct = 0
    for i, t in enumerate(assoc.matches):
        if t == NO_MATCH:
            continue
        if not 0 <= t < len(hist_globals):
            raise LabelOutOfRange(f"match target {t} outside historical tags")
        discovered += 1
        if cur_globals[i] == hist_globals[t]:
            correct += 1
    precision = correct / discovered if discovered else None
    return AssociationPrecision(precision, discovered, correct)

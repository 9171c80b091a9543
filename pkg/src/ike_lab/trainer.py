"""Per-camera incremental training, the sequence runner, and the joint
upper bound.

Each camera is trained with a copy of the historical model while the
historical model and memory stay frozen; at the camera boundary the memory
is rebuilt from the trained model, merged into the history, and the model
itself becomes the new history. Ablation variants switch the association
rule, which loss terms run, and how the memory evolves.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .association import (
    AssociationMap,
    all_unmatched,
    association_precision,
    augment_dataset,
    cycle_match,
    one_way_match,
)
from .datasets import CameraDataset, DatasetBundle
from .encoder import Adam, EncoderParams, forward_batch, init_encoder
from .errors import ConfigError, MissingProvenance
from .evaluation import MetricsReport, evaluate_map
from .losses import LossBreakdown, loss_id, loss_id_hist, loss_kd, loss_mkd, loss_total
from .memory import NO_MATCH, IdentityMemory, empty_memory, init_memory, iku_merge, momentum_update


class Variant(enum.Enum):
    """Ablation switches.

    BASELINE   fine-tune with the contrastive term only; the history memory
               still grows by plain expansion so all runs share plumbing.
    IKE_D      full method minus middle-layer distillation.
    IKE_A      one-directional argmax association (no cycle check) replaces
               cycle matching, both for the loss labels and the merge.
    IKE_U      no merge at the camera boundary; the history memory is
               replaced by the current camera's memory.
    IKE_STAR   distillation gates forced to 1, so unmatched samples are
               distilled too.
    IKE        everything on.
    """

    BASELINE = "BASELINE"
    IKE_D = "IKE_D"
    IKE_A = "IKE_A"
    IKE_U = "IKE_U"
    IKE_STAR = "IKE_STAR"
    IKE = "IKE"

    @property
    def uses_history(self) -> bool:
        return self is not Variant.BASELINE

    @property
    def uses_mkd(self) -> bool:
        return self.uses_history and self is not Variant.IKE_D

    @property
    def forces_distill_gates(self) -> bool:
        return self is Variant.IKE_STAR


VARIANT_NAMES = [v.value for v in Variant]


@dataclass
class Hyperparams:
    tau: float = 0.05
    omega: float = 0.1
    lam: float = 0.25
    lr: float = 3.5e-4
    weight_decay: float = 5e-4
    lr_decay: float = 0.1
    lr_step: int = 15
    epochs: int = 30
    batch_size: int = 64

    def validate(self) -> None:
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if not 0.0 <= self.omega <= 1.0:
            raise ConfigError("omega must lie in [0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lambda must lie in [0, 1]")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ConfigError("lr must be positive and weight_decay nonnegative")
        if not 0.0 < self.lr_decay <= 1.0 or self.lr_step < 1:
            raise ConfigError("lr_decay in (0, 1] and lr_step >= 1 required")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs >= 0 and batch_size >= 1 required")

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.lr_decay ** (epoch // self.lr_step)

    def replace(self, **kw) -> "Hyperparams":
        d = self.__dict__ | kw
        return Hyperparams(**d)


@dataclass
class TrainState:
    """Everything carried across camera boundaries."""

    encoder: EncoderParams          # historical model between cameras
    memory: IdentityMemory          # historical identity memory
    hyper: Hyperparams
    rng: np.random.Generator
    camera_index: int = 0


def init_state(
    input_dim: int,
    hidden: list[int],
    embed_dim: int,
    hyper: Hyperparams,
    seed: int | np.random.SeedSequence = 0,
) -> TrainState:
    hyper.validate()
    rng = np.random.default_rng(seed)
    encoder = init_encoder([input_dim, *hidden, embed_dim], rng)
    return TrainState(encoder, empty_memory(embed_dim), hyper, rng)


class RunRecorder:
    """No-op hooks; subclass to capture logs, checkpoints, or batch traces."""

    def on_batch(self, camera_step: int, epoch: int, batch: int, breakdown: LossBreakdown) -> None:
        pass

    def on_epoch(
        self, camera_step: int, camera_id: int, epoch: int, mean_breakdown: LossBreakdown, lr: float
    ) -> None:
        pass

    def on_camera(self, camera_step: int, camera_id: int, state: "TrainState", result: "CameraResult") -> None:
        pass


@dataclass
class CameraResult:
    camera_id: int
    assoc: AssociationMap
    assoc_precision: float | None
    epoch_means: list[LossBreakdown]
    lrs: list[float]
    nh_after: int


def _associate(variant: Variant, cur: IdentityMemory, hist: IdentityMemory) -> AssociationMap:
    """Association used to assign historical labels for the losses."""
    if not variant.uses_history or len(hist) == 0:
        return all_unmatched(len(cur))
    if variant is Variant.IKE_A:
        return one_way_match(cur, hist)
    return cycle_match(cur, hist)


def _merge_assoc(variant: Variant, cur: IdentityMemory, hist: IdentityMemory) -> AssociationMap:
    """Association used for the memory merge. The one-way ablation replaces
    cycle matching here too, so its memory can only update, never expand;
    the baseline expands without matching at all."""
    if variant is Variant.BASELINE or len(hist) == 0:
        return all_unmatched(len(cur))
    if variant is Variant.IKE_A:
        return one_way_match(cur, hist)
    return cycle_match(cur, hist)


def _mean_breakdown(items: list[LossBreakdown]) -> LossBreakdown:
    if not items:
        return LossBreakdown.of(0.0)
    n = len(items)
    return LossBreakdown.of(
        sum(b.id for b in items) / n,
        sum(b.id_hist for b in items) / n,
        sum(b.kd for b in items) / n,
        sum(b.mkd for b in items) / n,
    )


def batch_loss_and_grads(
    variant: Variant,
    cur_params: EncoderParams,
    hist_params: EncoderParams,
    Xb: np.ndarray,
    yb: np.ndarray,
    yhb: np.ndarray,
    cur_memory: IdentityMemory,
    hist_memory: IdentityMemory,
    hyper: Hyperparams,
):
    """Variant-gated loss terms on one batch plus parameter gradients.

    Returns (breakdown, param_grads, current embeddings). The historical
    encoder and both memories are constants for the gradient.
    """
    from .encoder import backward

    out_c = forward_batch(cur_params, Xb)
    id_val, gF = loss_id(out_c.embeddings, yb, cur_memory, hyper.tau)
    idh_val = kd_val = mkd_val = 0.0
    g2 = g3 = None
    history_live = variant.uses_history and len(hist_memory) > 0
    if history_live:
        idh_val, gF_idh = loss_id_hist(out_c.embeddings, yhb, hist_memory, hyper.tau)
        gF = gF + gF_idh
        gates = (yhb != NO_MATCH).astype(np.float64)
        if variant.forces_distill_gates:
            gates = np.ones_like(gates)
        if gates.any():
            out_h = forward_batch(hist_params, Xb)
            kd_val, gF_kd = loss_kd(out_c.embeddings, out_h.embeddings, gates)
            gF = gF + gF_kd
            if variant.uses_mkd:
                mkd_val, (g2, g3) = loss_mkd(out_c.middles, out_h.middles, gates)
    breakdown = loss_total(id_val, idh_val, kd_val, mkd_val)
    grads = backward(cur_params, out_c.cache, gF, g2, g3)
    return breakdown, grads, out_c.embeddings


def train_camera(
    state: TrainState,
    dataset: CameraDataset,
    variant: Variant,
    recorder: RunRecorder | None = None,
) -> CameraResult:
    """One incremental step: adapt a copy of the historical model to this
    camera, then evolve the historical memory and promote the model."""
    hyper = state.hyper
    hyper.validate()
    if len(dataset) == 0:
        raise ConfigError("cannot train on an empty camera dataset")
    hist_params = state.encoder
    hist_memory = state.memory
    cur_params = hist_params.copy()
    cur_memory = init_memory(hist_params, dataset)

    assoc = _associate(variant, cur_memory, hist_memory)
    prec: float | None = None
    if dataset.label_to_global is not None and hist_memory.provenance is not None:
        prec = association_precision(
            assoc, dataset.label_to_global, hist_memory.provenance
        ).precision
    augmented = augment_dataset(dataset, assoc)
    X = dataset.X
    y = dataset.labels
    y_hist = np.array([s.hist_label for s in augmented], dtype=np.int64)

    opt = Adam(cur_params, lr=hyper.lr, weight_decay=hyper.weight_decay)
    epoch_means: list[LossBreakdown] = []
    lrs: list[float] = []
    N = len(dataset)
    for epoch in range(hyper.epochs):
        lr = hyper.lr_at(epoch)
        perm = state.rng.permutation(N)
        batch_logs: list[LossBreakdown] = []
        for b, start in enumerate(range(0, N, hyper.batch_size)):
            sel = perm[start : start + hyper.batch_size]
            breakdown, grads, emb = batch_loss_and_grads(
                variant, cur_params, hist_params, X[sel], y[sel], y_hist[sel],
                cur_memory, hist_memory, hyper,
            )
            opt.step(cur_params, grads, lr)
            for s in range(sel.shape[0]):
                momentum_update(cur_memory, int(y[sel[s]]), emb[s], hyper.omega)
            batch_logs.append(breakdown)
            if recorder is not None:
                recorder.on_batch(state.camera_index, epoch, b, breakdown)
        epoch_means.append(_mean_breakdown(batch_logs))
        lrs.append(lr)
        if recorder is not None:
            recorder.on_epoch(state.camera_index, dataset.camera_id, epoch, epoch_means[-1], lr)

    final_memory = init_memory(cur_params, dataset)
    if variant is Variant.IKE_U:
        new_hist = final_memory.copy()
    else:
        final_assoc = _merge_assoc(variant, final_memory, hist_memory)
        new_hist = iku_merge(hist_memory, final_memory, final_assoc, hyper.lam)
    state.encoder = cur_params
    state.memory = new_hist
    state.camera_index += 1
    result = CameraResult(
        camera_id=dataset.camera_id,
        assoc=assoc,
        assoc_precision=prec,
        epoch_means=epoch_means,
        lrs=lrs,
        nh_after=len(new_hist),
    )
    if recorder is not None:
        recorder.on_camera(state.camera_index - 1, dataset.camera_id, state, result)
    return result


def run_sequence(
    bundle: DatasetBundle,
    order: list[int],
    variant: Variant,
    hyper: Hyperparams,
    hidden: list[int],
    embed_dim: int,
    seed: int | np.random.SeedSequence,
    recorder: RunRecorder | None = None,
    gallery_rule: str = "camera",
    meta: dict | None = None,
    report_seed: int | None = None,
) -> MetricsReport:
    """Train every camera in order, evaluating on the fixed test split after
    each one."""
    C = bundle.n_cameras
    if sorted(order) != list(range(C)):
        raise ConfigError(f"order {order} is not a permutation of 0..{C - 1}")
    state = init_state(bundle.input_dim, hidden, embed_dim, hyper, seed)
    maps: list[float] = []
    nhs: list[int] = []
    precs: list[float | None] = []
    for cam_idx in order:
        result = train_camera(state, bundle.cameras[cam_idx], variant, recorder)
        maps.append(evaluate_map(state.encoder, bundle.test, gallery_rule))
        nhs.append(result.nh_after)
        precs.append(result.assoc_precision)
    if report_seed is None:
        report_seed = seed if isinstance(seed, int) else -1
    return MetricsReport.build(
        maps, nhs, precs, report_seed, variant.value, list(order), meta=meta
    )


def merge_cameras_with_global_labels(bundle: DatasetBundle) -> CameraDataset:
    """Union of all cameras relabelled by global identity (contiguous ids)."""
    for cam in bundle.cameras:
        if cam.global_ids is None:
            raise MissingProvenance(f"camera {cam.camera_id} lacks identity tags")
    all_globals = np.concatenate([cam.global_ids for cam in bundle.cameras])
    uniq = np.unique(all_globals)
    remap = {int(g): i for i, g in enumerate(uniq)}
    labels = np.array([remap[int(g)] for g in all_globals], dtype=np.int64)
    X = np.concatenate([cam.X for cam in bundle.cameras], axis=0)
    return CameraDataset(
        camera_id=-1,
        X=X,
        labels=labels,
        n_ids=len(uniq),
        global_ids=all_globals,
        label_to_global=uniq.astype(np.int64),
    )


def train_joint_upperbound(
    bundle: DatasetBundle,
    hyper: Hyperparams,
    hidden: list[int],
    embed_dim: int,
    seed: int | np.random.SeedSequence,
    gallery_rule: str = "camera",
) -> tuple[EncoderParams, float]:
    """One model trained on the union of all cameras with global labels and
    the contrastive term only; the reference point for forgetting curves."""
    merged = merge_cameras_with_global_labels(bundle)
    state = init_state(bundle.input_dim, hidden, embed_dim, hyper, seed)
    train_camera(state, merged, Variant.BASELINE)
    return state.encoder, evaluate_map(state.encoder, bundle.test, gallery_rule)

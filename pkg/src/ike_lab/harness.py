"""Experiment orchestration: configs, run enumeration, artifact emission,
and the built-in oracle selftest.

A config describes a dataset, camera orders, variants, seeds, and optional
sweep grids; the harness runs every combination, writes per-run artifacts
(metrics.json/csv, training log, checkpoints) plus an aggregate summary.csv
and manifest.json, and stays bitwise deterministic per (config, seed).
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datasets import DatasetBundle, SyntheticSpec, generate, load_dataset
from .encoder import EncoderParams, backward, forward_batch, grad_check, init_encoder, save_encoder
from .errors import ConfigError, LabError
from .evaluation import GALLERY_RULES, MetricsReport
from .losses import loss_id, loss_id_hist, loss_kd, loss_mkd
from .memory import IdentityMemory, save_memory
from . import oracles
from .trainer import (
    Hyperparams,
    LossBreakdown,
    RunRecorder,
    Variant,
    VARIANT_NAMES,
    batch_loss_and_grads,
    run_sequence,
)

ORDER_PRESETS: dict[str, list[int]] = {
    "T1": [0, 1, 2, 3, 4, 5],
    "T2": [0, 5, 4, 1, 3, 2],
    "T3": [5, 2, 3, 4, 0, 1],
    "T4": [3, 1, 5, 4, 2, 0],
    "T5": [2, 0, 3, 4, 1, 5],
}

# sweep axis name -> Hyperparams field
SWEEP_AXES = {"lambda": "lam", "tau": "tau", "omega": "omega"}

THREAD_CAP_ENV = "IKE_LAB_THREADS"

_CONFIG_KEYS = {
    "dataset", "orders", "variants", "seeds", "hyperparams",
    "encoder", "sweep", "gallery_rule", "out",
}


@dataclass
class ExperimentConfig:
    dataset: dict
    orders: list
    variants: list[str]
    seeds: list[int]
    hyper: Hyperparams
    hidden: list[int]
    embed_dim: int
    sweep: dict[str, list[float]] | None = None
    gallery_rule: str = "camera"
    out: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        unknown = set(doc) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        dataset = doc.get("dataset")
        if not isinstance(dataset, dict) or len(dataset) != 1 or next(iter(dataset)) not in ("synthetic", "features"):
            raise ConfigError('dataset must be {"synthetic": {...}} or {"features": "path"}')
        if "synthetic" in dataset:
            try:
                SyntheticSpec(**dataset["synthetic"]).validate()
            except TypeError as exc:
                raise ConfigError(f"bad synthetic spec: {exc}") from exc
        variants = doc.get("variants", ["IKE"])
        if isinstance(variants, str):
            variants = [variants]
        for v in variants:
            if v not in VARIANT_NAMES:
                raise ConfigError(f"unknown variant {v!r}; choose from {VARIANT_NAMES}")
        if not variants:
            raise ConfigError("variants must be nonempty")
        seeds = doc.get("seeds", [0])
        if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
            raise ConfigError("seeds must be a nonempty list of integers")
        if len(set(seeds)) != len(seeds):
            raise ConfigError("seeds must be distinct")
        orders = doc.get("orders", ["T1"])
        if not isinstance(orders, list) or not orders:
            raise ConfigError("orders must be a nonempty list")
        try:
            hyper = Hyperparams(**doc.get("hyperparams", {}))
        except TypeError as exc:
            raise ConfigError(f"bad hyperparams: {exc}") from exc
        hyper.validate()
        enc = doc.get("encoder", {})
        unknown_enc = set(enc) - {"hidden", "embed_dim"}
        if unknown_enc:
            raise ConfigError(f"unknown encoder keys: {sorted(unknown_enc)}")
        hidden = list(enc.get("hidden", [32, 32, 32]))
        embed_dim = int(enc.get("embed_dim", 64))
        if len(hidden) < 2 or any(int(h) < 1 for h in hidden) or embed_dim < 1:
            raise ConfigError("encoder needs >= 2 hidden widths and a positive embed_dim")
        sweep = doc.get("sweep")
        if sweep is not None:
            if not isinstance(sweep, dict) or not sweep:
                raise ConfigError("sweep must be a nonempty mapping of axis -> values")
            for axis, values in sweep.items():
                if axis not in SWEEP_AXES:
                    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
                if not isinstance(values, list) or not values:
                    raise ConfigError(f"sweep axis {axis!r} needs a nonempty value list")
        gallery_rule = doc.get("gallery_rule", "camera")
        if gallery_rule not in GALLERY_RULES:
            raise ConfigError(f"gallery_rule must be one of {GALLERY_RULES}")
        return cls(
            dataset=dataset,
            orders=orders,
            variants=list(variants),
            seeds=list(seeds),
            hyper=hyper,
            hidden=[int(h) for h in hidden],
            embed_dim=embed_dim,
            sweep=sweep,
            gallery_rule=gallery_rule,
            out=doc.get("out"),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "orders": self.orders,
            "variants": self.variants,
            "seeds": self.seeds,
            "hyperparams": dict(self.hyper.__dict__),
            "encoder": {"hidden": self.hidden, "embed_dim": self.embed_dim},
            "sweep": self.sweep,
            "gallery_rule": self.gallery_rule,
            "out": self.out,
        }


_BUNDLES: dict[str, DatasetBundle] = {}


def fetch_bundle(dataset: dict) -> DatasetBundle:
    """Build or reload the dataset named by a config descriptor (cached)."""
    key = json.dumps(dataset, sort_keys=True)
    if key not in _BUNDLES:
        if "synthetic" in dataset:
            _BUNDLES[key] = generate(SyntheticSpec(**dataset["synthetic"]))
        else:
            _BUNDLES[key] = load_dataset(dataset["features"])
    return _BUNDLES[key]


def resolve_order(entry, n_cameras: int) -> tuple[str, list[int]]:
    """An order entry is either a preset name or an explicit permutation."""
    if isinstance(entry, str):
        if entry not in ORDER_PRESETS:
            raise ConfigError(f"unknown order preset {entry!r}; presets: {sorted(ORDER_PRESETS)}")
        order = ORDER_PRESETS[entry]
        if n_cameras != len(order):
            raise ConfigError(f"preset {entry} is for {len(order)} cameras, dataset has {n_cameras}")
        return entry, list(order)
    order = [int(i) for i in entry]
    if sorted(order) != list(range(n_cameras)):
        raise ConfigError(f"order {entry} is not a permutation of 0..{n_cameras - 1}")
    return "o" + "".join(str(i) for i in order), order


def expand_presets(text: str) -> list[str]:
    """Preset selections: 'T2', 'T1,T3', or the range form 'T1..T5'."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        names = sorted(ORDER_PRESETS)
        if lo not in ORDER_PRESETS or hi not in ORDER_PRESETS:
            raise ConfigError(f"bad preset range {text!r}")
        return names[names.index(lo) : names.index(hi) + 1]
    names = [t.strip() for t in text.split(",") if t.strip()]
    for name in names:
        if name not in ORDER_PRESETS:
            raise ConfigError(f"unknown preset {name!r}")
    if not names:
        raise ConfigError("empty preset selection")
    return names


@dataclass(frozen=True)
class RunSpec:
    variant: str
    order_name: str
    order: tuple[int, ...]
    seed: int
    sweep: tuple[tuple[str, float], ...] = ()

    @property
    def run_id(self) -> str:
        parts = [self.variant, self.order_name, f"s{self.seed}"]
        parts += [f"{axis}{value:g}" for axis, value in self.sweep]
        return "__".join(parts)


def enumerate_runs(config: ExperimentConfig, n_cameras: int) -> list[RunSpec]:
    sweep_points: list[tuple[tuple[str, float], ...]] = [()]
    if config.sweep:
        sweep_points = [()]
        for axis in sorted(config.sweep):
            sweep_points = [
                pt + ((axis, float(v)),) for pt in sweep_points for v in config.sweep[axis]
            ]
    specs = []
    for entry in config.orders:
        order_name, order = resolve_order(entry, n_cameras)
        for variant in config.variants:
            for point in sweep_points:
                for seed in config.seeds:
                    specs.append(RunSpec(variant, order_name, tuple(order), seed, point))
    return specs


def derive_run_seed(spec: RunSpec) -> np.random.SeedSequence:
    """Stable per-run stream: hashing the run key means adding variants,
    orders, or sweep points never perturbs existing runs."""
    key = json.dumps(
        {"seed": spec.seed, "variant": spec.variant, "order": list(spec.order),
         "sweep": list(spec.sweep)},
        sort_keys=True,
    )
    digest = hashlib.sha256(key.encode()).digest()
    return np.random.SeedSequence(int.from_bytes(digest[:16], "big"))


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


class DiskRecorder(RunRecorder):
    """Writes the per-epoch training log and per-camera checkpoints."""

    def __init__(self, run_id: str, run_dir: Path) -> None:
        self.run_id = run_id
        self.run_dir = run_dir
        self.epoch_rows: list[str] = []

    def on_epoch(self, camera_step, camera_id, epoch, mean_breakdown, lr) -> None:
        vals = mean_breakdown.as_row()
        self.epoch_rows.append(
            ",".join([self.run_id, str(camera_id), str(epoch)]
                     + [repr(v) for v in vals] + [repr(lr)])
        )

    def on_camera(self, camera_step, camera_id, state, result) -> None:
        ckpt = self.run_dir / "checkpoints" / f"step{camera_step:02d}_cam{camera_id}"
        ckpt.mkdir(parents=True, exist_ok=True)
        save_encoder(state.encoder, ckpt / "encoder.json")
        save_memory(state.memory, ckpt / "memory.json")

    def flush(self) -> None:
        header = "run_id,camera,epoch,id,id_hist,kd,mkd,total,lr"
        _write_atomic(self.run_dir / "train_log.csv", "\n".join([header] + self.epoch_rows) + "\n")


def execute_run(
    config: ExperimentConfig, spec: RunSpec, bundle: DatasetBundle, run_dir: Path | None
) -> MetricsReport:
    hyper = config.hyper.replace(**{SWEEP_AXES[a]: v for a, v in spec.sweep})
    recorder = None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        recorder = DiskRecorder(spec.run_id, run_dir)
    meta = {"run_id": spec.run_id, "order_name": spec.order_name,
            "sweep": {a: v for a, v in spec.sweep}}
    report = run_sequence(
        bundle,
        list(spec.order),
        Variant(spec.variant),
        hyper,
        config.hidden,
        config.embed_dim,
        derive_run_seed(spec),
        recorder=recorder,
        gallery_rule=config.gallery_rule,
        meta=meta,
        report_seed=spec.seed,
    )
    if run_dir is not None and recorder is not None:
        recorder.flush()
        _write_atomic(run_dir / "metrics.json", json.dumps(report.to_dict(), indent=2) + "\n")
        _write_atomic(run_dir / "metrics.csv", _metrics_csv(spec, report))
    return report


def _metrics_csv(spec: RunSpec, report: MetricsReport) -> str:
    lines = ["run_id,variant,order,camera_step,map,nh,assoc_precision"]
    for k in range(len(report.per_camera_map)):
        prec = report.assoc_precision[k]
        lines.append(",".join([
            spec.run_id, spec.variant, spec.order_name, str(k + 1),
            repr(report.per_camera_map[k]), str(report.nh_trajectory[k]),
            "" if prec is None else repr(prec),
        ]))
    return "\n".join(lines) + "\n"


def _pool_run(payload: tuple[dict, dict, str | None]) -> dict:
    cfg_doc, spec_doc, run_dir = payload
    config = ExperimentConfig.from_dict(cfg_doc)
    spec = RunSpec(
        variant=spec_doc["variant"],
        order_name=spec_doc["order_name"],
        order=tuple(spec_doc["order"]),
        seed=spec_doc["seed"],
        sweep=tuple((a, v) for a, v in spec_doc["sweep"]),
    )
    bundle = fetch_bundle(config.dataset)
    report = execute_run(config, spec, bundle, None if run_dir is None else Path(run_dir))
    return report.to_dict()


def _job_cap(jobs: int) -> int:
    cap = os.environ.get(THREAD_CAP_ENV)
    if cap:
        try:
            jobs = min(jobs, max(1, int(cap)))
        except ValueError as exc:
            raise ConfigError(f"{THREAD_CAP_ENV} must be an integer, got {cap!r}") from exc
    return max(1, jobs)


@dataclass
class RunOutcome:
    out_dir: Path | None
    reports: dict[str, MetricsReport]
    summary_rows: list[dict]


def run(config: ExperimentConfig, out_dir: str | Path | None = None, jobs: int = 1) -> RunOutcome:
    """Execute every (seed, variant, order, sweep point) combination."""
    out = out_dir if out_dir is not None else config.out
    out_path = Path(out) if out is not None else None
    bundle = fetch_bundle(config.dataset)
    specs = enumerate_runs(config, bundle.n_cameras)
    jobs = _job_cap(jobs)
    reports: dict[str, MetricsReport] = {}
    if jobs > 1 and len(specs) > 1:
        import multiprocessing as mp

        payloads = []
        for spec in specs:
            run_dir = None if out_path is None else str(out_path / "runs" / spec.run_id)
            payloads.append((
                config.to_dict(),
                {"variant": spec.variant, "order_name": spec.order_name,
                 "order": list(spec.order), "seed": spec.seed, "sweep": list(spec.sweep)},
                run_dir,
            ))
        with mp.Pool(processes=min(jobs, len(specs))) as pool:
            for spec, doc in zip(specs, pool.map(_pool_run, payloads)):
                reports[spec.run_id] = MetricsReport.from_dict(doc)
    else:
        for spec in specs:
            run_dir = None if out_path is None else out_path / "runs" / spec.run_id
            reports[spec.run_id] = execute_run(config, spec, bundle, run_dir)
    summary_rows = summarize(specs, reports)
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        _write_atomic(out_path / "summary.csv", _summary_csv(config, summary_rows))
        manifest = {
            "config": config.to_dict(),
            "runs": [
                {"run_id": s.run_id, "variant": s.variant, "order": s.order_name,
                 "seed": s.seed, "sweep": {a: v for a, v in s.sweep},
                 "path": f"runs/{s.run_id}"}
                for s in specs
            ],
            "summary": "summary.csv",
        }
        _write_atomic(out_path / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return RunOutcome(out_path, reports, summary_rows)


def summarize(specs: list[RunSpec], reports: dict[str, MetricsReport]) -> list[dict]:
    """Mean and spread over seeds for each (variant, order, sweep point)."""
    groups: dict[tuple, list[RunSpec]] = {}
    for spec in specs:
        groups.setdefault((spec.variant, spec.order_name, spec.sweep), []).append(spec)
    rows = []
    for (variant, order_name, sweep), members in sorted(groups.items(), key=lambda kv: repr(kv[0])):
        fmaps = [reports[m.run_id].fmap for m in members]
        means = [reports[m.run_id].mean_map for m in members]
        nhs = [reports[m.run_id].nh_trajectory[-1] for m in members]
        rows.append({
            "variant": variant,
            "order": order_name,
            "sweep": dict(sweep),
            "seeds": len(members),
            "fmap_mean": float(np.mean(fmaps)),
            "fmap_std": float(np.std(fmaps)),
            "mean_map_mean": float(np.mean(means)),
            "mean_map_std": float(np.std(means)),
            "final_nh_mean": float(np.mean(nhs)),
        })
    return rows


def _summary_csv(config: ExperimentConfig, rows: list[dict]) -> str:
    axes = sorted(config.sweep) if config.sweep else []
    header = ["variant", "order"] + axes + [
        "seeds", "fmap_mean", "fmap_std", "mean_map_mean", "mean_map_std", "final_nh_mean",
    ]
    lines = [",".join(header)]
    for row in rows:
        cells = [row["variant"], row["order"]]
        cells += [repr(row["sweep"].get(a)) if a in row["sweep"] else "" for a in axes]
        cells += [str(row["seeds"])] + [
            repr(row[k]) for k in ("fmap_mean", "fmap_std", "mean_map_mean", "mean_map_std", "final_nh_mean")
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Selftest: run the oracle suites and report max errors.
# ---------------------------------------------------------------------------


GRAD_TERMS = ("id", "id_hist", "kd", "mkd", "ikd")


def make_loss_closure(
    term: str,
    hist_params: EncoderParams,
    X: np.ndarray,
    y: np.ndarray,
    y_hist: np.ndarray,
    cur_memory: IdentityMemory,
    hist_memory: IdentityMemory,
    hyper: Hyperparams,
):
    """Closure (params) -> (scalar, ParamGrads) for one loss term composed
    through the encoder; history features and memories are constants."""
    if term not in GRAD_TERMS:
        raise ConfigError(f"unknown loss term {term!r}")
    gates = (y_hist != -1).astype(np.float64)
    out_h = forward_batch(hist_params, X)

    def closure(params: EncoderParams):
        if term == "ikd":
            breakdown, grads, _ = batch_loss_and_grads(
                Variant.IKE, params, hist_params, X, y, y_hist, cur_memory, hist_memory, hyper
            )
            return breakdown.total, grads
        out_c = forward_batch(params, X)
        g2 = g3 = None
        if term == "id":
            value, gF = loss_id(out_c.embeddings, y, cur_memory, hyper.tau)
        elif term == "id_hist":
            value, gF = loss_id_hist(out_c.embeddings, y_hist, hist_memory, hyper.tau)
        elif term == "kd":
            value, gF = loss_kd(out_c.embeddings, out_h.embeddings, gates)
        else:
            value, (g2, g3) = loss_mkd(out_c.middles, out_h.middles, gates)
            gF = np.zeros_like(out_c.embeddings)
        return value, backward(params, out_c.cache, gF, g2, g3)

    return closure


def _random_grad_fixture(rng: np.random.Generator, input_dim=6, hidden=(8, 8, 8), embed=6,
                         batch=5, n_cur=7, n_hist=5):
    def unit_rows(n, d):
        M = rng.normal(size=(n, d))
        return M / np.linalg.norm(M, axis=1, keepdims=True)

    params = init_encoder([input_dim, *hidden, embed], rng)
    hist_params = init_encoder([input_dim, *hidden, embed], rng)
    X = rng.normal(size=(batch, input_dim))
    y = rng.integers(n_cur, size=batch)
    y_hist = np.where(rng.random(batch) < 0.5, rng.integers(n_hist, size=batch), -1)
    cur_memory = IdentityMemory(unit_rows(n_cur, embed))
    hist_memory = IdentityMemory(unit_rows(n_hist, embed))
    return params, hist_params, X, y, y_hist, cur_memory, hist_memory


@dataclass
class SelftestReport:
    rows: list[tuple[str, str, float, float, bool]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for *_, ok in self.rows)

    def add(self, suite: str, detail: str, value: float, threshold: float) -> None:
        self.rows.append((suite, detail, value, threshold, value <= threshold))

    def format_table(self) -> str:
        lines = [f"{'suite':<22} {'detail':<12} {'max error':>12} {'threshold':>10}  status"]
        for suite, detail, value, threshold, ok in self.rows:
            lines.append(
                f"{suite:<22} {detail:<12} {value:>12.3e} {threshold:>10.0e}  {'ok' if ok else 'FAIL'}"
            )
        lines.append("selftest: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def selftest(fault: str | None = None, seed: int = 2024) -> SelftestReport:
    """Cross-check the fast paths against the dumb oracles.

    fault names a loss term whose analytic gradient is perturbed before
    checking; used as a negative control in tests.
    """
    from .association import cycle_match
    from .evaluation import evaluate_map as _  # noqa: F401 (import sanity)
    from .memory import iku_merge, momentum_update

    report = SelftestReport()
    rng = np.random.default_rng(seed)

    def unit_rows(n, d):
        M = rng.normal(size=(n, d))
        return M / np.linalg.norm(M, axis=1, keepdims=True)

    # cycle matching vs exhaustive scan
    mismatches = 0
    for _t in range(200):
        n_c = int(rng.integers(1, 40))
        n_h = int(rng.integers(0, 40))
        d = int(rng.choice([8, 16]))
        cur = IdentityMemory(unit_rows(n_c, d))
        hist = IdentityMemory(unit_rows(n_h, d)) if n_h else IdentityMemory(np.zeros((0, d)))
        got = cycle_match(cur, hist).matches.tolist()
        want = oracles.mutual_argmax_oracle(cur.rows, hist.rows)
        if got != want:
            mismatches += 1
    report.add("cycle-match", "mismatches", float(mismatches), 0.0)

    # memory algebra vs hand recomputation
    max_err = 0.0
    for _t in range(100):
        d = int(rng.integers(2, 12))
        mem = IdentityMemory(unit_rows(int(rng.integers(1, 10)), d))
        f = unit_rows(1, d)[0]
        idx = int(rng.integers(len(mem)))
        omega = float(rng.choice([0.0, 0.1, 0.5, 1.0]))
        want = oracles.momentum_oracle(mem.rows[idx].copy(), f, omega)
        momentum_update(mem, idx, f, omega)
        max_err = max(max_err, float(np.max(np.abs(mem.rows[idx] - want))))
        n_h = int(rng.integers(1, 8))
        n_c = int(rng.integers(1, 8))
        hist = IdentityMemory(unit_rows(n_h, d))
        cur = IdentityMemory(unit_rows(n_c, d))
        matches = np.array([
            int(rng.integers(n_h)) if rng.random() < 0.5 else -1 for _ in range(n_c)
        ])
        lam = float(rng.choice([0.0, 0.25, 1.0]))
        got = iku_merge(hist, cur, matches, lam)
        want_rows = oracles.iku_oracle(hist.rows, cur.rows, matches, lam)
        if got.rows.shape != want_rows.shape:
            report.add("memory-algebra", "iku-shape", 1.0, 0.0)
            break
        max_err = max(max_err, float(np.max(np.abs(got.rows - want_rows))))
    report.add("memory-algebra", "max-abs-err", max_err, 1e-12)

    # retrieval mAP vs python-sorted oracle
    from .evaluation import evaluate_map
    from .datasets import TestSplit
    max_err = 0.0
    for _t in range(40):
        n = int(rng.integers(6, 30))
        d = 8
        emb_dim = 6
        params = init_encoder([d, 8, 8, emb_dim], rng)
        X = rng.normal(size=(n, d))
        gids = rng.integers(4, size=n)
        cams = rng.integers(3, size=n)
        if np.unique(cams).size < 2:
            cams[: n // 2] = 0
            cams[n // 2 :] = 1
        split = TestSplit(X, gids, cams)
        try:
            got = evaluate_map(params, split)
        except LabError:
            continue
        emb = forward_batch(params, X).embeddings
        want = oracles.map_oracle(emb, gids.tolist(), cams.tolist())
        max_err = max(max_err, abs(got - want))
    report.add("retrieval-map", "max-abs-err", max_err, 1e-12)

    # analytic gradients vs central differences
    fixture = _random_grad_fixture(rng)
    params = fixture[0]
    hyper = Hyperparams(tau=0.05)
    for term in GRAD_TERMS:
        closure = make_loss_closure(term, *fixture[1:], hyper)
        if fault == term:
            base = closure

            def closure(p, _base=base):
                value, grads = _base(p)
                grads.weights[0] = grads.weights[0] + 1e-3
                return value, grads

        err = grad_check(params, closure, step=1e-5)
        report.add("gradients", term, err, 1e-6)
    return report

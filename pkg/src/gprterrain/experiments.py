"""Seed-averaged band, window-length and model-family studies on a radargram corpus."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataio import write_csv_table
from .models import (
    CLASS_COLUMNS,
    VAE_EPOCHS,
    Architecture,
    ClusterVae,
    ConfigError,
    EvalReport,
    ModelConfig,
    TrainConfig,
    aggregate,
    build_model,
    evaluate,
    train,
)
from .preprocess import Band, DatasetSplit, SliceSpec, normalize, split_dataset
from .simulate import N_CLASSES, N_SAMPLES, Radargram

log = logging.getLogger(__name__)

LENGTH_WIDTHS = (1, 8, 16, 24, 32)
MIN_AVERAGED_TRIALS = 2


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared protocol settings; trial seeds default to 1..trials."""

    trials: int = 5
    epochs: int = 20
    vae_epochs: int = VAE_EPOCHS
    batch_size: int = 32
    lr: float = 1e-3
    split_seed: int = 42
    train_fraction: float = 0.8
    stride: int = 4
    seeds: tuple[int, ...] | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.seeds is not None:
            object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
            object.__setattr__(self, "trials", len(self.seeds))
        if self.trials < MIN_AVERAGED_TRIALS:
            raise ConfigError(f"averaged experiments need at least {MIN_AVERAGED_TRIALS} trials, got {self.trials}")
        if self.epochs < 1 or self.vae_epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")

    @property
    def trial_seeds(self) -> tuple[int, ...]:
        return self.seeds if self.seeds is not None else tuple(range(1, self.trials + 1))

    def snapshot(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.trial_seeds)
        del d["jobs"]  # parallelism never changes results
        return d


@dataclass
class ConditionResult:
    name: str
    report: EvalReport  # aggregated over trials
    seeds: tuple[int, ...]
    test_ids: tuple[str, ...]
    params: dict = field(default_factory=dict)
    kmeans_sse: tuple[tuple[float, ...], ...] = ()  # per trial, VAE conditions only

    @property
    def mean(self) -> float:
        return self.report.overall

    @property
    def raw(self) -> tuple[float, ...]:
        return self.report.trial_overall


@dataclass
class LatentProjection:
    """First two principal components of test-set latent means."""

    scores: np.ndarray  # (n, 2)
    basis: np.ndarray  # (2, latent_dim), orthonormal rows
    labels: np.ndarray
    clusters: np.ndarray


@dataclass
class ExperimentReport:
    experiment: str
    conditions: list[ConditionResult]
    config: dict
    latent: LatentProjection | None = None

    def condition(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(f"no condition {name!r} in {self.experiment} report")

    def means(self) -> dict[str, float]:
        return {c.name: c.mean for c in self.conditions}

    def frozen_test(self) -> bool:
        ids = {c.test_ids for c in self.conditions}
        return len(ids) == 1


# --- per-trial work ---------------------------------------------------------

@dataclass(frozen=True)
class _Task:
    condition: str
    model_cfg: ModelConfig
    train_cfg: TrainConfig


def _run_trial(task: _Task, split: DatasetSplit) -> tuple[EvalReport, ClusterVae | None, tuple[float, ...]]:
    model = build_model(task.model_cfg, seed=task.train_cfg.seed)
    try:
        result = train(model, split, task.train_cfg)
    except Exception as exc:
        raise ExperimentError(f"condition {task.condition}, seed {task.train_cfg.seed}: {exc}") from exc
    x, y = split.arrays("test")
    report = evaluate(model, x, y)
    if isinstance(model, ClusterVae):
        return report, model, tuple(result.extras["kmeans_init"].sse_history)
    return report, None, ()


def _pool_trial(args):
    return _run_trial(*args)


def _check_corpus(corpus: Sequence[Radargram], min_width: int):
    present = set()
    for r in corpus:
        present.update(int(v) for v in np.unique(r.labels))
    if len(present) < N_CLASSES:
        raise ExperimentError(f"corpus covers classes {sorted(present)}; all {N_CLASSES} are required")
    if not any(r.width >= min_width for r in corpus):
        raise ExperimentError(f"no radargram is at least {min_width} traces wide")


def _prepare(corpus, spec: SliceSpec, cfg: ExperimentConfig) -> DatasetSplit:
    split = split_dataset(corpus, spec, cfg.train_fraction, cfg.split_seed)
    if not split.train or not split.test:
        raise ExperimentError(f"slicing with {spec} left an empty train or test set")
    return normalize(split)


def _run_conditions(experiment: str, corpus, plan: list[tuple[str, SliceSpec, ModelConfig, int, dict]],
                    cfg: ExperimentConfig, corpus_info: dict | None) -> ExperimentReport:
    """Train every (condition, seed) pair and reduce in plan-then-seed order."""
    splits = {}
    jobs = []
    for name, spec, mcfg, epochs, _ in plan:
        splits[name] = _prepare(corpus, spec, cfg)
        for seed in cfg.trial_seeds:
            tcfg = TrainConfig(epochs=epochs, batch_size=cfg.batch_size, lr=cfg.lr, seed=seed,
                               trials=cfg.trials)
            jobs.append((_Task(name, mcfg, tcfg), splits[name]))
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_pool_trial, jobs))
    else:
        results = []
        for task, split in jobs:
            log.info("%s: %s seed %d", experiment, task.condition, task.train_cfg.seed)
            results.append(_run_trial(task, split))

    conditions = []
    latent = None
    n = cfg.trials
    for i, (name, spec, mcfg, epochs, params) in enumerate(plan):
        chunk = results[i * n:(i + 1) * n]
        conditions.append(ConditionResult(
            name, aggregate([r for r, _, _ in chunk]), cfg.trial_seeds, splits[name].test_ids,
            {**params, "architecture": mcfg.architecture.value, "rows": mcfg.rows,
             "cols": mcfg.cols, "band": spec.band.value, "stride": spec.s, "epochs": epochs},
            tuple(sse for _, _, sse in chunk if sse),
        ))
        vae = chunk[0][1]
        if vae is not None and latent is None:
            latent = latent_projection(vae, splits[name])
    config = {"experiment": experiment, "protocol": cfg.snapshot(), "corpus": corpus_info or {},
              "n_radargrams": len(corpus)}
    return ExperimentReport(experiment, conditions, config, latent)


# --- the three studies ------------------------------------------------------

def run_band_experiment(corpus: Sequence[Radargram], cfg: ExperimentConfig = ExperimentConfig(),
                        corpus_info: dict | None = None) -> ExperimentReport:
    """Cnn2d on the reflected, direct and full bands with 32-trace windows."""
    _check_corpus(corpus, 32)
    plan = []
    for band in (Band.REFLECTED, Band.DIRECT, Band.FULL):
        spec = SliceSpec(32, cfg.stride, band)
        mcfg = ModelConfig(Architecture.CNN2D, band.height, 32)
        plan.append((band.value, spec, mcfg, cfg.epochs, {"width": 32}))
    return _run_conditions("band", corpus, plan, cfg, corpus_info)


def run_length_experiment(corpus: Sequence[Radargram], cfg: ExperimentConfig = ExperimentConfig(),
                          widths: Sequence[int] = LENGTH_WIDTHS,
                          corpus_info: dict | None = None) -> ExperimentReport:
    """Accuracy against window width.

    Width 1 is the single-trace Cnn1d on full 200-sample traces; wider
    windows use Cnn2d on the direct band.
    """
    _check_corpus(corpus, max(widths))
    plan = []
    for w in widths:
        if w == 1:
            spec = SliceSpec(1, 1, Band.FULL)
            mcfg = ModelConfig(Architecture.CNN1D, N_SAMPLES, 1)
        else:
            spec = SliceSpec.for_width(w, Band.DIRECT, cfg.stride)
            mcfg = ModelConfig(Architecture.CNN2D, Band.DIRECT.height, w)
        plan.append((f"w{w}", spec, mcfg, cfg.epochs, {"width": w}))
    return _run_conditions("length", corpus, plan, cfg, corpus_info)


def run_model_comparison(corpus: Sequence[Radargram], cfg: ExperimentConfig = ExperimentConfig(),
                         corpus_info: dict | None = None) -> ExperimentReport:
    """Cnn1d on single traces, then ClusterVae and Cnn2d on 60x32 direct-band slices."""
    _check_corpus(corpus, 32)
    direct = SliceSpec(32, cfg.stride, Band.DIRECT)
    plan = [
        ("cnn1d", SliceSpec(1, 1, Band.FULL), ModelConfig(Architecture.CNN1D, N_SAMPLES, 1), cfg.epochs, {}),
        ("cluster-vae", direct, ModelConfig(Architecture.CLUSTER_VAE, 60, 32), cfg.vae_epochs, {}),
        ("cnn2d", direct, ModelConfig(Architecture.CNN2D, 60, 32), cfg.epochs, {}),
    ]
    return _run_conditions("models", corpus, plan, cfg, corpus_info)


def latent_projection(model: ClusterVae, split: DatasetSplit) -> LatentProjection:
    x, y = split.arrays("test")
    mu = model.embed(x)
    centered = mu - mu.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    basis = vt[:2]
    # fix the sign so the largest-magnitude loading of each component is positive
    for i in range(len(basis)):
        if basis[i, np.argmax(np.abs(basis[i]))] < 0:
            basis[i] = -basis[i]
    return LatentProjection(centered @ basis.T, basis, y, model.predict(x))


# --- emission ---------------------------------------------------------------

def _fmt(v: float) -> str:
    return "nan" if not np.isfinite(v) else f"{v:.6f}"


def report_rows(report: ExperimentReport) -> list[list[str]]:
    rows = []
    for c in report.conditions:
        rows.append([c.name, str(c.report.trials), _fmt(c.mean), *(_fmt(v) for v in c.report.per_class),
                     ";".join(_fmt(v) for v in c.raw)])
    return rows


REPORT_HEADER = ["condition", "trials", "overall", *CLASS_COLUMNS, "trial_values"]


def text_table(report: ExperimentReport) -> str:
    header = REPORT_HEADER[:-1]
    rows = [r[:-1] for r in report_rows(report)]
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(header, widths)))]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(v.ljust(w) if i == 0 else v.rjust(w) for i, (v, w) in enumerate(zip(r, widths))))
    return "\n".join(lines) + "\n"


def emit_report(report: ExperimentReport, out_dir) -> list[Path]:
    """Write ``<id>.csv``, ``<id>.txt``, ``<id>_meta.json`` and, for the models study, ``<id>_latent_pca.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = report.experiment
    paths = [out / f"{stem}.csv", out / f"{stem}.txt", out / f"{stem}_meta.json"]
    write_csv_table(report_rows(report), paths[0], header=REPORT_HEADER)
    paths[1].write_text(text_table(report), encoding="utf-8")
    meta = {
        "config": report.config,
        "conditions": [
            {"name": c.name, "params": c.params, "seeds": list(c.seeds), "trial_values": list(c.raw),
             "test_ids": list(c.test_ids)}
            for c in report.conditions
        ],
    }
    paths[2].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if report.latent is not None:
        lp = report.latent
        rows = [[_fmt(a), _fmt(b), CLASS_COLUMNS[int(l)], str(int(k))]
                for (a, b), l, k in zip(lp.scores, lp.labels, lp.clusters)]
        paths.append(out / f"{stem}_latent_pca.csv")
        write_csv_table(rows, paths[-1], header=["pc1", "pc2", "label", "cluster"])
    return paths

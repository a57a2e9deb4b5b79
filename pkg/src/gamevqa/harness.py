"""Evaluation machinery: dataset index, content-disjoint splits, the
train/test protocol with grid-search CV, ablation masks, noise sweeps, and
wall-clock benchmarking."""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .deepfeat import chunk_deep_features
from .media import open_video, sample_chunks
from .metrics import MetricsRow, compute_metrics
from .nss import SPATIAL_DIM, NoiseConfig, extract_spatial_features
from .svr import SvrHyper, fit_scaler, grid_search_cv, predict_svr, train_svr
from .temporal import TEMPORAL_DIM, extract_temporal_features

METRIC_NAMES = ("srcc", "krcc", "plcc", "rmse")


class DatasetError(Exception):
    """Invalid dataset index."""


@dataclass(frozen=True)
class DatasetEntry:
    video_id: str
    content_id: str
    mos: float
    media_path: str
    features_path: str | None = None


@dataclass
class DatasetIndex:
    entries: list[DatasetEntry]
    mos_range: tuple[float, float] = (0.0, 100.0)

    def __post_init__(self):
        ids = [e.video_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise DatasetError("duplicate video_id in dataset index")
        lo, hi = self.mos_range
        for e in self.entries:
            if not (lo <= e.mos <= hi):
                raise DatasetError(f"video {e.video_id!r}: MOS {e.mos} outside range [{lo}, {hi}]")

    @property
    def contents(self) -> list[str]:
        return sorted({e.content_id for e in self.entries})

    def content_ids(self) -> np.ndarray:
        return np.array([e.content_id for e in self.entries])

    def mos(self) -> np.ndarray:
        return np.array([e.mos for e in self.entries], dtype=np.float64)


def load_index(path: str, mos_range: tuple[float, float] = (0.0, 100.0)) -> DatasetIndex:
    """Read the CSV index: video_id,content_id,mos,media_path[,features_path]."""
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"video_id", "content_id", "mos", "media_path"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise DatasetError(f"{path}: index header must contain {sorted(required)}")
        for row in reader:
            entries.append(
                DatasetEntry(
                    video_id=row["video_id"],
                    content_id=row["content_id"],
                    mos=float(row["mos"]),
                    media_path=row["media_path"],
                    features_path=row.get("features_path") or None,
                )
            )
    if not entries:
        raise DatasetError(f"{path}: empty dataset index")
    return DatasetIndex(entries=entries, mos_range=mos_range)


# ---------------------------------------------------------------------------
# Splits


@dataclass(frozen=True)
class SplitSpec:
    split_id: int
    train_contents: frozenset
    test_contents: frozenset
    seed: int


def generate_splits(
    index: DatasetIndex, train_frac: float = 0.8, n: int = 1000, seed: int = 0
) -> list[SplitSpec]:
    """n seeded uniform content-level 80/20 splits."""
    if not (0.0 < train_frac < 1.0):
        raise ValueError("train_frac must be in (0, 1)")
    contents = index.contents
    if len(contents) < 2:
        raise DatasetError("need at least 2 contents to split")
    n_train = round(train_frac * len(contents))
    n_train = min(max(n_train, 1), len(contents) - 1)
    splits = []
    for split_id in range(n):
        rng = np.random.Generator(
            np.random.Philox(seed=np.random.SeedSequence(entropy=(seed, split_id, 0x5011)))
        )
        order = rng.permutation(len(contents))
        train = frozenset(contents[i] for i in order[:n_train])
        test = frozenset(contents[i] for i in order[n_train:])
        splits.append(SplitSpec(split_id=split_id, train_contents=train, test_contents=test, seed=seed))
    return splits


# ---------------------------------------------------------------------------
# Ablation masks


@dataclass(frozen=True)
class AblationMask:
    include_spatial: bool = True
    include_temporal: bool = True
    include_deep: bool = True

    def __post_init__(self):
        if not (self.include_spatial or self.include_temporal or self.include_deep):
            raise ValueError("ablation mask must keep at least one feature group")

    @property
    def label(self) -> str:
        parts = []
        if self.include_spatial:
            parts.append("S")
        if self.include_temporal:
            parts.append("T")
        if self.include_deep:
            parts.append("D")
        return "+".join(parts)

    def columns(self) -> np.ndarray:
        cols = []
        if self.include_spatial:
            cols.append(np.arange(0, SPATIAL_DIM))
        if self.include_temporal:
            cols.append(np.arange(SPATIAL_DIM, SPATIAL_DIM + TEMPORAL_DIM))
        if self.include_deep:
            cols.append(np.arange(SPATIAL_DIM + TEMPORAL_DIM, SPATIAL_DIM + TEMPORAL_DIM + 1024))
        return np.concatenate(cols)


ALL_MASKS = (
    AblationMask(True, False, False),
    AblationMask(False, True, False),
    AblationMask(False, False, True),
    AblationMask(True, True, False),
    AblationMask(True, False, True),
    AblationMask(False, True, True),
    AblationMask(True, True, True),
)


# ---------------------------------------------------------------------------
# Experiment protocol


def _run_split(args) -> dict:
    X, y, content_ids, split, grid, cv_folds = args
    train = np.flatnonzero(np.isin(content_ids, sorted(split.train_contents)))
    test = np.flatnonzero(np.isin(content_ids, sorted(split.test_contents)))
    best, _ = grid_search_cv(
        X[train], y[train], content_ids[train], grid=grid, k=cv_folds,
        seed=split.seed * 100_003 + split.split_id,
    )
    scaler = fit_scaler(X[train])
    model = train_svr(scaler.apply(X[train]), y[train], best, scaler=scaler)
    pred = predict_svr(model, X[test])
    row = compute_metrics(pred, y[test])
    return {
        "split_id": split.split_id,
        "hyper": {"c": best.c, "gamma": best.gamma, "epsilon": best.epsilon},
        **row.as_dict(),
    }


def aggregate_report(rows: list[dict]) -> dict:
    """Medians over defined per-split metrics; NaN-flagged rows are excluded."""
    valid = [r for r in rows if not r["undefined"]]
    medians = {
        name: float(np.median([r[name] for r in valid])) if valid else float("nan")
        for name in METRIC_NAMES
    }
    return {
        "n_splits": len(rows),
        "n_excluded_undefined": len(rows) - len(valid),
        "medians": medians,
        "splits": rows,
    }


def run_experiment(
    X: np.ndarray,
    y: np.ndarray,
    content_ids: np.ndarray,
    splits: list[SplitSpec],
    mask: AblationMask = AblationMask(),
    grid: list[SvrHyper] | None = None,
    cv_folds: int = 5,
    jobs: int = 1,
) -> dict:
    """Per split: grid-search CV on the train side, refit, predict, score."""
    X = np.asarray(X, dtype=np.float64)[:, mask.columns()]
    y = np.asarray(y, dtype=np.float64)
    content_ids = np.asarray(content_ids)
    tasks = [(X, y, content_ids, s, grid, cv_folds) for s in splits]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_split, tasks, chunksize=max(1, len(tasks) // (jobs * 4) or 1)))
    else:
        rows = [_run_split(t) for t in tasks]
    report = aggregate_report(rows)
    report["mask"] = mask.label
    report["feature_width"] = int(X.shape[1])
    return report


def run_ablation(X, y, content_ids, splits, grid=None, cv_folds: int = 5, jobs: int = 1) -> dict:
    """The 7-mask sweep of Appendix-style feature combinations."""
    results = {}
    for mask in ALL_MASKS:
        results[mask.label] = run_experiment(
            X, y, content_ids, splits, mask=mask, grid=grid, cv_folds=cv_folds, jobs=jobs
        )
    return results


def noise_sweep(extract_for_sigma, sigma_list, run_for_features) -> list[dict]:
    """Re-extract NSS features per sigma and rerun the experiment.

    `extract_for_sigma(sigma) -> (X, y, content_ids)` and
    `run_for_features(X, y, content_ids) -> report` are supplied by the CLI so
    the harness stays independent of storage layout.
    """
    table = []
    for sigma in sigma_list:
        X, y, content_ids = extract_for_sigma(sigma)
        report = run_for_features(X, y, content_ids)
        table.append({"sigma": sigma, "medians": report["medians"], "report": report})
    return table


# ---------------------------------------------------------------------------
# Runtime benchmarking


def benchmark_runtime(
    source: str,
    fmt: str,
    config: RunConfig,
    spec=None,
    provider=None,
    model=None,
    stages: set[str] | None = None,
    trials: int = 3,
) -> dict:
    """Wall-clock seconds per pipeline stage, averaged over trials."""
    if stages is None:
        stages = {"decode", "spatial", "temporal"}
        if provider is not None:
            stages.add("deep")
        if model is not None:
            stages.add("predict")
    noise = NoiseConfig(config.sigma_spatial, config.sigma_temporal, config.seed)
    timings: dict[str, list[float]] = {s: [] for s in stages}
    totals = []
    for _ in range(trials):
        t_start = time.perf_counter()
        t0 = time.perf_counter()
        vspec, frames = open_video(source, fmt, spec)
        chunks = list(sample_chunks(frames, vspec, config.spatial_rate, config.temporal_rate))
        t1 = time.perf_counter()
        if "decode" in stages:
            timings["decode"].append(t1 - t0)
        feats = {}
        if "spatial" in stages:
            t0 = time.perf_counter()
            feats["spatial"] = np.mean(
                [extract_spatial_features(c, noise, config.scales) for c in chunks], axis=0
            )
            timings["spatial"].append(time.perf_counter() - t0)
        if "temporal" in stages:
            t0 = time.perf_counter()
            feats["temporal"] = np.mean(
                [extract_temporal_features(c, noise, config.scales) for c in chunks], axis=0
            )
            timings["temporal"].append(time.perf_counter() - t0)
        if "deep" in stages:
            t0 = time.perf_counter()
            feats["deep"] = np.mean(
                [chunk_deep_features(provider, c, source) for c in chunks], axis=0
            )
            timings["deep"].append(time.perf_counter() - t0)
        if "predict" in stages:
            x = np.concatenate([feats[k] for k in ("spatial", "temporal", "deep") if k in feats])
            t0 = time.perf_counter()
            predict_svr(model, x)
            timings["predict"].append(time.perf_counter() - t0)
        totals.append(time.perf_counter() - t_start)
    report = {
        stage: {"mean_s": float(np.mean(v)), "std_s": float(np.std(v)), "trials": len(v)}
        for stage, v in timings.items()
    }
    report["total"] = {"mean_s": float(np.mean(totals)), "std_s": float(np.std(totals)), "trials": trials}
    return report

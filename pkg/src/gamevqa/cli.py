"""Command-line entry points orchestrating extraction, training, prediction,
evaluation, ablation, noise sweeps, and benchmarking."""

from __future__ import annotations

import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import click
import numpy as np

from . import harness
from .config import RunConfig, load_config
from .deepfeat import EmbeddingError, make_provider
from .features import (
    COMBINED_DIM,
    FeatureFileError,
    IncompleteRecordError,
    extract_video,
    read_record,
    write_record,
)
from .harness import AblationMask, DatasetError, load_index
from .media import FormatError, MediaError, VideoSpec
from .metrics import compute_metrics
from .nss import SPATIAL_DIM
from .svr import (
    ModelFormatError,
    SvrHyper,
    default_grid,
    fit_scaler,
    grid_search_cv,
    load_model,
    predict_svr,
    save_model,
    train_svr,
)
from .temporal import TEMPORAL_DIM

VALIDATION_ERRORS = (
    ValueError,
    DatasetError,
    FeatureFileError,
    IncompleteRecordError,
    ModelFormatError,
    FormatError,
)
RUNTIME_ERRORS = (MediaError, EmbeddingError, OSError)


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except VALIDATION_ERRORS as exc:
            _fail(1, str(exc))
        except RUNTIME_ERRORS as exc:
            _fail(2, str(exc))

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def parse_mask(text: str) -> AblationMask:
    letters = set(text.upper().replace("+", ""))
    if not letters <= {"S", "T", "D"}:
        raise ValueError(f"bad mask {text!r}: use letters S, T, D (e.g. 'S+T' or 'STD')")
    return AblationMask("S" in letters, "T" in letters, "D" in letters)


def _parse_display(text: str | None):
    if text is None:
        return None
    w, _, h = text.lower().partition("x")
    return (int(w), int(h))


def _config_from_options(config_path, **overrides) -> RunConfig:
    return load_config(config_path, **overrides)


def _video_spec_for(path: str, fmt: str, width, height, fps) -> VideoSpec | None:
    if fmt != "raw-yuv":
        return None
    sidecar = Path(path).with_suffix(Path(path).suffix + ".json")
    if width is None and sidecar.exists():
        meta = json.loads(sidecar.read_text())
        return VideoSpec(
            width=int(meta["width"]),
            height=int(meta["height"]),
            frame_rate=Fraction(int(meta["fps_num"]), int(meta.get("fps_den", 1))),
        )
    if width is None or height is None or fps is None:
        raise ValueError("raw-yuv input needs --width/--height/--fps or a JSON sidecar")
    return VideoSpec(width=width, height=height, frame_rate=Fraction(fps).limit_denominator(1001))


def _extract_one(args) -> tuple[str, str | None]:
    path, fmt, spec, config, video_id, provider_spec, keep_chunks, out_path = args
    try:
        provider = make_provider(provider_spec, timeout=config.timeout) if provider_spec else None
        record = extract_video(
            path, fmt, config, video_id, spec=spec, provider=provider, keep_chunks=keep_chunks
        )
        write_record(record, out_path)
        return video_id, None
    except (*VALIDATION_ERRORS, *RUNTIME_ERRORS, EmbeddingError) as exc:
        return video_id, str(exc)


common_config_options = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None, help="TOML config file"),
    click.option("--seed", type=int, default=None),
    click.option("--sigma-spatial", type=float, default=None),
    click.option("--sigma-temporal", type=float, default=None),
    click.option("--scales", default=None, help="comma-separated short-side scales, e.g. 540,270"),
    click.option("--display", default=None, help="WxH upscale applied before extraction"),
    click.option("--jobs", type=int, default=None),
]


def add_options(options):
    def wrap(fn):
        for opt in reversed(options):
            fn = opt(fn)
        return fn

    return wrap


def _overrides(seed, sigma_spatial, sigma_temporal, scales, display, jobs):
    return dict(
        seed=seed,
        sigma_spatial=sigma_spatial,
        sigma_temporal=sigma_temporal,
        scales=tuple(int(s) for s in scales.split(",")) if scales else None,
        display=_parse_display(display),
        jobs=jobs,
    )


@click.group()
def main():
    """No-reference cloud-gaming video quality toolkit."""


@main.command()
@click.argument("videos", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["y4m", "raw-yuv"]), default="y4m")
@click.option("--width", type=int, default=None)
@click.option("--height", type=int, default=None)
@click.option("--fps", type=float, default=None)
@click.option("--deep-provider", default=None, help="file:PATH or http:URL")
@click.option("--no-deep", is_flag=True, help="skip the deep segment; record is marked incomplete")
@click.option("--keep-chunks", is_flag=True)
@add_options(common_config_options)
@guarded
def extract(videos, out_dir, fmt, width, height, fps, deep_provider, no_deep, keep_chunks,
            config_path, seed, sigma_spatial, sigma_temporal, scales, display, jobs):
    """Extract per-video feature records into GFV1 files."""
    config = _config_from_options(config_path, **_overrides(seed, sigma_spatial, sigma_temporal, scales, display, jobs))
    if deep_provider is None and not no_deep:
        raise ValueError("give --deep-provider, or pass --no-deep for NSS-only extraction")
    os.makedirs(out_dir, exist_ok=True)
    tasks = []
    for path in videos:
        video_id = Path(path).stem
        spec = _video_spec_for(path, fmt, width, height, fps)
        out_path = os.path.join(out_dir, f"{video_id}.gfv")
        tasks.append((path, fmt, spec, config, video_id, None if no_deep else deep_provider, keep_chunks, out_path))
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_extract_one, tasks))
    else:
        results = [_extract_one(t) for t in tasks]
    failed = [(vid, msg) for vid, msg in results if msg]
    for vid, msg in failed:
        click.echo(f"FAILED {vid}: {msg}", err=True)
    for vid, msg in results:
        if not msg:
            click.echo(f"extracted {vid}")
    if failed:
        sys.exit(2)


def _load_matrix(index, features_dir, config, mask: AblationMask):
    """Stack records into an (n, 2180) matrix; masked-out segments may be absent."""
    X = np.zeros((len(index.entries), COMBINED_DIM))
    for i, entry in enumerate(index.entries):
        path = entry.features_path or os.path.join(features_dir, f"{entry.video_id}.gfv")
        if not os.path.exists(path):
            raise FeatureFileError(f"missing feature file for video {entry.video_id!r}: {path}")
        rec = read_record(path, expect_config_hash=config.config_hash())
        for name, seg, lo, dim, needed in (
            ("spatial", rec.spatial, 0, SPATIAL_DIM, mask.include_spatial),
            ("temporal", rec.temporal, SPATIAL_DIM, TEMPORAL_DIM, mask.include_temporal),
            ("deep", rec.deep, SPATIAL_DIM + TEMPORAL_DIM, 1024, mask.include_deep),
        ):
            if seg is not None:
                X[i, lo : lo + dim] = seg
            elif needed:
                raise IncompleteRecordError(
                    f"video {entry.video_id!r}: record lacks the {name} segment required by mask {mask.label}"
                )
    return X


def _parse_grid(grid_text: str | None, epsilon: float) -> list[SvrHyper] | None:
    """Grid syntax: 'C1,C2/G1,G2'; None keeps the full default grid."""
    if grid_text is None:
        return None
    cs, _, gs = grid_text.partition("/")
    return [
        SvrHyper(c=float(c), gamma=float(g), epsilon=epsilon)
        for c in cs.split(",")
        for g in gs.split(",")
    ]


@main.command()
@click.argument("index_csv", type=click.Path(exists=True))
@click.option("--features", "features_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--mask", "mask_text", default="STD")
@click.option("--grid", "grid_text", default=None, help="hyper grid 'C1,C2/G1,G2' (default: full powers-of-2 grid)")
@click.option("--cv-folds", type=int, default=5)
@click.option("--epsilon", type=float, default=1.0)
@add_options(common_config_options)
@guarded
def train(index_csv, features_dir, out_path, mask_text, grid_text, cv_folds, epsilon,
          config_path, seed, sigma_spatial, sigma_temporal, scales, display, jobs):
    """Grid-search CV then fit the final model on all provided data."""
    config = _config_from_options(config_path, **_overrides(seed, sigma_spatial, sigma_temporal, scales, display, jobs))
    mask = parse_mask(mask_text)
    index = load_index(index_csv)
    X = _load_matrix(index, features_dir, config, mask)[:, mask.columns()]
    y = index.mos()
    grid = _parse_grid(grid_text, epsilon) or default_grid(epsilon)
    best, table = grid_search_cv(X, y, index.content_ids(), grid=grid, k=cv_folds, seed=config.seed)
    scaler = fit_scaler(X)
    model = train_svr(scaler.apply(X), y, best, scaler=scaler, schema_hash=config.schema_hash(mask.label))
    save_model(model, out_path)
    report = {
        "best": {"c": best.c, "gamma": best.gamma, "epsilon": best.epsilon},
        "converged": model.converged,
        "n_support_vectors": int(model.dual_coefs.size),
        "cv": [
            {"c": r.hyper.c, "gamma": r.hyper.gamma, "mean_srcc": r.mean_srcc, "fold_srcc": list(r.fold_srcc)}
            for r in table
        ],
    }
    report_path = str(Path(out_path).with_suffix(".cv.json"))
    Path(report_path).write_text(json.dumps(report, indent=2))
    click.echo(f"model written to {out_path} (CV report: {report_path})")


@main.command()
@click.argument("model_path", type=click.Path(exists=True))
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["y4m", "raw-yuv", "gfv"]), default="gfv")
@click.option("--width", type=int, default=None)
@click.option("--height", type=int, default=None)
@click.option("--fps", type=float, default=None)
@click.option("--mask", "mask_text", default="STD")
@click.option("--deep-provider", default=None)
@click.option("--per-chunk", is_flag=True, help="also print per-chunk scores when available")
@add_options(common_config_options)
@guarded
def predict(model_path, input_path, fmt, width, height, fps, mask_text, deep_provider, per_chunk,
            config_path, seed, sigma_spatial, sigma_temporal, scales, display, jobs):
    """Predict a quality score from a feature file or a raw video."""
    config = _config_from_options(config_path, **_overrides(seed, sigma_spatial, sigma_temporal, scales, display, jobs))
    mask = parse_mask(mask_text)
    model = load_model(model_path, expect_schema_hash=config.schema_hash(mask.label))
    if fmt == "gfv":
        record = read_record(input_path, expect_config_hash=config.config_hash())
    else:
        provider = make_provider(deep_provider, timeout=config.timeout) if deep_provider else None
        if provider is None and mask.include_deep:
            raise ValueError("mask includes deep features: give --deep-provider")
        spec = _video_spec_for(input_path, fmt, width, height, fps)
        record = extract_video(
            input_path, fmt, config, Path(input_path).stem, spec=spec, provider=provider,
            keep_chunks=per_chunk,
        )
    segs = {"spatial": record.spatial, "temporal": record.temporal, "deep": record.deep}
    full = np.zeros(COMBINED_DIM)
    for name, lo, dim, needed in (
        ("spatial", 0, SPATIAL_DIM, mask.include_spatial),
        ("temporal", SPATIAL_DIM, TEMPORAL_DIM, mask.include_temporal),
        ("deep", SPATIAL_DIM + TEMPORAL_DIM, 1024, mask.include_deep),
    ):
        if segs[name] is not None:
            full[lo : lo + dim] = segs[name]
        elif needed:
            raise IncompleteRecordError(f"record lacks the {name} segment required by mask {mask.label}")
    score = predict_svr(model, full[mask.columns()])
    out = {"video_id": record.video_id, "score": score}
    if per_chunk and record.chunks is not None and record.chunks.shape[1] == COMBINED_DIM:
        out["chunk_scores"] = [predict_svr(model, c[mask.columns()]) for c in record.chunks]
    click.echo(json.dumps(out, indent=2))


def _write_report(report: dict, out_json: str) -> None:
    Path(out_json).write_text(json.dumps(report, indent=2))
    csv_path = str(Path(out_json).with_suffix(".splits.csv"))
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split_id", "srcc", "krcc", "plcc", "rmse"])
        for row in report.get("splits", []):
            writer.writerow([row["split_id"], row["srcc"], row["krcc"], row["plcc"], row["rmse"]])


@main.command()
@click.argument("index_csv", type=click.Path(exists=True))
@click.option("--features", "features_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--splits", "n_splits", type=int, default=None)
@click.option("--mask", "mask_text", default="STD")
@click.option("--grid", "grid_text", default=None)
@click.option("--cv-folds", type=int, default=5)
@click.option("--epsilon", type=float, default=1.0)
@add_options(common_config_options)
@guarded
def evaluate(index_csv, features_dir, out_path, n_splits, mask_text, grid_text, cv_folds, epsilon,
             config_path, seed, sigma_spatial, sigma_temporal, scales, display, jobs):
    """Reproduce the split protocol: many content-disjoint 80/20 splits."""
    config = _config_from_options(config_path, **_overrides(seed, sigma_spatial, sigma_temporal, scales, display, jobs))
    if n_splits is not None:
        config = replace(config, splits=n_splits)
    mask = parse_mask(mask_text)
    index = load_index(index_csv)
    X = _load_matrix(index, features_dir, config, mask)
    splits = harness.generate_splits(index, n=config.splits, seed=config.seed)
    report = harness.run_experiment(
        X, index.mos(), index.content_ids(), splits, mask=mask,
        grid=_parse_grid(grid_text, epsilon), cv_folds=cv_folds, jobs=config.jobs,
    )
    report["config_hash"] = config.config_hash().hex()
    _write_report(report, out_path)
    click.echo(json.dumps({"mask": mask.label, "medians": report["medians"]}, indent=2))


@main.command()
@click.argument("index_csv", type=click.Path(exists=True))
@click.option("--features", "features_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--splits", "n_splits", type=int, default=None)
@click.option("--grid", "grid_text", default=None)
@click.option("--cv-folds", type=int, default=5)
@click.option("--epsilon", type=float, default=1.0)
@add_options(common_config_options)
@guarded
def ablate(index_csv, features_dir, out_path, n_splits, grid_text, cv_folds, epsilon,
           config_path, seed, sigma_spatial, sigma_temporal, scales, display, jobs):
    """Run the 7-mask feature-combination study."""
    config = _config_from_options(config_path, **_overrides(seed, sigma_spatial, sigma_temporal, scales, display, jobs))
    if n_splits is not None:
        config = replace(config, splits=n_splits)
    index = load_index(index_csv)
    X = _load_matrix(index, features_dir, config, AblationMask())
    splits = harness.generate_splits(index, n=config.splits, seed=config.seed)
    results = harness.run_ablation(
        X, index.mos(), index.content_ids(), splits,
        grid=_parse_grid(grid_text, epsilon), cv_folds=cv_folds, jobs=config.jobs,
    )
    summary = {label: rep["medians"] for label, rep in results.items()}
    Path(out_path).write_text(json.dumps({"config_hash": config.config_hash().hex(), "results": results}, indent=2))
    click.echo(json.dumps(summary, indent=2))


@main.command("noise-sweep")
@click.argument("index_csv", type=click.Path(exists=True))
@click.option("--sigmas", required=True, help="comma-separated noise sigma values")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["y4m", "raw-yuv"]), default="y4m")
@click.option("--features", "features_dir", default=None,
              help="existing records supplying the (sigma-independent) deep segment")
@click.option("--splits", "n_splits", type=int, default=None)
@click.option("--grid", "grid_text", default=None)
@click.option("--cv-folds", type=int, default=5)
@click.option("--epsilon", type=float, default=1.0)
@add_options(common_config_options)
@guarded
def noise_sweep(index_csv, sigmas, out_path, fmt, features_dir, n_splits, grid_text, cv_folds, epsilon,
                config_path, seed, sigma_spatial, sigma_temporal, scales, display, jobs):
    """Re-extract NSS features per noise sigma and rerun the evaluation."""
    config = _config_from_options(config_path, **_overrides(seed, sigma_spatial, sigma_temporal, scales, display, jobs))
    if n_splits is not None:
        config = replace(config, splits=n_splits)
    sigma_list = [float(s) for s in sigmas.split(",")]
    index = load_index(index_csv)
    have_deep = features_dir is not None
    mask = AblationMask(True, True, have_deep)
    deep_block = None
    if have_deep:
        deep_block = _load_matrix(index, features_dir, config, AblationMask(False, False, True))[
            :, SPATIAL_DIM + TEMPORAL_DIM :
        ]
    splits = harness.generate_splits(index, n=config.splits, seed=config.seed)

    def extract_for_sigma(sigma):
        cfg = replace(config, sigma_spatial=sigma, sigma_temporal=sigma)
        tasks = []
        for entry in index.entries:
            spec = _video_spec_for(entry.media_path, fmt, None, None, None) if fmt == "raw-yuv" else None
            tasks.append((entry.media_path, fmt, spec, cfg, entry.video_id, None, False, os.devnull))
        rows = []
        if cfg.jobs > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                recs = list(pool.map(_extract_for_sweep, tasks))
        else:
            recs = [_extract_for_sweep(t) for t in tasks]
        for i, rec in enumerate(recs):
            row = np.zeros(COMBINED_DIM)
            row[:SPATIAL_DIM] = rec.spatial
            row[SPATIAL_DIM : SPATIAL_DIM + TEMPORAL_DIM] = rec.temporal
            if have_deep:
                row[SPATIAL_DIM + TEMPORAL_DIM :] = deep_block[i]
            rows.append(row)
        return np.array(rows), index.mos(), index.content_ids()

    def run_for_features(X, y, content_ids):
        return harness.run_experiment(
            X, y, content_ids, splits, mask=mask,
            grid=_parse_grid(grid_text, epsilon), cv_folds=cv_folds, jobs=config.jobs,
        )

    table = harness.noise_sweep(extract_for_sigma, sigma_list, run_for_features)
    Path(out_path).write_text(json.dumps(table, indent=2))
    click.echo(json.dumps([{"sigma": r["sigma"], **r["medians"]} for r in table], indent=2))


def _extract_for_sweep(args):
    path, fmt, spec, cfg, video_id, _provider, _keep, _out = args
    return extract_video(path, fmt, cfg, video_id, spec=spec, provider=None)


@main.command()
@click.argument("video", type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["y4m", "raw-yuv"]), default="y4m")
@click.option("--width", type=int, default=None)
@click.option("--height", type=int, default=None)
@click.option("--fps", type=float, default=None)
@click.option("--stages", default=None, help="comma-separated subset of decode,spatial,temporal,deep,predict")
@click.option("--deep-provider", default=None)
@click.option("--model", "model_path", default=None, type=click.Path(exists=True))
@click.option("--trials", type=int, default=3)
@add_options(common_config_options)
@guarded
def bench(video, fmt, width, height, fps, stages, deep_provider, model_path, trials,
          config_path, seed, sigma_spatial, sigma_temporal, scales, display, jobs):
    """Wall-clock timing of the pipeline stages."""
    config = _config_from_options(config_path, **_overrides(seed, sigma_spatial, sigma_temporal, scales, display, jobs))
    spec = _video_spec_for(video, fmt, width, height, fps)
    provider = make_provider(deep_provider, timeout=config.timeout) if deep_provider else None
    model = load_model(model_path) if model_path else None
    stage_set = set(stages.split(",")) if stages else None
    report = harness.benchmark_runtime(
        video, fmt, config, spec=spec, provider=provider, model=model, stages=stage_set, trials=trials
    )
    click.echo(json.dumps(report, indent=2))


@main.command()
@guarded
def selftest():
    """Run the quick oracle cross-check suite."""
    from .oracles import run_selftest

    results = run_selftest()
    failed = False
    for name, ok, detail in results:
        click.echo(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed |= not ok
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()

import numpy as np
import pytest

from gamevqa.harness import (
    ALL_MASKS,
    AblationMask,
    DatasetError,
    DatasetIndex,
    DatasetEntry,
    aggregate_report,
    generate_splits,
    load_index,
    run_experiment,
)
from gamevqa.svr import SvrHyper


def _index(n_contents=10, per_content=3):
    entries = [
        DatasetEntry(
            video_id=f"c{c}_v{v}", content_id=f"c{c}", mos=50.0 + c + v, media_path="x.y4m"
        )
        for c in range(n_contents)
        for v in range(per_content)
    ]
    return DatasetIndex(entries=entries)


# --- index ----------------------------------------------------------------


def test_index_rejects_duplicate_ids():
    e = DatasetEntry("v", "c", 50.0, "x")
    with pytest.raises(DatasetError):
        DatasetIndex(entries=[e, e])


def test_index_rejects_mos_out_of_range():
    with pytest.raises(DatasetError):
        DatasetIndex(entries=[DatasetEntry("v", "c", 120.0, "x")])


def test_load_index_csv(tmp_path):
    path = tmp_path / "index.csv"
    path.write_text(
        "video_id,content_id,mos,media_path,features_path\n"
        "a,c0,50,/v/a.y4m,\n"
        "b,c1,70,/v/b.y4m,/f/b.gfv\n"
    )
    idx = load_index(str(path))
    assert len(idx.entries) == 2
    assert idx.entries[0].features_path is None
    assert idx.entries[1].features_path == "/f/b.gfv"
    assert idx.contents == ["c0", "c1"]


def test_load_index_rejects_bad_header(tmp_path):
    path = tmp_path / "index.csv"
    path.write_text("id,mos\n1,50\n")
    with pytest.raises(DatasetError):
        load_index(str(path))


# --- splits ---------------------------------------------------------------


def test_splits_content_disjoint_and_complete():
    idx = _index()
    for split in generate_splits(idx, n=20, seed=1):
        assert not split.train_contents & split.test_contents
        assert split.train_contents | split.test_contents == set(idx.contents)
        assert len(split.train_contents) == 8


def test_splits_deterministic_in_seed():
    idx = _index()
    a = generate_splits(idx, n=10, seed=4)
    b = generate_splits(idx, n=10, seed=4)
    assert a == b
    c = generate_splits(idx, n=10, seed=5)
    assert a != c


def test_splits_vary_across_split_ids():
    idx = _index(n_contents=12)
    splits = generate_splits(idx, n=30, seed=0)
    assert len({s.train_contents for s in splits}) > 1


def test_splits_bad_fraction():
    with pytest.raises(ValueError):
        generate_splits(_index(), train_frac=1.0)


# --- masks ----------------------------------------------------------------


def test_mask_labels_and_widths():
    widths = {"S": 680, "T": 476, "D": 1024, "S+T": 1156, "S+D": 1704, "T+D": 1500, "S+T+D": 2180}
    assert len(ALL_MASKS) == 7
    for mask in ALL_MASKS:
        assert mask.columns().size == widths[mask.label]


def test_mask_columns_are_disjoint_blocks():
    s = AblationMask(True, False, False).columns()
    t = AblationMask(False, True, False).columns()
    d = AblationMask(False, False, True).columns()
    assert not set(s) & set(t) and not set(t) & set(d)
    np.testing.assert_array_equal(np.sort(np.concatenate([s, t, d])), np.arange(2180))


def test_mask_rejects_empty():
    with pytest.raises(ValueError):
        AblationMask(False, False, False)


# --- experiment -----------------------------------------------------------


def _toy_problem(n_contents=8, per_content=4, seed=0):
    rng = np.random.default_rng(seed)
    n = n_contents * per_content
    X = np.zeros((n, 2180))
    latent = rng.standard_normal(n)
    X[:, :5] = latent[:, None] + 0.05 * rng.standard_normal((n, 5))
    y = 50.0 + 10.0 * latent
    ids = np.repeat([f"c{i}" for i in range(n_contents)], per_content)
    return X, np.clip(y, 0, 100), ids


def test_run_experiment_recovers_signal():
    X, y, ids = _toy_problem()
    idx = DatasetIndex(
        entries=[DatasetEntry(f"v{i}", ids[i], float(y[i]), "x") for i in range(len(y))]
    )
    splits = generate_splits(idx, n=5, seed=0)
    grid = [SvrHyper(c=c, gamma=g, epsilon=0.5) for c in (1.0, 32.0) for g in (0.01, 0.1)]
    report = run_experiment(X, y, ids, splits, grid=grid, cv_folds=4)
    assert report["n_splits"] == 5
    assert report["medians"]["srcc"] > 0.9
    assert report["mask"] == "S+T+D"


def test_run_experiment_jobs_invariant():
    X, y, ids = _toy_problem(seed=1)
    idx = DatasetIndex(
        entries=[DatasetEntry(f"v{i}", ids[i], float(y[i]), "x") for i in range(len(y))]
    )
    splits = generate_splits(idx, n=4, seed=0)
    grid = [SvrHyper(c=1.0, gamma=0.05, epsilon=0.5)]
    a = run_experiment(X, y, ids, splits, grid=grid, cv_folds=4, jobs=1)
    b = run_experiment(X, y, ids, splits, grid=grid, cv_folds=4, jobs=2)
    assert a == b


# --- aggregation ----------------------------------------------------------


def test_aggregate_excludes_undefined_rows():
    rows = [
        {"split_id": 0, "srcc": 0.8, "krcc": 0.6, "plcc": 0.7, "rmse": 5.0, "undefined": False},
        {"split_id": 1, "srcc": 0.9, "krcc": 0.7, "plcc": 0.8, "rmse": 4.0, "undefined": False},
        {"split_id": 2, "srcc": float("nan"), "krcc": float("nan"), "plcc": float("nan"),
         "rmse": 9.0, "undefined": True},
    ]
    rep = aggregate_report(rows)
    assert rep["n_excluded_undefined"] == 1
    assert rep["medians"]["srcc"] == pytest.approx(0.85)


def test_aggregate_permutation_invariant():
    rng = np.random.default_rng(2)
    rows = [
        {"split_id": i, "srcc": float(rng.uniform(-1, 1)), "krcc": 0.1, "plcc": 0.2,
         "rmse": float(rng.uniform(0, 10)), "undefined": False}
        for i in range(9)
    ]
    shuffled = [rows[i] for i in rng.permutation(9)]
    assert aggregate_report(rows)["medians"] == aggregate_report(shuffled)["medians"]

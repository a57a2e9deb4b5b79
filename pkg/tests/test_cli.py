import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from gamevqa.cli import main, parse_mask
from gamevqa.deepfeat import write_gemb
from conftest import make_synthetic_frames, write_y4m_file

@pytest.fixture(scope="module")
def mini_study(tmp_path_factory):
    """6 contents x 3 levels, with a GEMB file covering every frame."""
    root = tmp_path_factory.mktemp("mini")
    rows = ["video_id,content_id,mos,media_path,features_path"]
    gemb_records = {}
    rng = np.random.default_rng(0)
    for content in range(6):
        for level in range(3):
            vid = f"c{content}_l{level}"
            spec, frames = make_synthetic_frames(
                200 + content, 16, blur=1.5 * level, noise_std=5.0 * level
            )
            write_y4m_file(root / f"{vid}.y4m", spec, frames)
            rows.append(f"{vid},c{content},{85.0 - 20.0 * level},{root / f'{vid}.y4m'},")
            base = rng.standard_normal(1024)
            for i in range(16):
                gemb_records[(vid, i)] = (base + 0.01 * rng.standard_normal(1024)).astype(
                    np.float32
                )
    (root / "index.csv").write_text("\n".join(rows) + "\n")
    write_gemb(str(root / "embeds.gemb"), gemb_records)
    return root


COMMON = ["--scales", "48,24", "--seed", "0"]


def _extract(runner, root, out_dir, extra=()):
    videos = sorted(str(p) for p in root.glob("*.y4m"))
    return runner.invoke(
        main,
        ["extract", *videos, "--out-dir", str(out_dir),
         "--deep-provider", f"file:{root / 'embeds.gemb'}", *COMMON, *extra],
        catch_exceptions=False,
    )


def test_end_to_end_extract_train_predict_evaluate(mini_study, tmp_path):
    runner = CliRunner()
    feat_dir = tmp_path / "feat"
    res = _extract(runner, mini_study, feat_dir)
    assert res.exit_code == 0, res.output
    assert len(list(feat_dir.glob("*.gfv"))) == 18

    model_path = tmp_path / "model.gsvr"
    res = runner.invoke(
        main,
        ["train", str(mini_study / "index.csv"), "--features", str(feat_dir),
         "--out", str(model_path), "--grid", "1,32/0.01,0.1", "--cv-folds", "3",
         "--epsilon", "2.0", *COMMON],
        catch_exceptions=False,
    )
    assert res.exit_code == 0, res.output
    assert model_path.exists()
    assert (tmp_path / "model.cv.json").exists()

    res = runner.invoke(
        main,
        ["predict", str(model_path), str(next(feat_dir.glob("*.gfv"))), *COMMON],
        catch_exceptions=False,
    )
    assert res.exit_code == 0, res.output
    out = json.loads(res.output)
    assert 0.0 <= out["score"] <= 120.0

    report_path = tmp_path / "report.json"
    res = runner.invoke(
        main,
        ["evaluate", str(mini_study / "index.csv"), "--features", str(feat_dir),
         "--out", str(report_path), "--splits", "3", "--grid", "1,32/0.1",
         "--cv-folds", "3", "--epsilon", "2.0", *COMMON],
        catch_exceptions=False,
    )
    assert res.exit_code == 0, res.output
    report = json.loads(report_path.read_text())
    assert report["n_splits"] == 3
    assert (tmp_path / "report.splits.csv").exists()


def test_predict_from_video_matches_feature_file(mini_study, tmp_path):
    runner = CliRunner()
    feat_dir = tmp_path / "feat"
    assert _extract(runner, mini_study, feat_dir).exit_code == 0
    model_path = tmp_path / "m.gsvr"
    res = runner.invoke(
        main,
        ["train", str(mini_study / "index.csv"), "--features", str(feat_dir),
         "--out", str(model_path), "--grid", "1/0.1", "--cv-folds", "3",
         "--epsilon", "2.0", *COMMON],
        catch_exceptions=False,
    )
    assert res.exit_code == 0, res.output
    vid = "c0_l0"
    via_gfv = json.loads(
        runner.invoke(
            main, ["predict", str(model_path), str(feat_dir / f"{vid}.gfv"), *COMMON],
            catch_exceptions=False,
        ).output
    )
    via_video = json.loads(
        runner.invoke(
            main,
            ["predict", str(model_path), str(mini_study / f"{vid}.y4m"), "--format", "y4m",
             "--deep-provider", f"file:{mini_study / 'embeds.gemb'}", *COMMON],
            catch_exceptions=False,
        ).output
    )
    # feature file stores float32; re-extraction is float64 end to end
    assert via_video["score"] == pytest.approx(via_gfv["score"], abs=1e-3)


def test_extract_determinism_across_jobs(mini_study, tmp_path):
    runner = CliRunner()
    d1, d2 = tmp_path / "j1", tmp_path / "j2"
    assert _extract(runner, mini_study, d1, extra=["--jobs", "1"]).exit_code == 0
    assert _extract(runner, mini_study, d2, extra=["--jobs", "2"]).exit_code == 0
    for p1 in sorted(d1.glob("*.gfv")):
        p2 = d2 / p1.name
        assert p1.read_bytes() == p2.read_bytes(), p1.name


def test_exit_code_1_on_validation_error(mini_study, tmp_path):
    runner = CliRunner()
    res = runner.invoke(
        main,
        ["train", str(mini_study / "index.csv"), "--features", str(tmp_path),
         "--out", str(tmp_path / "m.gsvr"), *COMMON],
    )
    assert res.exit_code == 1
    assert "error:" in res.output or "error:" in (res.stderr or "")


def test_exit_code_2_on_runtime_error(tmp_path):
    runner = CliRunner()
    bad = tmp_path / "bad.y4m"
    bad.write_bytes(b"YUV4MPEG2 W64 H64 F8:1 C420\nFRAME\n" + b"\x00" * 100)  # truncated
    res = runner.invoke(
        main,
        ["extract", str(bad), "--out-dir", str(tmp_path / "out"), "--no-deep", *COMMON],
    )
    assert res.exit_code == 2


def test_extract_requires_provider_decision(mini_study, tmp_path):
    runner = CliRunner()
    res = runner.invoke(
        main,
        ["extract", str(next(mini_study.glob("*.y4m"))), "--out-dir", str(tmp_path / "o"), *COMMON],
    )
    assert res.exit_code == 1


def test_selftest_passes():
    res = CliRunner().invoke(main, ["selftest"])
    assert res.exit_code == 0, res.output
    assert res.output.count("[PASS]") == 5


def test_bench_reports_stages(mini_study):
    runner = CliRunner()
    video = str(next(mini_study.glob("*.y4m")))
    res = runner.invoke(
        main,
        ["bench", video, "--trials", "1", "--stages", "decode,spatial,temporal", *COMMON],
        catch_exceptions=False,
    )
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    for stage in ("decode", "spatial", "temporal", "total"):
        assert report[stage]["mean_s"] >= 0.0


def test_parse_mask_variants():
    assert parse_mask("S+T").label == "S+T"
    assert parse_mask("std").label == "S+T+D"
    with pytest.raises(ValueError):
        parse_mask("S+X")

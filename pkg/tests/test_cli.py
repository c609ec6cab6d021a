"""End-to-end tests of the command-line interface.

One small raw dataset is preprocessed and a tiny model trained once per
module; the commands downstream of the checkpoint are exercised against
those artifacts.  Everything runs in-process through ``main`` so exit
codes and stderr are observable.
"""

import hashlib
import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from panogaze import dataset as ds
from panogaze.cli import main
from panogaze.events import extract_scanpath, write_scanpath_csv

from conftest import hold_sweep_hold, write_raw_dataset


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def tree_digest(root):
    """Stable content digest over every file under a directory."""
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def assert_strict_json(path):
    def reject(token):
        raise AssertionError(f"{path} holds non-finite value {token}")

    with open(path, encoding="utf-8") as fh:
        return json.loads(fh.read(), parse_constant=reject)


# Cache images keep 32 rows: the default encoder halves the grid once per
# block, and its last block still needs a kernel-sized grid.
PREPROCESS_FLAGS = [
    "--dataset", "custom",
    "--min-samples", "40",
    "--target-length", "20",
    "--native-rate", "60",
    "--target-rate", "30",
    "--image-height", "32",
    "--expected-images", "3",
    "--test-image-count", "1",
    "--seed", "0",
]

TRAIN_FLAGS = [
    "--epochs", "2",
    "--batch-size", "2",
    "--steps", "10",
    "--channels", "4",
    "--residual-layers", "1",
    "--condition-dim", "6",
    "--checkpoint-every", "5",
    "--seed", "1",
    "--quiet",
]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Raw data -> processed cache -> trained checkpoint, one per module."""
    root = tmp_path_factory.mktemp("pipeline")
    gaze, images = map(Path, write_raw_dataset(root))
    cache = root / "cache"
    code = main(
        ["preprocess", "--gaze", str(gaze), "--images", str(images), "--cache", str(cache)]
        + PREPROCESS_FLAGS
    )
    assert code == 0
    model_dir = root / "model"
    code = main(["train", "--cache", str(cache), "--out", str(model_dir)] + TRAIN_FLAGS)
    assert code == 0
    return {
        "root": root,
        "gaze": gaze,
        "images": images,
        "cache": cache,
        "checkpoint": model_dir / "checkpoint.pt",
        "model_dir": model_dir,
        "panorama": sorted(images.glob("*.png"))[0],
    }


# --- full chain ---


def test_pipeline_artifacts(pipeline):
    cache = pipeline["cache"]
    manifest = assert_strict_json(cache / "manifest.json")
    assert manifest["counts"]["retained"] == 6
    assert (cache / "preprocess_config.json").exists()
    assert pipeline["checkpoint"].exists()
    train_cfg = assert_strict_json(pipeline["model_dir"] / "train_config.json")
    assert train_cfg["epochs"] == 2
    assert train_cfg["sequence_length"] == 20
    with open(pipeline["model_dir"] / "loss.csv") as fh:
        lines = fh.read().splitlines()
    assert lines[0] == "epoch,loss,lr"
    assert len(lines) == 3


def test_sample_to_render_chain(pipeline, tmp_path, capsys):
    samples = tmp_path / "samples"
    code, out, _ = run(
        [
            "sample",
            "--checkpoint", str(pipeline["checkpoint"]),
            "--image", str(pipeline["panorama"]),
            "--out", str(samples),
            "--count", "3",
            "--seed", "5",
        ],
        capsys,
    )
    assert code == 0
    names = sorted(p.name for p in samples.glob("*.csv"))
    assert names == ["sample_000.csv", "sample_001.csv", "sample_002.csv"]
    assert "wrote 3 sequences" in out
    for name in names:
        seq = ds.read_sequence_csv(samples / name)
        assert len(seq) == 20
        assert np.max(np.abs(np.linalg.norm(seq.points, axis=1) - 1.0)) < 1e-9

    events_out = tmp_path / "events"
    code, out, _ = run(
        ["detect-events", "--input", str(samples), "--out", str(events_out)], capsys
    )
    assert code == 0
    assert sorted(p.name for p in (events_out / "scanpaths").glob("*.csv")) == names
    event_files = sorted((events_out / "events").glob("*.json"))
    assert [p.stem for p in event_files] == [n[:-4] for n in names]
    payload = assert_strict_json(event_files[0])
    assert payload["n_samples"] == 20
    for event in payload["events"]:
        assert event["kind"] in ("fixation", "saccade")

    gt_samples = tmp_path / "gt"
    code, _, _ = run(
        [
            "sample",
            "--checkpoint", str(pipeline["checkpoint"]),
            "--image", str(pipeline["panorama"]),
            "--out", str(gt_samples),
            "--count", "2",
            "--seed", "6",
        ],
        capsys,
    )
    assert code == 0

    evaluation = tmp_path / "evaluation"
    code, out, _ = run(
        [
            "evaluate",
            "--kind", "sequences",
            "--gen", str(samples),
            "--gt", str(gt_samples),
            "--out", str(evaluation),
            "--height", "64",
            "--width", "128",
        ],
        capsys,
    )
    assert code == 0
    report = assert_strict_json(evaluation / "report.json")
    assert report["settings"]["height"] == 64
    assert report["settings"]["width"] == 128
    assert report["settings"]["grid_rows"] == 8
    assert report["settings"]["grid_cols"] == 16
    for metric in ("LEV", "DTW", "MAE", "RMSE"):
        assert metric in report["aggregate"]
        assert report["aggregate"][metric]["best"] <= report["aggregate"][metric]["mean"]

    stats_file = tmp_path / "stats.json"
    code, _, _ = run(["stats", "--input", str(samples), "--out", str(stats_file)], capsys)
    assert code == 0
    stats = assert_strict_json(stats_file)
    assert "mean_saccade_velocity_deg_s" in stats
    assert "mean_fixation_duration_s" in stats

    figure = tmp_path / "figure.png"
    code, _, _ = run(
        [
            "render",
            "--kind", "sequence",
            "--image", str(pipeline["panorama"]),
            "--input", str(samples / "sample_000.csv"),
            "--out", str(figure),
        ],
        capsys,
    )
    assert code == 0
    assert figure.stat().st_size > 0


def test_evaluate_saliency_without_fixations(tmp_path, capsys):
    # Without --gt-scanpaths the fixation-based columns are null and the
    # map-to-map columns still aggregate.
    from panogaze import FixationMap, blur_to_saliency, save_saliency

    counts = np.zeros((32, 64), dtype=np.int64)
    counts[10, 20] = 1
    smap = blur_to_saliency(FixationMap(counts), sigma_deg=2.0)
    for d in ("gen", "gt"):
        save_saliency(tmp_path / d / "scene00", smap, sigma_deg=2.0, fixation_count=1)
    out = tmp_path / "eval"
    code, _, _ = run(
        ["evaluate", "--kind", "saliency", "--gen", str(tmp_path / "gen"),
         "--gt", str(tmp_path / "gt"), "--out", str(out)],
        capsys,
    )
    assert code == 0
    report = assert_strict_json(out / "report.json")
    metrics = report["per_image"]["scene00"]["metrics"]
    assert metrics["AUC"]["best"] is None
    assert metrics["CC"]["best"] == pytest.approx(1.0, abs=1e-9)
    assert report["aggregate"]["AUC"]["mean"] is None
    assert report["aggregate"]["SIM"]["best"] == pytest.approx(1.0, abs=1e-9)


def test_render_scanpath_kind(pipeline, tmp_path, capsys):
    seq = hold_sweep_hold()
    scanpath = extract_scanpath(seq)
    path = tmp_path / "scanpath.csv"
    write_scanpath_csv(path, scanpath)
    out = tmp_path / "scanpath.png"
    code, _, _ = run(
        [
            "render",
            "--kind", "scanpath",
            "--image", str(pipeline["panorama"]),
            "--input", str(path),
            "--out", str(out),
        ],
        capsys,
    )
    assert code == 0
    assert out.stat().st_size > 0


# --- determinism ---


def test_sample_same_seed_writes_identical_files(pipeline, tmp_path, capsys):
    args = [
        "sample",
        "--checkpoint", str(pipeline["checkpoint"]),
        "--image", str(pipeline["panorama"]),
        "--count", "2",
        "--seed", "11",
    ]
    first = tmp_path / "a"
    second = tmp_path / "b"
    assert run(args + ["--out", str(first)], capsys)[0] == 0
    assert run(args + ["--out", str(second)], capsys)[0] == 0
    for name in ("sample_000.csv", "sample_001.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_preprocess_rerun_is_byte_identical(tmp_path, capsys):
    gaze, images = write_raw_dataset(tmp_path)
    cache = tmp_path / "cache"
    args = (
        ["preprocess", "--gaze", str(gaze), "--images", str(images), "--cache", str(cache)]
        + PREPROCESS_FLAGS
    )
    assert run(args, capsys)[0] == 0
    before = tree_digest(cache)
    assert run(args, capsys)[0] == 0
    assert tree_digest(cache) == before


# --- config files ---


def write_probe_sequence(tmp_path):
    path = tmp_path / "probe.csv"
    ds.write_sequence_csv(path, hold_sweep_hold())
    return path


def test_config_file_fills_unset_flags(tmp_path, capsys):
    probe = write_probe_sequence(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"velocity-multiplier": 7.0, "min_saccade_samples": 3}))
    out = tmp_path / "out"
    code, _, _ = run(
        ["detect-events", "--config", str(cfg), "--input", str(probe), "--out", str(out)],
        capsys,
    )
    assert code == 0
    effective = assert_strict_json(out / "detect_events_config.json")
    assert effective["velocity_multiplier"] == 7.0
    assert effective["min_saccade_samples"] == 3


def test_explicit_flag_beats_config_file(tmp_path, capsys):
    probe = write_probe_sequence(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"velocity_multiplier": 7.0}))
    out = tmp_path / "out"
    code, _, _ = run(
        [
            "detect-events",
            "--config", str(cfg),
            "--input", str(probe),
            "--out", str(out),
            "--velocity-multiplier", "3.5",
        ],
        capsys,
    )
    assert code == 0
    effective = assert_strict_json(out / "detect_events_config.json")
    assert effective["velocity_multiplier"] == 3.5


def test_config_file_rejects_unknown_keys(tmp_path, capsys):
    probe = write_probe_sequence(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"velocity_multiplier": 7.0, "no_such_flag": 1}))
    code, _, err = run(
        ["detect-events", "--config", str(cfg), "--input", str(probe), "--out", str(tmp_path / "o")],
        capsys,
    )
    assert code == 1
    assert "no_such_flag" in err


def test_config_file_must_be_valid_json(tmp_path, capsys):
    probe = write_probe_sequence(tmp_path)
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    code, _, err = run(
        ["detect-events", "--config", str(cfg), "--input", str(probe), "--out", str(tmp_path / "o")],
        capsys,
    )
    assert code == 1
    assert "JSON" in err


def test_missing_config_file_exits_two(tmp_path, capsys):
    probe = write_probe_sequence(tmp_path)
    code, _, err = run(
        [
            "detect-events",
            "--config", str(tmp_path / "absent.json"),
            "--input", str(probe),
            "--out", str(tmp_path / "o"),
        ],
        capsys,
    )
    assert code == 2
    assert "absent.json" in err


# --- exit codes ---


def test_missing_required_directory_exits_two(capsys):
    code, _, err = run(["preprocess"], capsys)
    assert code == 2
    assert "gaze data" in err


def test_nonexistent_directory_named_in_error(tmp_path, capsys):
    missing = tmp_path / "does_not_exist"
    code, _, err = run(
        ["stats", "--input", str(missing), "--out", str(tmp_path / "s.json")], capsys
    )
    assert code == 2
    assert str(missing) in err


def test_library_failure_exits_one(tmp_path, capsys):
    bad = tmp_path / "data"
    bad.mkdir()
    (bad / "broken.csv").write_text("not,a,sequence\n1,2,3\n")
    code, _, err = run(["stats", "--input", str(bad), "--out", str(tmp_path / "s.json")], capsys)
    assert code == 1
    assert err.startswith("error:")


def test_empty_input_directory_exits_one(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code, _, err = run(
        ["stats", "--input", str(empty), "--out", str(tmp_path / "s.json")], capsys
    )
    assert code == 1
    assert "no CSV files" in err


def test_unknown_dataset_rejected_by_parser(tmp_path, capsys):
    gaze, images = write_raw_dataset(tmp_path, n_images=1, n_observers=1)
    # argparse rejects values outside the published choices before the
    # command runs, raising its usual SystemExit(2).
    with pytest.raises(SystemExit) as exc:
        main(
            [
                "preprocess",
                "--gaze", str(gaze),
                "--images", str(images),
                "--cache", str(tmp_path / "cache"),
                "--dataset", "nonsense",
            ]
        )
    assert exc.value.code == 2
    assert "invalid choice" in capsys.readouterr().err


def test_train_names_undersized_cache_images(tmp_path, capsys):
    gaze, images = write_raw_dataset(tmp_path)
    cache = tmp_path / "cache"
    flags = list(PREPROCESS_FLAGS)
    flags[flags.index("--image-height") + 1] = "8"
    code, _, _ = run(
        ["preprocess", "--gaze", str(gaze), "--images", str(images), "--cache", str(cache)]
        + flags,
        capsys,
    )
    assert code == 0
    code, _, err = run(
        ["train", "--cache", str(cache), "--out", str(tmp_path / "model")] + TRAIN_FLAGS,
        capsys,
    )
    assert code == 1
    assert "smaller than" in err


def test_custom_dataset_requires_sizes(tmp_path, capsys):
    gaze, images = write_raw_dataset(tmp_path, n_images=1, n_observers=1)
    code, _, err = run(
        [
            "preprocess",
            "--gaze", str(gaze),
            "--images", str(images),
            "--cache", str(tmp_path / "cache"),
            "--dataset", "custom",
        ],
        capsys,
    )
    assert code == 1
    assert "--min-samples" in err


# --- installed entry point ---


def test_console_script_is_installed():
    exe = shutil.which("panogaze")
    assert exe is not None, "console script 'panogaze' not on PATH"
    result = subprocess.run([exe, "--help"], capture_output=True, text=True, timeout=60)
    assert result.returncode == 0
    for command in ("preprocess", "train", "sample", "detect-events", "evaluate", "stats", "render"):
        assert command in result.stdout

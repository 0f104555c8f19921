"""CLI contract: subcommands, exit codes, overrides, reproducibility."""

import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from avlab import avdata
from avlab.cli import main

TINY_CONFIG = {
    "epochs": 2,
    "batch_size": 4,
    "synth": {"t_v": 8, "c_v": 1, "h": 12, "w": 12, "t_a": 320},
    "detector": {
        "t_prime": 4,
        "c_prime": 8,
        "visual_in_channels": 1,
        "visual_blocks": [
            {"type": "conv", "out": 4, "kernel": [3, 3, 3], "stride": [1, 2, 2]},
            {"type": "res", "out": 8, "kernel": [3, 3, 3], "stride": [2, 2, 2]},
        ],
        "audio_blocks": [{"out": 4, "kernel": 9, "stride": 4}, {"out": 8, "kernel": 5, "stride": 4}],
        "classifier_hidden": 8,
    },
    "train_data": {"n": 16},
    "eval_data": {"n": 8, "fine_chunk": {"r_min": 0.3, "r_max": 0.8, "hard_min": 2}},
    "seed": 11,
}


@pytest.fixture()
def tiny_config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY_CONFIG))
    return path


def dir_digest(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_synth_deterministic_directories(tiny_config_file, tmp_path):
    out1, out2 = tmp_path / "d1", tmp_path / "d2"
    assert main(["synth", "--config", str(tiny_config_file), "--out", str(out1)]) == 0
    assert main(["synth", "--config", str(tiny_config_file), "--out", str(out2)]) == 0
    d1, d2 = dir_digest(out1), dir_digest(out2)
    assert d1.keys() == d2.keys()
    assert all(d1[k] == d2[k] for k in d1)
    assert (out1 / "manifest.json").exists()
    assert (out1 / "resolved_config.json").exists()


def test_synth_worker_count_invariance(tiny_config_file, tmp_path):
    out1, out2 = tmp_path / "w1", tmp_path / "w2"
    env = dict(os.environ, AVLAB_NUM_WORKERS="2")
    cmd = [sys.executable, "-m", "avlab.cli", "synth", "--config", str(tiny_config_file)]
    subprocess.run(cmd + ["--out", str(out1)], check=True, capture_output=True)
    subprocess.run(cmd + ["--out", str(out2)], check=True, env=env, capture_output=True)
    d1, d2 = dir_digest(out1), dir_digest(out2)
    assert d1.keys() == d2.keys()
    assert all(d1[k] == d2[k] for k in d1)


def test_train_eval_round_trip(tiny_config_file, tmp_path):
    run_dir = tmp_path / "run"
    assert main(["train", "--config", str(tiny_config_file), "--out", str(run_dir)]) == 0
    assert (run_dir / "checkpoint.avtc").exists()
    metrics = [json.loads(line) for line in (run_dir / "metrics.jsonl").read_text().splitlines()]
    assert len(metrics) == TINY_CONFIG["epochs"]
    assert set(metrics[0]) == {"epoch", "loss", "n_pseudofake", "n_real"}

    eval_dir = tmp_path / "eval"
    rc = main([
        "eval", "--config", str(tiny_config_file),
        "--checkpoint", str(run_dir / "checkpoint.avtc"),
        "--out", str(eval_dir),
    ])
    assert rc == 0
    for split in ("in_distribution", "fine_grained"):
        report = json.loads((eval_dir / f"report_{split}.json").read_text())
        assert 0.0 <= report["auc"] <= 1.0
        assert report["n_videos"] == TINY_CONFIG["eval_data"]["n"]


def test_train_replay_from_snapshot_bit_identical(tiny_config_file, tmp_path):
    run1, run2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["train", "--config", str(tiny_config_file), "--out", str(run1)]) == 0
    snapshot = run1 / "resolved_config.json"
    assert main(["train", "--config", str(snapshot), "--out", str(run2)]) == 0
    assert (run1 / "metrics.jsonl").read_bytes() == (run2 / "metrics.jsonl").read_bytes()
    assert (run1 / "checkpoint.avtc").read_bytes() == (run2 / "checkpoint.avtc").read_bytes()


def test_train_on_synth_dataset_dir(tiny_config_file, tmp_path):
    data_dir = tmp_path / "data"
    assert main(["synth", "--config", str(tiny_config_file), "--out", str(data_dir)]) == 0
    run_dir = tmp_path / "run"
    rc = main([
        "train", "--config", str(tiny_config_file), "--data", str(data_dir), "--out", str(run_dir),
    ])
    assert rc == 0


def test_augment_with_sampled_specs(tiny_config_file, tmp_path):
    data_dir = tmp_path / "data"
    main(["synth", "--config", str(tiny_config_file), "--out", str(data_dir)])
    out = tmp_path / "aug"
    rc = main([
        "augment", "--config", str(tiny_config_file),
        "--data", str(data_dir / "train"), "--out", str(out),
        "--set", "pseudo_fake_prob=1.0",
    ])
    assert rc == 0
    specs = json.loads((out / "specs.json").read_text())
    assert len(specs) == TINY_CONFIG["train_data"]["n"]
    originally_real = [s for s in specs if s["label"] == "fake" and (s["visual_manipulations"] or s["audio_manipulations"])]
    assert originally_real  # prob=1 converted every real pair


def test_augment_with_fixed_spec(tiny_config_file, tmp_path):
    data_dir = tmp_path / "data"
    main(["synth", "--config", str(tiny_config_file), "--out", str(data_dir)])
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps({"kind": "flip", "i": 1, "l": 4, "param": 2}))
    out = tmp_path / "aug"
    rc = main([
        "augment", "--config", str(tiny_config_file),
        "--data", str(data_dir / "train"), "--out", str(out),
        "--spec", str(spec_file), "--modality", "visual",
    ])
    assert rc == 0
    pairs = sorted(out.glob("pair-*.avtc"))
    assert pairs
    converted = [avdata.load_pair(p) for p in pairs]
    assert any(p.meta.visual_manipulations for p in converted)


def test_gradcheck_exit_code_and_report(capsys):
    assert main(["gradcheck", "--instances", "1"]) == 0
    out = capsys.readouterr().out
    assert "conv3d" in out and "detector_full" in out
    assert "FAIL" not in out


def test_set_override_applied(tiny_config_file, tmp_path):
    out = tmp_path / "o"
    rc = main([
        "synth", "--config", str(tiny_config_file), "--out", str(out),
        "--set", "train_data.n=4", "--set", "eval_data.n=4",
    ])
    assert rc == 0
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["train_data"]["n"] == 4
    assert len(list((out / "train").glob("pair-*.avtc"))) == 4


def test_bad_override_path_is_validation_error(tiny_config_file, tmp_path):
    rc = main([
        "synth", "--config", str(tiny_config_file), "--out", str(tmp_path / "x"),
        "--set", "no.such.key=1",
    ])
    assert rc == 1


def test_invalid_config_value_is_validation_error(tiny_config_file, tmp_path):
    rc = main([
        "train", "--config", str(tiny_config_file), "--out", str(tmp_path / "x"),
        "--set", "pseudo_fake_prob=2.0",
    ])
    assert rc == 1


def test_unknown_subcommand_and_flag_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["gradcheck", "--frobnicate"])
    assert exc.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_seed_flag_overrides_config(tiny_config_file, tmp_path):
    out = tmp_path / "s"
    rc = main(["synth", "--config", str(tiny_config_file), "--out", str(out), "--seed", "99"])
    assert rc == 0
    assert json.loads((out / "resolved_config.json").read_text())["seed"] == 99

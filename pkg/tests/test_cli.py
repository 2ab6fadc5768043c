"""End-to-end CLI behavior: file outputs, exit codes, determinism."""

import filecmp
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from framecast.cli import main
from framecast.training import load_checkpoint

DATASET_FLAGS = ["--size", "16x16", "--frames", "5", "--shapes", "1"]
TRAIN_FLAGS = ["--steps", "2", "--width", "8", "--window", "3", "--checkpoint-interval", "0"]


def _make_dataset(out, sequences=3, extra=()):
    rc = main(
        ["make-dataset", "--out", str(out), "--sequences", str(sequences), "--seed", "4"]
        + DATASET_FLAGS
        + list(extra)
    )
    assert rc == 0
    return Path(out) / "manifest.txt"


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    manifest = _make_dataset(root / "data")
    ckpt_dir = root / "run"
    rc = main(["train", "--manifest", str(manifest), "--out", str(ckpt_dir)] + TRAIN_FLAGS)
    assert rc == 0
    return {"root": root, "manifest": manifest, "checkpoint": ckpt_dir / "checkpoint.pt"}


def _tree_bytes(folder: Path) -> dict:
    return {p.relative_to(folder): p.read_bytes() for p in sorted(folder.rglob("*")) if p.is_file()}


def test_make_dataset_counts(tmp_path):
    out = tmp_path / "data"
    rc = main(
        ["make-dataset", "--out", str(out), "--sequences", "1", "--frames", "6",
         "--shapes", "1", "--velocity", "2,0", "--size", "64x64"]
    )
    assert rc == 0
    seq = out / "seq_0000"
    assert len(list(seq.glob("frame_*.png"))) == 6
    assert len(list(seq.glob("flow_*.flo"))) == 5
    assert (out / "manifest.txt").exists()


def test_make_dataset_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    _make_dataset(a)
    _make_dataset(b)
    assert _tree_bytes(a) == _tree_bytes(b)


def test_make_dataset_off_canvas_velocity_fails(tmp_path, capsys):
    rc = main(
        ["make-dataset", "--out", str(tmp_path / "bad"), "--velocity", "40,0",
         "--frames", "6", "--size", "64x64"]
    )
    assert rc != 0
    assert "error:" in capsys.readouterr().err


def test_make_dataset_append_and_splits(tmp_path):
    out = tmp_path / "data"
    _make_dataset(out, sequences=2)
    _make_dataset(out, sequences=1, extra=["--append", "--split", "test"])
    manifest = (out / "manifest.txt").read_text()
    assert manifest.count("\ttrain") == 2
    assert manifest.count("\ttest") == 1
    assert (out / "seq_0002").exists()


def test_unknown_flag_is_error():
    with pytest.raises(SystemExit) as exc:
        main(["make-dataset", "--out", "x", "--bogus", "1"])
    assert exc.value.code == 2


def test_train_outputs(workspace):
    assert workspace["checkpoint"].exists()
    log = (workspace["root"] / "run" / "train_log.txt").read_text().splitlines()
    assert len(log) == 12  # 2 cycles x (5 critic + 1 generator)
    assert all("total=" in line for line in log)


def test_train_lambda_zero_logged(tmp_path, workspace):
    out = tmp_path / "run0"
    rc = main(
        ["train", "--manifest", str(workspace["manifest"]), "--out", str(out), "--lambda", "0"]
        + TRAIN_FLAGS
    )
    assert rc == 0
    for line in (out / "train_log.txt").read_text().splitlines():
        assert "lambda=0.0" in line


def test_train_ablation_flow_off(tmp_path, workspace):
    out = tmp_path / "flowoff"
    rc = main(
        ["train", "--manifest", str(workspace["manifest"]), "--out", str(out),
         "--ablation", "flow_off"] + TRAIN_FLAGS
    )
    assert rc == 0
    config = load_checkpoint(out / "checkpoint.pt")["config"]
    assert config["flow_branch_on"] is False and config["flow_gan_on"] is False
    assert config["frame_branch_on"] is True


def test_train_config_file_and_flag_precedence(tmp_path, workspace):
    config_file = tmp_path / "train.ini"
    config_file.write_text("[train]\nsteps = 5\nwidth = 8\nwindow = 3\nlambda = 0.25\n")
    out = tmp_path / "cfg"
    rc = main(
        ["train", "--manifest", str(workspace["manifest"]), "--out", str(out),
         "--config", str(config_file), "--steps", "1", "--checkpoint-interval", "0"]
    )
    assert rc == 0
    config = load_checkpoint(out / "checkpoint.pt")["config"]
    assert config["steps"] == 1  # explicit flag beats the file
    assert config["lambda_"] == 0.25  # file beats the default
    assert config["width"] == 8


def test_train_resume_matches_uninterrupted(tmp_path, workspace):
    manifest = str(workspace["manifest"])
    full = tmp_path / "full"
    rc = main(["train", "--manifest", manifest, "--out", str(full), "--steps", "4",
               "--width", "8", "--window", "3", "--checkpoint-interval", "2"])
    assert rc == 0
    assert (full / "checkpoint_000002.pt").exists()  # periodic checkpoint
    part = tmp_path / "part"
    rc = main(["train", "--manifest", manifest, "--out", str(part), "--steps", "2",
               "--width", "8", "--window", "3", "--checkpoint-interval", "0"])
    assert rc == 0
    rc = main(["train", "--manifest", manifest, "--out", str(part), "--steps", "4",
               "--resume", str(part / "checkpoint.pt")])
    assert rc == 0
    full_log = (full / "train_log.txt").read_text().splitlines()
    part_log = (part / "train_log.txt").read_text().splitlines()
    # the resumed file holds its first half plus the continuation; together
    # they reproduce the uninterrupted run exactly
    assert len(part_log) == len(full_log) == 24
    assert part_log == full_log


def test_predict_outputs_and_bit_stability(tmp_path, workspace):
    frames_dir = workspace["root"] / "data" / "seq_0000"
    out_a, out_b = tmp_path / "pa", tmp_path / "pb"
    for out in (out_a, out_b):
        rc = main(["predict", "--checkpoint", str(workspace["checkpoint"]), "--input",
                   str(frames_dir), "--out", str(out), "--steps", "3", "--flow-color"])
        assert rc == 0
        assert len(list(out.glob("pred_*.png"))) == 3
        assert len(list(out.glob("flow_*.flo"))) == 3
        assert len(list(out.glob("flow_*.png"))) == 3
    assert _tree_bytes(out_a) == _tree_bytes(out_b)


def test_predict_incompatible_checkpoint(tmp_path, capsys):
    bad = tmp_path / "bad.pt"
    bad.write_bytes(b"junk")
    rc = main(["predict", "--checkpoint", str(bad), "--input", "x", "--out", str(tmp_path / "o")])
    assert rc != 0
    assert "error:" in capsys.readouterr().err


def test_evaluate_prints_table(tmp_path, workspace, capsys):
    test_data = tmp_path / "testdata"
    _make_dataset(test_data, sequences=2, extra=["--split", "test", "--frames", "6"])
    out = tmp_path / "report"
    rc = main(["evaluate", "--checkpoint", str(workspace["checkpoint"]), "--manifest",
               str(test_data / "manifest.txt"), "--horizons", "1,2", "--out", str(out)])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "copy_last" in printed and "fused" in printed
    assert "EPE" in printed
    assert (out / "curve_ssim.dat").exists()


def test_evaluate_without_flows_omits_epe(tmp_path, workspace, capsys):
    test_data = tmp_path / "noflow"
    _make_dataset(test_data, sequences=2, extra=["--split", "test", "--no-flows", "--frames", "6"])
    rc = main(["evaluate", "--checkpoint", str(workspace["checkpoint"]), "--manifest",
               str(test_data / "manifest.txt"), "--horizons", "1"])
    assert rc == 0
    assert "EPE" not in capsys.readouterr().out


def test_probe_command(tmp_path, workspace, capsys):
    probe_data = tmp_path / "probedata"
    _make_dataset(probe_data, sequences=24)
    rc = main(["probe", "--checkpoint", str(workspace["checkpoint"]), "--manifest",
               str(probe_data / "manifest.txt"), "--seed", "1"])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "trained-encoder probe accuracy" in printed
    assert "random-encoder probe accuracy" in printed


def test_flow_viz_zero_flow_white(tmp_path):
    from framecast.flo import FlowField, write_flo

    flo_path = tmp_path / "zero.flo"
    write_flo(FlowField(u=np.zeros((8, 8)), v=np.zeros((8, 8))), flo_path)
    out = tmp_path / "zero.png"
    rc = main(["flow-viz", "--flo", str(flo_path), "--out", str(out)])
    assert rc == 0
    assert (np.asarray(Image.open(out)) == 255).all()


def test_inspect_lists_parameter_shapes(workspace, capsys):
    rc = main(["inspect", "--checkpoint", str(workspace["checkpoint"])])
    assert rc == 0
    printed = capsys.readouterr().out
    # trunk ConvLSTM gate stack: 4*width output channels, width+width input
    assert "encoder.trunk.gates.weight (32, 16, 4, 4)" in printed
    assert "fusion.mix.weight (3, 6, 1, 1)" in printed
    assert "frame_critic" in printed and "flow_critic" in printed
    assert "total parameters:" in printed

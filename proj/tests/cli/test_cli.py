import json
import os
import subprocess
from pathlib import Path

import pytest

BIN = os.environ.get("LSTM_CCTC_BIN", "lstm_cctc")

SMALL_SPEC = {
    "n": 6,
    "k": 3,
    "objectCountRange": [1, 2],
    "objectSideRange": [1, 2],
    "signalChannels": [0],
    "trainSize": 6,
    "testSize": 4,
}


def run(*args, cwd=None):
    return subprocess.run([BIN, *map(str, args)], capture_output=True, text=True, cwd=cwd)


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line]


@pytest.fixture
def dataset(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SMALL_SPEC))
    out = tmp_path / "data"
    r = run("--out", out, "gen-data", "--spec", spec)
    assert r.returncode == 0, r.stderr
    return out


def test_gen_data_writes_files_and_manifest(dataset):
    assert len(read_jsonl(dataset / "train.jsonl")) == 6
    assert len(read_jsonl(dataset / "test.jsonl")) == 4
    manifest = json.loads((dataset / "manifest.json").read_text())
    assert manifest["command"] == "gen-data"
    assert manifest["config"]["n"] == 6
    assert len(manifest["spec_hash"]) == 16
    for key in ("seed", "inputs", "outputs", "version", "duration_seconds"):
        assert key in manifest


def test_gen_data_is_reproducible_from_manifest(dataset, tmp_path):
    again = tmp_path / "again"
    r = run("--config", dataset / "manifest.json", "--out", again, "gen-data")
    assert r.returncode == 0, r.stderr
    for name in ("train.jsonl", "test.jsonl"):
        assert (again / name).read_bytes() == (dataset / name).read_bytes()


def test_gen_data_rejects_bad_count_range(tmp_path):
    spec = tmp_path / "bad.json"
    spec.write_text(json.dumps({"objectCountRange": [5, 3]}))
    r = run("--out", tmp_path / "x", "gen-data", "--spec", spec)
    assert r.returncode == 1
    assert r.stderr.startswith("error:")
    assert "objectCountRange" in r.stderr


def test_unknown_flag_is_a_validation_error(tmp_path):
    r = run("--out", tmp_path, "train", "--data", tmp_path, "--bogus", "1")
    assert r.returncode == 1
    assert r.stderr.startswith("error:")


def test_train_default_hyperparameters(dataset, tmp_path):
    out = tmp_path / "run"
    r = run("--out", out, "train", "--data", dataset, "--epochs", "0", "--hidden_size", "4")
    assert r.returncode == 0, r.stderr
    cfg = json.loads((out / "manifest.json").read_text())["config"]
    assert cfg["learning_rate"] == 0.001
    assert cfg["momentum"] == 0.9
    assert cfg["weight_decay"] == 0.0005
    assert cfg["batch_size"] == 2
    assert cfg["lr_drop_epoch"] == 200
    assert cfg["init_stddev"] == 0.01


def test_zero_epochs_keeps_initialisation(dataset, tmp_path):
    out = tmp_path / "run"
    assert run("--out", out, "train", "--data", dataset, "--epochs", "0", "--hidden_size", "4").returncode == 0
    ckpt = json.loads((out / "checkpoint.json").read_text())
    assert ckpt["epoch"] == 0
    assert all(v == 0.0 for t in ckpt["velocity"].values() for v in t["data"])
    weights = []
    for name, t in ckpt["model"]["tensors"].items():
        if name.endswith("bias"):
            assert all(v == 0.0 for v in t["data"])
        else:
            weights += t["data"]
    rms = (sum(w * w for w in weights) / len(weights)) ** 0.5
    assert 0.008 < rms < 0.012


def test_same_seed_gives_identical_checkpoints(dataset, tmp_path):
    paths = []
    for name, seed in (("a", 7), ("b", 7), ("c", 8)):
        out = tmp_path / name
        r = run("--seed", seed, "--out", out, "train", "--data", dataset, "--epochs", "2", "--hidden_size", "4")
        assert r.returncode == 0, r.stderr
        paths.append(out / "checkpoint.json")
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].read_bytes() != paths[2].read_bytes()


def test_resume_matches_uninterrupted_run(dataset, tmp_path):
    common = ["--data", dataset, "--hidden_size", "4", "--init_stddev", "0.2"]
    assert run("--out", tmp_path / "full", "train", *common, "--epochs", "3").returncode == 0
    assert run("--out", tmp_path / "half", "train", *common, "--epochs", "1").returncode == 0
    r = run("--out", tmp_path / "rest", "train", *common, "--epochs", "3",
            "--resume", tmp_path / "half" / "checkpoint.json")
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "rest" / "checkpoint.json").read_bytes() == (tmp_path / "full" / "checkpoint.json").read_bytes()


def test_train_log_and_proposal_export(dataset, tmp_path):
    out = tmp_path / "run"
    r = run("--out", out, "train", "--data", dataset, "--epochs", "3", "--hidden_size", "4",
            "--pretrain_epochs", "2", "--export_proposals", "--checkpoint_every", "2")
    assert r.returncode == 0, r.stderr
    lines = (out / "train_log.csv").read_text().splitlines()
    assert lines[0].startswith("epoch,loss,lr,gradNorm")
    assert len(lines) == 4
    assert sorted(p.name for p in (out / "proposals").iterdir()) == ["epoch_0002.jsonl", "epoch_0003.jsonl"]
    assert [p.name for p in (out / "checkpoints").iterdir()] == ["epoch_0002.json"]


def test_corrupt_checkpoint_is_a_runtime_error(dataset, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": "lstm-cctc-checkpoint", "version": 1')
    r = run("--out", tmp_path / "p", "propose", "--checkpoint", bad, "--data", dataset)
    assert r.returncode == 2
    assert r.stderr.startswith("error:")


@pytest.fixture
def zero_model(dataset, tmp_path):
    out = tmp_path / "zero"
    r = run("--out", out, "train", "--data", dataset, "--epochs", "0", "--hidden_size", "4", "--init_stddev", "0")
    assert r.returncode == 0, r.stderr
    return out / "checkpoint.json"


def test_zero_model_proposes_nothing(dataset, zero_model, tmp_path):
    out = tmp_path / "p"
    r = run("--out", out, "propose", "--checkpoint", zero_model, "--data", dataset, "--alignments")
    assert r.returncode == 0, r.stderr
    records = read_jsonl(out / "proposals.jsonl")
    assert [rec["image"] for rec in records] == [f"test-{i}" for i in range(4)]
    assert all(rec["boxes"] == [] for rec in records)
    for rec in read_jsonl(out / "alignments.jsonl"):
        assert [a["count"] for a in rec["alignments"]] == [0, 0, 0, 0]


def test_empty_dataset_gives_empty_output(zero_model, tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    out = tmp_path / "p"
    r = run("--out", out, "propose", "--checkpoint", zero_model, "--data", empty)
    assert r.returncode == 0, r.stderr
    assert (out / "proposals.jsonl").read_text() == ""


def test_dimension_mismatch_is_rejected(zero_model, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({**SMALL_SPEC, "k": 5}))
    assert run("--out", tmp_path / "d5", "gen-data", "--spec", spec).returncode == 0
    r = run("--out", tmp_path / "p", "propose", "--checkpoint", zero_model, "--data", tmp_path / "d5")
    assert r.returncode == 1
    assert "channels" in r.stderr


def write_proposals(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))


def test_eval_perfect_proposals(dataset, tmp_path):
    scenes = read_jsonl(dataset / "test.jsonl")
    props = tmp_path / "props.jsonl"
    write_proposals(props, [{"image": s["id"], "boxes": [b + [1.0] for b in s["boxes"]]} for s in scenes])
    out = tmp_path / "e"
    r = run("--out", out, "eval", "--proposals", props, "--data", dataset)
    assert r.returncode == 0, r.stderr
    report = json.loads((out / "report.json").read_text())
    assert report["corloc"] == 1.0
    assert report["map"] == 1.0
    csv = (out / "recall.csv").read_text().splitlines()
    assert csv[0] == "iou,recall"
    assert [float(line.split(",")[1]) for line in csv[1:]] == [1.0] * 5


def test_eval_empty_proposals(dataset, tmp_path):
    scenes = read_jsonl(dataset / "test.jsonl")
    props = tmp_path / "props.jsonl"
    write_proposals(props, [{"image": s["id"], "boxes": []} for s in scenes])
    out = tmp_path / "e"
    assert run("--out", out, "eval", "--proposals", props, "--data", dataset).returncode == 0
    report = json.loads((out / "report.json").read_text())
    assert report["corloc"] == 0.0
    assert report["map"] == 0.0
    assert report["mean_proposals"] == 0.0
    csv = (out / "recall.csv").read_text().splitlines()
    assert [float(line.split(",")[1]) for line in csv[1:]] == [0.0] * 5


def test_eval_lists_missing_ids(dataset, tmp_path):
    scenes = read_jsonl(dataset / "test.jsonl")
    props = tmp_path / "props.jsonl"
    write_proposals(props, [{"image": s["id"], "boxes": []} for s in scenes[1:]] + [{"image": "stray", "boxes": []}])
    r = run("--out", tmp_path / "e", "eval", "--proposals", props, "--data", dataset)
    assert r.returncode == 1
    assert "test-0" in r.stderr
    assert "stray" in r.stderr

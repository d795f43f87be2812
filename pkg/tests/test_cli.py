import json

import numpy as np
import pytest
import yaml

from tsfp import io
from tsfp.cli import main
from tsfp.config import ConfigError, from_dict, load_config
from tsfp.data import SyntheticConfig, generate_dataset
from tsfp.model import FingerprintModel, ModelConfig

SMALL = {
    "data": {"T": 200, "n_train": 30, "n_val": 9, "n_test": 9, "motif_length": [20, 40], "seed": 3},
    "model": {"patch_size": 20, "k": 2, "d": 8, "n_heads": 2, "encoder_layers": 1, "decoder_layers": 1},
    "train": {"max_epochs_pretrain": 2, "max_epochs_finetune": 2, "batch_size": 16},
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text(yaml.safe_dump(SMALL))
    return p


@pytest.fixture
def data_dir(tmp_path, cfg_path):
    out = tmp_path / "data"
    assert main(["generate-data", "--config", str(cfg_path), "--out", str(out)]) == 0
    return out


# --- config ------------------------------------------------------------------------


def test_default_config_file_matches_code_defaults():
    from tsfp.config import RunConfig
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "configs" / "default.yaml"
    assert load_config(path).to_dict() == RunConfig().to_dict()


@pytest.mark.parametrize(
    "doc,field",
    [
        ({"data": {"noise_std": -1}}, "data.noise_std"),
        ({"model": {"bogus": 1}}, "model.bogus"),
        ({"objective": {"eps": 0}}, "objective.eps"),
        ({"train": {"patience": 0}}, "train.patience"),
        ({"extra": {}}, "extra"),
    ],
)
def test_config_errors_name_the_field(doc, field):
    with pytest.raises(ConfigError, match=f"^{field}"):
        from_dict(doc)


# --- formats -----------------------------------------------------------------------


def test_dataset_round_trip(tmp_path):
    split = generate_dataset(SyntheticConfig(T=50, n_train=4, n_val=3, n_test=3, motif_length=(5, 10)))["train"]
    path = tmp_path / "train.tsfp"
    io.write_split(path, split, {"T": 50})
    raw = path.read_bytes()
    assert raw.startswith(b"TSFP-DATA v1; T=50; C=1; n=4; classes=3\n")
    back = io.read_split(path)
    assert back.signals.tobytes() == split.signals.tobytes()
    assert back.motifs == split.motifs
    np.testing.assert_array_equal(back.labels, split.labels)


def test_dataset_bad_magic():
    with pytest.raises(io.FormatError):
        io.decode_split(b"NOPE; T=1\n")


def test_checkpoint_round_trip(tmp_path):
    m = FingerprintModel(ModelConfig(patch_size=4, k=2, d=8, n_heads=2, encoder_layers=1, decoder_layers=1), seed=5)
    io.save_checkpoint(tmp_path / "ck", m)
    back, meta = io.load_checkpoint(tmp_path / "ck")
    for (n1, p1), (n2, p2) in zip(m.named_parameters(), back.named_parameters()):
        assert n1 == n2 and p1.data.tobytes() == p2.data.tobytes()
    offsets = [e["offset"] for e in meta["parameters"]]
    assert offsets == sorted(offsets) and offsets[0] == 0


def test_checkpoint_detects_corruption(tmp_path):
    m = FingerprintModel(ModelConfig(patch_size=4, k=2, d=8, n_heads=2, encoder_layers=1, decoder_layers=1))
    io.save_checkpoint(tmp_path / "ck", m)
    blob = tmp_path / "ck" / io.BLOB_NAME
    raw = bytearray(blob.read_bytes())
    raw[3] ^= 0xFF
    blob.write_bytes(bytes(raw))
    with pytest.raises(io.FormatError):
        io.load_checkpoint(tmp_path / "ck")


def test_csv_uses_17_significant_digits(tmp_path):
    io.write_csv(tmp_path / "x.csv", ["v"], [[0.1], [1 / 3]])
    lines = (tmp_path / "x.csv").read_text().splitlines()
    assert lines[1] == "0.10000000000000001"
    assert float(lines[2]) == 1 / 3


# --- commands ----------------------------------------------------------------------


def test_generate_data_balanced_and_reproducible(tmp_path, cfg_path, data_dir):
    train = io.read_split(data_dir / "train.tsfp")
    assert np.bincount(train.labels).tolist() == [10, 10, 10]
    manifest = json.loads((data_dir / "manifest.json").read_text())
    assert manifest["status"] == "complete"
    assert sorted(manifest["artifacts"]) == ["test.tsfp", "train.tsfp", "val.tsfp"]
    other = tmp_path / "again"
    assert main(["generate-data", "--config", str(cfg_path), "--out", str(other)]) == 0
    for name in ("train", "val", "test"):
        assert (other / f"{name}.tsfp").read_bytes() == (data_dir / f"{name}.tsfp").read_bytes()


def test_rerun_is_noop_unless_forced(data_dir, cfg_path):
    before = (data_dir / "manifest.json").read_text()
    assert main(["generate-data", "--config", str(cfg_path), "--out", str(data_dir)]) == 0
    assert (data_dir / "manifest.json").read_text() == before
    assert main(["generate-data", "--config", str(cfg_path), "--out", str(data_dir), "--force"]) == 0
    assert (data_dir / "manifest.json").read_text() != before


def test_malformed_config_leaves_no_files(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("data:\n  noise_std: -1\n")
    out = tmp_path / "never"
    assert main(["generate-data", "--config", str(bad), "--out", str(out)]) == 1
    assert not out.exists()
    assert [p.name for p in tmp_path.iterdir()] == ["bad.yaml"]


def test_usage_errors(tmp_path, data_dir, cfg_path):
    assert main(["no-such-command"]) == 1
    rc = main(["finetune", "--config", str(cfg_path), "--data", str(data_dir), "--out", str(tmp_path / "ft"), "--mode", "rec"])
    assert rc == 1
    rc = main(["pretrain", "--config", str(cfg_path), "--data", str(tmp_path / "nowhere"), "--out", str(tmp_path / "pt")])
    assert rc == 1


def test_pipeline(tmp_path, cfg_path, data_dir):
    pt, ft, ev, pr = (tmp_path / n for n in ("pt", "ft", "ev", "pr"))
    assert main(["pretrain", "--config", str(cfg_path), "--data", str(data_dir), "--out", str(pt), "--mode", "rec_div"]) == 0
    ck = json.loads((pt / "checkpoint" / "checkpoint.json").read_text())
    assert ck["objective_config"]["lam"] == 1e-4
    assert (pt / "loss_curve.csv").read_text().startswith("epoch,train_total")
    assert main(["finetune", "--config", str(cfg_path), "--data", str(data_dir), "--out", str(ft), "--mode", "rec_div", "--checkpoint", str(pt)]) == 0
    metrics = json.loads((ft / "metrics.json").read_text())
    assert 0.0 <= metrics["accuracy"] <= 1.0 and np.sum(metrics["confusion"]) == 9
    assert main(["evaluate", "--checkpoint", str(ft), "--data", str(data_dir), "--out", str(ev)]) == 0
    assert json.loads((ev / "metrics.json").read_text())["accuracy"] == metrics["accuracy"]
    assert main(["probe", "--model", str(ft), "--data", str(data_dir), "--out", str(pr)]) == 0
    rows = (pr / "alpha.csv").read_text().splitlines()
    assert len(rows) == 1 + 9
    for line in rows[1:]:
        assert abs(sum(float(v) for v in line.split(",")[2:]) - 1.0) < 1e-9
    summary = json.loads((pr / "summary.json").read_text())
    assert set(summary["argmax_token"]) == {"0", "1", "2"}
    assert (pr / "attention_token1.csv").exists()


def test_scratch_mode_skips_pretraining(tmp_path, cfg_path, data_dir):
    assert main(["pretrain", "--config", str(cfg_path), "--data", str(data_dir), "--out", str(tmp_path / "p"), "--mode", "rec"]) == 0
    assert main(["finetune", "--config", str(cfg_path), "--data", str(data_dir), "--out", str(tmp_path / "s"), "--mode", "scratch"]) == 0
    ck = json.loads((tmp_path / "s" / "checkpoint" / "checkpoint.json").read_text())
    assert ck["extra"]["mode"] == "scratch"


def test_rec_mode_sets_lambda_zero(tmp_path, cfg_path, data_dir):
    out = tmp_path / "p"
    assert main(["pretrain", "--config", str(cfg_path), "--data", str(data_dir), "--out", str(out), "--mode", "rec"]) == 0
    header, first = (out / "loss_curve.csv").read_text().splitlines()[:2]
    row = dict(zip(header.split(","), first.split(",")))
    assert row["train_total"] == row["train_rec"]


@pytest.mark.slow
def test_verify_theory_and_canary(tmp_path):
    out = tmp_path / "theory"
    assert main(["verify-theory", "--out", str(out), "--seed", "0"]) == 0
    bundle = json.loads((out / "verdicts.json").read_text())
    assert len(bundle["verdicts"]) == 6 and bundle["all_pass"]
    again = tmp_path / "theory2"
    assert main(["verify-theory", "--out", str(again), "--seed", "0"]) == 0
    strip = lambda b: json.dumps(b["verdicts"], sort_keys=True)
    assert strip(json.loads((again / "verdicts.json").read_text())) == strip(bundle)
    assert main(["verify-theory", "--out", str(tmp_path / "canary"), "--canary"]) == 3

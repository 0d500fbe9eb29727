import json

import numpy as np
import pytest

from maskshift.cli import main
from maskshift.data import load_features
from maskshift.masking import load_mask
from maskshift.model import load_head

SYNTH = {
    "feature_dim": 8, "num_classes": 3, "samples_per_class": 30,
    "noise_std": 0.4, "shift_kind": "rotation", "shift_magnitude": 0.6,
    "seed": 0,
}


@pytest.fixture()
def workspace(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"synth": SYNTH}))
    assert main(["synth", "--config", str(cfg),
                 "--out", str(tmp_path)]) == 0
    return tmp_path


@pytest.fixture()
def trained(workspace):
    head = workspace / "head.mshd"
    assert main(["train-source", "--data", str(workspace / "source.ftds"),
                 "--seed", "0", "--out", str(head)]) == 0
    return workspace, head


class TestSynth:
    def test_writes_loadable_files(self, workspace):
        src = load_features(workspace / "source.ftds")
        tgt = load_features(workspace / "target.ftds")
        assert len(src) == 90
        assert src.num_classes == tgt.num_classes == 3

    def test_missing_synth_section_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{}")
        assert main(["synth", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 2

    def test_missing_out_dir_exits_3(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"synth": SYNTH}))
        assert main(["synth", "--config", str(cfg),
                     "--out", str(tmp_path / "nope")]) == 3

    def test_malformed_json_exits_3(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert main(["synth", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 3


class TestTrainSource:
    def test_writes_head_with_snapshots(self, trained):
        _, head_path = trained
        head = load_head(head_path)
        assert "source-init" in head.snapshots
        assert "source-final" in head.snapshots

    def test_missing_data_exits_3(self, tmp_path):
        assert main(["train-source", "--data", str(tmp_path / "no.ftds"),
                     "--out", str(tmp_path / "h.mshd")]) == 3

    def test_num_classes_mismatch_exits_2(self, workspace, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"num_classes": 7}))
        assert main(["train-source",
                     "--data", str(workspace / "source.ftds"),
                     "--config", str(cfg),
                     "--out", str(tmp_path / "h.mshd")]) == 2

    def test_seed_from_env(self, workspace, tmp_path, monkeypatch):
        monkeypatch.setenv("MASKSHIFT_SEED", "7")
        out_env = tmp_path / "env.mshd"
        out_arg = tmp_path / "arg.mshd"
        assert main(["train-source",
                     "--data", str(workspace / "source.ftds"),
                     "--out", str(out_env)]) == 0
        assert main(["train-source",
                     "--data", str(workspace / "source.ftds"),
                     "--seed", "7", "--out", str(out_arg)]) == 0
        assert out_env.read_bytes() == out_arg.read_bytes()


class TestLearnMask:
    def test_naive_needs_no_data(self, trained, tmp_path):
        _, head_path = trained
        out = tmp_path / "m.msmk"
        assert main(["learn-mask", "--head", str(head_path),
                     "--strategy", "naive", "--out", str(out)]) == 0
        assert load_mask(out).strategy == "naive"

    def test_binary_without_data_exits_2(self, trained, tmp_path):
        _, head_path = trained
        assert main(["learn-mask", "--head", str(head_path),
                     "--strategy", "binary",
                     "--out", str(tmp_path / "m.msmk")]) == 2

    def test_binary_mask(self, trained, tmp_path):
        ws, head_path = trained
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(
            {"train": {"epochs": 2, "learning_rate": 0.05,
                       "alpha_sparsity": 0.2}}))
        out = tmp_path / "m.msmk"
        assert main(["learn-mask", "--head", str(head_path),
                     "--strategy", "binary",
                     "--data", str(ws / "source.ftds"),
                     "--config", str(cfg), "--seed", "0",
                     "--out", str(out)]) == 0
        mask = load_mask(out)
        assert mask.strategy == "binary"
        assert mask.bits.shape == (3, 8)

    def test_editor_both_directions(self, trained, tmp_path):
        ws, head_path = trained
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(
            {"train": {"epochs": 2, "lambda_edit": 0.5}}))
        out = tmp_path / "m.msmk"
        assert main(["learn-mask", "--head", str(head_path),
                     "--strategy", "editor",
                     "--data", str(ws / "source.ftds"),
                     "--config", str(cfg), "--seed", "0",
                     "--both-directions", "--out", str(out)]) == 0
        alt = tmp_path / "m.small.msmk"
        assert alt.exists()
        assert load_mask(alt).strategy == "editor"

    def test_corrupt_head_exits_3(self, trained, tmp_path):
        bad = tmp_path / "bad.mshd"
        bad.write_bytes(b"MSHDgarbage")
        assert main(["learn-mask", "--head", str(bad),
                     "--strategy", "naive",
                     "--out", str(tmp_path / "m.msmk")]) == 3


class TestTransfer:
    @pytest.fixture()
    def masked(self, trained, tmp_path):
        ws, head_path = trained
        mask = tmp_path / "m.msmk"
        assert main(["learn-mask", "--head", str(head_path),
                     "--strategy", "naive", "--out", str(mask)]) == 0
        return ws, head_path, mask

    def test_transfer_runs_and_reports_drift(self, masked, tmp_path,
                                             capsys):
        ws, head_path, mask = masked
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"train": {"epochs": 3}}))
        out = tmp_path / "tuned.mshd"
        assert main(["transfer", "--head", str(head_path),
                     "--mask", str(mask),
                     "--data", str(ws / "target.ftds"),
                     "--init", "source-init",
                     "--config", str(cfg), "--seed", "0",
                     "--out", str(out)]) == 0
        assert "max frozen drift = 0.0" in capsys.readouterr().out
        assert load_head(out).W.shape == (3, 8)

    def test_transfer_deterministic(self, masked, tmp_path):
        ws, head_path, mask = masked
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"train": {"epochs": 2}}))
        outs = []
        for name in ("a.mshd", "b.mshd"):
            out = tmp_path / name
            assert main(["transfer", "--head", str(head_path),
                         "--mask", str(mask),
                         "--data", str(ws / "target.ftds"),
                         "--config", str(cfg), "--seed", "3",
                         "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_mismatched_mask_exits_2(self, masked, tmp_path):
        ws, head_path, _ = masked
        from maskshift.masking import WeightMask, save_mask
        bad = tmp_path / "bad.msmk"
        save_mask(WeightMask(np.zeros((2, 5), dtype=np.uint8), "naive"),
                  bad)
        assert main(["transfer", "--head", str(head_path),
                     "--mask", str(bad),
                     "--data", str(ws / "target.ftds"),
                     "--out", str(tmp_path / "t.mshd")]) == 2


class TestExperiment:
    def test_grid_writes_reports(self, tmp_path):
        cfg = tmp_path / "exp.json"
        cfg.write_text(json.dumps({
            "synth": SYNTH,
            "strategies": ["naive"],
            "inits": ["source-init"],
            "seeds": [0, 1],
            "train": {"epochs": 3},
        }))
        assert main(["experiment", "--config", str(cfg),
                     "--out", str(tmp_path), "--jobs", "1"]) == 0
        report = tmp_path / "report_source_target.json"
        records = tmp_path / "records_source_target.csv"
        assert report.exists() and records.exists()
        payload = json.loads(report.read_text())
        assert len(payload) == 1
        assert len(payload[0]["records"]) == 2
        assert len(records.read_text().strip().splitlines()) == 3

    def test_bad_config_exits_2(self, tmp_path):
        cfg = tmp_path / "exp.json"
        cfg.write_text(json.dumps({"strategies": ["naive"]}))
        assert main(["experiment", "--config", str(cfg),
                     "--out", str(tmp_path)]) == 2


class TestVerify:
    def test_digest_ok_and_mismatch(self, workspace, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"train": {"epochs": 2}}))
        head = tmp_path / "h.mshd"
        assert main(["train-source",
                     "--data", str(workspace / "source.ftds"),
                     "--config", str(cfg), "--seed", "0",
                     "--out", str(head)]) == 0
        assert main(["verify", "--artifact", str(head),
                     "--config", str(cfg), "--seed", "0"]) == 0
        other = tmp_path / "c2.json"
        other.write_text(json.dumps({"train": {"epochs": 5}}))
        assert main(["verify", "--artifact", str(head),
                     "--config", str(other), "--seed", "0"]) == 4

    def test_unknown_artifact_exits_3(self, tmp_path):
        junk = tmp_path / "x.bin"
        junk.write_bytes(b"XXXX" + bytes(16))
        assert main(["verify", "--artifact", str(junk)]) == 3

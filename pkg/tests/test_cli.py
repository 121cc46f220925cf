"""Command line behavior: flag precedence, outputs, exit codes."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from gridaste import cli

DATA = "data/mini_rest"
FAST = ["--dim", "16", "--tensor-width", "8", "--epochs", "1", "--seed", "3"]


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = cli.main(["train", "--data", DATA, "--out", str(out), *FAST])
    assert code == 0
    return out


class TestTrain:
    def test_writes_checkpoint_and_manifest(self, run_dir):
        assert (run_dir / "best.ckpt").exists()
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["resolved"]["dim"] == 16
        assert manifest["model_config"]["dim"] == 16
        assert "train" in manifest["dataset_sha256"]
        assert manifest["vocab"][0] == "<pad>"

    def test_config_file_precedence(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"dim": 24, "tensor_width": 8, "epochs": 1, "seed": 3}))
        out = tmp_path / "out"
        code = cli.main(
            ["train", "--data", DATA, "--out", str(out), "--config", str(cfg), "--dim", "16"]
        )
        assert code == 0
        resolved = json.loads((out / "manifest.json").read_text())["resolved"]
        assert resolved["dim"] == 16  # flag beats file
        assert resolved["tensor_width"] == 8  # file beats default

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"hidden_size": 4}))
        code = cli.main(["train", "--data", DATA, "--out", str(tmp_path / "o"), "--config", str(cfg)])
        assert code == 2

    def test_frozen_without_embeddings_exits_2(self, tmp_path):
        code = cli.main(
            ["train", "--data", DATA, "--out", str(tmp_path / "o"), "--encoder", "frozen", *FAST]
        )
        assert code == 2

    def test_missing_data_dir_exits_2(self, tmp_path):
        code = cli.main(["train", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o"), *FAST])
        assert code == 2

    def test_template_none_trains(self, tmp_path):
        out = tmp_path / "none"
        code = cli.main(["train", "--data", DATA, "--out", str(out), "--template", "none", *FAST])
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["model_config"]["template_mode"] == "none"

    def test_none_has_fewer_parameters_than_full(self, run_dir, tmp_path):
        out = tmp_path / "none"
        assert cli.main(["train", "--data", DATA, "--out", str(out), "--template", "none", *FAST]) == 0
        full = json.loads((run_dir / "manifest.json").read_text())["num_parameters"]
        none = json.loads((out / "manifest.json").read_text())["num_parameters"]
        assert none < full


class TestEval:
    def test_eval_outputs(self, run_dir, tmp_path, capsys):
        out = tmp_path / "eval"
        code = cli.main(
            ["eval", "--data", DATA, "--checkpoint", str(run_dir / "best.ckpt"),
             "--split", "dev", "--out", str(out)]
        )
        assert code == 0
        stdout = capsys.readouterr().out
        assert "triplet" in stdout and "aesc" in stdout and "aope" in stdout
        assert "ms/sentence" in stdout

        lines = (out / "predictions.txt").read_text().splitlines()
        assert len(lines) == 12
        sid, trips = lines[0].split("\t")
        assert sid == "s0001" and trips.startswith("[")

        report = json.loads((out / "report.json").read_text())
        assert {"triplet", "aesc", "aope", "errors", "mean_inference_ms"} <= set(report)

    def test_task_filter(self, run_dir, tmp_path, capsys):
        code = cli.main(
            ["eval", "--data", DATA, "--checkpoint", str(run_dir / "best.ckpt"),
             "--split", "dev", "--task", "aope", "--out", str(tmp_path / "e")]
        )
        assert code == 0
        stdout = capsys.readouterr().out
        assert "aope" in stdout and "aesc" not in stdout

    def test_missing_checkpoint_exits_2(self, tmp_path):
        code = cli.main(
            ["eval", "--data", DATA, "--checkpoint", str(tmp_path / "no.ckpt"), "--out", str(tmp_path / "e")]
        )
        assert code == 2

    def test_config_mismatch_exits_2(self, run_dir, tmp_path):
        # checkpoint was trained at dim 16; forcing dim 32 must be rejected
        code = cli.main(
            ["eval", "--data", DATA, "--checkpoint", str(run_dir / "best.ckpt"),
             "--dim", "32", "--out", str(tmp_path / "e")]
        )
        assert code == 2

    def test_eval_reuses_manifest_config(self, run_dir, tmp_path):
        # no --dim flag given: the sibling manifest supplies dim 16
        code = cli.main(
            ["eval", "--data", DATA, "--checkpoint", str(run_dir / "best.ckpt"),
             "--split", "test", "--out", str(tmp_path / "e")]
        )
        assert code == 0


class TestHeatmap:
    def test_three_csvs(self, run_dir, tmp_path):
        out = tmp_path / "heat"
        code = cli.main(
            ["heatmap", "s0001", "--data", DATA, "--checkpoint", str(run_dir / "best.ckpt"),
             "--out", str(out)]
        )
        assert code == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == ["s0001.neg.csv", "s0001.neu.csv", "s0001.pos.csv"]
        with open(out / "s0001.pos.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][1:] == list("the salmon sushi was ultra fresh but noodles were sticky".split())
        assert len(rows) == 11

    def test_single_mode_writes_three_identical(self, tmp_path):
        run = tmp_path / "run"
        assert cli.main(
            ["train", "--data", DATA, "--out", str(run), "--template", "single", *FAST]
        ) == 0
        out = tmp_path / "heat"
        assert cli.main(
            ["heatmap", "s0002", "--data", DATA, "--checkpoint", str(run / "best.ckpt"),
             "--out", str(out)]
        ) == 0
        texts = {(out / f"s0002.{ch}.csv").read_text() for ch in ("pos", "neg", "neu")}
        assert len(texts) == 1

    def test_none_mode_exits_2(self, tmp_path):
        run = tmp_path / "run"
        assert cli.main(
            ["train", "--data", DATA, "--out", str(run), "--template", "none", *FAST]
        ) == 0
        code = cli.main(
            ["heatmap", "s0001", "--data", DATA, "--checkpoint", str(run / "best.ckpt"),
             "--out", str(tmp_path / "h")]
        )
        assert code == 2

    def test_unknown_sentence_exits_2(self, run_dir, tmp_path):
        code = cli.main(
            ["heatmap", "zzzz", "--data", DATA, "--checkpoint", str(run_dir / "best.ckpt"),
             "--out", str(tmp_path / "h")]
        )
        assert code == 2


@pytest.fixture(scope="module")
def emb_dir(tmp_path_factory):
    """Per-split embedding stores built from a throwaway tiny model."""
    from gridaste.corpus import parse_split
    from gridaste.encoder import build_vocab, make_template
    from gridaste.model import Model, ModelConfig
    from gridaste.store import EmbeddingRecord, write_store

    splits = {name: parse_split(f"{DATA}/{name}.txt") for name in ("train", "dev", "test")}
    sentences = [s for sp in splits.values() for s in sp.sentences]
    donor = Model(
        ModelConfig(dim=16, tensor_width=8, enc_heads=4, max_positions=96),
        vocab=build_vocab(sentences, make_template("full")),
    )
    out = tmp_path_factory.mktemp("emb")
    for name, sp in splits.items():
        records = []
        for s in sp.sentences:
            enc = donor.encode(s)
            records.append(
                EmbeddingRecord(
                    sentence_id=s.id,
                    hidden=enc.hidden.data.astype(np.float32),
                    tau=enc.tau.data.astype(np.float32),
                )
            )
        write_store(out / f"{name}.bin", records)
    return out


@pytest.fixture(scope="module")
def frozen_run(emb_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("frozen_run")
    code = cli.main(
        ["train", "--data", DATA, "--out", str(out), "--encoder", "frozen",
         "--embeddings", str(emb_dir), *FAST]
    )
    assert code == 0
    return out


class TestFrozenCli:
    def test_trains_from_store_directory(self, frozen_run):
        manifest = json.loads((frozen_run / "manifest.json").read_text())
        assert manifest["model_config"]["encoder_mode"] == "frozen"
        assert "vocab" not in manifest

    def test_flat_store_file_rejected_for_training(self, emb_dir, tmp_path):
        code = cli.main(
            ["train", "--data", DATA, "--out", str(tmp_path / "o"), "--encoder", "frozen",
             "--embeddings", str(emb_dir / "train.bin"), *FAST]
        )
        assert code == 2

    def test_eval_resolves_split_store_from_directory(self, frozen_run, emb_dir, tmp_path):
        out = tmp_path / "ev"
        code = cli.main(
            ["eval", "--data", DATA, "--checkpoint", str(frozen_run / "best.ckpt"),
             "--embeddings", str(emb_dir), "--split", "test", "--out", str(out)]
        )
        assert code == 0
        assert json.loads((out / "report.json").read_text())["triplet"]["f1"] >= 0.0

    def test_eval_accepts_direct_store_file(self, frozen_run, emb_dir, tmp_path):
        code = cli.main(
            ["eval", "--data", DATA, "--checkpoint", str(frozen_run / "best.ckpt"),
             "--embeddings", str(emb_dir / "test.bin"), "--split", "test",
             "--out", str(tmp_path / "ev")]
        )
        assert code == 0

    def test_eval_missing_split_store_exits_2(self, frozen_run, emb_dir, tmp_path):
        (emb_dir / "test.bin").rename(emb_dir / "test.bin.bak")
        try:
            code = cli.main(
                ["eval", "--data", DATA, "--checkpoint", str(frozen_run / "best.ckpt"),
                 "--embeddings", str(emb_dir), "--split", "test", "--out", str(tmp_path / "ev")]
            )
        finally:
            (emb_dir / "test.bin.bak").rename(emb_dir / "test.bin")
        assert code == 2

    def test_heatmap_uses_its_split_store(self, frozen_run, emb_dir, tmp_path):
        out = tmp_path / "heat"
        code = cli.main(
            ["heatmap", "s0001", "--data", DATA, "--checkpoint", str(frozen_run / "best.ckpt"),
             "--embeddings", str(emb_dir), "--out", str(out)]
        )
        assert code == 0
        assert (out / "s0001.pos.csv").exists()


class TestConsoleScript:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "gridaste.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "train" in proc.stdout and "heatmap" in proc.stdout

"""Command-line entry points: train, eval, heatmap.

Config precedence is CLI flag > config file (--config JSON) > built-in
default, and the run manifest records the resolved values. Exit codes:
0 success, 2 invalid config or data, 3 non-finite training loss.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from gridaste import corpus, metrics, prompt
from gridaste.encoder import build_vocab, make_template
from gridaste.errors import (
    ConfigError,
    NonFiniteLossError,
    ParseError,
    ValidationError,
)
from gridaste.model import Model, ModelConfig
from gridaste.store import read_store
from gridaste.train import TrainConfig, fit

CONFIG_EXIT = 2
LOSS_EXIT = 3

# (flag dest, config-file key, default) for everything that may come from --config
_MODEL_KEYS = {
    "dim": 64,
    "tensor_width": 32,
    "layers": 2,
    "template": "full",
    "encoder": "tiny",
    "k": 0.3,
    "swap_axes": False,
    "topk_literal": False,
    "seed": 0,
    "max_len": 160,
}
_TRAIN_KEYS = {
    "epochs": 20,
    "batch": 4,
    "lr": None,
    "alpha": 0.5,
    "optimizer": "adam",
    "max_negatives": 24,
}


def _resolve(args, file_cfg: dict) -> dict:
    """flag > config file > default, for every known key."""
    out = {}
    for key, default in {**_MODEL_KEYS, **_TRAIN_KEYS}.items():
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in file_cfg:
            out[key] = file_cfg[key]
        else:
            out[key] = default
    return out


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    cfg = json.loads(p.read_text())
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(cfg) - set(_MODEL_KEYS) - set(_TRAIN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _model_config(r: dict) -> ModelConfig:
    return ModelConfig(
        dim=r["dim"],
        tensor_width=r["tensor_width"],
        gcn_layers=r["layers"],
        template_mode=r["template"],
        encoder_mode=r["encoder"],
        k=r["k"],
        swap_axes=r["swap_axes"],
        topk_literal=r["topk_literal"],
        seed=r["seed"],
    )


def _train_config(r: dict) -> TrainConfig:
    return TrainConfig(
        epochs=r["epochs"],
        batch_size=r["batch"],
        lr=r["lr"],
        alpha=r["alpha"],
        k=r["k"],
        seed=r["seed"],
        max_negatives=r["max_negatives"],
        optimizer=r["optimizer"],
    )


def _split_path(data_dir: str, split: str) -> Path:
    p = Path(data_dir) / f"{split}.txt"
    if not p.exists():
        raise ConfigError(f"dataset file not found: {p}")
    return p


def _store_for(embeddings: str | None, split: str):
    """Resolve the embedding store serving one split.

    Sentence ids restart at s0001 in every split file, so stores are
    per-split too: a directory maps to <dir>/<split>.bin, a plain file is
    used as-is (it must then belong to that split).
    """
    if not embeddings:
        raise ConfigError("frozen encoder mode requires --embeddings")
    path = Path(embeddings)
    if path.is_dir():
        path = path / f"{split}.bin"
        if not path.exists():
            raise ConfigError(f"embeddings directory {embeddings} has no {split}.bin")
    return read_store(path)


def _build_model(r: dict, train_split, store) -> Model:
    cfg = _model_config(r)
    if cfg.encoder_mode == "frozen":
        if store is None:
            raise ConfigError("frozen encoder mode requires --embeddings")
        return Model(cfg, store=store)
    vocab = build_vocab(train_split.sentences, make_template(cfg.template_mode))
    return Model(cfg, vocab=vocab)


# ---------------------------------------------------------------- commands


def cmd_train(args) -> int:
    r = _resolve(args, _load_config_file(args.config))
    train_path = _split_path(args.data, "train")
    dev_path = _split_path(args.data, "dev")
    train_split = corpus.parse_split(train_path, max_words=r["max_len"])
    dev_split = corpus.parse_split(dev_path, max_words=r["max_len"])

    store = dev_store = None
    if r["encoder"] == "frozen":
        if args.embeddings and not Path(args.embeddings).is_dir():
            raise ConfigError(
                "frozen training needs --embeddings DIR holding train.bin and dev.bin; "
                "one flat store cannot serve two splits whose ids both start at s0001"
            )
        store = _store_for(args.embeddings, "train")
        dev_store = _store_for(args.embeddings, "dev")
    model = _build_model(r, train_split, store)
    out_dir = Path(args.out)
    extra = {
        "resolved": r,
        "data_dir": str(args.data),
        "dataset_sha256": {
            "train": corpus.file_digest(train_path),
            "dev": corpus.file_digest(dev_path),
        },
    }
    if model.encoder is not None:
        extra["vocab"] = list(model.encoder.vocab.words)

    res = fit(
        model,
        train_split,
        dev_split,
        _train_config(r),
        out_dir=out_dir,
        extra_manifest=extra,
        log=lambda msg: print(msg),
        dev_store=dev_store,
    )
    print(f"best dev F1 {res.best_f1:.4f} at epoch {res.best_epoch}")
    print(f"wrote {out_dir / 'best.ckpt'} and {out_dir / 'manifest.json'}")
    return 0


def _model_from_checkpoint(args, r: dict):
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        raise ConfigError(f"checkpoint not found: {ckpt}")
    manifest_path = ckpt.parent / "manifest.json"
    if manifest_path.exists():
        stored = json.loads(manifest_path.read_text()).get("model_config", {})
        for flag, key in (
            ("dim", "dim"),
            ("tensor_width", "tensor_width"),
            ("layers", "gcn_layers"),
            ("template", "template_mode"),
            ("encoder", "encoder_mode"),
        ):
            if getattr(args, flag, None) is None and key in stored:
                r[flag] = stored[key]

    # the store must cover the split whose sentences will be encoded
    store = _store_for(args.embeddings, args.split) if r["encoder"] == "frozen" else None
    train_split = corpus.parse_split(_split_path(args.data, "train"), max_words=r["max_len"])
    model = _build_model(r, train_split, store)
    model.load(ckpt)
    return model


def cmd_eval(args) -> int:
    r = _resolve(args, _load_config_file(args.config))
    model = _model_from_checkpoint(args, r)
    split = corpus.parse_split(_split_path(args.data, args.split), max_words=r["max_len"])

    t0 = time.perf_counter()
    pred = model.predict(split.sentences)
    ms = (time.perf_counter() - t0) / max(1, len(split.sentences)) * 1000.0

    gold = split.gold_sets()
    tasks = ("triplet", "aesc", "aope") if args.task == "all" else (args.task,)
    reports = {}
    for task in tasks:
        if task == "triplet":
            reports[task] = metrics.triplet_metrics(pred, gold)
        else:
            reports[task] = metrics.subtask_metrics(pred, gold, task.upper())
    breakdown = metrics.error_analysis(pred, gold) if "triplet" in reports else None

    print(metrics.render_text(reports, breakdown))
    print(f"mean inference: {ms:.2f} ms/sentence over {len(split.sentences)} sentences")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for s in split.sentences:
        trips = sorted(pred[s.id], key=lambda t: (t.aspect, t.opinion, t.sentiment.value))
        lines.append(f"{s.id}\t{corpus.format_triplets(trips)}")
    (out_dir / "predictions.txt").write_text("\n".join(lines) + "\n")
    (out_dir / "report.json").write_text(
        metrics.to_json(reports, breakdown, extra={"mean_inference_ms": ms})
    )
    print(f"wrote {out_dir / 'predictions.txt'} and {out_dir / 'report.json'}")
    return 0


def cmd_heatmap(args) -> int:
    r = _resolve(args, _load_config_file(args.config))
    if r["template"] == "none":
        raise ConfigError("template mode none has no prompt attention to visualize")
    model = _model_from_checkpoint(args, r)
    if model.cfg.template_mode == "none":
        raise ConfigError("template mode none has no prompt attention to visualize")

    split = corpus.parse_split(_split_path(args.data, args.split), max_words=r["max_len"])
    if args.sentence_id not in split.by_id:
        raise ConfigError(f"sentence id {args.sentence_id!r} not in split {args.split}")
    sentence = split.by_id[args.sentence_id]

    out = model.forward_tables(sentence)
    p = out.p.data
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    single = model.cfg.template_mode == "single"
    written = []
    for ch in prompt.CHANNELS:
        ar, orow = (0, 1) if single else prompt.CHANNEL_ROWS[ch]
        grid = prompt.heatmap(p, ar, orow)
        path = out_dir / f"{sentence.id}.{ch}.csv"
        prompt.write_heatmap_csv(path, grid, sentence.words)
        written.append(path.name)
    print(f"wrote {', '.join(written)} in {out_dir}")
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gridaste", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--data", required=True, help="dataset directory with <split>.txt files")
        p.add_argument("--config", help="JSON config file; flags take precedence")
        p.add_argument("--encoder", choices=("tiny", "frozen"))
        p.add_argument("--embeddings", help="embedding store path (frozen mode)")
        p.add_argument("--template", choices=("full", "no-senti", "single", "none"))
        p.add_argument("--k", type=float)
        p.add_argument("--dim", type=int)
        p.add_argument("--tensor-width", dest="tensor_width", type=int)
        p.add_argument("--layers", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--max-len", dest="max_len", type=int)
        p.add_argument("--swap-axes", dest="swap_axes", action="store_const", const=True)
        p.add_argument("--topk-literal", dest="topk_literal", action="store_const", const=True)
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    t = sub.add_parser("train", help="train a model and write checkpoint + manifest")
    common(t)
    t.add_argument("--alpha", type=float)
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--optimizer", choices=("adam", "sgd"))
    t.add_argument("--max-negatives", dest="max_negatives", type=int)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint and write predictions")
    common(e)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--split", default="test", choices=("train", "dev", "test"))
    e.add_argument("--task", default="all", choices=("all", "triplet", "aesc", "aope"))
    e.set_defaults(func=cmd_eval)

    h = sub.add_parser("heatmap", help="write per-channel prompt attention CSVs")
    h.add_argument("sentence_id")
    common(h)
    h.add_argument("--checkpoint", required=True)
    h.add_argument("--split", default="train", choices=("train", "dev", "test"))
    h.set_defaults(func=cmd_heatmap)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError, ParseError, FileNotFoundError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return CONFIG_EXIT
    except NonFiniteLossError as e:
        print(f"error: {e}", file=sys.stderr)
        return LOSS_EXIT


if __name__ == "__main__":
    sys.exit(main())

"""Scaled-down empirical studies: subset overfitting, the template ablation,
and the top-k coefficient sweep.

These drive the property checks in the test suite and are also usable from
scripts; every run is seeded and returns plain data.
"""

import time
from dataclasses import dataclass

from gridaste.corpus import DatasetSplit
from gridaste.encoder import build_vocab, make_template
from gridaste.metrics import triplet_metrics
from gridaste.model import Model, ModelConfig
from gridaste.train import TrainConfig, fit


def take_subset(split: DatasetSplit, n: int) -> DatasetSplit:
    sents = split.sentences[:n]
    return DatasetSplit(sentences=sents, gold={s.id: split.gold[s.id] for s in sents})


@dataclass
class OverfitResult:
    seed: int
    best_f1: float
    best_epoch: int
    epochs_run: int
    reached: bool


def overfit_run(
    subset: DatasetSplit,
    seed: int,
    template_mode: str = "full",
    dim: int = 64,
    tensor_width: int = 32,
    gcn_layers: int = 2,
    alpha: float = 0.5,
    k: float = 0.3,
    epochs: int = 300,
    target_f1: float | None = 0.90,
    batch_size: int = 4,
) -> tuple[OverfitResult, Model]:
    """Train on a subset and evaluate on that same subset.

    With target_f1 set, training stops as soon as the subset F1 reaches it.
    """
    cfg = ModelConfig(
        dim=dim,
        tensor_width=tensor_width,
        gcn_layers=gcn_layers,
        template_mode=template_mode,
        k=k,
        seed=seed,
    )
    vocab = build_vocab(subset.sentences, make_template(template_mode))
    model = Model(cfg, vocab=vocab)
    tcfg = TrainConfig(epochs=epochs, batch_size=batch_size, alpha=alpha, k=k, seed=seed)
    res = fit(model, subset, subset, tcfg, early_stop_f1=target_f1)
    reached = target_f1 is not None and res.best_f1 >= target_f1
    return (
        OverfitResult(
            seed=seed,
            best_f1=res.best_f1,
            best_epoch=res.best_epoch,
            epochs_run=res.manifest["epochs_run"],
            reached=reached,
        ),
        model,
    )


def seed_sweep(subset: DatasetSplit, seeds, **kw) -> list[OverfitResult]:
    return [overfit_run(subset, seed, **kw)[0] for seed in seeds]


def decode_f1_at_k(model: Model, split: DatasetSplit, k: float) -> float:
    """Triplet F1 with the decoder's pruning coefficient overridden."""
    saved = model.cfg.k
    model.cfg.k = k
    try:
        pred = model.predict(split.sentences)
    finally:
        model.cfg.k = saved
    return triplet_metrics(pred, split.gold_sets()).f1


def k_sweep(model: Model, split: DatasetSplit, ks) -> dict[float, float]:
    return {k: decode_f1_at_k(model, split, k) for k in ks}


def mean_inference_ms(model: Model, sentences, reps: int = 3) -> float:
    for s in sentences[: min(3, len(sentences))]:
        model.decode(s)
    t0 = time.perf_counter()
    for _ in range(reps):
        for s in sentences:
            model.decode(s)
    return (time.perf_counter() - t0) / (reps * len(sentences)) * 1000.0

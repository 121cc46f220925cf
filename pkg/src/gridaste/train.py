"""Joint training: boundary BCE over all table cells, sampled-region
sentiment cross entropy, alpha-weighted sum, Adam or SGD.

Negative regions come from the detector's own top-k candidates, ranked by
the product of their start and end scores, capped at max_negatives.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from gridaste import autodiff as ad
from gridaste import decoder, metrics
from gridaste.autodiff import Parameter, Tensor
from gridaste.corpus import SENTIMENT_TO_CLASS, DatasetSplit, GoldTables, Sentence
from gridaste.errors import ConfigError, NonFiniteLossError
from gridaste.model import Model
from gridaste.store import EmbeddingStore

EPS = 1e-7


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 4
    lr: float | None = None
    alpha: float = 0.5
    k: float = 0.3
    seed: int = 0
    max_negatives: int = 24
    optimizer: str = "adam"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    def resolved_lr(self, encoder_mode: str) -> float:
        if self.lr is not None:
            return self.lr
        return 1e-3 if encoder_mode == "tiny" else 3e-5


@dataclass
class LossParts:
    ls: float
    le: float
    l2: float
    total: float


# ---------------------------------------------------------------- losses


def binary_cell_loss(s: Tensor, y: np.ndarray) -> Tensor:
    """BCE summed over every cell, probabilities clamped away from 0 and 1."""
    s = ad.clip(s, EPS, 1.0 - EPS)
    yt = Tensor(y.astype(np.float64))
    pos = ad.mul(yt, ad.log(s))
    neg = ad.mul(ad.sub(Tensor(1.0), yt), ad.log(ad.sub(Tensor(1.0), s)))
    return ad.neg(ad.sum_all(ad.add(pos, neg)))


def sample_regions(
    tables: GoldTables,
    ss: np.ndarray,
    se: np.ndarray,
    k: float,
    max_negatives: int,
    literal: bool = False,
) -> tuple[list[tuple[int, int, int, int]], np.ndarray]:
    """Gold regions with their class labels plus top-scoring non-gold
    candidates labeled as padding.

    Negatives are ranked by SS[a,b] * SE[c,d], ties broken by region
    coordinates, and capped at max_negatives.
    """
    regions = [(a, b, c, d) for a, b, c, d, _ in tables.regions]
    labels = [SENTIMENT_TO_CLASS[sent] for *_, sent in tables.regions]
    gold = set(regions)

    starts = decoder.topk_candidates(ss, k, literal)
    ends = decoder.topk_candidates(se, k, literal)
    cands = [r for r in decoder.candidate_regions(starts, ends) if r not in gold]
    cands.sort(key=lambda r: (-(ss[r[0], r[1]] * se[r[2], r[3]]), r))
    for r in cands[:max_negatives]:
        regions.append(r)
        labels.append(0)
    return regions, np.array(labels, dtype=np.int64)


def region_class_loss(
    cp: Tensor,
    regions: list[tuple[int, int, int, int]],
    labels: np.ndarray,
    head_w: Tensor,
    head_b: Tensor,
) -> Tensor:
    if not regions:
        return Tensor(0.0)
    logits = decoder.region_logits(cp, regions, head_w, head_b)
    return ad.sum_all(ad.cross_entropy_rows(logits, labels))


def sentence_loss(model: Model, sentence: Sentence, tables: GoldTables, cfg: TrainConfig) -> tuple[Tensor, LossParts]:
    out = model.forward_tables(sentence)
    ls = binary_cell_loss(out.ss, tables.ys)
    le = binary_cell_loss(out.se, tables.ye)
    regions, labels = sample_regions(
        tables, out.ss.data, out.se.data, cfg.k, cfg.max_negatives, model.cfg.topk_literal
    )
    l2 = region_class_loss(cp=out.cp, regions=regions, labels=labels,
                           head_w=model.region_w.tensor, head_b=model.region_b.tensor)
    total = ad.add(ad.scale(ad.add(ls, le), cfg.alpha), ad.scale(l2, 1.0 - cfg.alpha))
    parts = LossParts(float(ls.data), float(le.data), float(l2.data), float(total.data))
    if not np.isfinite(parts.total):
        raise NonFiniteLossError(sentence.id, parts.total)
    return total, parts


# ------------------------------------------------------------- optimizers


class SGD:
    def __init__(self, params: list[Parameter], lr: float):
        self.params = params
        self.lr = lr

    def step(self) -> None:
        if self.lr == 0.0:
            return
        for p in self.params:
            if p.grad is not None:
                p.tensor.data -= self.lr * p.grad


class Adam:
    def __init__(self, params: list[Parameter], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                continue
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            if self.lr == 0.0:
                continue
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            p.tensor.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def make_optimizer(model: Model, cfg: TrainConfig):
    lr = cfg.resolved_lr(model.cfg.encoder_mode)
    cls = Adam if cfg.optimizer == "adam" else SGD
    return cls(model.parameters(), lr)


# ----------------------------------------------------------------- steps


def train_step(
    model: Model,
    batch: list[tuple[Sentence, GoldTables]],
    optimizer,
    cfg: TrainConfig,
) -> LossParts:
    """One optimizer update on the mean sentence loss over the batch."""
    totals = []
    ls = le = l2 = 0.0
    for sentence, tables in batch:
        loss, parts = sentence_loss(model, sentence, tables, cfg)
        totals.append(loss)
        ls += parts.ls
        le += parts.le
        l2 += parts.l2
    mean = totals[0]
    for t in totals[1:]:
        mean = ad.add(mean, t)
    mean = ad.scale(mean, 1.0 / len(totals))
    model.zero_grad()
    ad.backward(mean)
    optimizer.step()
    model.zero_grad()
    k = len(batch)
    return LossParts(ls / k, le / k, l2 / k, float(mean.data))


def evaluate(model: Model, split: DatasetSplit) -> metrics.MetricReport:
    pred = model.predict(split.sentences)
    return metrics.triplet_metrics(pred, split.gold_sets())


# ------------------------------------------------------------------- fit


@dataclass
class FitResult:
    best_epoch: int
    best_f1: float
    best_params: dict[str, np.ndarray]
    manifest: dict = field(repr=False, default_factory=dict)


def fit(
    model: Model,
    train_split: DatasetSplit,
    dev_split: DatasetSplit,
    cfg: TrainConfig,
    out_dir=None,
    extra_manifest: dict | None = None,
    early_stop_f1: float | None = None,
    log=None,
    dev_store: EmbeddingStore | None = None,
) -> FitResult:
    """Epoch loop with shuffled batches, per-epoch dev evaluation, and
    best-F1 checkpoint selection (first epoch wins ties).

    Frozen models carry the training split's store; sentence ids restart
    per split file, so dev sentences need their own store. Pass it as
    dev_store and it is swapped in around each dev evaluation.

    When out_dir is given, writes best.ckpt and manifest.json there. The
    manifest records the full config, the template text, and the per-epoch
    loss parts and dev metrics.
    """
    if cfg.epochs < 1:
        raise ConfigError("epochs must be >= 1")
    if not train_split.sentences:
        raise ConfigError("training split is empty")
    if not dev_split.sentences:
        raise ConfigError("dev split is empty")

    rng = np.random.default_rng(cfg.seed)
    optimizer = make_optimizer(model, cfg)
    pairs = [(s, train_split.tables(s.id)) for s in train_split.sentences]

    best_epoch = -1
    best_f1 = -1.0
    best_params: dict[str, np.ndarray] = {}
    history = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(pairs))
        sums = np.zeros(4)
        n_batches = 0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [pairs[i] for i in order[lo : lo + cfg.batch_size]]
            parts = train_step(model, batch, optimizer, cfg)
            sums += (parts.ls, parts.le, parts.l2, parts.total)
            n_batches += 1
        mean = sums / n_batches
        if dev_store is not None:
            train_store = model.store
            model.store = dev_store
            try:
                report = evaluate(model, dev_split)
            finally:
                model.store = train_store
        else:
            report = evaluate(model, dev_split)
        row = {
            "epoch": epoch,
            "loss_start": float(mean[0]),
            "loss_end": float(mean[1]),
            "loss_sentiment": float(mean[2]),
            "loss": float(mean[3]),
            "dev_precision": report.precision,
            "dev_recall": report.recall,
            "dev_f1": report.f1,
        }
        history.append(row)
        if log:
            log(f"epoch {epoch:3d}  loss {mean[3]:.4f}  dev F1 {report.f1:.4f}")
        if report.f1 > best_f1:
            best_f1 = report.f1
            best_epoch = epoch
            best_params = model.param_arrays()
        if early_stop_f1 is not None and report.f1 >= early_stop_f1:
            break

    model.load_arrays(best_params)
    manifest = {
        "model_config": asdict(model.cfg),
        "train_config": asdict(cfg),
        "learning_rate": optimizer.lr,
        "template_text": model.template.text,
        "num_parameters": model.num_parameters(),
        "epochs_run": len(history),
        "selected_epoch": best_epoch,
        "best_dev_f1": best_f1,
        "history": history,
    }
    if model.encoder is not None:
        manifest["vocab_size"] = len(model.encoder.vocab.words)
    if extra_manifest:
        manifest.update(extra_manifest)

    if out_dir is not None:
        from pathlib import Path

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        model.save(out / "best.ckpt")
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))

    return FitResult(best_epoch=best_epoch, best_f1=best_f1, best_params=best_params, manifest=manifest)

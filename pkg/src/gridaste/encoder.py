"""Sentence encoders: a small trainable transformer and a frozen-store reader.

Both produce the same interface: per-word hidden states H (n x d) and the
mask-slot rows tau, ordered [pos_a, pos_o, neg_a, neg_o, neu_a, neu_o] in the
six-slot modes.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from gridaste import autodiff as ad
from gridaste.autodiff import Parameter, Tensor
from gridaste.corpus import Sentence
from gridaste.errors import ConfigError, ValidationError
from gridaste.store import EmbeddingStore

PAD, UNK, MASK = "<pad>", "<unk>", "<mask>"

TEMPLATE_FULL = (
    "aspect is [MASK] , opinion is [MASK] , sentiment is positive . "
    "aspect is [MASK] , opinion is [MASK] , sentiment is negative . "
    "aspect is [MASK] , opinion is [MASK] , sentiment is neutral ."
)
TEMPLATE_SINGLE = "aspect [MASK] , opinion [MASK] ."
_SENTIMENT_WORDS = ("positive", "negative", "neutral")

TEMPLATE_MODES = ("full", "no-senti", "single", "none")
SLOTS_PER_MODE = {"full": 6, "no-senti": 6, "single": 2, "none": 0}


@dataclass(frozen=True)
class PromptTemplate:
    mode: str
    text: str
    tokens: tuple[str, ...]

    @property
    def slot_count(self) -> int:
        return sum(1 for t in self.tokens if t == MASK)


def make_template(mode: str, text: str | None = None) -> PromptTemplate:
    """Build the prompt for a mode; a custom text must keep the slot arity."""
    if mode not in TEMPLATE_MODES:
        raise ConfigError(f"template mode must be one of {TEMPLATE_MODES}, got {mode!r}")
    if mode == "none":
        if text:
            raise ConfigError("template mode 'none' accepts no template text")
        return PromptTemplate(mode=mode, text="", tokens=())
    if text is None:
        if mode == "single":
            text = TEMPLATE_SINGLE
        elif mode == "no-senti":
            words = [w for w in TEMPLATE_FULL.split(" ") if w not in _SENTIMENT_WORDS]
            text = " ".join(words)
        else:
            text = TEMPLATE_FULL
    tokens = tuple(MASK if t == "[MASK]" else t for t in text.split(" ") if t)
    slots = sum(1 for t in tokens if t == MASK)
    if slots != SLOTS_PER_MODE[mode]:
        raise ConfigError(
            f"template mode {mode!r} needs {SLOTS_PER_MODE[mode]} [MASK] slots, text has {slots}"
        )
    if mode == "no-senti" and any(w in _SENTIMENT_WORDS for w in tokens):
        raise ConfigError("no-senti template must not contain sentiment words")
    return PromptTemplate(mode=mode, text=text, tokens=tokens)


@dataclass
class Vocab:
    words: tuple[str, ...]
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def id_of(self, word: str) -> int:
        return self.index.get(word, self.index[UNK])


def build_vocab(sentences: list[Sentence], template: PromptTemplate) -> Vocab:
    """Specials first, then sorted unique training words plus template words."""
    seen = set()
    for s in sentences:
        seen.update(s.words)
    seen.update(t for t in template.tokens if t != MASK)
    return Vocab(words=(PAD, UNK, MASK, *sorted(seen)))


@dataclass
class EncoderOutput:
    hidden: Tensor
    tau: Tensor


@dataclass
class EncoderConfig:
    dim: int = 64
    layers: int = 2
    heads: int = 4
    ffn_mult: int = 4
    max_positions: int = 160
    init_std: float = 0.02

    def __post_init__(self):
        if self.dim % self.heads != 0:
            raise ConfigError(f"dim {self.dim} not divisible by heads {self.heads}")


class TinyEncoder:
    """Post-LN transformer over sentence tokens followed by template tokens.

    H is read off the sentence positions, tau off the mask-slot positions.
    Deterministic for fixed parameters; words outside the vocabulary map to
    the unknown symbol.
    """

    def __init__(self, vocab: Vocab, template: PromptTemplate, cfg: EncoderConfig, rng):
        self.vocab = vocab
        self.template = template
        self.cfg = cfg
        self.params: list[Parameter] = []
        std = cfg.init_std
        d = cfg.dim

        def p(name, *shape):
            par = Parameter(f"enc.{name}", rng.normal(0.0, std, size=shape))
            self.params.append(par)
            return par

        self.tok_emb = p("tok_emb", len(vocab), d)
        self.pos_emb = p("pos_emb", cfg.max_positions, d)
        self.blocks = []
        for i in range(cfg.layers):
            blk = {
                "wq": p(f"l{i}.wq", d, d),
                "bq": p(f"l{i}.bq", d),
                "wk": p(f"l{i}.wk", d, d),
                "bk": p(f"l{i}.bk", d),
                "wv": p(f"l{i}.wv", d, d),
                "bv": p(f"l{i}.bv", d),
                "wo": p(f"l{i}.wo", d, d),
                "bo": p(f"l{i}.bo", d),
                "ln1_g": Parameter(f"enc.l{i}.ln1_g", np.ones(d)),
                "ln1_b": Parameter(f"enc.l{i}.ln1_b", np.zeros(d)),
                "w1": p(f"l{i}.ffn_w1", d, cfg.ffn_mult * d),
                "b1": p(f"l{i}.ffn_b1", cfg.ffn_mult * d),
                "w2": p(f"l{i}.ffn_w2", cfg.ffn_mult * d, d),
                "b2": p(f"l{i}.ffn_b2", d),
                "ln2_g": Parameter(f"enc.l{i}.ln2_g", np.ones(d)),
                "ln2_b": Parameter(f"enc.l{i}.ln2_b", np.zeros(d)),
            }
            self.params.extend(
                blk[k] for k in ("ln1_g", "ln1_b", "ln2_g", "ln2_b")
            )
            self.blocks.append(blk)

    def parameters(self) -> list[Parameter]:
        return list(self.params)

    def _attention(self, x: Tensor, blk: dict, m: int) -> Tensor:
        d, heads = self.cfg.dim, self.cfg.heads
        dh = d // heads

        def split_heads(t: Tensor) -> Tensor:
            return ad.transpose(ad.reshape(t, (m, heads, dh)), (1, 0, 2))

        q = split_heads(ad.add(ad.matmul(x, blk["wq"].tensor), blk["bq"].tensor))
        k = split_heads(ad.add(ad.matmul(x, blk["wk"].tensor), blk["bk"].tensor))
        v = split_heads(ad.add(ad.matmul(x, blk["wv"].tensor), blk["bv"].tensor))
        scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(dh))
        mixed = ad.matmul(ad.softmax_rows(scores), v)
        merged = ad.reshape(ad.transpose(mixed, (1, 0, 2)), (m, d))
        return ad.add(ad.matmul(merged, blk["wo"].tensor), blk["bo"].tensor)

    def encode(self, sentence: Sentence) -> EncoderOutput:
        words = list(sentence.words)
        tokens = words + list(self.template.tokens)
        m = len(tokens)
        if m > self.cfg.max_positions:
            raise ValidationError(
                f"sentence {sentence.id!r}: {m} tokens exceed the {self.cfg.max_positions} position table"
            )
        ids = np.array([self.vocab.id_of(t) for t in tokens], dtype=np.int64)
        x = ad.add(
            ad.gather_rows(self.tok_emb.tensor, ids),
            ad.gather_rows(self.pos_emb.tensor, np.arange(m, dtype=np.int64)),
        )
        for blk in self.blocks:
            x = ad.layer_norm(
                ad.add(x, self._attention(x, blk, m)), blk["ln1_g"].tensor, blk["ln1_b"].tensor
            )
            ffn = ad.add(ad.matmul(x, blk["w1"].tensor), blk["b1"].tensor)
            ffn = ad.add(ad.matmul(ad.relu(ffn), blk["w2"].tensor), blk["b2"].tensor)
            x = ad.layer_norm(ad.add(x, ffn), blk["ln2_g"].tensor, blk["ln2_b"].tensor)

        n = sentence.n
        hidden = ad.slice_rows(x, 0, n)
        slot_pos = np.array(
            [n + i for i, t in enumerate(self.template.tokens) if t == MASK], dtype=np.int64
        )
        tau = ad.gather_rows(x, slot_pos)
        return EncoderOutput(hidden=hidden, tau=tau)


def encode_frozen(sentence: Sentence, store: EmbeddingStore) -> EncoderOutput:
    """Look up precomputed H and tau; raises KeyError when the id is absent."""
    rec = store.get(sentence.id)
    if rec.hidden.shape[0] != sentence.n:
        raise ValidationError(
            f"store entry {sentence.id!r} has {rec.hidden.shape[0]} rows, sentence has {sentence.n} words"
        )
    return EncoderOutput(hidden=Tensor(rec.hidden), tau=Tensor(rec.tau))

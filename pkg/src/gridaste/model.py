"""Full model assembly: encoder -> prompt attention -> relation table ->
tri-channel grid GCN -> detection heads -> region classifier.

Template modes change the wiring: 'single' runs one channel sized d with two
prompt rows and no fusion; 'none' skips prompt and GCN entirely, decoding
straight off the relation table.
"""

from dataclasses import dataclass, field

import numpy as np

from gridaste import autodiff as ad
from gridaste import checkpoint, decoder, grid, prompt
from gridaste.autodiff import Parameter, Tensor
from gridaste.corpus import Sentence, Triplet
from gridaste.encoder import (
    EncoderConfig,
    EncoderOutput,
    TinyEncoder,
    Vocab,
    encode_frozen,
    make_template,
)
from gridaste.errors import ConfigError, ValidationError
from gridaste.store import EmbeddingStore


@dataclass
class ModelConfig:
    dim: int = 64
    tensor_width: int = 32
    gcn_layers: int = 2
    template_mode: str = "full"
    template_text: str | None = None
    encoder_mode: str = "tiny"
    enc_layers: int = 2
    enc_heads: int = 4
    max_positions: int = 160
    k: float = 0.3
    swap_axes: bool = False
    topk_literal: bool = False
    init_std: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.encoder_mode not in ("tiny", "frozen"):
            raise ConfigError(f"encoder mode must be tiny or frozen, got {self.encoder_mode!r}")
        if self.encoder_mode == "frozen" and self.template_mode == "single":
            raise ConfigError(
                "frozen embeddings always carry six mask-slot rows; the single template "
                "cannot be served from a store"
            )
        if not 0 < self.k <= 1:
            raise ConfigError(f"k must be in (0, 1], got {self.k}")
        if self.gcn_layers < 1:
            raise ConfigError("gcn_layers must be >= 1")


@dataclass
class ModelOutput:
    ss: Tensor
    se: Tensor
    cp: Tensor
    p: Tensor | None
    encoder: EncoderOutput = field(repr=False, default=None)


class Model:
    def __init__(
        self,
        cfg: ModelConfig,
        vocab: Vocab | None = None,
        store: EmbeddingStore | None = None,
    ):
        self.cfg = cfg
        self.template = make_template(cfg.template_mode, cfg.template_text)
        self.params: list[Parameter] = []
        rng = np.random.default_rng(cfg.seed)
        d, t = cfg.dim, cfg.tensor_width

        if cfg.encoder_mode == "tiny":
            if vocab is None:
                raise ConfigError("tiny encoder mode needs a vocabulary")
            enc_cfg = EncoderConfig(
                dim=d,
                layers=cfg.enc_layers,
                heads=cfg.enc_heads,
                max_positions=cfg.max_positions,
                init_std=cfg.init_std,
            )
            self.encoder = TinyEncoder(vocab, self.template, enc_cfg, rng)
            self.store = None
            self.params.extend(self.encoder.parameters())
        else:
            if store is None:
                raise ConfigError("frozen encoder mode needs an embedding store")
            if store.dim and store.dim != d:
                raise ValidationError(f"store width {store.dim} != configured dim {d}")
            self.encoder = None
            self.store = store

        std = cfg.init_std

        def p(name, *shape):
            par = Parameter(name, rng.normal(0.0, std, size=shape))
            self.params.append(par)
            return par

        def zeros(name, *shape):
            par = Parameter(name, np.zeros(shape))
            self.params.append(par)
            return par

        if cfg.template_mode == "none":
            self.channels = ()
        elif cfg.template_mode == "single":
            self.channels = ("single",)
        else:
            self.channels = ("pos", "neg", "neu")

        self.prompt_w = p("prompt.w", d, d) if self.channels else None
        self.table_w1 = p("table.w1", d, t, d)
        self.table_w2 = p("table.w2", d, 3 * d + t)

        self.gcn = {}
        for ch in self.channels:
            self.gcn[ch] = {
                "layers": [p(f"gcn.{ch}.l{i}.w", d, d) for i in range(cfg.gcn_layers)],
                "out_w": p(f"gcn.{ch}.out.w", d, d),
                "out_b": zeros(f"gcn.{ch}.out.b", d),
            }

        # fused width: three channels concatenate, single/none stay at d
        self.width = 3 * d if len(self.channels) == 3 else d
        self.ss_w = p("detect.start.w", 1, self.width)
        self.ss_b = zeros("detect.start.b", 1)
        self.se_w = p("detect.end.w", 1, self.width)
        self.se_b = zeros("detect.end.b", 1)
        self.region_w = p("region.w", 4, 3 * self.width)
        self.region_b = zeros("region.b", 4)

        names = [par.name for par in self.params]
        if len(names) != len(set(names)):
            raise ValidationError("duplicate parameter names in registry")

    # ------------------------------------------------------------- plumbing

    def parameters(self) -> list[Parameter]:
        return list(self.params)

    def num_parameters(self) -> int:
        return sum(par.data.size for par in self.params)

    def zero_grad(self) -> None:
        for par in self.params:
            par.zero_grad()

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {par.name: par.data.copy() for par in self.params}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        mine = {par.name: par for par in self.params}
        if set(arrays) != set(mine):
            extra = sorted(set(arrays) ^ set(mine))
            raise ValidationError(f"parameter names do not match the model: {extra[:5]}")
        for name, par in mine.items():
            if arrays[name].shape != par.data.shape:
                raise ValidationError(
                    f"parameter {name}: checkpoint shape {arrays[name].shape} != model {par.data.shape}"
                )
            par.data = arrays[name]

    def save(self, path) -> None:
        checkpoint.save_params(path, {par.name: par.data for par in self.params})

    def load(self, path) -> None:
        self.load_arrays(checkpoint.load_params(path))

    # -------------------------------------------------------------- forward

    def encode(self, sentence: Sentence) -> EncoderOutput:
        if self.encoder is not None:
            return self.encoder.encode(sentence)
        return encode_frozen(sentence, self.store)

    def forward_tables(self, sentence: Sentence) -> ModelOutput:
        enc = self.encode(sentence)
        c = grid.build_table(enc.hidden, self.table_w1.tensor, self.table_w2.tensor)

        if not self.channels:
            cp = c
            scores = None
        else:
            scores = prompt.attention_scores(enc.hidden, enc.tau, self.prompt_w.tensor)
            if self.cfg.template_mode == "single":
                wh, wv = grid.edge_weights(
                    scores, "single", swap_axes=self.cfg.swap_axes, single=True
                )
                g = self.gcn["single"]
                cp = grid.gcn_channel(
                    c, wh, wv, [w.tensor for w in g["layers"]], g["out_w"].tensor, g["out_b"].tensor
                )
            else:
                outs = []
                for ch in self.channels:
                    wh, wv = grid.edge_weights(scores, ch, swap_axes=self.cfg.swap_axes)
                    g = self.gcn[ch]
                    outs.append(
                        grid.gcn_channel(
                            c,
                            wh,
                            wv,
                            [w.tensor for w in g["layers"]],
                            g["out_w"].tensor,
                            g["out_b"].tensor,
                        )
                    )
                cp = grid.fuse_channels(*outs)

        ss, se = decoder.detect(
            cp, self.ss_w.tensor, self.ss_b.tensor, self.se_w.tensor, self.se_b.tensor
        )
        return ModelOutput(ss=ss, se=se, cp=cp, p=scores, encoder=enc)

    # --------------------------------------------------------------- decode

    def decode(self, sentence: Sentence) -> list[Triplet]:
        with ad.no_grad():
            out = self.forward_tables(sentence)
            starts = decoder.topk_candidates(out.ss.data, self.cfg.k, self.cfg.topk_literal)
            ends = decoder.topk_candidates(out.se.data, self.cfg.k, self.cfg.topk_literal)
            return decoder.classify_regions(
                out.cp, starts, ends, self.region_w.tensor, self.region_b.tensor
            )

    def predict(self, sentences: list[Sentence]) -> dict[str, set[Triplet]]:
        return {s.id: set(self.decode(s)) for s in sentences}

"""Core export pipeline.

For each dataset sentence: tokenize ``[CLS] sentence [SEP] template [SEP]``
at the word-piece level, keep the piece range of every word, run the model,
mean-pool each word's piece vectors from the last hidden layer, and read the
six mask-slot vectors off the template region. Records are written in the
PTGE0001 layout: magic, then per record id length (u32 LE), id bytes, n
(u32), d (u32), H as n*d float32 LE, tau as 6*d float32 LE.

Sentences whose piece sequence exceeds the model's position budget are
skipped with a warning and listed in a sidecar report. A word that yields
zero word pieces is a hard error naming the sentence.
"""

import json
import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"PTGE0001"
SLOT_COUNT = 6


class ExportError(Exception):
    """Configuration or data problem that aborts the export."""


class AlignmentError(ExportError):
    """A word could not be mapped to any word piece."""


@dataclass
class ExportRecord:
    sentence_id: str
    hidden: np.ndarray  # (n, d) float32
    tau: np.ndarray  # (6, d) float32


@dataclass
class ExportReport:
    exported: list[str] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)


# ------------------------------------------------------------- input files


def read_sentences(path) -> list[tuple[str, list[str]]]:
    """Parse the ``sentence####[triplets]`` grammar, keeping only the words.

    Ids follow the source line number so they match the consumer's parser;
    blank lines are skipped but still advance the count.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if "####" not in line:
                raise ExportError(f"{path}:{line_no}: missing '####' separator")
            text = line.rpartition("####")[0]
            words = text.split(" ")
            if text == "" or any(not w or w.split() != [w] for w in words):
                raise ExportError(f"{path}:{line_no}: words must be single-space separated")
            out.append((f"s{line_no:04d}", words))
    return out


def read_template(path) -> str:
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        raise ExportError(f"template file {path} is empty")
    return text


# -------------------------------------------------------------- alignment


def align_words(tokenizer, words: list[str], sentence_id: str):
    """Word pieces for the whole sentence plus each word's piece range."""
    pieces: list[str] = []
    spans: list[tuple[int, int]] = []
    for word in words:
        ps = tokenizer.tokenize(word)
        if not ps:
            raise AlignmentError(
                f"word {word!r} in sentence {sentence_id} produced no word pieces"
            )
        spans.append((len(pieces), len(pieces) + len(ps)))
        pieces.extend(ps)
    return pieces, spans


# ---------------------------------------------------------------- encoder


class MaskedLmEncoder:
    """Wraps a pretrained model + tokenizer for hidden-state extraction."""

    def __init__(self, model_name: str):
        import torch
        from transformers import AutoModel, AutoTokenizer

        self.torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModel.from_pretrained(model_name)
        self.model.eval()
        self.dim = int(self.model.config.hidden_size)

        budget = getattr(self.model.config, "max_position_embeddings", None)
        if budget is None or budget <= 0:
            budget = getattr(self.tokenizer, "model_max_length", 512)
        self.budget = int(budget)

    def template_pieces(self, template_text: str) -> tuple[list[str], list[int]]:
        pieces = self.tokenizer.tokenize(template_text)
        mask = self.tokenizer.mask_token
        positions = [i for i, p in enumerate(pieces) if p == mask]
        if len(positions) != SLOT_COUNT:
            raise ExportError(
                f"template must contain exactly {SLOT_COUNT} mask slots, found {len(positions)}"
            )
        return pieces, positions

    def encode(self, sentence_id: str, words: list[str], tpl_pieces, mask_positions):
        """H (n, d) and tau (6, d) as float32, or None when over budget."""
        sent_pieces, spans = align_words(self.tokenizer, words, sentence_id)
        tok = self.tokenizer
        tokens = (
            [tok.cls_token] + sent_pieces + [tok.sep_token] + list(tpl_pieces) + [tok.sep_token]
        )
        if len(tokens) > self.budget:
            return None, f"{len(tokens)} pieces exceed the position budget {self.budget}"

        ids = tok.convert_tokens_to_ids(tokens)
        with self.torch.no_grad():
            out = self.model(input_ids=self.torch.tensor([ids]))
        hidden = out.last_hidden_state[0].numpy().astype("<f4")

        h = np.stack([hidden[1 + s : 1 + e].mean(axis=0) for s, e in spans])
        tpl_base = 1 + len(sent_pieces) + 1
        tau = np.stack([hidden[tpl_base + p] for p in mask_positions])
        return (h, tau), None


# ----------------------------------------------------------------- writer


def write_store(path, records: list[ExportRecord]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for rec in records:
            h = np.ascontiguousarray(rec.hidden, dtype="<f4")
            tau = np.ascontiguousarray(rec.tau, dtype="<f4")
            n, d = h.shape
            if tau.shape != (SLOT_COUNT, d):
                raise ExportError(
                    f"record {rec.sentence_id!r}: tau shape {tau.shape} != ({SLOT_COUNT}, {d})"
                )
            ident = rec.sentence_id.encode("utf-8")
            fh.write(struct.pack("<I", len(ident)))
            fh.write(ident)
            fh.write(struct.pack("<II", n, d))
            fh.write(h.tobytes())
            fh.write(tau.tobytes())


# ------------------------------------------------------------ entry point


def export_split(data_path, template_path, model_name, out_path, warn=None) -> ExportReport:
    """Run the full export and write the store plus a sidecar report.

    The sidecar (``<out>.report.json``) lists every skipped sentence with
    its reason; re-running with the same model and inputs is bitwise
    reproducible.
    """
    if warn is None:
        warn = lambda msg: print(f"warning: {msg}", file=sys.stderr)  # noqa: E731

    sentences = read_sentences(data_path)
    template_text = read_template(template_path)
    enc = MaskedLmEncoder(model_name)
    tpl_pieces, mask_positions = enc.template_pieces(template_text)

    report = ExportReport()
    records = []
    for sentence_id, words in sentences:
        result, reason = enc.encode(sentence_id, words, tpl_pieces, mask_positions)
        if result is None:
            warn(f"skipping {sentence_id}: {reason}")
            report.skipped.append({"id": sentence_id, "reason": reason})
            continue
        h, tau = result
        records.append(ExportRecord(sentence_id, h, tau))
        report.exported.append(sentence_id)

    write_store(out_path, records)
    sidecar = {
        "model": str(model_name),
        "dim": enc.dim,
        "template": template_text,
        "exported": len(report.exported),
        "skipped": report.skipped,
    }
    Path(str(out_path) + ".report.json").write_text(json.dumps(sidecar, indent=2))
    return report

"""Frozen embedding store: per-sentence hidden states plus mask-slot rows.

Layout: magic ``PTGE0001``; then per record: id length (u32 LE), id bytes
(utf-8), n (u32 LE), d (u32 LE), H as n*d float32 LE in C order, tau as 6*d
float32 LE. Values convert to float64 on load. One file per dataset split.
"""

import struct
from dataclasses import dataclass

import numpy as np

from gridaste.errors import ValidationError

MAGIC = b"PTGE0001"
TAU_ROWS = 6


@dataclass
class EmbeddingRecord:
    sentence_id: str
    hidden: np.ndarray
    tau: np.ndarray


class EmbeddingStore:
    """Read-only map sentence id -> (H, tau)."""

    def __init__(self, records: dict[str, EmbeddingRecord], dim: int):
        self.records = records
        self.dim = dim

    def __contains__(self, sentence_id: str) -> bool:
        return sentence_id in self.records

    def __len__(self) -> int:
        return len(self.records)

    def get(self, sentence_id: str) -> EmbeddingRecord:
        if sentence_id not in self.records:
            raise KeyError(f"sentence {sentence_id!r} not in embedding store")
        return self.records[sentence_id]


def write_store(path, records: list[EmbeddingRecord]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for rec in records:
            h = np.ascontiguousarray(rec.hidden, dtype="<f4")
            tau = np.ascontiguousarray(rec.tau, dtype="<f4")
            n, d = h.shape
            if tau.shape != (TAU_ROWS, d):
                raise ValidationError(
                    f"record {rec.sentence_id!r}: tau shape {tau.shape} != ({TAU_ROWS}, {d})"
                )
            ident = rec.sentence_id.encode("utf-8")
            fh.write(struct.pack("<I", len(ident)))
            fh.write(ident)
            fh.write(struct.pack("<II", n, d))
            fh.write(h.tobytes())
            fh.write(tau.tobytes())


def read_store(path) -> EmbeddingStore:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise ValidationError(f"not an embedding store: bad magic in {path}")
    pos = len(MAGIC)

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise ValidationError(f"truncated embedding store {path}")
        piece = blob[pos : pos + n]
        pos += n
        return piece

    records: dict[str, EmbeddingRecord] = {}
    dim = 0
    while pos < len(blob):
        (id_len,) = struct.unpack("<I", take(4))
        sentence_id = take(id_len).decode("utf-8")
        n, d = struct.unpack("<II", take(8))
        hidden = np.frombuffer(take(4 * n * d), dtype="<f4").reshape(n, d).astype(np.float64)
        tau = np.frombuffer(take(4 * TAU_ROWS * d), dtype="<f4").reshape(TAU_ROWS, d)
        if sentence_id in records:
            raise ValidationError(f"duplicate record {sentence_id!r} in {path}")
        if dim and d != dim:
            raise ValidationError(f"mixed hidden sizes in {path}: {dim} then {d}")
        dim = d
        records[sentence_id] = EmbeddingRecord(sentence_id, hidden, tau.astype(np.float64))
    return EmbeddingStore(records, dim)

"""Span-annotated sentiment triplet corpus: parsing, gold tables, serialization.

Dataset files are UTF-8 text with one sentence per line:

    <words separated by single spaces>####<triplet list>

where the triplet list is a python-style literal such as
``[([1, 2], [4, 5], 'POS'), ([7], [9], 'NEG')]``. Index lists are 0-based,
contiguous and ascending; ``[]`` marks a sentence without triplets.
"""

from __future__ import annotations

import ast
import enum
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

DEFAULT_MAX_WORDS = 100


class Sentiment(enum.Enum):
    POS = "pos"
    NEG = "neg"
    NEU = "neu"

    @classmethod
    def from_tag(cls, tag: str) -> "Sentiment":
        try:
            return _TAG_TO_SENTIMENT[tag]
        except KeyError:
            raise ValidationError(f"unknown sentiment tag {tag!r}") from None

    def tag(self) -> str:
        return self.name


_TAG_TO_SENTIMENT = {"POS": Sentiment.POS, "NEG": Sentiment.NEG, "NEU": Sentiment.NEU}

# class indices used by the region classifier; 0 is the reject class
PADDING_CLASS = 0
SENTIMENT_TO_CLASS = {Sentiment.POS: 1, Sentiment.NEG: 2, Sentiment.NEU: 3}
CLASS_TO_SENTIMENT = {v: k for k, v in SENTIMENT_TO_CLASS.items()}


@dataclass(frozen=True)
class Triplet:
    """One (aspect span, opinion span, sentiment) annotation, spans inclusive."""

    aspect: tuple[int, int]
    opinion: tuple[int, int]
    sentiment: Sentiment

    def validate(self, n: int) -> None:
        for name, (lo, hi) in (("aspect", self.aspect), ("opinion", self.opinion)):
            if not (0 <= lo <= hi < n):
                raise ValidationError(
                    f"{name} span [{lo}, {hi}] out of range for sentence of {n} words"
                )


@dataclass(frozen=True)
class Sentence:
    id: str
    words: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.words)


@dataclass
class GoldTables:
    """Binary vertex tables plus the region list they were built from.

    ``ys[i][j] == 1`` iff (i, j) is the (aspect start, opinion start) cell of
    some gold triplet; ``ye`` marks (aspect end, opinion end) cells. Rows index
    aspect words, columns index opinion words. Regions are
    (a_start, o_start, a_end, o_end, sentiment) tuples, one per triplet.
    """

    ys: np.ndarray
    ye: np.ndarray
    regions: list[tuple[int, int, int, int, Sentiment]]


@dataclass
class DatasetSplit:
    sentences: list[Sentence]
    gold: dict[str, tuple[list[Triplet], GoldTables]]
    by_id: dict[str, Sentence] = field(default_factory=dict)

    def __post_init__(self):
        if not self.by_id:
            self.by_id = {s.id: s for s in self.sentences}

    def __len__(self) -> int:
        return len(self.sentences)

    def triplets(self, sentence_id: str) -> list[Triplet]:
        return self.gold[sentence_id][0]

    def tables(self, sentence_id: str) -> GoldTables:
        return self.gold[sentence_id][1]

    def gold_sets(self) -> dict[str, set[Triplet]]:
        return {s.id: set(self.gold[s.id][0]) for s in self.sentences}


def _span_from_indices(indices, what: str) -> tuple[int, int]:
    if not isinstance(indices, (list, tuple)) or len(indices) == 0:
        raise ValidationError(f"{what} span must be a non-empty index list, got {indices!r}")
    for v in indices:
        if not isinstance(v, int):
            raise ValidationError(f"{what} span contains a non-integer index: {indices!r}")
    expected = list(range(indices[0], indices[0] + len(indices)))
    if list(indices) != expected:
        raise ValidationError(f"{what} span indices must be a contiguous ascending run: {indices!r}")
    return indices[0], indices[-1]


def parse_line(line: str, line_no: int, sentence_id: str, max_words: int) -> tuple[Sentence, list[Triplet]]:
    if "####" not in line:
        raise ParseError("missing '####' separator", line_no)
    text, _, raw_triplets = line.rpartition("####")
    words = text.split(" ")
    if text == "" or any(w == "" or w.split() != [w] for w in words):
        raise ParseError("sentence words must be non-empty and single-space separated", line_no)
    if len(words) > max_words:
        raise ValidationError(
            f"line {line_no}: sentence has {len(words)} words, cap is {max_words}"
        )
    try:
        payload = ast.literal_eval(raw_triplets.strip())
    except (ValueError, SyntaxError) as exc:
        raise ParseError(f"cannot parse triplet list: {exc}", line_no) from None
    if not isinstance(payload, (list, tuple)):
        raise ParseError("triplet payload must be a list", line_no)

    sentence = Sentence(id=sentence_id, words=tuple(words))
    triplets = []
    for item in payload:
        if not isinstance(item, (list, tuple)) or len(item) != 3:
            raise ParseError(f"each triplet must be (aspect, opinion, tag), got {item!r}", line_no)
        aspect_ix, opinion_ix, tag = item
        try:
            triplet = Triplet(
                aspect=_span_from_indices(aspect_ix, "aspect"),
                opinion=_span_from_indices(opinion_ix, "opinion"),
                sentiment=Sentiment.from_tag(tag),
            )
            triplet.validate(sentence.n)
        except ValidationError as exc:
            raise ValidationError(f"line {line_no}: {exc}") from None
        triplets.append(triplet)
    return sentence, triplets


def build_gold_tables(sentence: Sentence, triplets: list[Triplet]) -> GoldTables:
    """Mark triplet vertex cells; overlapping vertices OR together."""
    n = sentence.n
    ys = np.zeros((n, n), dtype=np.uint8)
    ye = np.zeros((n, n), dtype=np.uint8)
    regions = []
    for t in triplets:
        t.validate(n)
        (a0, a1), (o0, o1) = t.aspect, t.opinion
        ys[a0, o0] = 1
        ye[a1, o1] = 1
        regions.append((a0, o0, a1, o1, t.sentiment))
    return GoldTables(ys=ys, ye=ye, regions=regions)


def parse_split(path, max_words: int = DEFAULT_MAX_WORDS) -> DatasetSplit:
    """Parse one dataset file into sentences, triplets, and gold tables."""
    sentences: list[Sentence] = []
    gold: dict[str, tuple[list[Triplet], GoldTables]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            sentence_id = f"s{line_no:04d}"
            sentence, triplets = parse_line(line, line_no, sentence_id, max_words)
            sentences.append(sentence)
            gold[sentence.id] = (triplets, build_gold_tables(sentence, triplets))
    return DatasetSplit(sentences=sentences, gold=gold)


def format_triplets(triplets: list[Triplet]) -> str:
    parts = []
    for t in triplets:
        a = list(range(t.aspect[0], t.aspect[1] + 1))
        o = list(range(t.opinion[0], t.opinion[1] + 1))
        parts.append(f"([{', '.join(map(str, a))}], [{', '.join(map(str, o))}], '{t.sentiment.tag()}')")
    return "[" + ", ".join(parts) + "]"


def format_line(sentence: Sentence, triplets: list[Triplet]) -> str:
    return " ".join(sentence.words) + "####" + format_triplets(triplets)


def serialize_split(split: DatasetSplit) -> str:
    return "\n".join(format_line(s, split.triplets(s.id)) for s in split.sentences) + "\n"


def file_digest(path) -> str:
    """Content hash of a dataset file, recorded in run manifests."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()

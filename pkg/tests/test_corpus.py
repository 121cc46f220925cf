"""Corpus parsing, gold-table construction, and round-trip tests."""

from pathlib import Path

import numpy as np
import pytest

from gridaste import corpus
from gridaste.corpus import (
    DatasetSplit,
    Sentence,
    Sentiment,
    Triplet,
    build_gold_tables,
    parse_line,
    parse_split,
)
from gridaste.errors import ParseError, ValidationError

DATA_DIR = Path(__file__).resolve().parents[1] / "data" / "mini_rest"

SALMON = (
    "the salmon sushi was ultra fresh but noodles were sticky"
    "####[([1, 2], [4, 5], 'POS'), ([7], [9], 'NEG')]"
)


class TestParseLine:
    def test_two_triplet_line(self):
        sentence, triplets = parse_line(SALMON, 1, "s0001", 100)
        assert sentence.n == 10
        assert sentence.words[1:3] == ("salmon", "sushi")
        assert triplets == [
            Triplet(aspect=(1, 2), opinion=(4, 5), sentiment=Sentiment.POS),
            Triplet(aspect=(7, 7), opinion=(9, 9), sentiment=Sentiment.NEG),
        ]

    def test_empty_triplet_list(self):
        sentence, triplets = parse_line("great food####[]", 3, "s0003", 100)
        assert sentence.n == 2
        assert triplets == []

    def test_out_of_range_index(self):
        with pytest.raises(ValidationError, match=r"\[5, 5\] out of range"):
            parse_line("bad####[([0], [5], 'NEG')]", 7, "s0007", 100)

    def test_missing_separator(self):
        with pytest.raises(ParseError) as err:
            parse_line("no separator here", 4, "s0004", 100)
        assert err.value.line_no == 4

    def test_malformed_payload(self):
        with pytest.raises(ParseError, match="cannot parse"):
            parse_line("ok words####[(", 9, "s0009", 100)

    def test_payload_not_a_list(self):
        with pytest.raises(ParseError, match="must be a list"):
            parse_line("ok words####3", 2, "s0002", 100)

    def test_unknown_sentiment_tag(self):
        with pytest.raises(ValidationError, match="sentiment"):
            parse_line("fine meal####[([0], [1], 'WOW')]", 5, "s0005", 100)

    def test_non_contiguous_span(self):
        with pytest.raises(ValidationError, match="contiguous"):
            parse_line("a b c d####[([0, 2], [3], 'POS')]", 6, "s0006", 100)

    def test_descending_span(self):
        with pytest.raises(ValidationError, match="contiguous"):
            parse_line("a b c d####[([1, 0], [3], 'POS')]", 6, "s0006", 100)

    def test_empty_span(self):
        with pytest.raises(ValidationError, match="non-empty"):
            parse_line("a b####[([], [1], 'POS')]", 8, "s0008", 100)

    def test_double_space_rejected(self):
        with pytest.raises(ParseError, match="single-space"):
            parse_line("two  spaces####[]", 1, "s0001", 100)

    def test_word_cap(self):
        long_line = " ".join(["w"] * 101) + "####[]"
        with pytest.raises(ValidationError, match="cap"):
            parse_line(long_line, 1, "s0001", 100)
        sentence, _ = parse_line(" ".join(["w"] * 100) + "####[]", 1, "s0001", 100)
        assert sentence.n == 100

    def test_separator_inside_payload_uses_last(self):
        # rpartition keeps any '####' inside the sentence text intact
        sentence, triplets = parse_line("odd #### token####[]", 1, "s0001", 100)
        assert sentence.words == ("odd", "####", "token")
        assert triplets == []


class TestGoldTables:
    def test_single_triplet_vertices(self):
        s = Sentence(id="x", words=tuple("abcdefghij"))
        t = [Triplet(aspect=(1, 2), opinion=(4, 5), sentiment=Sentiment.POS)]
        g = build_gold_tables(s, t)
        expect_s = np.zeros((10, 10), dtype=np.uint8)
        expect_s[1, 4] = 1
        expect_e = np.zeros((10, 10), dtype=np.uint8)
        expect_e[2, 5] = 1
        np.testing.assert_array_equal(g.ys, expect_s)
        np.testing.assert_array_equal(g.ye, expect_e)
        assert g.regions == [(1, 4, 2, 5, Sentiment.POS)]

    def test_zero_triplets(self):
        s = Sentence(id="x", words=("just", "words"))
        g = build_gold_tables(s, [])
        assert g.ys.sum() == 0 and g.ye.sum() == 0
        assert g.regions == []

    def test_shared_aspect_marks_both_cells(self):
        s = Sentence(id="x", words=tuple("abcdefghij"))
        t = [
            Triplet(aspect=(7, 7), opinion=(9, 9), sentiment=Sentiment.NEG),
            Triplet(aspect=(7, 7), opinion=(3, 3), sentiment=Sentiment.NEG),
        ]
        g = build_gold_tables(s, t)
        assert g.ys[7, 9] == 1 and g.ys[7, 3] == 1
        assert g.ys.sum() == 2
        assert len(g.regions) == 2

    def test_shared_vertex_cell_is_binary(self):
        # two triplets with identical start vertex: cell stays 1, not 2
        s = Sentence(id="x", words=tuple("abcdef"))
        t = [
            Triplet(aspect=(1, 1), opinion=(3, 3), sentiment=Sentiment.POS),
            Triplet(aspect=(1, 2), opinion=(3, 4), sentiment=Sentiment.POS),
        ]
        g = build_gold_tables(s, t)
        assert g.ys[1, 3] == 1
        assert g.ys.sum() == 1
        assert g.ye.sum() == 2

    def test_vertex_ordering_invariant(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = int(rng.integers(1, 12))
            s = Sentence(id="x", words=tuple(f"w{i}" for i in range(n)))
            triplets = []
            for _ in range(int(rng.integers(0, 4))):
                a0 = int(rng.integers(0, n))
                a1 = int(rng.integers(a0, n))
                o0 = int(rng.integers(0, n))
                o1 = int(rng.integers(o0, n))
                triplets.append(
                    Triplet(aspect=(a0, a1), opinion=(o0, o1), sentiment=Sentiment.NEU)
                )
            g = build_gold_tables(s, triplets)
            for a0, o0, a1, o1, _sent in g.regions:
                assert a0 <= a1 and o0 <= o1
            distinct_s = {(r[0], r[1]) for r in g.regions}
            distinct_e = {(r[2], r[3]) for r in g.regions}
            assert g.ys.sum() == len(distinct_s) <= len(triplets)
            assert g.ye.sum() == len(distinct_e) <= len(triplets)


def _random_split(rng: np.random.default_rng, n_sentences: int) -> DatasetSplit:
    vocab = ["the", "food", "was", "great", "awful", "plain", "service", "slow", "nice", "crew"]
    sentences = []
    gold = {}
    for k in range(n_sentences):
        n = int(rng.integers(1, 9))
        words = tuple(vocab[int(rng.integers(0, len(vocab)))] for _ in range(n))
        s = Sentence(id=f"s{k + 1:04d}", words=words)
        triplets = []
        for _ in range(int(rng.integers(0, 3))):
            a0 = int(rng.integers(0, n))
            a1 = int(rng.integers(a0, min(n, a0 + 3)))
            o0 = int(rng.integers(0, n))
            o1 = int(rng.integers(o0, min(n, o0 + 3)))
            sent = [Sentiment.POS, Sentiment.NEG, Sentiment.NEU][int(rng.integers(0, 3))]
            triplets.append(Triplet(aspect=(a0, a1), opinion=(o0, o1), sentiment=sent))
        sentences.append(s)
        gold[s.id] = (triplets, build_gold_tables(s, triplets))
    return DatasetSplit(sentences=sentences, gold=gold)


class TestRoundTrip:
    def test_random_splits_round_trip(self, tmp_path):
        rng = np.random.default_rng(2024)
        for trial in range(20):
            split = _random_split(rng, int(rng.integers(1, 15)))
            path = tmp_path / f"trial{trial}.txt"
            path.write_text(corpus.serialize_split(split), encoding="utf-8")
            back = parse_split(path)
            assert [s.words for s in back.sentences] == [s.words for s in split.sentences]
            for s in split.sentences:
                assert back.triplets(s.id) == split.triplets(s.id)

    @pytest.mark.parametrize("name", ["train.txt", "dev.txt", "test.txt"])
    def test_bundled_files_round_trip(self, name, tmp_path):
        split = parse_split(DATA_DIR / name)
        text = corpus.serialize_split(split)
        copy = tmp_path / name
        copy.write_text(text, encoding="utf-8")
        again = parse_split(copy)
        assert corpus.serialize_split(again) == text
        for s in split.sentences:
            assert again.triplets(s.id) == split.triplets(s.id)
            np.testing.assert_array_equal(again.tables(s.id).ys, split.tables(s.id).ys)
            np.testing.assert_array_equal(again.tables(s.id).ye, split.tables(s.id).ye)


class TestBundledData:
    def test_split_sizes(self):
        assert len(parse_split(DATA_DIR / "train.txt")) == 48
        assert len(parse_split(DATA_DIR / "dev.txt")) == 12
        assert len(parse_split(DATA_DIR / "test.txt")) == 12

    def test_ids_follow_line_numbers(self):
        split = parse_split(DATA_DIR / "dev.txt")
        assert split.sentences[0].id == "s0001"
        assert split.sentences[-1].id == "s0012"
        assert split.by_id["s0002"].words[0] == "slow"

    def test_every_sentence_has_gold_entry(self):
        for name in ("train.txt", "dev.txt", "test.txt"):
            split = parse_split(DATA_DIR / name)
            for s in split.sentences:
                assert s.id in split.gold
                for t in split.triplets(s.id):
                    t.validate(s.n)

    def test_all_sentiments_present_in_train(self):
        split = parse_split(DATA_DIR / "train.txt")
        seen = {t.sentiment for s in split.sentences for t in split.triplets(s.id)}
        assert seen == {Sentiment.POS, Sentiment.NEG, Sentiment.NEU}

    def test_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "gaps.txt"
        p.write_text("a b####[]\n\n\nc####[([0], [0], 'NEU')]\n", encoding="utf-8")
        split = parse_split(p)
        assert len(split) == 2
        # ids keep the file line number, so the gap shows in the id
        assert [s.id for s in split.sentences] == ["s0001", "s0004"]

    def test_file_digest_stable(self, tmp_path):
        p = tmp_path / "d.txt"
        p.write_text("a####[]\n", encoding="utf-8")
        d1 = corpus.file_digest(p)
        assert len(d1) == 64 and d1 == corpus.file_digest(p)
        p.write_text("b####[]\n", encoding="utf-8")
        assert corpus.file_digest(p) != d1


class TestSentimentMapping:
    def test_tags_round_trip(self):
        for tag in ("POS", "NEG", "NEU"):
            assert Sentiment.from_tag(tag).tag() == tag

    def test_class_codes(self):
        assert corpus.PADDING_CLASS == 0
        assert corpus.SENTIMENT_TO_CLASS[Sentiment.POS] == 1
        assert corpus.SENTIMENT_TO_CLASS[Sentiment.NEG] == 2
        assert corpus.SENTIMENT_TO_CLASS[Sentiment.NEU] == 3
        for code, sent in corpus.CLASS_TO_SENTIMENT.items():
            assert corpus.SENTIMENT_TO_CLASS[sent] == code

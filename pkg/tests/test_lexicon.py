"""Lexicon loading, trie span matching, tag decoration, replacement probability."""

import math

import numpy as np
import pytest

from sanseg.errors import SansegError
from sanseg.lexicon import (
    Lexicon,
    MatchedSpan,
    build_freq_table,
    load_lexicon,
    match_spans,
    replacement_probability,
    span_tag,
)

from corpora import sentences_from
from oracles import brute_match


class TestLoadLexicon:
    def test_basic(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("AB\tNR\nCD\tNN\n", encoding="utf-8")
        lex = load_lexicon(path)
        assert len(lex) == 2
        assert lex.pos_tags_t == ["NN", "NR"]
        assert len(lex.pos_tags_tb) == 8

    def test_decorated_inventory_is_pos_cross_marks(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("AB\tNR\n", encoding="utf-8")
        lex = load_lexicon(path)
        assert lex.pos_tags_tb == ["NR_b", "NR_m", "NR_e", "NR_s"]

    def test_duplicates_keep_first_and_count(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("AB\tNR\nAB\tNN\n", encoding="utf-8")
        lex = load_lexicon(path)
        assert lex.entries == {"AB": "NR"}
        assert lex.duplicate_count == 1

    def test_missing_tab_reports_line(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("AB\tNR\nnope\n", encoding="utf-8")
        with pytest.raises(SansegError, match="line 2"):
            load_lexicon(path)

    def test_empty_word_reports_line(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("\tNR\n", encoding="utf-8")
        with pytest.raises(SansegError, match="line 1"):
            load_lexicon(path)

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("# header\n\nAB\tNR\n  # note\n", encoding="utf-8")
        assert len(load_lexicon(path)) == 1

    def test_empty_file_is_valid(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("", encoding="utf-8")
        lex = load_lexicon(path)
        assert len(lex) == 0
        assert match_spans("abc", lex) == [[], [], []]


class TestMatchSpans:
    def test_spec_example(self):
        lex = Lexicon({"ab": "NR", "abc": "NN", "cd": "VV"})
        per_pos = match_spans("abcd", lex, max_len=4)
        at2 = {(s.begin, s.end, s.word) for s in per_pos[2]}
        assert at2 == {(0, 2, "abc"), (2, 3, "cd")}

    def test_empty_lexicon(self):
        per_pos = match_spans("abcd", Lexicon({}))
        assert all(spans == [] for spans in per_pos)

    def test_covering_positions(self):
        lex = Lexicon({"ab": "NR"})
        per_pos = match_spans("ab", lex)
        for i in (0, 1):
            assert [(s.begin, s.end) for s in per_pos[i]] == [(0, 1)]

    def test_max_len_cap(self):
        lex = Lexicon({"abcde": "NR", "ab": "NN"}, max_word_len=5)
        per_pos = match_spans("abcde", lex, max_len=4)
        words = {s.word for spans in per_pos for s in spans}
        assert words == {"ab"}

    def test_ordering_by_begin_end(self):
        lex = Lexicon({"ab": "X", "b": "Y", "bc": "Z"})
        per_pos = match_spans("abc", lex)
        assert [(s.begin, s.end) for s in per_pos[1]] == [(0, 1), (1, 1), (1, 2)]

    def test_matches_brute_force_fuzz(self):
        rng = np.random.Generator(np.random.PCG64(99))
        alphabet = "abcde"
        for _ in range(300):
            n = int(rng.integers(1, 21))
            chars = "".join(rng.choice(list(alphabet), size=n))
            entries = {}
            for _ in range(int(rng.integers(0, 51))):
                wlen = int(rng.integers(1, 5))
                word = "".join(rng.choice(list(alphabet), size=wlen))
                entries.setdefault(word, "NR")
            lex = Lexicon(entries)
            got = match_spans(chars, lex, max_len=4)
            expected = brute_match(chars, entries, max_len=4)
            got_flat = [[(s.begin, s.end, s.word, s.pos) for s in spans] for spans in got]
            assert got_flat == expected

    def test_every_span_word_in_lexicon(self):
        lex = Lexicon({"ab": "NR", "bc": "NN"})
        for spans in match_spans("abcabc", lex):
            for s in spans:
                assert lex.lookup(s.word) == s.pos

    def test_max_len_validated(self):
        with pytest.raises(SansegError):
            match_spans("ab", Lexicon({"a": "X"}), max_len=0)


class TestSpanTag:
    def span(self, b, e):
        word = "xyzw"[b : e + 1]
        return MatchedSpan(b, e, word, "NR")

    def test_middle_of_three(self):
        assert span_tag(self.span(0, 2), 1, "t_b") == "NR_m"

    def test_plain_mode_is_identity(self):
        for i in range(3):
            assert span_tag(self.span(0, 2), i, "t") == "NR"

    def test_single_char(self):
        assert span_tag(self.span(1, 1), 1, "t_b") == "NR_s"

    def test_begin_and_end(self):
        assert span_tag(self.span(0, 2), 0, "t_b") == "NR_b"
        assert span_tag(self.span(0, 2), 2, "t_b") == "NR_e"

    def test_outside_position_rejected(self):
        with pytest.raises(SansegError):
            span_tag(self.span(0, 2), 3, "t")

    def test_unknown_mode_rejected(self):
        with pytest.raises(SansegError):
            span_tag(self.span(0, 1), 0, "plain")

    def test_tb_partitions_multichar_span(self):
        rng = np.random.Generator(np.random.PCG64(5))
        for _ in range(50):
            b = int(rng.integers(0, 3))
            e = b + int(rng.integers(1, 4))
            span = MatchedSpan(b, e, "x" * (e - b + 1), "NN")
            marks = [span_tag(span, i, "t_b").rsplit("_", 1)[1] for i in range(b, e + 1)]
            assert marks[0] == "b"
            assert marks[-1] == "e"
            assert all(m == "m" for m in marks[1:-1])


class TestReplacementProbability:
    def test_direct_formula(self):
        assert replacement_probability(4, 1.0) == pytest.approx(0.5)
        assert replacement_probability(100, 1.0) == pytest.approx(0.1)

    def test_cap_at_one(self):
        assert replacement_probability(1, 10.0) == 1.0
        assert replacement_probability(10, 10.0) == 1.0

    def test_zero_freq_rejected(self):
        with pytest.raises(SansegError):
            replacement_probability(0, 1.0)

    def test_monotone_and_cap_boundary(self):
        t = 10.0
        prev = 1.0
        for freq in range(1, 201):
            p = replacement_probability(freq, t)
            assert p <= prev + 1e-15
            assert (p == 1.0) == (freq <= t)
            assert 0.0 < p <= 1.0
            prev = p

    def test_matches_sqrt(self):
        assert replacement_probability(40, 10.0) == pytest.approx(math.sqrt(0.25))


class TestFreqTable:
    def test_counts(self):
        table = build_freq_table(sentences_from(["AB C", "AB"]))
        assert table.get("AB") == 2
        assert table.get("C") == 1

    def test_empty_corpus(self):
        table = build_freq_table([])
        assert table.counts == {}

    def test_absent_word_is_none_not_zero(self):
        table = build_freq_table(sentences_from(["AB"]))
        assert table.get("ZZ") is None
        assert "ZZ" not in table
        assert "AB" in table

    def test_threshold_stored(self):
        table = build_freq_table(sentences_from(["AB"]), threshold=3.5)
        assert table.threshold == 3.5

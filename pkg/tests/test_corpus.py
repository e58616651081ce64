"""Corpus ingestion, BMES conversion, vocabularies, and batching."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sanseg.corpus import (
    EOS_CHAR,
    PAD,
    PAD_ID,
    UNK,
    UNK_ID,
    LabeledSentence,
    Vocab,
    bigram_at,
    build_vocab,
    format_vocab_table,
    from_bmes,
    make_batches,
    parse_vocab_table,
    read_segmented_corpus,
    to_bmes,
)
from sanseg.errors import SansegError

from corpora import sentences_from, write_corpus


class TestToBmes:
    def test_single_char_word(self):
        assert to_bmes(["X"]) == ["S"]

    def test_two_char_word(self):
        assert to_bmes(["XY"]) == ["B", "E"]

    def test_mixed(self):
        assert to_bmes(["XYZ", "W"]) == ["B", "M", "E", "S"]

    def test_four_char_word(self):
        assert to_bmes(["ABCD"]) == ["B", "M", "M", "E"]

    def test_empty_word_rejected(self):
        with pytest.raises(SansegError):
            to_bmes(["AB", ""])

    def test_output_length_equals_char_count(self):
        rng = np.random.Generator(np.random.PCG64(3))
        for _ in range(100):
            words = ["x" * int(rng.integers(1, 6)) for _ in range(int(rng.integers(1, 8)))]
            assert len(to_bmes(words)) == sum(len(w) for w in words)


class TestFromBmes:
    def test_valid_sequence(self):
        assert from_bmes("ABC", ["B", "E", "S"]) == ["AB", "C"]

    def test_repair_all_m(self):
        assert from_bmes("AB", ["M", "M"]) == ["AB"]

    def test_repair_trailing_open_word(self):
        assert from_bmes("AB", ["S", "B"]) == ["A", "B"]

    def test_length_mismatch_rejected(self):
        with pytest.raises(SansegError):
            from_bmes("AB", ["S"])

    def test_every_label_sequence_partitions(self):
        # totality: all 4^n label sequences up to n=8 yield a full partition
        for n in range(1, 9):
            chars = "abcdefgh"[:n]
            for labels in itertools.product("BMES", repeat=n):
                words = from_bmes(chars, list(labels))
                assert "".join(words) == chars
                assert all(words)

    @given(st.lists(st.text(alphabet="abcdef", min_size=1, max_size=5), min_size=1, max_size=6))
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, words):
        chars = "".join(words)
        assert from_bmes(chars, to_bmes(words)) == words


class TestLabeledSentence:
    def test_from_words_and_back(self):
        sent = LabeledSentence.from_words(["AB", "C"])
        assert sent.chars == ("A", "B", "C")
        assert sent.labels == ("B", "E", "S")
        assert sent.words() == ["AB", "C"]

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(SansegError):
            LabeledSentence(("A",), ("B", "E"))

    def test_rejects_bad_labels(self):
        with pytest.raises(SansegError):
            LabeledSentence(("A",), ("X",))

    def test_rejects_empty(self):
        with pytest.raises(SansegError):
            LabeledSentence((), ())

    def test_label_ids(self):
        sent = LabeledSentence.from_words(["AB", "C"])
        np.testing.assert_array_equal(sent.label_ids(), [0, 2, 3])


class TestReadCorpus:
    def test_basic_lines(self, tmp_path):
        path = tmp_path / "corpus.txt"
        path.write_text("AB C\n\nABCD\n", encoding="utf-8")
        sents = read_segmented_corpus(path)
        assert len(sents) == 2
        assert sents[0].labels == ("B", "E", "S")
        assert sents[1].labels == ("B", "M", "M", "E")

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "corpus.txt"
        path.write_text("\n   \nA B\n\n", encoding="utf-8")
        assert len(read_segmented_corpus(path)) == 1

    def test_character_counts_preserved(self, tmp_path):
        path = tmp_path / "corpus.txt"
        path.write_text("AB C\nDE FG H\n", encoding="utf-8")
        sents = read_segmented_corpus(path)
        assert "".join(sents[0].chars) == "ABC"
        assert "".join(sents[1].chars) == "DEFGH"

    def test_fullwidth_space_separates(self, tmp_path):
        path = tmp_path / "corpus.txt"
        path.write_text("AB　C\n", encoding="utf-8")
        sents = read_segmented_corpus(path)
        assert sents[0].words() == ["AB", "C"]

    def test_missing_file_names_path(self, tmp_path):
        missing = tmp_path / "nope.txt"
        with pytest.raises(SansegError, match="nope.txt"):
            read_segmented_corpus(missing)

    def test_malformed_utf8_reports_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_bytes("AB C\n".encode("utf-8") + b"\xff\xfe\n")
        with pytest.raises(SansegError, match="line 2"):
            read_segmented_corpus(path)


class TestVocab:
    def test_small_corpus(self):
        vocab = build_vocab(sentences_from(["AB"]), min_freq=1)
        assert set(vocab.unigrams) == {PAD, UNK, "A", "B"}
        assert set(vocab.bigrams) == {PAD, UNK, "AB", "B" + EOS_CHAR}

    def test_min_freq_maps_to_unk(self):
        vocab = build_vocab(sentences_from(["AB", "AC", "AD"]), min_freq=2)
        assert vocab.unigram_id("A") != UNK_ID
        assert vocab.unigram_id("B") == UNK_ID

    def test_determinism(self):
        sents = sentences_from(["AB C", "CA B"])
        v1 = build_vocab(sents)
        v2 = build_vocab(sents)
        assert v1.unigrams == v2.unigrams
        assert v1.bigrams == v2.bigrams

    def test_indices_are_bijection(self):
        vocab = build_vocab(sentences_from(["ABC DE", "FF G"]))
        for table in (vocab.unigrams, vocab.bigrams):
            indices = sorted(table.values())
            assert indices == list(range(len(table)))

    def test_reserved_indices(self):
        vocab = build_vocab(sentences_from(["AB"]))
        assert vocab.unigrams[PAD] == PAD_ID
        assert vocab.unigrams[UNK] == UNK_ID

    def test_empty_corpus_rejected(self):
        with pytest.raises(SansegError):
            build_vocab([])

    def test_bigram_at_final_position_uses_sentinel(self):
        assert bigram_at("AB", 1) == "B" + EOS_CHAR
        assert bigram_at("AB", 0) == "AB"

    def test_sentence_ids_unknown_char(self):
        vocab = build_vocab(sentences_from(["AB"]))
        uni, bi = vocab.sentence_ids("AZ")
        assert uni[1] == UNK_ID
        assert bi[0] == UNK_ID  # "AZ" bigram unseen


class TestVocabSerialization:
    def test_round_trip(self):
        vocab = build_vocab(sentences_from(["AB C", "CA B"]))
        text = format_vocab_table(vocab.unigrams, vocab.uni_counts)
        table, counts = parse_vocab_table(text)
        assert table == vocab.unigrams
        assert counts == vocab.uni_counts
        assert format_vocab_table(table, counts) == text

    def test_version_line_first(self):
        vocab = build_vocab(sentences_from(["AB"]))
        text = format_vocab_table(vocab.unigrams, vocab.uni_counts)
        assert text.splitlines()[0] == "sanseg-vocab 1"

    def test_rejects_unknown_version(self):
        with pytest.raises(SansegError, match="format"):
            parse_vocab_table("something-else 9\n0\t<pad>\t0\n")

    def test_rejects_missing_reserved(self):
        with pytest.raises(SansegError):
            parse_vocab_table("sanseg-vocab 1\n0\ta\t1\n")


class TestBatches:
    def make(self, n):
        return sentences_from([f"{'x' * (i % 4 + 1)} y" for i in range(n)])

    def test_sizes(self):
        sents = self.make(5)
        vocab = build_vocab(sents)
        batches = make_batches(sents, vocab, 2)
        assert [len(b.sentences) for b in batches] == [2, 2, 1]

    def test_seeded_order_reproducible(self):
        sents = self.make(9)
        vocab = build_vocab(sents)
        order1 = [s.chars for b in make_batches(sents, vocab, 2, shuffle_seed=7) for s in b.sentences]
        order2 = [s.chars for b in make_batches(sents, vocab, 2, shuffle_seed=7) for s in b.sentences]
        assert order1 == order2

    def test_coverage_exactly_once(self):
        sents = self.make(11)
        vocab = build_vocab(sents)
        seen = [s for b in make_batches(sents, vocab, 3, shuffle_seed=1) for s in b.sentences]
        assert sorted(id(s) for s in seen) == sorted(id(s) for s in sents)

    def test_pad_mask_matches_lengths(self):
        sents = sentences_from(["abc", "abcde"])
        vocab = build_vocab(sents)
        (batch,) = make_batches(sents, vocab, 2)
        assert batch.pad_mask.sum(axis=1).tolist() == [3, 5]
        assert np.all(batch.char_ids[0, 3:] == PAD_ID)
        assert np.all(batch.bigram_ids[0, 3:] == PAD_ID)

    def test_batch_size_validated(self):
        sents = self.make(2)
        vocab = build_vocab(sents)
        with pytest.raises(SansegError):
            make_batches(sents, vocab, 0)


def test_write_read_round_trip(tmp_path):
    sents = sentences_from(["AB C", "D EF G"])
    path = tmp_path / "c.txt"
    write_corpus(path, sents)
    back = read_segmented_corpus(path)
    assert [s.words() for s in back] == [s.words() for s in sents]

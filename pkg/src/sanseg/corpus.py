"""Segmented-corpus ingestion, BMES label conversion, vocabularies, batching.

Corpus files are UTF-8 text, one sentence per line, words separated by
whitespace (ASCII or full-width). Labels follow the BMES scheme: a word of
length 1 maps to S, a word of length k>=2 maps to B M*(k-2) E.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import SansegError

PAD = "<pad>"
UNK = "<unk>"
PAD_ID = 0
UNK_ID = 1

# Sentinel character closing the final bigram (c_m, <eos>); private-use
# codepoint so it can never collide with corpus text.
EOS_CHAR = ""

LABELS = ("B", "M", "E", "S")
LABEL_IDS = {lab: i for i, lab in enumerate(LABELS)}

VOCAB_FORMAT_VERSION = "sanseg-vocab 1"


@dataclass(frozen=True)
class LabeledSentence:
    """A character sequence with aligned BMES labels."""

    chars: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.chars) != len(self.labels):
            raise SansegError(
                f"chars/labels length mismatch: {len(self.chars)} vs {len(self.labels)}"
            )
        if len(self.chars) == 0:
            raise SansegError("empty sentence")
        bad = [lab for lab in self.labels if lab not in LABEL_IDS]
        if bad:
            raise SansegError(f"invalid labels {bad!r}; expected one of {LABELS}")

    @classmethod
    def from_words(cls, words: list[str]) -> "LabeledSentence":
        chars = tuple(c for w in words for c in w)
        return cls(chars, tuple(to_bmes(words)))

    def words(self) -> list[str]:
        return from_bmes(self.chars, self.labels)

    def label_ids(self) -> np.ndarray:
        return np.array([LABEL_IDS[lab] for lab in self.labels], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.chars)


def to_bmes(words) -> list[str]:
    """Map a word sequence to its per-character BMES labels."""
    labels: list[str] = []
    for w in words:
        k = len(w)
        if k == 0:
            raise SansegError("empty word in segmentation")
        if k == 1:
            labels.append("S")
        else:
            labels.append("B")
            labels.extend("M" * (k - 2))
            labels.append("E")
    return labels


def from_bmes(chars, labels) -> list[str]:
    """Recover words from labels, repairing scheme-invalid sequences.

    Repair rule: a word boundary opens before B or S and closes after E or S;
    every character ends up in exactly one word, so the function is total.
    """
    if len(chars) != len(labels):
        raise SansegError(f"chars/labels length mismatch: {len(chars)} vs {len(labels)}")
    words: list[str] = []
    cur: list[str] = []
    for ch, lab in zip(chars, labels):
        if lab in ("B", "S") and cur:
            words.append("".join(cur))
            cur = []
        cur.append(ch)
        if lab in ("E", "S"):
            words.append("".join(cur))
            cur = []
    if cur:
        words.append("".join(cur))
    return words


def read_segmented_corpus(path, encoding: str = "utf-8") -> list[LabeledSentence]:
    """Read a whitespace-segmented corpus file; blank lines are skipped."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise SansegError(f"cannot read corpus file {path}: {exc}") from exc
    sentences: list[LabeledSentence] = []
    for lineno, line in enumerate(raw.split(b"\n"), start=1):
        try:
            text = line.decode(encoding)
        except UnicodeDecodeError as exc:
            raise SansegError(f"{path}: line {lineno}: malformed {encoding}: {exc}") from exc
        words = text.split()
        if not words:
            continue
        sentences.append(LabeledSentence.from_words(words))
    return sentences


@dataclass
class Vocab:
    """Unigram and bigram character vocabularies with reserved PAD/UNK."""

    unigrams: dict[str, int]
    bigrams: dict[str, int]
    uni_counts: dict[str, int] = field(default_factory=dict)
    bi_counts: dict[str, int] = field(default_factory=dict)
    min_freq_unigram: int = 1
    min_freq_bigram: int = 1

    def unigram_id(self, ch: str) -> int:
        return self.unigrams.get(ch, UNK_ID)

    def bigram_id(self, pair: str) -> int:
        return self.bigrams.get(pair, UNK_ID)

    @property
    def num_unigrams(self) -> int:
        return len(self.unigrams)

    @property
    def num_bigrams(self) -> int:
        return len(self.bigrams)

    def sentence_ids(self, chars) -> tuple[np.ndarray, np.ndarray]:
        """Unigram and bigram index arrays for one sentence."""
        uni = np.array([self.unigram_id(c) for c in chars], dtype=np.int64)
        bi = np.array(
            [self.bigram_id(bigram_at(chars, i)) for i in range(len(chars))], dtype=np.int64
        )
        return uni, bi


def bigram_at(chars, i: int) -> str:
    """Bigram item at position i: (c_i, c_{i+1}), with <eos> at the last index."""
    nxt = chars[i + 1] if i + 1 < len(chars) else EOS_CHAR
    return chars[i] + nxt


def build_vocab(
    sentences: list[LabeledSentence],
    min_freq: int = 1,
    bigram_min_freq: int | None = None,
) -> Vocab:
    """Count unigrams/bigrams over the corpus and assign stable indices.

    Items below the frequency threshold map to UNK. Index order is
    (count desc, item) after the reserved PAD=0 and UNK=1 slots, so the
    assignment is a deterministic function of the corpus.
    """
    if not sentences:
        raise SansegError("cannot build a vocabulary from an empty corpus")
    if bigram_min_freq is None:
        bigram_min_freq = min_freq
    uni_counter: Counter[str] = Counter()
    bi_counter: Counter[str] = Counter()
    for sent in sentences:
        uni_counter.update(sent.chars)
        bi_counter.update(bigram_at(sent.chars, i) for i in range(len(sent)))

    def index(counter: Counter, threshold: int) -> tuple[dict[str, int], dict[str, int]]:
        kept = sorted(
            (item for item, c in counter.items() if c >= threshold),
            key=lambda item: (-counter[item], item),
        )
        table = {PAD: PAD_ID, UNK: UNK_ID}
        counts = {PAD: 0, UNK: 0}
        for item in kept:
            table[item] = len(table)
            counts[item] = counter[item]
        return table, counts

    unigrams, uni_counts = index(uni_counter, min_freq)
    bigrams, bi_counts = index(bi_counter, bigram_min_freq)
    return Vocab(unigrams, bigrams, uni_counts, bi_counts, min_freq, bigram_min_freq)


def format_vocab_table(table: dict[str, int], counts: dict[str, int]) -> str:
    """Serialize one vocabulary table; line 0 is the format version."""
    lines = [VOCAB_FORMAT_VERSION]
    for item, idx in sorted(table.items(), key=lambda kv: kv[1]):
        lines.append(f"{idx}\t{item}\t{counts.get(item, 0)}")
    return "\n".join(lines) + "\n"


def parse_vocab_table(text: str) -> tuple[dict[str, int], dict[str, int]]:
    """Parse the text produced by format_vocab_table."""
    lines = text.splitlines()
    if not lines or lines[0] != VOCAB_FORMAT_VERSION:
        raise SansegError(f"unsupported vocab format: {lines[0] if lines else '<empty>'!r}")
    table: dict[str, int] = {}
    counts: dict[str, int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise SansegError(f"vocab line {lineno}: expected index<TAB>item<TAB>count")
        idx, item, count = int(parts[0]), parts[1], int(parts[2])
        if idx != len(table):
            raise SansegError(f"vocab line {lineno}: non-contiguous index {idx}")
        table[item] = idx
        counts[item] = count
    if table.get(PAD) != PAD_ID or table.get(UNK) != UNK_ID:
        raise SansegError("vocab table is missing reserved PAD/UNK entries")
    return table, counts


@dataclass
class Batch:
    """Index matrices for a group of sentences, padded to the longest."""

    char_ids: np.ndarray
    bigram_ids: np.ndarray
    pad_mask: np.ndarray
    lengths: np.ndarray
    sentences: list[LabeledSentence]


def make_batch(sentences: list[LabeledSentence], vocab: Vocab) -> Batch:
    lengths = np.array([len(s) for s in sentences], dtype=np.int64)
    max_len = int(lengths.max())
    char_ids = np.full((len(sentences), max_len), PAD_ID, dtype=np.int64)
    bigram_ids = np.full((len(sentences), max_len), PAD_ID, dtype=np.int64)
    pad_mask = np.zeros((len(sentences), max_len), dtype=bool)
    for row, sent in enumerate(sentences):
        uni, bi = vocab.sentence_ids(sent.chars)
        char_ids[row, : len(sent)] = uni
        bigram_ids[row, : len(sent)] = bi
        pad_mask[row, : len(sent)] = True
    return Batch(char_ids, bigram_ids, pad_mask, lengths, list(sentences))


def make_batches(
    sentences: list[LabeledSentence],
    vocab: Vocab,
    batch_size: int,
    shuffle_seed: int | None = None,
) -> list[Batch]:
    """Split the corpus into padded batches, optionally seed-shuffled."""
    if batch_size < 1:
        raise SansegError(f"batch_size must be >= 1, got {batch_size}")
    order = list(range(len(sentences)))
    if shuffle_seed is not None:
        rng = np.random.Generator(np.random.PCG64(shuffle_seed))
        order = [int(i) for i in rng.permutation(len(sentences))]
    batches = []
    for start in range(0, len(order), batch_size):
        group = [sentences[i] for i in order[start : start + batch_size]]
        batches.append(make_batch(group, vocab))
    return batches

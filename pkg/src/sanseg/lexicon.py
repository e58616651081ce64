"""Word-POS lexicon: loading, trie span matching, tag decoration, and the
frequency-based replacement probability used for type-supervised training."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import SansegError

POSITION_MARKS = ("b", "m", "e", "s")
DEFAULT_MAX_WORD_LEN = 4
DEFAULT_REPLACEMENT_THRESHOLD = 10.0


@dataclass(frozen=True)
class MatchedSpan:
    """A lexicon word covering sentence positions begin..end (inclusive)."""

    begin: int
    end: int
    word: str
    pos: str

    def __post_init__(self):
        if self.begin > self.end:
            raise SansegError(f"invalid span ({self.begin}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.begin + 1


class _TrieNode:
    __slots__ = ("children", "pos")

    def __init__(self):
        self.children: dict[str, _TrieNode] = {}
        self.pos: str | None = None


@dataclass
class Lexicon:
    """word -> POS map with a character trie for substring matching."""

    entries: dict[str, str]
    max_word_len: int = DEFAULT_MAX_WORD_LEN
    duplicate_count: int = 0
    _root: _TrieNode = field(default_factory=_TrieNode, repr=False)

    def __post_init__(self):
        for word, pos in self.entries.items():
            if not word:
                raise SansegError("lexicon contains an empty word")
            self._insert(word, pos)

    def _insert(self, word: str, pos: str) -> None:
        node = self._root
        for ch in word:
            node = node.children.setdefault(ch, _TrieNode())
        node.pos = pos

    @property
    def pos_tags_t(self) -> list[str]:
        """Plain POS inventory P_t, sorted for stable ordering."""
        return sorted(set(self.entries.values()))

    @property
    def pos_tags_tb(self) -> list[str]:
        """Position-decorated inventory P_t_b: each POS crossed with b/m/e/s."""
        return [f"{pos}_{mark}" for pos in self.pos_tags_t for mark in POSITION_MARKS]

    def lookup(self, word: str) -> str | None:
        return self.entries.get(word)

    def __len__(self) -> int:
        return len(self.entries)


def load_lexicon(path, max_word_len: int = DEFAULT_MAX_WORD_LEN) -> Lexicon:
    """Load a UTF-8 `word<TAB>POS` file; `#` lines are comments.

    Duplicate words keep the first POS; the number of dropped duplicates is
    recorded on the lexicon.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise SansegError(f"cannot read lexicon file {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise SansegError(f"{path}: malformed UTF-8: {exc}") from exc
    entries: dict[str, str] = {}
    duplicates = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" not in line:
            raise SansegError(f"{path}: line {lineno}: expected word<TAB>POS")
        word, _, pos = line.partition("\t")
        word, pos = word.strip(), pos.strip()
        if not word or not pos:
            raise SansegError(f"{path}: line {lineno}: empty word or POS")
        if word in entries:
            duplicates += 1
            continue
        entries[word] = pos
    return Lexicon(entries, max_word_len=max_word_len, duplicate_count=duplicates)


def match_spans(
    chars, lexicon: Lexicon, max_len: int | None = None
) -> list[list[MatchedSpan]]:
    """For each position i, all lexicon spans (b, e) with b <= i <= e.

    Spans longer than max_len characters are ignored; each position's list
    is ordered by (begin, end).
    """
    if max_len is None:
        max_len = lexicon.max_word_len
    if max_len < 1:
        raise SansegError(f"max_len must be >= 1, got {max_len}")
    n = len(chars)
    per_pos: list[list[MatchedSpan]] = [[] for _ in range(n)]
    for b in range(n):
        node = lexicon._root
        for e in range(b, min(n, b + max_len)):
            node = node.children.get(chars[e])
            if node is None:
                break
            if node.pos is not None:
                span = MatchedSpan(b, e, "".join(chars[b : e + 1]), node.pos)
                for i in range(b, e + 1):
                    per_pos[i].append(span)
    for spans in per_pos:
        spans.sort(key=lambda s: (s.begin, s.end))
    return per_pos


def span_tag(span: MatchedSpan, i: int, mode: str) -> str:
    """POS tag of `span` as seen from character i.

    Mode "t" returns the plain POS; mode "t_b" decorates it with the
    character's position inside the word (b/m/e/s).
    """
    if not span.begin <= i <= span.end:
        raise SansegError(f"position {i} outside span ({span.begin}, {span.end})")
    if mode == "t":
        return span.pos
    if mode != "t_b":
        raise SansegError(f"unknown tag mode {mode!r}; expected 't' or 't_b'")
    if span.begin == span.end:
        mark = "s"
    elif i == span.begin:
        mark = "b"
    elif i == span.end:
        mark = "e"
    else:
        mark = "m"
    return f"{span.pos}_{mark}"


def replacement_probability(freq: int, t: float) -> float:
    """min(1, sqrt(t / freq)): chance of swapping a word for its POS tag."""
    if freq == 0:
        raise SansegError("replacement probability undefined for freq == 0")
    if freq < 0 or t <= 0:
        raise SansegError(f"need freq >= 1 and t > 0, got freq={freq}, t={t}")
    return min(1.0, math.sqrt(t / freq))


@dataclass
class WordFreqTable:
    """Gold-word occurrence counts f(w) plus the replacement threshold t."""

    counts: dict[str, int]
    threshold: float = DEFAULT_REPLACEMENT_THRESHOLD

    def get(self, word: str) -> int | None:
        """Count of `word`, or None when the word never occurred."""
        return self.counts.get(word)

    def __contains__(self, word: str) -> bool:
        return word in self.counts


def build_freq_table(
    train_sentences, threshold: float = DEFAULT_REPLACEMENT_THRESHOLD
) -> WordFreqTable:
    """Count gold-word occurrences over the training corpus."""
    counts: dict[str, int] = {}
    for sent in train_sentences:
        for word in sent.words():
            counts[word] = counts.get(word, 0) + 1
    return WordFreqTable(counts, threshold)

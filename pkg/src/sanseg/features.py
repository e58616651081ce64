"""Per-character input representations.

Builds the concatenated unigram+bigram character vectors, sinusoidal
positional encodings, optional precomputed contextual character vectors,
word/POS representations for lexicon spans, and the bilinear word-attention
context vector that augments each character.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .autodiff import Parameter, Tensor, concat, stack
from .errors import SansegError
from .lexicon import MatchedSpan, WordFreqTable, replacement_probability, span_tag


class EmbeddingTable:
    """A lookup table of dense vectors backed by one Parameter.

    The PAD row (when present) is kept all-zero and is excluded from weight
    decay by the model's regularizer. `pretrained` records which items were
    overwritten from an embedding file.
    """

    def __init__(
        self,
        name: str,
        items: list[str],
        dim: int,
        rng: np.random.Generator,
        trainable: bool = True,
        pad_item: str | None = None,
    ):
        if dim < 1:
            raise SansegError(f"embedding dim must be >= 1, got {dim}")
        self.name = name
        self.items = {item: i for i, item in enumerate(items)}
        if len(self.items) != len(items):
            raise SansegError(f"duplicate items in embedding table {name}")
        self.dim = dim
        self.trainable = trainable
        self.pretrained: set[str] = set()
        scale = np.sqrt(3.0 / dim)
        data = rng.uniform(-scale, scale, size=(len(items), dim))
        self.pad_index: int | None = None
        if pad_item is not None:
            self.pad_index = self.items[pad_item]
            data[self.pad_index] = 0.0
        self.param = Parameter(name, data)
        self.param.requires_grad = trainable

    def __len__(self) -> int:
        return len(self.items)

    def index(self, item: str) -> int:
        try:
            return self.items[item]
        except KeyError:
            raise SansegError(f"item {item!r} missing from embedding table {self.name}") from None

    def row(self, item: str) -> Tensor:
        return self.param[self.index(item)]

    def rows(self, ids: np.ndarray) -> Tensor:
        """Gather rows by index array; gradient scatters back into the table."""
        return self.param[np.asarray(ids, dtype=np.int64)]

    def item_list(self) -> list[str]:
        return [item for item, _ in sorted(self.items.items(), key=lambda kv: kv[1])]


@dataclass
class CoverageReport:
    covered: int
    total: int
    duplicates: int = 0
    unknown_items: int = 0

    @property
    def uncovered(self) -> int:
        return self.total - self.covered


def load_pretrained(path, table: EmbeddingTable) -> CoverageReport:
    """Overwrite table rows from a whitespace-separated text embedding file.

    Format: optional `count dim` header, then `item v1 ... vdim` per line.
    Rows for unknown items are ignored; duplicate items keep the last vector.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise SansegError(f"cannot read embedding file {path}: {exc}") from exc
    start = 0
    if lines:
        head = lines[0].split()
        if len(head) == 2 and all(tok.lstrip("-").isdigit() for tok in head):
            if int(head[1]) != table.dim:
                raise SansegError(
                    f"{path}: embedding dim {head[1]} does not match table dim {table.dim}"
                )
            start = 1
    covered: set[str] = set()
    duplicates = 0
    unknown = 0
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        parts = line.split()
        item, values = parts[0], parts[1:]
        if len(values) != table.dim:
            raise SansegError(
                f"{path}: line {lineno}: expected {table.dim} values, got {len(values)}"
            )
        if item not in table.items:
            unknown += 1
            continue
        if item in covered:
            duplicates += 1
        vec = np.array([float(v) for v in values], dtype=np.float64)
        table.param.data[table.items[item]] = vec
        covered.add(item)
        table.pretrained.add(item)
    return CoverageReport(len(covered), len(table), duplicates, unknown)


def positional_encoding(pos: int, d: int) -> np.ndarray:
    """Sinusoidal position vector: sin at even indices, cos at odd."""
    if d % 2 != 0:
        raise SansegError(f"positional encoding dimension must be even, got {d}")
    half = np.arange(d // 2, dtype=np.float64)
    angles = pos / np.power(10000.0, 2.0 * half / d)
    pe = np.empty(d, dtype=np.float64)
    pe[0::2] = np.sin(angles)
    pe[1::2] = np.cos(angles)
    return pe


def positional_encoding_matrix(n: int, d: int) -> np.ndarray:
    if d % 2 != 0:
        raise SansegError(f"positional encoding dimension must be even, got {d}")
    half = np.arange(d // 2, dtype=np.float64)
    pos = np.arange(n, dtype=np.float64)[:, None]
    angles = pos / np.power(10000.0, 2.0 * half / d)[None, :]
    pe = np.empty((n, d), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


def char_input(
    chars,
    i: int,
    uni_table: EmbeddingTable,
    bi_table: EmbeddingTable,
    vocab,
    provider: "ContextualStore | None" = None,
) -> Tensor:
    """The concatenated character vector x~ at one position."""
    from .corpus import bigram_at

    bi_vec = bi_table.param[vocab.bigram_id(bigram_at(chars, i))]
    if provider is None:
        uni_vec = uni_table.param[vocab.unigram_id(chars[i])]
    else:
        uni_vec = Tensor(provider.vectors(chars)[i])
    return concat([uni_vec, bi_vec], axis=0)


def sentence_char_inputs(
    chars,
    uni_table: EmbeddingTable,
    bi_table: EmbeddingTable,
    vocab,
    provider: "ContextualStore | None" = None,
) -> Tensor:
    """x~ rows for a whole sentence as an n x d tensor."""
    uni_ids, bi_ids = vocab.sentence_ids(chars)
    bi = bi_table.rows(bi_ids)
    if provider is None:
        uni = uni_table.rows(uni_ids)
    else:
        uni = Tensor(provider.vectors(chars))
    return concat([uni, bi], axis=1)


def word_repr_predict(
    span: MatchedSpan,
    i: int,
    mode: str,
    word_table: EmbeddingTable,
    pos_table: EmbeddingTable,
) -> Tensor:
    """Prediction-time span representation: word vector when pretrained,
    otherwise the (possibly position-decorated) POS embedding."""
    if span.word in word_table.pretrained:
        return word_table.row(span.word)
    return pos_table.row(span_tag(span, i, mode))


def word_repr_train(
    span: MatchedSpan,
    i: int,
    gold_pos: str,
    freq_table: WordFreqTable,
    rng: np.random.Generator,
    mode: str,
    word_table: EmbeddingTable,
    pos_table: EmbeddingTable,
    rb: float | None = None,
) -> tuple[Tensor, bool]:
    """Training-time span representation for a gold word.

    Draws rb uniform in [0,1) (or uses a caller-supplied draw so that one
    decision covers every character of the span) and replaces the word with
    its gold POS embedding when rb < min(1, sqrt(t/f)). Returns the vector
    and whether the POS branch was taken.
    """
    freq = freq_table.get(span.word)
    if freq is None:
        raise SansegError(f"word {span.word!r} missing from the frequency table")
    p = replacement_probability(freq, freq_table.threshold)
    if rb is None:
        rb = float(rng.random())
    replaced = rb < p
    if replaced:
        tagged = MatchedSpan(span.begin, span.end, span.word, gold_pos)
        return pos_table.row(span_tag(tagged, i, mode)), True
    if span.word in word_table.pretrained:
        return word_table.row(span.word), False
    # no pretrained vector: fall back to the POS representation of the match
    return pos_table.row(span_tag(span, i, mode)), False


def word_context(
    x_c_i: Tensor, span_reprs: list[Tensor], bilinear: Tensor
) -> tuple[Tensor, np.ndarray]:
    """Attention-weighted sum of span representations for one character.

    score_k = x_c_i^T W x^w_k, softmax over spans; an empty span set yields
    the zero vector. Returns (h_i, attention weights).
    """
    d_c, d_w = bilinear.data.shape
    if x_c_i.data.shape != (d_c,):
        raise SansegError(
            f"char vector dim {x_c_i.data.shape} does not match bilinear rows {d_c}"
        )
    if not span_reprs:
        return Tensor(np.zeros(d_w)), np.zeros(0)
    for r in span_reprs:
        if r.data.shape != (d_w,):
            raise SansegError(
                f"span representation dim {r.data.shape} does not match bilinear cols {d_w}"
            )
    s = stack(span_reprs, axis=0)  # k x d_w
    q = x_c_i.reshape(1, d_c) @ bilinear  # 1 x d_w
    scores = q @ s.T  # 1 x k
    alpha = scores.softmax(axis=1)
    h = (alpha @ s).reshape(d_w)
    return h, alpha.data.reshape(-1).copy()


def augment(x_c_i: Tensor, h_i: Tensor) -> Tensor:
    """Concatenate the character vector with its word context vector."""
    return concat([x_c_i, h_i], axis=0)


# -- precomputed contextual character vectors ---------------------------------

CVEC_FORMAT_VERSION = "sanseg-cvec 1"


def sentence_hash(chars) -> bytes:
    return hashlib.sha256("".join(chars).encode("utf-8")).digest()


class ContextualStore:
    """Per-sentence contextual character vectors, precomputed offline.

    Binary file: one record per sentence, sha256 digest (32 bytes) followed
    by n*dim little-endian float32 values. A plain-text `.idx` sidecar maps
    digests to offsets.
    """

    def __init__(self, path, index: dict[bytes, tuple[int, int]], dim: int):
        self.path = path
        self._index = index
        self.dim = dim

    @classmethod
    def open(cls, path) -> "ContextualStore":
        idx_path = str(path) + ".idx"
        try:
            with open(idx_path, "r", encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise SansegError(f"cannot read contextual index {idx_path}: {exc}") from exc
        if not lines or not lines[0].startswith(CVEC_FORMAT_VERSION):
            raise SansegError(f"{idx_path}: unsupported contextual-store format")
        dim = int(lines[0].split()[-1])
        index: dict[bytes, tuple[int, int]] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise SansegError(f"{idx_path}: line {lineno}: expected hash<TAB>offset<TAB>n")
            index[bytes.fromhex(parts[0])] = (int(parts[1]), int(parts[2]))
        return cls(path, index, dim)

    @classmethod
    def write(cls, path, records: list[tuple[list[str] | tuple[str, ...] | str, np.ndarray]]):
        """Create a store from (chars, n x dim float array) pairs."""
        if not records:
            raise SansegError("contextual store needs at least one sentence")
        dim = int(records[0][1].shape[1])
        index_lines = [f"{CVEC_FORMAT_VERSION} {dim}"]
        with open(path, "wb") as fh:
            for chars, vecs in records:
                vecs = np.asarray(vecs)
                if vecs.ndim != 2 or vecs.shape[0] != len(chars) or vecs.shape[1] != dim:
                    raise SansegError(
                        f"contextual record shape {vecs.shape} does not match "
                        f"sentence length {len(chars)} and dim {dim}"
                    )
                digest = sentence_hash(chars)
                offset = fh.tell()
                fh.write(digest)
                fh.write(vecs.astype("<f4").tobytes())
                index_lines.append(f"{digest.hex()}\t{offset}\t{vecs.shape[0]}")
        with open(str(path) + ".idx", "w", encoding="utf-8") as fh:
            fh.write("\n".join(index_lines) + "\n")
        return cls.open(path)

    def __contains__(self, chars) -> bool:
        return sentence_hash(chars) in self._index

    def vectors(self, chars) -> np.ndarray:
        """The n x dim float64 matrix for one sentence; raises when absent."""
        digest = sentence_hash(chars)
        if digest not in self._index:
            preview = "".join(chars)[:30]
            raise SansegError(f"no contextual vectors for sentence {preview!r}")
        offset, n = self._index[digest]
        if n != len(chars):
            preview = "".join(chars)[:30]
            raise SansegError(
                f"contextual record for {preview!r} has {n} vectors, sentence has {len(chars)}"
            )
        with open(self.path, "rb") as fh:
            fh.seek(offset)
            stored = fh.read(32)
            if stored != digest:
                raise SansegError(f"contextual store {self.path}: corrupt record at {offset}")
            raw = fh.read(n * self.dim * 4)
        return np.frombuffer(raw, dtype="<f4").reshape(n, self.dim).astype(np.float64)

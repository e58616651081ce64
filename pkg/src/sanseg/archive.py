"""Single-file model archive.

Layout: magic bytes, uint32 version, six length-prefixed UTF-8 blocks
(config snapshot, unigram vocab, bigram vocab, word items with pretrained
flags, POS items, lexicon fingerprint), then length-prefixed named tensors
of 64-bit little-endian floats. Saving after loading is byte-identical.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .config import RunConfig, config_from_text, config_to_text
from .corpus import Vocab, format_vocab_table, parse_vocab_table
from .errors import SansegError
from .features import ContextualStore
from .lexicon import Lexicon, load_lexicon
from .model import Segmenter

MAGIC = b"SANSEGAR"
VERSION = 1


def lexicon_fingerprint(lexicon: Lexicon | None) -> str:
    """sha256 over the canonical entry list; identifies lexicon content."""
    if lexicon is None:
        return ""
    canon = "\n".join(f"{w}\t{p}" for w, p in sorted(lexicon.entries.items()))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _pack_block(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<Q", len(raw)) + raw


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.buf):
            raise SansegError("archive truncated")
        out = self.buf[self.off : self.off + n]
        self.off += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def block(self) -> str:
        return self.take(self.u64()).decode("utf-8")

    def done(self) -> bool:
        return self.off == len(self.buf)


def save_archive(path, model: Segmenter) -> None:
    """Write the model (config, vocab, item lists, all tensors) to one file."""
    parts = [MAGIC, struct.pack("<I", VERSION)]
    parts.append(_pack_block(config_to_text(model.cfg)))
    parts.append(_pack_block(format_vocab_table(model.vocab.unigrams, model.vocab.uni_counts)))
    parts.append(_pack_block(format_vocab_table(model.vocab.bigrams, model.vocab.bi_counts)))
    if model.word_table is not None:
        word_lines = [
            f"{item}\t{1 if item in model.word_table.pretrained else 0}"
            for item in model.word_table.item_list()
        ]
        pos_lines = model.pos_table.item_list()
    else:
        word_lines = []
        pos_lines = []
    parts.append(_pack_block("\n".join(word_lines)))
    parts.append(_pack_block("\n".join(pos_lines)))
    parts.append(_pack_block(lexicon_fingerprint(model.lexicon)))
    parts.append(struct.pack("<I", len(model.params)))
    for name, p in model.params.items():
        parts.append(_pack_block(name))
        parts.append(struct.pack("<I", p.data.ndim))
        for dim in p.data.shape:
            parts.append(struct.pack("<Q", dim))
        parts.append(np.ascontiguousarray(p.data).astype("<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_archive(
    path,
    lexicon: Lexicon | None = None,
    provider: ContextualStore | None = None,
) -> Segmenter:
    """Rebuild a Segmenter from an archive file.

    For adaptation models the lexicon is reloaded (from the argument or the
    recorded path) and must match the stored fingerprint; likewise the
    contextual store when one was used at training time.
    """
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise SansegError(f"cannot read archive {path}: {exc}") from exc
    rd = _Reader(buf)
    if rd.take(len(MAGIC)) != MAGIC:
        raise SansegError(f"{path} is not a sanseg archive")
    version = rd.u32()
    if version != VERSION:
        raise SansegError(f"unsupported archive version {version} (expected {VERSION})")
    cfg = config_from_text(rd.block())
    unigrams, uni_counts = parse_vocab_table(rd.block())
    bigrams, bi_counts = parse_vocab_table(rd.block())
    word_block = rd.block()
    pos_block = rd.block()
    fingerprint = rd.block()

    vocab = Vocab(unigrams, bigrams, uni_counts, bi_counts,
                  cfg.min_freq, cfg.bigram_min_freq)
    word_items: list[str] = []
    pretrained: set[str] = set()
    for line in word_block.splitlines():
        item, _, flag = line.partition("\t")
        word_items.append(item)
        if flag == "1":
            pretrained.add(item)
    pos_items = pos_block.splitlines()

    if cfg.adaptation != "off":
        if lexicon is None:
            if not cfg.lexicon_path:
                raise SansegError(
                    "archive uses lexicon adaptation but records no lexicon path; "
                    "pass the lexicon explicitly"
                )
            lexicon = load_lexicon(cfg.lexicon_path, cfg.max_word_len)
        got = lexicon_fingerprint(lexicon)
        if got != fingerprint:
            raise SansegError(
                f"lexicon fingerprint mismatch: archive has {fingerprint[:12]}..., "
                f"loaded lexicon has {got[:12]}..."
            )
    if provider is None and cfg.contextual_path:
        provider = ContextualStore.open(cfg.contextual_path)

    model = Segmenter(
        cfg, vocab, lexicon=lexicon, provider=provider,
        rng=np.random.Generator(np.random.PCG64(0)),
        word_items=word_items or None,
        pos_items=pos_items or None,
    )
    if model.word_table is not None:
        model.word_table.pretrained = pretrained

    count = rd.u32()
    if count != len(model.params):
        raise SansegError(
            f"archive has {count} tensors, model expects {len(model.params)}"
        )
    for _ in range(count):
        name = rd.block()
        if name not in model.params:
            raise SansegError(f"archive tensor {name!r} not present in the model")
        ndim = rd.u32()
        shape = tuple(rd.u64() for _ in range(ndim))
        expected = model.params[name].data.shape
        if shape != expected:
            raise SansegError(
                f"archive tensor {name} has shape {shape}, model expects {expected}"
            )
        n_bytes = int(np.prod(shape)) * 8 if shape else 8
        data = np.frombuffer(rd.take(n_bytes), dtype="<f8").reshape(shape)
        model.params[name].data = data.astype(np.float64).copy()
    if not rd.done():
        raise SansegError("archive has trailing bytes")
    return model

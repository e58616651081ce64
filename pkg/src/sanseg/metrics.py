"""Segmentation scoring: word-span precision/recall/F1, length-bucketed F1,
and per-entity segmentation precision."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SansegError


@dataclass
class SegEvalCounts:
    gold_words: int = 0
    pred_words: int = 0
    correct_words: int = 0

    def __add__(self, other: "SegEvalCounts") -> "SegEvalCounts":
        return SegEvalCounts(
            self.gold_words + other.gold_words,
            self.pred_words + other.pred_words,
            self.correct_words + other.correct_words,
        )

    def prf(self) -> tuple[float, float, float]:
        p = self.correct_words / self.pred_words if self.pred_words else 0.0
        r = self.correct_words / self.gold_words if self.gold_words else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return p, r, f1


def spans_of(words) -> list[tuple[int, int]]:
    """Half-open character intervals of consecutive words."""
    spans = []
    start = 0
    for w in words:
        spans.append((start, start + len(w)))
        start += len(w)
    return spans


def sentence_counts(gold_words, pred_words) -> SegEvalCounts:
    gold = set(spans_of(gold_words))
    pred = set(spans_of(pred_words))
    return SegEvalCounts(len(gold), len(pred), len(gold & pred))


def corpus_counts(gold_sentences, pred_sentences) -> SegEvalCounts:
    """Micro counts over the corpus; gold and pred must cover the same text."""
    if len(gold_sentences) != len(pred_sentences):
        raise SansegError(
            f"gold has {len(gold_sentences)} sentences, pred has {len(pred_sentences)}"
        )
    total = SegEvalCounts()
    for idx, (gold, pred) in enumerate(zip(gold_sentences, pred_sentences)):
        if "".join(gold) != "".join(pred):
            raise SansegError(f"sentence {idx}: gold and pred characters differ")
        total = total + sentence_counts(gold, pred)
    return total


def prf(gold_sentences, pred_sentences) -> tuple[float, float, float]:
    """Micro-averaged precision, recall, F1 over word spans."""
    return corpus_counts(gold_sentences, pred_sentences).prf()


def f1_by_length(
    gold_sentences, pred_sentences, bucket_width: int
) -> dict[tuple[int, int], tuple[float, float, float]]:
    """P/R/F1 per sentence-length bucket [k*w, (k+1)*w); empty buckets omitted."""
    if bucket_width < 1:
        raise SansegError(f"bucket_width must be >= 1, got {bucket_width}")
    buckets: dict[tuple[int, int], SegEvalCounts] = {}
    for idx, (gold, pred) in enumerate(zip(gold_sentences, pred_sentences)):
        if "".join(gold) != "".join(pred):
            raise SansegError(f"sentence {idx}: gold and pred characters differ")
        length = sum(len(w) for w in gold)
        k = length // bucket_width
        key = (k * bucket_width, (k + 1) * bucket_width)
        buckets[key] = buckets.get(key, SegEvalCounts()) + sentence_counts(gold, pred)
    return {key: buckets[key].prf() for key in sorted(buckets)}


def entity_precision(
    gold_sentences, pred_sentences, targets
) -> tuple[dict[str, float | None], float | None]:
    """Per-word segmentation precision for target entities, plus the macro mean.

    For each target, precision is the fraction of its gold occurrences whose
    exact span also appears in the prediction. Targets never occurring in
    gold report None and are excluded from the average.
    """
    if not targets:
        raise SansegError("entity precision needs at least one target word")
    occur = {w: 0 for w in targets}
    correct = {w: 0 for w in targets}
    target_set = set(targets)
    for gold, pred in zip(gold_sentences, pred_sentences):
        pred_spans = set(spans_of(pred))
        start = 0
        for w in gold:
            if w in target_set:
                occur[w] += 1
                if (start, start + len(w)) in pred_spans:
                    correct[w] += 1
            start += len(w)
    per_word: dict[str, float | None] = {}
    defined = []
    for w in targets:
        if occur[w] == 0:
            per_word[w] = None
        else:
            per_word[w] = correct[w] / occur[w]
            defined.append(per_word[w])
    average = sum(defined) / len(defined) if defined else None
    return per_word, average


def format_report(
    counts: SegEvalCounts,
    buckets: dict[tuple[int, int], tuple[float, float, float]] | None = None,
    entities: tuple[dict[str, float | None], float | None] | None = None,
) -> str:
    """Human-readable score report."""
    p, r, f1 = counts.prf()
    lines = [
        f"words  gold={counts.gold_words} pred={counts.pred_words} correct={counts.correct_words}",
        f"score  P={p:.4f} R={r:.4f} F1={f1:.4f}",
    ]
    if buckets is not None:
        lines.append("length buckets:")
        for (lo, hi), (bp, br, bf) in buckets.items():
            lines.append(f"  [{lo},{hi})  P={bp:.4f} R={br:.4f} F1={bf:.4f}")
    if entities is not None:
        per_word, average = entities
        lines.append("entity precision:")
        for w, val in per_word.items():
            lines.append(f"  {w}\t{'undefined' if val is None else f'{val:.2f}'}")
        lines.append(f"  average\t{'undefined' if average is None else f'{average:.2f}'}")
    return "\n".join(lines) + "\n"

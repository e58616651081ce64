"""Independent brute-force oracles used to verify the implementation.

These deliberately avoid the package's own recursions: CRF quantities come
from explicit enumeration over all label sequences, and span matching from a
quadratic substring scan.
"""

from __future__ import annotations

import itertools

import numpy as np

NUM_LABELS = 4
START = 4
END = 5


def enumerate_scores(emissions: np.ndarray, transitions: np.ndarray):
    """Scores of every label sequence, with the sequences themselves."""
    n = emissions.shape[0]
    seqs = np.array(list(itertools.product(range(NUM_LABELS), repeat=n)), dtype=np.int64)
    scores = emissions[np.arange(n), seqs].sum(axis=1)
    scores = scores + transitions[START, seqs[:, 0]]
    for i in range(1, n):
        scores = scores + transitions[seqs[:, i - 1], seqs[:, i]]
    scores = scores + transitions[seqs[:, -1], END]
    return seqs, scores


def brute_log_partition(emissions: np.ndarray, transitions: np.ndarray) -> float:
    _, scores = enumerate_scores(emissions, transitions)
    m = scores.max()
    return float(m + np.log(np.exp(scores - m).sum()))


def brute_viterbi(emissions: np.ndarray, transitions: np.ndarray):
    """Max-scoring sequence; ties resolved like the DP: smallest label at the
    last position, then smallest at the previous position, and so on."""
    seqs, scores = enumerate_scores(emissions, transitions)
    best = scores.max()
    candidates = seqs[scores == best]
    order = np.lexsort(tuple(candidates[:, i] for i in range(candidates.shape[1])))
    return candidates[order[0]].tolist(), float(best)


def brute_marginals(emissions: np.ndarray, transitions: np.ndarray) -> np.ndarray:
    """P(y_i = l) for every position and label, from enumeration."""
    n = emissions.shape[0]
    seqs, scores = enumerate_scores(emissions, transitions)
    m = scores.max()
    probs = np.exp(scores - m)
    probs /= probs.sum()
    marg = np.zeros((n, NUM_LABELS))
    for i in range(n):
        for lab in range(NUM_LABELS):
            marg[i, lab] = probs[seqs[:, i] == lab].sum()
    return marg


def brute_match(chars, entries: dict[str, str], max_len: int):
    """All (begin, end, word, pos) lexicon spans per position, by direct
    substring lookup."""
    n = len(chars)
    per_pos = [[] for _ in range(n)]
    for b in range(n):
        for e in range(b, min(n, b + max_len)):
            word = "".join(chars[b : e + 1])
            if word in entries:
                for i in range(b, e + 1):
                    per_pos[i].append((b, e, word, entries[word]))
    for spans in per_pos:
        spans.sort(key=lambda s: (s[0], s[1]))
    return per_pos

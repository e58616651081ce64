"""Linear-chain CRF over the four BMES labels.

Sequence probability combines per-position emission scores with transition
scores between adjacent labels, including virtual START/END boundary
transitions. The log-partition runs the forward recursion in log space;
decoding is Viterbi with ties broken toward the lower label index.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Parameter, Tensor
from .errors import SansegError

NUM_LABELS = 4  # B, M, E, S
START = 4
END = 5
NUM_STATES = NUM_LABELS + 2

# label indices: B=0, M=1, E=2, S=3
_B, _M, _E, _S = 0, 1, 2, 3

# adjacent-label pairs that can never occur in a valid BMES sequence
INVALID_PAIRS = (
    (_B, _B), (_B, _S), (_M, _B), (_M, _S),
    (_E, _M), (_E, _E), (_S, _M), (_S, _E),
    (START, _M), (START, _E), (_M, END), (_B, END),
)


def init_crf_params(hidden_dim: int, rng: np.random.Generator) -> dict[str, Parameter]:
    limit = np.sqrt(6.0 / (hidden_dim + NUM_LABELS))
    w = rng.uniform(-limit, limit, size=(hidden_dim, NUM_LABELS))
    trans = rng.uniform(-0.1, 0.1, size=(NUM_STATES, NUM_STATES))
    trans[~valid_transition_cells()] = 0.0
    return {
        "crf.emission.w": Parameter("crf.emission.w", w),
        "crf.emission.b": Parameter("crf.emission.b", np.zeros(NUM_LABELS)),
        "crf.transitions": Parameter("crf.transitions", trans),
    }


def valid_transition_cells() -> np.ndarray:
    """Boolean mask of transition cells the model can ever score.

    Label-to-label, START-to-label, and label-to-END cells are live; entries
    into START or out of END are structurally unreachable and stay untouched
    (conceptually -inf).
    """
    mask = np.zeros((NUM_STATES, NUM_STATES), dtype=bool)
    mask[:NUM_LABELS, :NUM_LABELS] = True
    mask[START, :NUM_LABELS] = True
    mask[:NUM_LABELS, END] = True
    return mask


def structural_transitions(trans: np.ndarray) -> np.ndarray:
    """Copy of the transition matrix with -inf at unreachable cells."""
    out = np.array(trans, dtype=np.float64)
    out[~valid_transition_cells()] = -np.inf
    return out


def emission_scores(hidden: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Project encoder states to one score per label (n x 4)."""
    return hidden @ w + b


def _check_emissions(emissions) -> int:
    n = emissions.data.shape[0] if isinstance(emissions, Tensor) else emissions.shape[0]
    if n == 0:
        raise SansegError("CRF got an empty emission matrix")
    return n


def log_partition(emissions: Tensor, transitions: Tensor) -> Tensor:
    """log of the summed exp-score over all 4^n label sequences.

    Forward recursion in log space: alpha starts at START->y_1 plus the first
    emissions, each step folds in one position via logsumexp, and the END
    transition closes the sum.
    """
    n = _check_emissions(emissions)
    block = transitions[:NUM_LABELS, :NUM_LABELS]
    start = transitions[START, :NUM_LABELS]
    end = transitions[:NUM_LABELS, END]
    alpha = emissions[0, :] + start
    for i in range(1, n):
        scores = alpha.reshape(NUM_LABELS, 1) + block
        alpha = scores.logsumexp(axis=0) + emissions[i, :]
    return (alpha + end).logsumexp(axis=0)


def sequence_score(emissions: Tensor, transitions: Tensor, labels) -> Tensor:
    """Score of one label sequence: emissions plus boundary-inclusive transitions."""
    n = _check_emissions(emissions)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (n,):
        raise SansegError(f"labels shape {y.shape} does not match {n} positions")
    if y.min() < 0 or y.max() >= NUM_LABELS:
        raise SansegError(f"label index out of range in {y.tolist()}")
    prev = np.concatenate(([START], y[:-1]))
    emit = emissions[np.arange(n), y].sum()
    trans = transitions[prev, y].sum() + transitions[y[-1], END]
    return emit + trans


def nll(emissions: Tensor, transitions: Tensor, gold_labels) -> Tensor:
    """Negative log-likelihood of the gold sequence; differentiable."""
    return log_partition(emissions, transitions) - sequence_score(
        emissions, transitions, gold_labels
    )


def viterbi(emissions: np.ndarray, transitions: np.ndarray) -> tuple[list[int], float]:
    """Highest-scoring label sequence and its score.

    Ties break toward the lower label index (argmax returns the first
    maximum), making decode deterministic.
    """
    emissions = np.asarray(emissions, dtype=np.float64)
    n = _check_emissions(emissions)
    trans = np.asarray(transitions, dtype=np.float64)
    block = trans[:NUM_LABELS, :NUM_LABELS]
    delta = emissions[0] + trans[START, :NUM_LABELS]
    backptr = np.zeros((n, NUM_LABELS), dtype=np.int64)
    for i in range(1, n):
        scores = delta[:, None] + block
        backptr[i] = np.argmax(scores, axis=0)
        delta = scores[backptr[i], np.arange(NUM_LABELS)] + emissions[i]
    final = delta + trans[:NUM_LABELS, END]
    best = int(np.argmax(final))
    path = [best]
    for i in range(n - 1, 0, -1):
        best = int(backptr[i, best])
        path.append(best)
    path.reverse()
    return path, float(final[path[-1]])


def constrained_transitions(base: np.ndarray) -> np.ndarray:
    """Copy of `base` with -inf on scheme-invalid BMES transitions."""
    out = np.array(base, dtype=np.float64)
    for a, b in INVALID_PAIRS:
        out[a, b] = -np.inf
    return out

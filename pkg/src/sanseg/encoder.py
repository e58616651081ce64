"""Sequence encoders: stacked multi-head self-attention with an optional
local window, and the bidirectional LSTM baseline.

Both map n x d_in input rows to per-character hidden states. Attention masks
are additive (0 keeps a position, -inf removes it); the local window and the
padding mask combine by addition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Parameter, Tensor, concat
from .errors import SansegError

NEG_INF = -np.inf
LN_EPS = 1e-6


@dataclass
class SanConfig:
    layers: int = 2
    heads: int = 8
    d_model: int = 512
    d_inner: int = 2048
    window: int | None = 5  # None = global attention
    relu_dropout: float = 0.1
    attention_dropout: float = 0.1
    residual_dropout: float = 0.1

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise SansegError(
                f"heads ({self.heads}) must divide d_model ({self.d_model})"
            )
        if self.window is not None and self.window < 0:
            raise SansegError(f"window must be >= 0, got {self.window}")
        for name in ("relu_dropout", "attention_dropout", "residual_dropout"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise SansegError(f"{name} must be in [0, 1), got {p}")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads


@dataclass
class LstmConfig:
    layers: int = 1
    hidden: int = 200
    input_dropout: float = 0.1

    def __post_init__(self):
        if self.layers < 1 or self.hidden < 1:
            raise SansegError("lstm layers and hidden size must be >= 1")
        if not 0.0 <= self.input_dropout < 1.0:
            raise SansegError(f"input_dropout must be in [0, 1), got {self.input_dropout}")

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_san_params(cfg: SanConfig, d_in: int, rng: np.random.Generator) -> dict[str, Parameter]:
    d = cfg.d_model
    params: dict[str, Parameter] = {}

    def add(name: str, data: np.ndarray) -> None:
        params[name] = Parameter(name, data)

    add("san.in_proj.w", glorot(rng, d_in, d))
    add("san.in_proj.b", np.zeros(d))
    for layer in range(cfg.layers):
        p = f"san.layer{layer}"
        for proj in ("wq", "wk", "wv", "wo"):
            add(f"{p}.attn.{proj}", glorot(rng, d, d))
        add(f"{p}.ln1.g", np.ones(d))
        add(f"{p}.ln1.b", np.zeros(d))
        add(f"{p}.ffn.w1", glorot(rng, d, cfg.d_inner))
        add(f"{p}.ffn.b1", np.zeros(cfg.d_inner))
        add(f"{p}.ffn.w2", glorot(rng, cfg.d_inner, d))
        add(f"{p}.ffn.b2", np.zeros(d))
        add(f"{p}.ln2.g", np.ones(d))
        add(f"{p}.ln2.b", np.zeros(d))
    return params


def init_lstm_params(cfg: LstmConfig, d_in: int, rng: np.random.Generator) -> dict[str, Parameter]:
    params: dict[str, Parameter] = {}
    for layer in range(cfg.layers):
        layer_in = d_in if layer == 0 else cfg.output_dim
        for direction in ("fw", "bw"):
            p = f"lstm.layer{layer}.{direction}"
            params[f"{p}.w"] = Parameter(f"{p}.w", glorot(rng, cfg.hidden, 4 * cfg.hidden))
            params[f"{p}.u"] = Parameter(f"{p}.u", glorot(rng, layer_in, 4 * cfg.hidden))
            params[f"{p}.b"] = Parameter(f"{p}.b", np.zeros(4 * cfg.hidden))
    return params


def dropout(x: Tensor, p: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout; the identity when not training or p == 0."""
    if not train or p <= 0.0:
        return x
    if rng is None:
        raise SansegError("training-mode dropout needs an rng")
    keep = (rng.random(x.data.shape) >= p) / (1.0 - p)
    return x * Tensor(keep)


def local_mask(n: int, ws: int) -> np.ndarray:
    """Additive window mask: 0 where |j - i| <= ws, -inf elsewhere."""
    if ws < 0:
        raise SansegError(f"window size must be >= 0, got {ws}")
    idx = np.arange(n)
    mask = np.where(np.abs(idx[None, :] - idx[:, None]) <= ws, 0.0, NEG_INF)
    return mask


def padding_mask(pad_mask: np.ndarray) -> np.ndarray:
    """Additive mask removing padded key positions (columns)."""
    cols = np.where(np.asarray(pad_mask, dtype=bool), 0.0, NEG_INF)
    return np.broadcast_to(cols[None, :], (len(cols), len(cols))).copy()


def build_attention_mask(n: int, window: int | None, pad_mask: np.ndarray | None) -> np.ndarray:
    """Combine window and padding masks; padded query rows keep their own
    diagonal entry so softmax stays well defined (their output is ignored)."""
    mask = np.zeros((n, n)) if window is None else local_mask(n, window)
    if pad_mask is not None:
        mask = mask + padding_mask(pad_mask)
        dead = np.all(np.isneginf(mask), axis=1)
        if dead.any():
            idx = np.where(dead)[0]
            mask[idx, idx] = 0.0
    return mask


def scaled_dot_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    mask: np.ndarray | None,
    attn_dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    train: bool = False,
) -> tuple[Tensor, Tensor]:
    """softmax(QK^T / sqrt(d_k) + mask) V. Returns (output, weights)."""
    d_k = q.data.shape[1]
    scores = (q @ k.T) * (1.0 / np.sqrt(d_k))
    if mask is not None:
        if np.all(np.isneginf(mask), axis=1).any():
            raise SansegError("attention mask removes every position for some row")
        scores = scores + Tensor(mask)
    weights = scores.softmax(axis=1)
    out = dropout(weights, attn_dropout, rng, train) @ v
    return out, weights


def attention(
    x: Tensor,
    mask: np.ndarray | None,
    wq: Tensor,
    wk: Tensor,
    wv: Tensor,
) -> tuple[Tensor, Tensor]:
    """Single-head self-attention with learned Q/K/V projections."""
    return scaled_dot_attention(x @ wq, x @ wk, x @ wv, mask)


def multi_head(
    x: Tensor,
    mask: np.ndarray | None,
    cfg: SanConfig,
    params: dict[str, Parameter],
    layer: int,
    rng: np.random.Generator | None = None,
    train: bool = False,
) -> Tensor:
    """Heads attend in parallel column blocks; concat is projected by W^o."""
    p = f"san.layer{layer}.attn"
    q = x @ params[f"{p}.wq"]
    k = x @ params[f"{p}.wk"]
    v = x @ params[f"{p}.wv"]
    dh = cfg.head_dim
    outs = []
    for h in range(cfg.heads):
        block = (slice(None), slice(h * dh, (h + 1) * dh))
        out, _ = scaled_dot_attention(
            q[block], k[block], v[block], mask, cfg.attention_dropout, rng, train
        )
        outs.append(out)
    return concat(outs, axis=1) @ params[f"{p}.wo"]


def ffn(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    """Position-wise feed-forward: two linear maps around a ReLU."""
    return (x @ w1 + b1).relu() @ w2 + b2


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
    mu = x.mean(axis=1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=1, keepdims=True)
    return centered * (var + LN_EPS).pow(-0.5) * gain + bias


def san_encode(
    x_in: Tensor,
    pad_mask: np.ndarray | None,
    cfg: SanConfig,
    params: dict[str, Parameter],
    rng: np.random.Generator | None = None,
    train: bool = False,
) -> Tensor:
    """Project inputs to d_model and run the attention/FFN stack.

    Each layer applies post-norm residual sublayers:
    x = LN(x + drop(MH(x))); x = LN(x + drop(FFN(x))).
    """
    n = x_in.data.shape[0]
    if n == 0:
        raise SansegError("cannot encode an empty sentence")
    mask = build_attention_mask(n, cfg.window, pad_mask)
    x = x_in @ params["san.in_proj.w"] + params["san.in_proj.b"]
    for layer in range(cfg.layers):
        p = f"san.layer{layer}"
        attn_out = multi_head(x, mask, cfg, params, layer, rng, train)
        x = layer_norm(
            x + dropout(attn_out, cfg.residual_dropout, rng, train),
            params[f"{p}.ln1.g"],
            params[f"{p}.ln1.b"],
        )
        h1 = dropout((x @ params[f"{p}.ffn.w1"] + params[f"{p}.ffn.b1"]).relu(),
                     cfg.relu_dropout, rng, train)
        ffn_out = h1 @ params[f"{p}.ffn.w2"] + params[f"{p}.ffn.b2"]
        x = layer_norm(
            x + dropout(ffn_out, cfg.residual_dropout, rng, train),
            params[f"{p}.ln2.g"],
            params[f"{p}.ln2.b"],
        )
    return x


def _lstm_direction(
    x_rows: list[Tensor],
    w: Tensor,
    u: Tensor,
    b: Tensor,
    hidden: int,
) -> list[Tensor]:
    """One direction of Eq.-style LSTM recursion over 1 x d rows; h0 = c0 = 0."""
    h = Tensor(np.zeros((1, hidden)))
    c = Tensor(np.zeros((1, hidden)))
    outs = []
    for x_t in x_rows:
        z = h @ w + x_t @ u + b
        gate_i = z[:, 0:hidden].sigmoid()
        gate_f = z[:, hidden : 2 * hidden].sigmoid()
        gate_o = z[:, 2 * hidden : 3 * hidden].sigmoid()
        c_tilde = z[:, 3 * hidden : 4 * hidden].tanh()
        c = gate_f * c + gate_i * c_tilde
        h = gate_o * c.tanh()
        outs.append(h)
    return outs


def bilstm_encode(
    x_in: Tensor,
    cfg: LstmConfig,
    params: dict[str, Parameter],
    rng: np.random.Generator | None = None,
    train: bool = False,
) -> Tensor:
    """Forward and backward LSTM passes, concatenated per position."""
    n = x_in.data.shape[0]
    if n == 0:
        raise SansegError("cannot encode an empty sentence")
    x = x_in
    for layer in range(cfg.layers):
        x = dropout(x, cfg.input_dropout, rng, train)
        rows = [x[i : i + 1, :] for i in range(n)]
        p = f"lstm.layer{layer}"
        fw = _lstm_direction(rows, params[f"{p}.fw.w"], params[f"{p}.fw.u"],
                             params[f"{p}.fw.b"], cfg.hidden)
        bw = _lstm_direction(rows[::-1], params[f"{p}.bw.w"], params[f"{p}.bw.u"],
                             params[f"{p}.bw.b"], cfg.hidden)
        bw = bw[::-1]
        x = concat([concat([f, b], axis=1) for f, b in zip(fw, bw)], axis=0)
    return x

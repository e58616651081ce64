"""Optimization: Adam with the warmup/decay schedule, SGD for the baseline,
gradient clipping, finite-difference gradient verification, and the epoch
loop with dev-set model selection."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Parameter, Tensor
from .config import RunConfig
from .corpus import build_vocab, make_batches
from .errors import SansegError
from .features import load_pretrained
from .lexicon import build_freq_table
from .metrics import prf
from .model import Segmenter


def noam_lr(step: int, d_model: int, warmup: int, factor: float = 1.0) -> float:
    """factor * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5).

    Rises linearly for `warmup` steps, then decays as inverse square root.
    """
    if step < 1:
        raise SansegError(f"learning-rate schedule needs step >= 1, got {step}")
    return factor * d_model**-0.5 * min(step**-0.5, step * warmup**-1.5)


@dataclass
class OptimizerState:
    kind: str  # adam | sgd
    d_model: int = 512
    warmup: int = 1000
    factor: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    sgd_lr: float = 0.001
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "OptimizerState":
        return cls(
            kind=cfg.resolved_optimizer(),
            d_model=cfg.hidden_dim,
            warmup=cfg.warmup_steps,
            factor=cfg.lr_factor,
            beta1=cfg.adam_beta1,
            beta2=cfg.adam_beta2,
            eps=cfg.adam_eps,
            sgd_lr=cfg.sgd_lr,
        )

    def current_lr(self) -> float:
        if self.kind == "sgd":
            return self.sgd_lr
        return noam_lr(max(self.step, 1), self.d_model, self.warmup, self.factor)


def _check_finite(name: str, grad: np.ndarray) -> None:
    if not np.all(np.isfinite(grad)):
        raise SansegError(f"non-finite gradient for parameter {name}")


def adam_step(
    params: list[Parameter], grads: dict[str, np.ndarray], state: OptimizerState
) -> None:
    """Bias-corrected Adam update at the scheduled learning rate."""
    state.step += 1
    lr = noam_lr(state.step, state.d_model, state.warmup, state.factor)
    b1, b2 = state.beta1, state.beta2
    for p in params:
        g = grads[p.name]
        _check_finite(p.name, g)
        if p.name not in state.m:
            state.m[p.name] = np.zeros_like(p.data)
            state.v[p.name] = np.zeros_like(p.data)
        m = state.m[p.name]
        v = state.v[p.name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1**state.step)
        v_hat = v / (1 - b2**state.step)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)


def sgd_step(params: list[Parameter], grads: dict[str, np.ndarray], lr: float) -> None:
    for p in params:
        g = grads[p.name]
        _check_finite(p.name, g)
        p.data = p.data - lr * g


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so the global norm is at most max_norm; returns
    the pre-clip norm. max_norm <= 0 disables clipping."""
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def total_loss(nlls: list[Tensor], squared_norm: Tensor | None, lam: float) -> Tensor:
    """Sum of sentence NLLs plus (lam/2)||Theta||^2."""
    if lam < 0:
        raise SansegError(f"l2 lambda must be >= 0, got {lam}")
    if not nlls:
        raise SansegError("total_loss needs at least one sentence loss")
    total = nlls[0]
    for nll in nlls[1:]:
        total = total + nll
    if lam > 0 and squared_norm is not None:
        total = total + (lam / 2.0) * squared_norm
    return total


# -- gradient verification ---------------------------------------------------


@dataclass
class ParamCheck:
    name: str
    entries_checked: int
    max_rel_err: float


@dataclass
class GradCheckReport:
    checks: list[ParamCheck]
    tolerance: float

    @property
    def max_rel_err(self) -> float:
        return max((c.max_rel_err for c in self.checks), default=0.0)

    @property
    def worst_param(self) -> str:
        if not self.checks:
            return "<none>"
        return max(self.checks, key=lambda c: c.max_rel_err).name

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance

    def format(self) -> str:
        lines = [f"{'parameter':32s} {'entries':>8s} {'max rel err':>12s}"]
        for c in self.checks:
            lines.append(f"{c.name:32s} {c.entries_checked:8d} {c.max_rel_err:12.3e}")
        status = "PASS" if self.passed else "FAIL"
        lines.append(
            f"overall max rel err {self.max_rel_err:.3e} "
            f"(worst: {self.worst_param}, tolerance {self.tolerance:.1e}) -> {status}"
        )
        return "\n".join(lines)


def _rel_err(analytic: float, numeric: float) -> float:
    scale = max(abs(analytic), abs(numeric))
    diff = abs(analytic - numeric)
    # below this scale the difference itself is the meaningful error
    if scale < 1e-4:
        return diff
    return diff / scale


def check_gradients(
    loss_fn,
    params: list[Parameter],
    tolerance: float = 1e-4,
    h: float = 1e-5,
    max_entries: int = 10_000,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    `loss_fn` must rebuild the forward graph and return a scalar Tensor, and
    must be deterministic across calls (dropout off, fixed sampling).
    Parameters larger than `max_entries` are spot-checked on a random subset.
    """
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(0))
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = {p.name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for p in params}
    checks = []
    for p in params:
        flat = p.data.reshape(-1)
        size = flat.size
        if size > max_entries:
            idx = rng.choice(size, size=max_entries, replace=False)
            idx.sort()
        else:
            idx = np.arange(size)
        worst = 0.0
        ana_flat = analytic[p.name].reshape(-1)
        for j in idx:
            orig = flat[j]
            flat[j] = orig + h
            up = float(loss_fn().data)
            flat[j] = orig - h
            down = float(loss_fn().data)
            flat[j] = orig
            numeric = (up - down) / (2 * h)
            worst = max(worst, _rel_err(float(ana_flat[j]), numeric))
        checks.append(ParamCheck(p.name, len(idx), worst))
    return GradCheckReport(checks, tolerance)


# -- training loop -------------------------------------------------------------


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_p: float
    dev_r: float
    dev_f1: float
    lr: float
    wall_time: float


@dataclass
class TrainResult:
    model: Segmenter
    history: list[EpochRecord]
    best_epoch: int
    best_f1: float


def evaluate_model(model: Segmenter, sentences) -> tuple[float, float, float]:
    gold = [sent.words() for sent in sentences]
    pred = [model.segment(sent.chars) for sent in sentences]
    return prf(gold, pred)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


def train_loop(
    train_sentences,
    dev_sentences,
    cfg: RunConfig,
    lexicon=None,
    provider=None,
    log=None,
) -> TrainResult:
    """Train a fresh model; keep the checkpoint with the best dev F1.

    Stops at max_epochs, after `patience` epochs without dev improvement, or
    once dev F1 reaches cfg.stop_f1 (when set). Fully deterministic for a
    fixed seed.
    """
    if not train_sentences or not dev_sentences:
        raise SansegError("training needs non-empty train and dev sets")
    vocab = build_vocab(train_sentences, cfg.min_freq, cfg.bigram_min_freq)
    freq_table = None
    if cfg.adaptation != "off":
        freq_table = build_freq_table(train_sentences, cfg.replacement_threshold)
    model = Segmenter(
        cfg, vocab, lexicon=lexicon, provider=provider,
        freq_table=freq_table, rng=_rng(cfg.seed, 0),
    )
    if cfg.pretrained_word_path and model.word_table is not None:
        load_pretrained(cfg.pretrained_word_path, model.word_table)
    drop_rng = _rng(cfg.seed, 1)
    replace_rng = _rng(cfg.seed, 2)
    opt = OptimizerState.from_config(cfg)
    trainable = model.trainable_params()

    history: list[EpochRecord] = []
    best_f1 = -1.0
    best_epoch = 0
    best_params = model.snapshot()
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        batches = make_batches(train_sentences, vocab, cfg.batch_size,
                               shuffle_seed=cfg.seed * 1_000_003 + epoch)
        epoch_loss = 0.0
        for batch in batches:
            model.zero_grads()
            loss = model.batch_loss(batch.sentences, train=True,
                                    drop_rng=drop_rng, replace_rng=replace_rng)
            if not np.isfinite(loss.data):
                raise SansegError(f"non-finite training loss at epoch {epoch}")
            loss.backward()
            grads = {p.name: (p.grad if p.grad is not None else np.zeros_like(p.data))
                     for p in trainable}
            clip_gradients(grads, cfg.clip_norm)
            if opt.kind == "adam":
                adam_step(trainable, grads, opt)
            else:
                sgd_step(trainable, grads, opt.sgd_lr)
                opt.step += 1
            epoch_loss += float(loss.data)
        dev_p, dev_r, dev_f1 = evaluate_model(model, dev_sentences)
        if not np.isfinite(dev_f1):
            raise SansegError(f"dev F1 is not finite at epoch {epoch}")
        record = EpochRecord(
            epoch=epoch,
            train_loss=epoch_loss / len(train_sentences),
            dev_p=dev_p,
            dev_r=dev_r,
            dev_f1=dev_f1,
            lr=opt.current_lr(),
            wall_time=time.perf_counter() - t0,
        )
        history.append(record)
        if log is not None:
            log(record)
        if dev_f1 > best_f1:
            best_f1 = dev_f1
            best_epoch = epoch
            best_params = model.snapshot()
            stale = 0
        else:
            stale += 1
        if cfg.stop_f1 is not None and dev_f1 >= cfg.stop_f1:
            break
        if stale >= cfg.patience:
            break
    model.restore(best_params)
    return TrainResult(model, history, best_epoch, best_f1)

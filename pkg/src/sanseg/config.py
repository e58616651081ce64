"""Run configuration: hyperparameter defaults, `key = value` config files,
environment overrides, and validation."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

from .errors import SansegError

ENV_PREFIX = "SANSEG_"

ENCODERS = ("san", "lstm")
ADAPTATION_MODES = ("off", "t", "t_b")
OPTIMIZERS = ("auto", "adam", "sgd")


@dataclass
class RunConfig:
    # embedding sizes
    char_emb_size: int = 50
    bigram_emb_size: int = 50
    word_emb_size: int = 200
    bert_emb_size: int = 768
    # encoder
    encoder: str = "san"
    san_layers: int = 2
    san_heads: int = 8
    san_hidden: int = 512
    san_inner: int = 2048
    relu_dropout: float = 0.1
    attention_dropout: float = 0.1
    residual_dropout: float = 0.1
    window_size: int | None = 5  # none = global attention
    lstm_layers: int = 1
    lstm_hidden: int = 200
    lstm_input_dropout: float = 0.1
    # lexicon adaptation
    adaptation: str = "off"
    replacement_threshold: float = 10.0
    max_word_len: int = 4
    # data
    batch_size: int = 32
    min_freq: int = 1
    bigram_min_freq: int = 1
    # optimization
    optimizer: str = "auto"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.98
    adam_eps: float = 1e-9
    warmup_steps: int = 1000
    lr_factor: float = 1.0
    sgd_lr: float = 0.001
    l2_lambda: float = 1e-8
    clip_norm: float = 5.0  # 0 disables clipping
    max_epochs: int = 100
    patience: int = 10
    seed: int = 1
    stop_f1: float | None = None  # stop once dev F1 reaches this value
    # decoding
    constrain_decode: bool = False
    # resource paths, recorded in the archive snapshot
    lexicon_path: str = ""
    pretrained_word_path: str = ""
    contextual_path: str = ""

    def resolved_optimizer(self) -> str:
        if self.optimizer != "auto":
            return self.optimizer
        return "adam" if self.encoder == "san" else "sgd"

    @property
    def hidden_dim(self) -> int:
        return self.san_hidden if self.encoder == "san" else 2 * self.lstm_hidden

    @property
    def char_repr_dim(self) -> int:
        """dim of x~: unigram (or contextual) embedding plus bigram embedding."""
        uni = self.bert_emb_size if self.contextual_path else self.char_emb_size
        return uni + self.bigram_emb_size

    @property
    def encoder_input_dim(self) -> int:
        extra = self.word_emb_size if self.adaptation != "off" else 0
        return self.char_repr_dim + extra

    def validate(self) -> None:
        if self.encoder not in ENCODERS:
            raise SansegError(f"encoder must be one of {ENCODERS}, got {self.encoder!r}")
        if self.adaptation not in ADAPTATION_MODES:
            raise SansegError(
                f"adaptation must be one of {ADAPTATION_MODES}, got {self.adaptation!r}"
            )
        if self.optimizer not in OPTIMIZERS:
            raise SansegError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        for key in (
            "char_emb_size", "bigram_emb_size", "word_emb_size", "bert_emb_size",
            "san_layers", "san_heads", "san_hidden", "san_inner",
            "lstm_layers", "lstm_hidden", "max_word_len", "batch_size",
            "min_freq", "bigram_min_freq", "warmup_steps", "max_epochs", "patience",
        ):
            if getattr(self, key) < 1:
                raise SansegError(f"{key} must be >= 1, got {getattr(self, key)}")
        for key in (
            "relu_dropout", "attention_dropout", "residual_dropout", "lstm_input_dropout",
        ):
            p = getattr(self, key)
            if not 0.0 <= p < 1.0:
                raise SansegError(f"{key} must be in [0, 1), got {p}")
        if self.san_hidden % self.san_heads != 0:
            raise SansegError(
                f"san_heads ({self.san_heads}) must divide san_hidden ({self.san_hidden})"
            )
        if self.window_size is not None and self.window_size < 0:
            raise SansegError(f"window_size must be >= 0 or none, got {self.window_size}")
        if self.encoder == "san" and self.char_repr_dim % 2 != 0:
            raise SansegError(
                "positional encoding needs an even char representation dim; "
                f"got {self.char_repr_dim}"
            )
        if self.replacement_threshold <= 0:
            raise SansegError(
                f"replacement_threshold must be > 0, got {self.replacement_threshold}"
            )
        for key in ("lr_factor", "sgd_lr"):
            if getattr(self, key) <= 0:
                raise SansegError(f"{key} must be > 0, got {getattr(self, key)}")
        for key in ("l2_lambda", "clip_norm"):
            if getattr(self, key) < 0:
                raise SansegError(f"{key} must be >= 0, got {getattr(self, key)}")
        if not 0.0 < self.adam_beta1 < 1.0 or not 0.0 < self.adam_beta2 < 1.0:
            raise SansegError("adam betas must lie in (0, 1)")
        if self.adam_eps <= 0:
            raise SansegError(f"adam_eps must be > 0, got {self.adam_eps}")
        if self.stop_f1 is not None and not 0.0 < self.stop_f1 <= 1.0:
            raise SansegError(f"stop_f1 must be in (0, 1], got {self.stop_f1}")


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_OPTIONAL_INT = {"window_size"}
_OPTIONAL_FLOAT = {"stop_f1"}
_BOOL_KEYS = {"constrain_decode"}


def _parse_value(key: str, text: str):
    text = text.strip()
    if key not in _FIELD_TYPES:
        raise SansegError(f"unknown config key {key!r}")
    if key in _OPTIONAL_INT:
        return None if text.lower() in ("none", "") else int(text)
    if key in _OPTIONAL_FLOAT:
        return None if text.lower() in ("none", "") else float(text)
    if key in _BOOL_KEYS:
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise SansegError(f"config key {key}: expected a boolean, got {text!r}")
    ftype = _FIELD_TYPES[key]
    try:
        if ftype == "int":
            return int(text)
        if ftype == "float":
            return float(text)
        return text
    except ValueError as exc:
        raise SansegError(f"config key {key}: cannot parse {text!r}: {exc}") from exc


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse flat `key = value` lines; `#` starts a comment."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise SansegError(f"{source}: line {lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        raw[key.strip()] = value.strip()
    return raw


def load_config_file(path) -> dict[str, str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read(), source=str(path))
    except OSError as exc:
        raise SansegError(f"cannot read config file {path}: {exc}") from exc


def env_overrides(environ=None) -> dict[str, str]:
    """Config overrides from SANSEG_<KEY> environment variables."""
    if environ is None:
        environ = os.environ
    found = {}
    for key in _FIELD_TYPES:
        env_key = ENV_PREFIX + key.upper()
        if env_key in environ:
            found[key] = environ[env_key]
    return found


def resolve_config(
    file_path=None,
    overrides: dict[str, str] | None = None,
    use_env: bool = True,
) -> RunConfig:
    """Defaults, then config file, then environment, then flags (flags win)."""
    cfg = RunConfig()
    layers: list[dict[str, str]] = []
    if file_path:
        layers.append(load_config_file(file_path))
    if use_env:
        layers.append(env_overrides())
    if overrides:
        layers.append(dict(overrides))
    for layer in layers:
        for key, value in layer.items():
            setattr(cfg, key, _parse_value(key, value))
    cfg.validate()
    return cfg


def config_to_text(cfg: RunConfig) -> str:
    """Snapshot every key as `key = value` text, in declaration order."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if value is None:
            value = "none"
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> RunConfig:
    """Rebuild a config from an archive snapshot (no environment applied)."""
    cfg = RunConfig()
    for key, value in parse_config_text(text, source="<archive config>").items():
        setattr(cfg, key, _parse_value(key, value))
    cfg.validate()
    return cfg

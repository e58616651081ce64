"""The segmentation model: character features, optional lexicon word
attention, a SAN or BiLSTM encoder, and the CRF scoring layer, with every
learned tensor collected in one named parameter map."""

from __future__ import annotations

import numpy as np

from . import crf as crf_ops
from .autodiff import Parameter, Tensor, stack
from .config import RunConfig
from .corpus import LABELS, PAD, Vocab, from_bmes
from .encoder import (
    LstmConfig,
    SanConfig,
    bilstm_encode,
    glorot,
    init_lstm_params,
    init_san_params,
    san_encode,
)
from .errors import SansegError
from .features import (
    ContextualStore,
    EmbeddingTable,
    augment,
    positional_encoding_matrix,
    sentence_char_inputs,
    word_context,
    word_repr_predict,
    word_repr_train,
)
from .lexicon import Lexicon, WordFreqTable, match_spans
from .metrics import spans_of


class Segmenter:
    """Assembles features + encoder + CRF behind train/decode entry points."""

    def __init__(
        self,
        cfg: RunConfig,
        vocab: Vocab,
        lexicon: Lexicon | None = None,
        provider: ContextualStore | None = None,
        freq_table: WordFreqTable | None = None,
        rng: np.random.Generator | None = None,
        word_items: list[str] | None = None,
        pos_items: list[str] | None = None,
    ):
        cfg.validate()
        if cfg.adaptation != "off" and lexicon is None:
            raise SansegError(f"adaptation mode {cfg.adaptation!r} needs a lexicon")
        if provider is not None and provider.dim != cfg.bert_emb_size:
            raise SansegError(
                f"contextual store dim {provider.dim} != bert_emb_size {cfg.bert_emb_size}"
            )
        self.cfg = cfg
        self.vocab = vocab
        self.lexicon = lexicon
        self.provider = provider
        self.freq_table = freq_table
        if rng is None:
            rng = np.random.Generator(np.random.PCG64(cfg.seed))

        self.uni_dim = provider.dim if provider is not None else cfg.char_emb_size
        self.char_dim = self.uni_dim + cfg.bigram_emb_size
        if cfg.encoder == "san" and self.char_dim % 2 != 0:
            raise SansegError(f"char representation dim must be even, got {self.char_dim}")
        self.input_dim = self.char_dim + (cfg.word_emb_size if cfg.adaptation != "off" else 0)

        self.params: dict[str, Parameter] = {}
        uni_items = [it for it, _ in sorted(vocab.unigrams.items(), key=lambda kv: kv[1])]
        bi_items = [it for it, _ in sorted(vocab.bigrams.items(), key=lambda kv: kv[1])]
        self.uni_table = EmbeddingTable("emb.unigram", uni_items, cfg.char_emb_size,
                                        rng, pad_item=PAD)
        self.bi_table = EmbeddingTable("emb.bigram", bi_items, cfg.bigram_emb_size,
                                       rng, pad_item=PAD)
        self.params["emb.unigram"] = self.uni_table.param
        self.params["emb.bigram"] = self.bi_table.param

        self.word_table: EmbeddingTable | None = None
        self.pos_table: EmbeddingTable | None = None
        if cfg.adaptation != "off":
            if word_items is None:
                word_items = sorted(lexicon.entries)
            if pos_items is None:
                pos_items = lexicon.pos_tags_t if cfg.adaptation == "t" else lexicon.pos_tags_tb
            # word vectors come from a pretrained file and stay frozen;
            # POS embeddings carry the transferable signal and are learned
            self.word_table = EmbeddingTable("emb.word", word_items, cfg.word_emb_size,
                                             rng, trainable=False)
            self.pos_table = EmbeddingTable("emb.pos", pos_items, cfg.word_emb_size, rng)
            self.params["emb.word"] = self.word_table.param
            self.params["emb.pos"] = self.pos_table.param
            self.params["wordattn.w"] = Parameter(
                "wordattn.w", glorot(rng, self.char_dim, cfg.word_emb_size)
            )

        if cfg.encoder == "san":
            self.san_cfg = SanConfig(
                layers=cfg.san_layers,
                heads=cfg.san_heads,
                d_model=cfg.san_hidden,
                d_inner=cfg.san_inner,
                window=cfg.window_size,
                relu_dropout=cfg.relu_dropout,
                attention_dropout=cfg.attention_dropout,
                residual_dropout=cfg.residual_dropout,
            )
            self.params.update(init_san_params(self.san_cfg, self.input_dim, rng))
        else:
            self.lstm_cfg = LstmConfig(
                layers=cfg.lstm_layers,
                hidden=cfg.lstm_hidden,
                input_dropout=cfg.lstm_input_dropout,
            )
            self.params.update(init_lstm_params(self.lstm_cfg, self.input_dim, rng))

        self.params.update(crf_ops.init_crf_params(cfg.hidden_dim, rng))

    # -- parameter bookkeeping -------------------------------------------------

    def trainable_params(self) -> list[Parameter]:
        return [p for p in self.params.values() if p.requires_grad]

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.grad = None

    def squared_param_norm(self) -> Tensor:
        """||Theta||^2 over trainable parameters, excluding PAD embedding rows
        and structurally unused transition cells."""
        total: Tensor | None = None
        trans_mask = Tensor(crf_ops.valid_transition_cells().astype(np.float64))
        for name, p in self.params.items():
            if not p.requires_grad:
                continue
            if name in ("emb.unigram", "emb.bigram"):
                rows = p[1:, :]  # PAD row is index 0
                term = (rows * rows).sum()
            elif name == "crf.transitions":
                masked = p * trans_mask
                term = (masked * masked).sum()
            else:
                term = (p * p).sum()
            total = term if total is None else total + term
        return total if total is not None else Tensor(0.0)

    # -- forward passes -----------------------------------------------------------

    def _gold_span_keys(self, gold_words) -> set[tuple[int, int]]:
        return {(s, e - 1) for s, e in spans_of(gold_words)}

    def sentence_repr(
        self,
        chars,
        gold_words=None,
        train: bool = False,
        drop_rng: np.random.Generator | None = None,
        replace_rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Per-character encoder inputs x (n x input_dim)."""
        n = len(chars)
        if n == 0:
            raise SansegError("cannot represent an empty sentence")
        x = sentence_char_inputs(chars, self.uni_table, self.bi_table, self.vocab,
                                 self.provider)
        if self.cfg.encoder == "san":
            x = x + Tensor(positional_encoding_matrix(n, self.char_dim))
        if self.cfg.adaptation == "off":
            return x

        mode = self.cfg.adaptation
        per_pos = match_spans(chars, self.lexicon, self.cfg.max_word_len)
        # one replacement draw per gold-coinciding span, shared by all of the
        # span's characters; draws happen in (begin, end) order for determinism
        rb_draws: dict[tuple[int, int], float] = {}
        if train:
            if replace_rng is None:
                raise SansegError("training with adaptation needs a replacement rng")
            if self.freq_table is None:
                raise SansegError("training with adaptation needs a word frequency table")
            gold_keys = self._gold_span_keys(gold_words) if gold_words is not None else set()
            uniq = sorted({(s.begin, s.end) for spans in per_pos for s in spans})
            for key in uniq:
                if key in gold_keys:
                    rb_draws[key] = float(replace_rng.random())
        rows = []
        for i in range(n):
            x_i = x[i, :]
            reprs = []
            for span in per_pos[i]:
                key = (span.begin, span.end)
                if train and key in rb_draws:
                    vec, _ = word_repr_train(
                        span, i, span.pos, self.freq_table, replace_rng, mode,
                        self.word_table, self.pos_table, rb=rb_draws[key],
                    )
                else:
                    vec = word_repr_predict(span, i, mode, self.word_table, self.pos_table)
                reprs.append(vec)
            h, _ = word_context(x_i, reprs, self.params["wordattn.w"])
            rows.append(augment(x_i, h))
        return stack(rows, axis=0)

    def encode(
        self,
        chars,
        gold_words=None,
        train: bool = False,
        drop_rng: np.random.Generator | None = None,
        replace_rng: np.random.Generator | None = None,
    ) -> Tensor:
        x = self.sentence_repr(chars, gold_words, train, drop_rng, replace_rng)
        if self.cfg.encoder == "san":
            return san_encode(x, None, self.san_cfg, self.params, drop_rng, train)
        return bilstm_encode(x, self.lstm_cfg, self.params, drop_rng, train)

    def emissions(
        self,
        chars,
        gold_words=None,
        train: bool = False,
        drop_rng: np.random.Generator | None = None,
        replace_rng: np.random.Generator | None = None,
    ) -> Tensor:
        hidden = self.encode(chars, gold_words, train, drop_rng, replace_rng)
        return crf_ops.emission_scores(
            hidden, self.params["crf.emission.w"], self.params["crf.emission.b"]
        )

    def sentence_nll(
        self,
        sent,
        train: bool = False,
        drop_rng: np.random.Generator | None = None,
        replace_rng: np.random.Generator | None = None,
    ) -> Tensor:
        gold_words = sent.words() if self.cfg.adaptation != "off" else None
        em = self.emissions(sent.chars, gold_words, train, drop_rng, replace_rng)
        return crf_ops.nll(em, self.params["crf.transitions"], sent.label_ids())

    def batch_loss(
        self,
        sentences,
        train: bool = True,
        drop_rng: np.random.Generator | None = None,
        replace_rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Summed NLL plus the L2 term (lambda/2)||Theta||^2."""
        total: Tensor | None = None
        for sent in sentences:
            nll = self.sentence_nll(sent, train, drop_rng, replace_rng)
            total = nll if total is None else total + nll
        if total is None:
            raise SansegError("batch_loss needs at least one sentence")
        lam = self.cfg.l2_lambda
        if lam > 0:
            total = total + (lam / 2.0) * self.squared_param_norm()
        return total

    # -- decoding -----------------------------------------------------------------

    def decode_labels(self, chars) -> list[str]:
        """Viterbi labels for one sentence (dropout off, deterministic)."""
        em = self.emissions(chars, train=False).data
        trans = self.params["crf.transitions"].data
        if self.cfg.constrain_decode:
            trans = crf_ops.constrained_transitions(trans)
        path, _ = crf_ops.viterbi(em, trans)
        return [LABELS[i] for i in path]

    def segment(self, chars) -> list[str]:
        return from_bmes(chars, self.decode_labels(chars))

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        for name, data in snapshot.items():
            self.params[name].data = data.copy()

"""Command-line entry points: train, segment, eval, match, gradcheck.

Exit codes: 0 success, 1 user error (bad input, bad config), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

import numpy as np

from .archive import load_archive, save_archive
from .config import resolve_config
from .corpus import read_segmented_corpus
from .errors import SansegError
from .features import ContextualStore, load_pretrained
from .lexicon import load_lexicon, match_spans, span_tag
from .metrics import corpus_counts, entity_precision, f1_by_length, format_report
from .model import Segmenter
from .train import EpochRecord, check_gradients, train_loop


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage problems are user errors (exit 1), not internal errors
        raise SansegError(message)


def _parse_overrides(pairs) -> dict[str, str]:
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise SansegError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def _load_resources(cfg):
    lexicon = None
    provider = None
    if cfg.adaptation != "off":
        if not cfg.lexicon_path:
            raise SansegError(
                f"adaptation mode {cfg.adaptation!r} needs lexicon_path in the config"
            )
        lexicon = load_lexicon(cfg.lexicon_path, cfg.max_word_len)
    if cfg.contextual_path:
        provider = ContextualStore.open(cfg.contextual_path)
    return lexicon, provider


def history_line(record: EpochRecord, timing: bool = False) -> str:
    """One JSON history record; wall time is null unless timing is enabled,
    keeping seeded runs byte-identical."""
    return json.dumps(
        {
            "epoch": record.epoch,
            "train_loss": record.train_loss,
            "dev_p": record.dev_p,
            "dev_r": record.dev_r,
            "dev_f1": record.dev_f1,
            "lr": record.lr,
            "wall_time": record.wall_time if timing else None,
        },
        ensure_ascii=False,
    )


def cmd_train(args) -> int:
    cfg = resolve_config(args.config, _parse_overrides(args.set))
    train_sents = read_segmented_corpus(args.train)
    dev_sents = read_segmented_corpus(args.dev)
    lexicon, provider = _load_resources(cfg)

    def log(record: EpochRecord) -> None:
        print(
            f"epoch {record.epoch:4d}  loss {record.train_loss:10.4f}  "
            f"dev P {record.dev_p:.4f} R {record.dev_r:.4f} F1 {record.dev_f1:.4f}  "
            f"lr {record.lr:.6f}",
            file=sys.stderr,
        )

    result = train_loop(train_sents, dev_sents, cfg, lexicon=lexicon,
                        provider=provider, log=log if not args.quiet else None)
    save_archive(args.out, result.model)
    history_path = args.history or (str(args.out) + ".history.jsonl")
    with open(history_path, "w", encoding="utf-8") as fh:
        for record in result.history:
            fh.write(history_line(record, timing=args.timing) + "\n")
    print(f"best dev F1 {result.best_f1:.4f} at epoch {result.best_epoch}; "
          f"archive: {args.out}; history: {history_path}")
    return 0


def _iter_lines(path):
    if path == "-":
        for line in sys.stdin:
            yield line.rstrip("\r\n")
    else:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    yield line.rstrip("\r\n")
        except OSError as exc:
            raise SansegError(f"cannot read {path}: {exc}") from exc


def _load_model(args) -> Segmenter:
    lexicon = None
    if getattr(args, "lexicon", None):
        # explicit lexicon path wins over the one recorded in the archive
        lexicon = load_lexicon(args.lexicon)
    return load_archive(args.archive, lexicon=lexicon)


def cmd_segment(args) -> int:
    model = _load_model(args)
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        for line in _iter_lines(args.input):
            if not line:
                out.write("\n")
                continue
            out.write(" ".join(model.segment(tuple(line))) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def run_eval(segment_fn, gold_sentences, bucket_width=None, entities=None) -> str:
    """Score a segmenter callable against gold sentences; returns the report."""
    gold_words = [s.words() for s in gold_sentences]
    pred_words = [segment_fn(s.chars) for s in gold_sentences]
    counts = corpus_counts(gold_words, pred_words)
    buckets = f1_by_length(gold_words, pred_words, bucket_width) if bucket_width else None
    ents = entity_precision(gold_words, pred_words, entities) if entities else None
    return format_report(counts, buckets, ents)


def cmd_eval(args) -> int:
    model = _load_model(args)
    gold = read_segmented_corpus(args.gold)
    entities = None
    if args.entities:
        entities = [w for w in args.entities.split(",") if w]
    elif args.entities_file:
        entities = [line for line in _iter_lines(args.entities_file) if line]
    report = run_eval(model.segment, gold, bucket_width=args.bucket_width,
                      entities=entities)
    print(report, end="")
    return 0


def cmd_match(args) -> int:
    lexicon = load_lexicon(args.lexicon, args.max_word_len)
    lines = [args.text] if args.text else list(_iter_lines(args.input or "-"))
    first = True
    for line in lines:
        if not line:
            continue
        if not first:
            print()
        first = False
        chars = tuple(line)
        per_pos = match_spans(chars, lexicon, args.max_word_len)
        for i, ch in enumerate(chars):
            if not per_pos[i]:
                print(f"{i}\t{ch}\tno matches")
                continue
            shown = "; ".join(
                f"[{s.begin},{s.end}] {s.word} t={span_tag(s, i, 't')} "
                f"t_b={span_tag(s, i, 't_b')}"
                for s in per_pos[i]
            )
            print(f"{i}\t{ch}\t{shown}")
    return 0


_GRADCHECK_SAMPLE = ["ab c", "abc d", "a bc", "cc ab d"]


def cmd_gradcheck(args) -> int:
    overrides = _parse_overrides(args.set)
    # dropout must be off so the loss is a deterministic function of theta
    for key in ("relu_dropout", "attention_dropout", "residual_dropout",
                "lstm_input_dropout"):
        overrides.setdefault(key, "0")
    cfg = resolve_config(args.config, overrides)
    from .corpus import LabeledSentence, build_vocab
    from .lexicon import build_freq_table

    if args.train:
        sentences = read_segmented_corpus(args.train)[: args.sentences]
    else:
        sentences = [LabeledSentence.from_words(line.split()) for line in _GRADCHECK_SAMPLE]
    lexicon, provider = _load_resources(cfg)

    vocab = build_vocab(sentences, cfg.min_freq, cfg.bigram_min_freq)
    freq = build_freq_table(sentences, cfg.replacement_threshold) \
        if cfg.adaptation != "off" else None
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    model = Segmenter(cfg, vocab, lexicon=lexicon, provider=provider,
                      freq_table=freq, rng=rng)
    if cfg.pretrained_word_path and model.word_table is not None:
        load_pretrained(cfg.pretrained_word_path, model.word_table)

    def loss_fn():
        replace = np.random.Generator(np.random.PCG64(cfg.seed + 7))
        return model.batch_loss(sentences, train=True, drop_rng=None,
                                replace_rng=replace)

    report = check_gradients(loss_fn, model.trainable_params(),
                             tolerance=args.tolerance)
    print(report.format())
    return 0 if report.passed else 1


def build_parser() -> _Parser:
    parser = _Parser(prog="sanseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and save its archive")
    p.add_argument("--train", required=True, help="segmented training corpus")
    p.add_argument("--dev", required=True, help="segmented development corpus")
    p.add_argument("--out", required=True, help="output archive path")
    p.add_argument("--history", help="history file path (default: <out>.history.jsonl)")
    p.add_argument("--config", help="config file (key = value lines)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="config override; wins over file and environment")
    p.add_argument("--timing", action="store_true",
                   help="record real per-epoch wall time in the history file")
    p.add_argument("--quiet", action="store_true", help="no per-epoch progress")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("segment", help="segment raw text lines")
    p.add_argument("archive", help="trained model archive")
    p.add_argument("--input", default="-", help="input text file (default stdin)")
    p.add_argument("--output", help="output file (default stdout)")
    p.add_argument("--lexicon", help="lexicon file (overrides the recorded path)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="score a model against a gold corpus")
    p.add_argument("archive", help="trained model archive")
    p.add_argument("gold", help="gold segmented corpus")
    p.add_argument("--bucket-width", type=int, help="sentence-length bucket width")
    p.add_argument("--entities", help="comma-separated target words")
    p.add_argument("--entities-file", help="file with one target word per line")
    p.add_argument("--lexicon", help="lexicon file (overrides the recorded path)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("match", help="show lexicon span matches per character")
    p.add_argument("lexicon", help="word<TAB>POS lexicon file")
    p.add_argument("text", nargs="?", help="text to match (default: read --input)")
    p.add_argument("--input", help="input text file, one sentence per line")
    p.add_argument("--max-word-len", type=int, default=4)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--train", help="corpus to draw check sentences from")
    p.add_argument("--sentences", type=int, default=4,
                   help="number of sentences to check on")
    p.add_argument("--config", help="config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SansegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help exits 0
        code = exc.code if isinstance(exc.code, int) else 0
        return 0 if code == 0 else 1
    except Exception:
        traceback.print_exc()
        print("internal error", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

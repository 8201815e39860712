"""Command-line interface.

Subcommands: train, tag, evaluate, synth, embed-train, embed-concat,
coverage, pseudo-corpus.  Config files are flat ``key = value`` text;
command-line flags override config keys, and the ``SEQTAG_SEED``
environment variable overrides the seed from either source.

Exit codes: 0 success, 2 data error, 3 config error, 4 numeric abort.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields

import numpy as np

from .corpus import Dataset, Sentence, TagScheme, Token, parse_conll, write_conll
from .embeddings import (
    assemble,
    build_vocabulary,
    coverage_report,
    load_embedding_table,
    pseudo_corpus_from_manifest,
    write_embedding_table,
)
from .errors import ConfigError, DataError, NumericError, SeqtagError
from .evaluation import evaluate, report, to_mapping
from .glove import GloveParams, train_glove
from .synth import SynthSpec, default_spec, generate
from .training import (
    Checkpoint,
    TrainConfig,
    derive_scheme,
    load_checkpoint,
    save_checkpoint,
    tag,
    train,
)

EXIT_DATA = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4


def read_kv_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` config text; '#' starts a comment line."""
    out: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
                out[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return out


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def build_train_config(file_values: dict[str, str], overrides: dict) -> TrainConfig:
    kwargs: dict = {}
    valid = {f.name: f for f in fields(TrainConfig)}
    for key, text in file_values.items():
        if key not in valid:
            raise ConfigError(f"unknown config key {key!r}")
        ftype = valid[key].type
        try:
            if key == "embeddings":
                kwargs[key] = tuple(p for p in text.split(",") if p.strip())
            elif ftype == "bool":
                kwargs[key] = _parse_bool(text)
            elif ftype == "int":
                kwargs[key] = int(text)
            elif ftype == "float":
                kwargs[key] = float(text)
            else:
                kwargs[key] = text
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
    for key, value in overrides.items():
        if value is not None:
            kwargs[key] = value
    if "SEQTAG_SEED" in os.environ:
        try:
            kwargs["seed"] = int(os.environ["SEQTAG_SEED"])
        except ValueError:
            raise ConfigError("SEQTAG_SEED must be an integer") from None
    try:
        config = TrainConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    config.validate()
    return config


def _load_conll(path: str, scheme: TagScheme, **kw) -> Dataset:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_conll(fh, scheme, **kw)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def _scheme_from_file(path: str) -> TagScheme:
    """Derive the tag scheme by scanning a gold CoNLL file."""
    classes: set[str] = set()
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                if len(parts) >= 2 and parts[1] != "O" and "-" in parts[1]:
                    classes.add(parts[1].split("-", 1)[1])
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not classes:
        raise DataError(f"{path} contains no entity classes")
    return TagScheme(tuple(sorted(classes)))


def cmd_train(args) -> int:
    file_values = read_kv_file(args.config) if args.config else {}
    overrides = dict(
        variant=args.variant,
        epochs=args.epochs,
        seed=args.seed,
        learning_rate=args.learning_rate,
        dropout=args.dropout,
        split_ratio=args.split_ratio,
        use_char=args.use_char,
        use_features=args.use_features,
        init=args.init,
    )
    if args.embeddings:
        overrides["embeddings"] = tuple(args.embeddings)
    config = build_train_config(file_values, overrides)

    scheme = _scheme_from_file(args.train)
    data = _load_conll(args.train, scheme)

    def progress(epoch, loss, f1):
        print(f"epoch {epoch:3d}  train loss {loss:8.4f}  validation F1 {f1:.4f}", flush=True)

    ckpt = train(config, data, scheme, progress=progress)
    print(f"best epoch {ckpt.best_epoch} (validation F1 {max(ckpt.history):.4f})")
    save_checkpoint(ckpt, args.model)
    print(f"checkpoint written to {args.model}")

    if args.test:
        test_data = _load_conll(args.test, scheme)
        pred = tag(ckpt, test_data)
        metrics = evaluate(test_data, pred, scheme)
        print(report(metrics))
    return 0


def cmd_tag(args) -> int:
    ckpt = load_checkpoint(args.model)
    scheme = ckpt.scheme
    if args.raw_text:
        sentences = []
        with open(args.input, encoding="utf-8") as fh:
            for line in fh:
                words = line.split()
                if words:
                    sentences.append(Sentence(tuple(Token(w) for w in words)))
        data = Dataset(tuple(sentences))
    else:
        data = _load_conll(args.input, scheme)
    tagged = tag(ckpt, data)
    text = write_conll(tagged)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_evaluate(args) -> int:
    scheme = _scheme_from_file(args.gold)
    gold = _load_conll(args.gold, scheme)
    pred = _load_conll(args.pred, scheme, warn_invalid_gold=False)
    metrics = evaluate(gold, pred, scheme)
    print(report(metrics))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(to_mapping(metrics), fh, indent=2)
            fh.write("\n")
    return 0


def _synth_spec_from_file(path: str | None, seed: int | None) -> SynthSpec:
    overrides: dict = {}
    if path:
        values = read_kv_file(path)
        casts = {
            "density": float, "n_train": int, "n_test": int,
            "head_fraction": float, "train_fraction": float,
            "test_overlap": float, "seed": int,
        }
        for key, text in values.items():
            if key == "length_range":
                lo, _, hi = text.partition(",")
                overrides[key] = (int(lo), int(hi))
            elif key in casts:
                overrides[key] = casts[key](text)
            else:
                raise ConfigError(f"unknown synth spec key {key!r}")
    if seed is not None:
        overrides["seed"] = seed
    return default_spec(**overrides)


def cmd_synth(args) -> int:
    spec = _synth_spec_from_file(args.spec, args.seed)
    train_data, test_data = generate(spec)
    with open(args.out_train, "w", encoding="utf-8") as fh:
        fh.write(write_conll(train_data))
    with open(args.out_test, "w", encoding="utf-8") as fh:
        fh.write(write_conll(test_data))
    print(f"wrote {len(train_data)} train and {len(test_data)} test sentences")
    return 0


def _read_token_lines(path: str) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        return [line.split() for line in fh if line.strip()]


def cmd_embed_train(args) -> int:
    corpus = _read_token_lines(args.corpus)
    params = GloveParams(
        dim=args.dim,
        window=args.window,
        x_max=args.x_max,
        alpha=args.alpha,
        learning_rate=args.learning_rate,
        iterations=args.iterations,
        min_count=args.min_count,
        seed=args.seed,
    )
    table = train_glove(corpus, params)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_embedding_table(table, fh)
    print(f"trained {len(table)} vectors of dim {table.dim} -> {args.out}")
    return 0


def _vocab_from_conll(path: str):
    surfaces = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.strip():
                surfaces.append(line.split("\t")[0])
    if not surfaces:
        raise DataError(f"{path} contains no tokens")
    return build_vocabulary(surfaces)


def cmd_embed_concat(args) -> int:
    vocab = _vocab_from_conll(args.vocab_from)
    tables = []
    for path in args.tables:
        with open(path, encoding="utf-8") as fh:
            tables.append(load_embedding_table(fh))
    combined = assemble(vocab, tables, args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_embedding_table(combined, fh)
    stats = coverage_report(vocab, combined)
    print(
        f"assembled {len(combined)} vectors of dim {combined.dim}; "
        f"coverage {stats.percentage:.2%}"
    )
    return 0


def cmd_coverage(args) -> int:
    vocab = _vocab_from_conll(args.vocab_from)
    tables = []
    for path in args.tables:
        with open(path, encoding="utf-8") as fh:
            tables.append(load_embedding_table(fh))
    combined = assemble(vocab, tables, seed=0)
    stats = coverage_report(vocab, combined)
    print(f"{stats.covered}/{stats.total_words} words covered ({stats.percentage:.2%})")
    return 0


def cmd_pseudo_corpus(args) -> int:
    count = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for sentence in pseudo_corpus_from_manifest(args.manifest):
            fh.write(" ".join(sentence) + "\n")
            count += 1
    print(f"wrote {count} pseudo-sentences to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqtag", description="Sequence-labeling toolkit for health-domain NER"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a tagger and write a checkpoint")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--train", required=True, help="gold CoNLL training file")
    p.add_argument("--test", help="optional gold CoNLL test file to score after training")
    p.add_argument("--model", default="model.ckpt", help="checkpoint output path")
    p.add_argument("--variant", choices=("crf", "blstm", "blstm_crf"))
    p.add_argument("--embeddings", nargs="*", help="pretrained embedding table paths")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--split-ratio", dest="split_ratio", type=float)
    p.add_argument("--use-char", dest="use_char", action="store_true", default=None)
    p.add_argument("--no-char", dest="use_char", action="store_false")
    p.add_argument("--use-features", dest="use_features", action="store_true", default=None)
    p.add_argument("--init", choices=("uniform", "scaled"))
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("tag", help="tag sentences with a trained checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="output path (default: stdout)")
    p.add_argument(
        "--raw-text", action="store_true",
        help="treat the input as plain text, one whitespace-tokenized sentence per line",
    )
    p.set_defaults(fn=cmd_tag)

    p = sub.add_parser("evaluate", help="strict entity-level scoring")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--json", help="also write machine-readable metrics here")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic gold corpus")
    p.add_argument("--spec", help="flat key = value synth spec file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("embed-train", help="train word vectors on a token corpus")
    p.add_argument("--corpus", required=True, help="text file, one sentence per line")
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--x-max", dest="x_max", type=float, default=100.0)
    p.add_argument("--alpha", type=float, default=0.75)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=0.05)
    p.add_argument("--iterations", type=int, default=50)
    p.add_argument("--min-count", dest="min_count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_embed_train)

    p = sub.add_parser("embed-concat", help="concatenate tables over a corpus vocabulary")
    p.add_argument("--tables", nargs="+", required=True)
    p.add_argument("--vocab-from", dest="vocab_from", required=True, help="CoNLL file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_embed_concat)

    p = sub.add_parser("coverage", help="pretrained-vector coverage of a vocabulary")
    p.add_argument("--tables", nargs="+", required=True)
    p.add_argument("--vocab-from", dest="vocab_from", required=True, help="CoNLL file")
    p.set_defaults(fn=cmd_coverage)

    p = sub.add_parser("pseudo-corpus", help="build pseudo-sentences from CSV tables")
    p.add_argument("--manifest", required=True, help="lines of table_path<TAB>column_name")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_pseudo_corpus)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, SeqtagError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

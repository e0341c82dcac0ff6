"""Operator entry point: train, predict, evaluate, synth, inspect, convert.

Every training flag has a config-file equivalent (flat key=value, loaded via
--config); explicit CLI flags override config-file values. Exit codes:
0 success, 1 usage error, 2 data error. The JMIE_LOG environment variable
sets log verbosity (DEBUG/INFO/WARNING/ERROR).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

from .autodiff import BadCheckpoint
from .corpus import (
    AnnotationError,
    InvalidSpec,
    ParseError,
    SynthSpec,
    TooFewDocuments,
    corpus_stats,
    generate_synthetic_corpus,
    inject_concept_noise,
    load_corpus_dir,
    save_corpus_dir,
)
from .decoders import JointModel
from .encoder import BadMagic, MissingEmbeddingEntry, TokenCountMismatch
from .evaluation import CorpusMismatch, EvalReport, compare_reports, evaluate
from .pipeline import predict_pipeline
from .trainer import InvalidConfig, TrainConfig, load_model_dir, train

logger = logging.getLogger("jmie.cli")

DATA_ERRORS = (
    ParseError,
    AnnotationError,
    InvalidSpec,
    BadMagic,
    BadCheckpoint,
    CorpusMismatch,
    TooFewDocuments,
    TokenCountMismatch,
    MissingEmbeddingEntry,
    FileNotFoundError,
    NotADirectoryError,
)


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# flag name -> TrainConfig field
CONFIG_FLAGS = {
    "arch": "arch",
    "encoder": "encoder_mode",
    "embeddings": "embeddings",
    "emb_dim": "emb_dim",
    "hidden": "hidden",
    "lr": "lr",
    "batch_size": "batch_size",
    "concept_emb": "concept_emb",
    "assertion_emb": "assertion_emb",
    "relation_hidden": "relation_hidden",
    "relation_mode": "relation_mode",
    "dropout": "dropout",
    "weight_decay": "weight_decay",
    "epochs": "max_epochs",
    "patience": "patience",
    "dev_fraction": "dev_fraction",
    "seed": "seed",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--arch", choices=("joint", "pipeline"))
    p.add_argument("--encoder", choices=("lstm", "precomputed", "precomputed+lstm"))
    p.add_argument("--embeddings", help="GloVe text file or JEMB1 file, per --encoder")
    p.add_argument("--emb-dim", type=int, dest="emb_dim")
    p.add_argument("--hidden", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--concept-emb", type=int, dest="concept_emb")
    p.add_argument("--assertion-emb", type=int, dest="assertion_emb")
    p.add_argument("--relation-hidden", type=int, dest="relation_hidden")
    p.add_argument("--relation-mode", choices=("softmax", "sigmoid"), dest="relation_mode")
    p.add_argument("--dropout", type=float)
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--dev-fraction", type=float, dest="dev_fraction")
    p.add_argument("--seed", type=int)
    p.add_argument("--freeze-embeddings", action="store_true", default=None,
                   dest="freeze_embeddings")
    p.add_argument("--no-teacher-forcing", action="store_false", default=None,
                   dest="teacher_forcing")
    p.add_argument("--no-constrain-bio", action="store_false", default=None,
                   dest="constrain_bio")
    p.add_argument("--unsafe-hparams", action="store_true", default=None,
                   dest="unsafe_hparams")


def _config_from_args(args) -> TrainConfig:
    config = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    overrides = {}
    for flag, field in CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    for field in ("freeze_embeddings", "teacher_forcing", "constrain_bio", "unsafe_hparams"):
        value = getattr(args, field, None)
        if value is not None:
            overrides[field] = value
    if overrides.get("encoder_mode") == "lstm":
        overrides["encoder_mode"] = "trainable_lstm"
    elif config.encoder_mode == "lstm":
        config = dataclasses.replace(config, encoder_mode="trainable_lstm")
    return dataclasses.replace(config, **overrides)


def build_parser() -> _Parser:
    parser = _Parser(prog="jmie", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a joint or pipeline model")
    p.add_argument("--train-dir", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)

    p = sub.add_parser("predict", help="annotate documents with a trained model")
    p.add_argument("--model", required=True, help="directory written by train")
    p.add_argument("--test-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", help="JEMB1 file for precomputed encoder modes")
    p.add_argument("--inject-gold", choices=("concept", "assertion"), action="append",
                   default=[], help="pipeline only: feed reference inputs to later stages")
    p.add_argument("--debug-scores", action="store_true")
    p.add_argument("--no-constrain-bio", action="store_false", dest="constrain_bio",
                   default=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("evaluate", help="score predictions against gold")
    p.add_argument("--gold")
    p.add_argument("--pred")
    p.add_argument("--protocol", choices=("joint", "independent"), default="joint")
    p.add_argument("--out")
    p.add_argument("--compare", nargs=2, metavar=("A.json", "B.json"),
                   help="print signed F1 deltas (A - B) instead of scoring")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("synth", help="generate a deterministic synthetic corpus")
    p.add_argument("--sentences", type=int, default=200)
    p.add_argument("--sentences-per-doc", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0,
                   help="fraction of concepts with a flipped type")
    p.add_argument("--out", required=True)

    p = sub.add_parser("inspect", help="print corpus statistics")
    p.add_argument("--dir", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("convert", help="parse and re-serialize annotation files")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    return parser


def cmd_train(args) -> int:
    config = _config_from_args(args)
    corpus = load_corpus_dir(args.train_dir)
    _, record = train(corpus, config, out_dir=args.out)
    print(EvalReport.from_dict(record.dev_report).format_table(), end="")
    print(f"best epoch: {record.best_epoch}")
    return 0


def cmd_predict(args) -> int:
    config, models = load_model_dir(args.model, embeddings=args.embeddings)
    docs = load_corpus_dir(args.test_dir, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    debug_path = os.path.join(args.out, "debug_scores.jsonl")
    if isinstance(models, JointModel):
        if args.inject_gold:
            raise UsageError("--inject-gold applies to the pipeline baseline only")
        sink = None
        debug_file = None
        if args.debug_scores:
            debug_file = open(debug_path, "w", encoding="utf-8")
            sink = lambda entry: debug_file.write(json.dumps(entry, sort_keys=True) + "\n")
        try:
            preds = [
                models.predict_document(d, constrain_bio=args.constrain_bio, debug_sink=sink)
                for d in docs
            ]
        finally:
            if debug_file is not None:
                debug_file.close()
    else:
        if args.debug_scores:
            logger.warning("--debug-scores dumps joint-model scores only; ignored for pipeline")
        preds = predict_pipeline(models, docs, inject_gold=set(args.inject_gold))
    save_corpus_dir(preds, args.out)
    print(f"wrote {len(preds)} annotated documents to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    if args.compare:
        with open(args.compare[0], encoding="utf-8") as f:
            a = EvalReport.from_json(f.read())
        with open(args.compare[1], encoding="utf-8") as f:
            b = EvalReport.from_json(f.read())
        print(compare_reports(a, b), end="")
        return 0
    if not args.gold or not args.pred:
        raise UsageError("evaluate needs --gold and --pred (or --compare)")
    gold = load_corpus_dir(args.gold, jobs=args.jobs)
    # system outputs may carry category-invalid relations; they score as FP
    pred = load_corpus_dir(args.pred, jobs=args.jobs, gold=False)
    report = evaluate(pred, gold, protocol=args.protocol)
    print(report.format_table(), end="")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as f:
            f.write(report.to_json())
        with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as f:
            f.write(report.format_table())
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(n_sentences=args.sentences, sentences_per_doc=args.sentences_per_doc)
    corpus = generate_synthetic_corpus(spec, seed=args.seed)
    if args.noise:
        corpus = inject_concept_noise(corpus, rate=args.noise, seed=args.seed)
    save_corpus_dir(corpus, args.out)
    stats = corpus_stats(corpus)
    print(f"wrote {stats['documents']} documents ({stats['concepts']} concepts) to {args.out}")
    return 0


def cmd_inspect(args) -> int:
    docs = load_corpus_dir(args.dir, jobs=args.jobs)
    stats = corpus_stats(docs)
    rows = (
        ("#Doc", stats["documents"]),
        ("#Concept", stats["concepts"]),
        ("#Assertion", stats["assertions"]),
        ("#Relation", stats["relations"]),
    )
    width = max(len(f"{count:,}") for _, count in rows)
    for label, count in rows:
        print(f"{label:<11}{count:>{width},}")
    return 0


def cmd_convert(args) -> int:
    docs = load_corpus_dir(args.in_dir, jobs=args.jobs)
    save_corpus_dir(docs, args.out)
    print(f"converted {len(docs)} documents to {args.out}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
    "inspect": cmd_inspect,
    "convert": cmd_convert,
}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("JMIE_LOG", "WARNING").upper())
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except (UsageError, InvalidConfig) as exc:
        print(f"jmie: usage error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"jmie: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

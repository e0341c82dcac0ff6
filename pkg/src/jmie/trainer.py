"""Batched training loops for the joint model and the pipeline baseline.

Determinism contract: (seed, config, corpus) fully determines every logged
number, the final parameters, and the checkpoint bytes. All randomness flows
through numpy Generators keyed by the run seed (parameter init, batch order)
or the counter-based dropout streams (seed, step, sentence serial).
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import AdamW, Tape, backward, load_checkpoint, save_checkpoint
from .corpus import split_train_dev
from .decoders import JointModel, prepare_examples
from .encoder import (
    BiLstmParams,
    EmbeddingTable,
    SentenceEncoder,
    load_precomputed,
    load_word_vectors,
)
from .evaluation import (
    EvalReport,
    average_reports,
    evaluate,
    score_assertions,
    score_concepts,
    score_relations,
)
from .pipeline import (
    AssertionStageModel,
    ConceptStageModel,
    PipelineModels,
    RelationStageModel,
    predict_pipeline,
)

logger = logging.getLogger("jmie.trainer")

WORD_LRS = (1e-2, 1e-3, 1e-4)
CTX_LRS = (1e-5, 2e-5, 5e-5)
WORD_BATCHES = (32, 64, 128)
CTX_BATCHES = (16, 32)
HIDDEN_GRID = (100, 300, 600)
LABEL_EMB_GRID = (32, 64)


class DivergedLoss(ArithmeticError):
    pass


class InvalidConfig(ValueError):
    pass


@dataclass
class TrainConfig:
    arch: str = "joint"  # joint | pipeline
    encoder_mode: str = "trainable_lstm"
    embeddings: str = ""  # GloVe text file or JEMB1 path, mode-dependent
    emb_dim: int = 64  # corpus-built tables only; vector files fix their own
    hidden: int = 100
    lr: float = 1e-2
    batch_size: int = 32
    concept_emb: int = 32
    assertion_emb: int = 32
    relation_hidden: int = 128
    relation_mode: str = "softmax"
    dropout: float = 0.1
    weight_decay: float = 0.0
    max_epochs: int = 200
    patience: int = 10
    dev_fraction: float = 0.10
    seed: int = 0
    freeze_embeddings: bool = False
    constrain_bio: bool = True
    teacher_forcing: bool = True
    unsafe_hparams: bool = False

    def validate(self) -> None:
        if self.arch not in ("joint", "pipeline"):
            raise InvalidConfig(f"unknown arch {self.arch!r}")
        if self.encoder_mode not in ("trainable_lstm", "precomputed", "precomputed+lstm"):
            raise InvalidConfig(f"unknown encoder mode {self.encoder_mode!r}")
        if self.relation_mode not in ("softmax", "sigmoid"):
            raise InvalidConfig(f"unknown relation mode {self.relation_mode!r}")
        if self.max_epochs < 1 or self.patience < 0:
            raise InvalidConfig("max_epochs must be >= 1 and patience >= 0")
        if self.unsafe_hparams:
            return
        contextual = self.encoder_mode != "trainable_lstm"
        lrs = CTX_LRS if contextual else WORD_LRS
        batches = CTX_BATCHES if contextual else WORD_BATCHES
        if self.lr not in lrs:
            raise InvalidConfig(f"lr {self.lr} outside grid {lrs} (set unsafe_hparams to override)")
        if self.batch_size not in batches:
            raise InvalidConfig(f"batch {self.batch_size} outside grid {batches}")
        if self.encoder_mode != "precomputed" and self.hidden not in HIDDEN_GRID:
            raise InvalidConfig(f"hidden {self.hidden} outside grid {HIDDEN_GRID}")
        if self.concept_emb not in LABEL_EMB_GRID or self.assertion_emb not in LABEL_EMB_GRID:
            raise InvalidConfig(f"label embedding dims outside grid {LABEL_EMB_GRID}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_kv(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in sorted(self.to_dict().items()))

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        fields_by_name = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(data) - set(fields_by_name)
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        coerced = {}
        for name, raw in data.items():
            if isinstance(raw, str):
                ftype = fields_by_name[name].type
                if ftype in ("int", int):
                    raw = int(raw)
                elif ftype in ("float", float):
                    raw = float(raw)
                elif ftype in ("bool", bool):
                    raw = raw.lower() in ("1", "true", "yes")
            coerced[name] = raw
        return dataclasses.replace(cls(), **coerced)

    @classmethod
    def from_file(cls, path: str) -> "TrainConfig":
        data = {}
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise InvalidConfig(f"{path}:{lineno}: expected key=value")
                key, value = line.split("=", 1)
                data[key.strip()] = value.strip()
        return cls.from_dict(data)


# ------------------------------------------------------------------ builders


def _build_encoder(config: TrainConfig, rng, train_docs=None, table=None, precomputed=None):
    mode = config.encoder_mode
    if mode == "trainable_lstm":
        if table is None:
            if config.embeddings:
                table = load_word_vectors(config.embeddings)
            else:
                if train_docs is None:
                    raise InvalidConfig("trainable_lstm without embeddings needs a training corpus")
                table = EmbeddingTable.from_corpus(train_docs, config.emb_dim, rng)
        lstm = BiLstmParams.init(rng, table.dim, config.hidden)
        return SentenceEncoder(
            "trainable_lstm", table=table, lstm=lstm,
            dropout=config.dropout, freeze_embeddings=config.freeze_embeddings,
        )
    if precomputed is None:
        if not config.embeddings:
            raise InvalidConfig(f"encoder mode {mode} needs a JEMB1 embeddings path")
        precomputed = load_precomputed(config.embeddings)
    if mode == "precomputed":
        return SentenceEncoder("precomputed", precomputed=precomputed, dropout=config.dropout)
    lstm = BiLstmParams.init(rng, precomputed.dim, config.hidden)
    return SentenceEncoder(
        "precomputed+lstm", precomputed=precomputed, lstm=lstm, dropout=config.dropout
    )


def build_joint_model(config: TrainConfig, train_docs=None, table=None, precomputed=None) -> JointModel:
    rng = np.random.default_rng(config.seed)
    encoder = _build_encoder(config, rng, train_docs, table, precomputed)
    return JointModel(
        encoder,
        rng,
        concept_emb_dim=config.concept_emb,
        assertion_emb_dim=config.assertion_emb,
        relation_hidden=config.relation_hidden,
        relation_mode=config.relation_mode,
    )


def _build_stage(config: TrainConfig, name: str, table=None, precomputed=None, train_docs=None):
    if name == "concept":
        # replays the joint model's init path (same seed, same draw order), so
        # both architectures start the concept stage from identical parameters
        rng = np.random.default_rng(config.seed)
        return ConceptStageModel(_build_encoder(config, rng, train_docs, table, precomputed), rng)
    if name == "assertion":
        rng = np.random.default_rng([config.seed, 1])
        return AssertionStageModel(
            _build_encoder(config, rng, train_docs, table, precomputed), rng,
            type_emb_dim=config.concept_emb,
        )
    rng = np.random.default_rng([config.seed, 2])
    return RelationStageModel(
        _build_encoder(config, rng, train_docs, table, precomputed), rng,
        type_emb_dim=config.concept_emb, assertion_emb_dim=config.assertion_emb,
    )


def build_pipeline_models(
    config: TrainConfig, train_docs=None, table=None, precomputed=None
) -> PipelineModels:
    return PipelineModels(
        concept=_build_stage(config, "concept", table, precomputed, train_docs),
        assertion=_build_stage(config, "assertion", None, precomputed, train_docs),
        relation=_build_stage(config, "relation", None, precomputed, train_docs),
    )


# ------------------------------------------------------------------ batching


def make_batches(examples, batch_size: int):
    """Length-sorted buckets; batch composition is fixed across epochs."""
    ordered = sorted(
        range(len(examples)),
        key=lambda i: (len(examples[i].tokens), examples[i].doc_id, examples[i].sent_index),
    )
    return [
        [examples[i] for i in ordered[lo : lo + batch_size]]
        for lo in range(0, len(ordered), batch_size)
    ]


# ------------------------------------------------------------------- records


@dataclass
class RunRecord:
    config: dict
    epochs: list = field(default_factory=list)
    best_epoch: dict = field(default_factory=dict)
    dev_report: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_jsonl(self) -> str:
        lines = [json.dumps({"config": self.config}, sort_keys=True)]
        lines += [json.dumps(e, sort_keys=True) for e in self.epochs]
        lines.append(
            json.dumps(
                {
                    "best_epoch": self.best_epoch,
                    "dev_report": self.dev_report,
                    "wall_time": self.wall_time,
                },
                sort_keys=True,
            )
        )
        return "\n".join(lines) + "\n"


def _snapshot(params: dict) -> dict:
    return {name: p.data.copy() for name, p in params.items()}


def _restore(params: dict, snapshot: dict) -> None:
    for name, p in params.items():
        p.data[:] = snapshot[name]


def _fit(tag, params, loss_fn, dev_fn, config: TrainConfig, n_batches, epoch_log, post_backward=None):
    """Early-stopping loop shared by both architectures.

    ``loss_fn(batch_index, step) -> (loss Tensor, components)`` builds the
    forward graph; ``dev_fn() -> (metric, payload)`` scores the dev split.
    Training stops once ``epoch - best_epoch >= patience`` (so patience 0
    runs exactly one epoch) or at the epoch cap; the best parameters are
    restored before returning.
    """
    opt = AdamW(params, lr=config.lr, weight_decay=config.weight_decay)
    best_metric = -np.inf
    best_epoch = 0
    best_snapshot = _snapshot(params)
    step = 0
    for epoch in range(1, config.max_epochs + 1):
        t0 = time.perf_counter()
        order = np.random.default_rng([config.seed, 7919, epoch]).permutation(n_batches)
        sums: dict = {}
        for batch_index in order:
            step += 1
            opt.zero_grad()
            with Tape():
                loss, components = loss_fn(int(batch_index), step)
                if not np.isfinite(loss.item()):
                    raise DivergedLoss(f"{tag}: non-finite loss at step {step}")
                backward(loss)
            if post_backward is not None:
                post_backward()
            opt.step()
            for key, value in components.items():
                sums[key] = sums.get(key, 0.0) + value
        metric, payload = dev_fn()
        if metric > best_metric:
            best_metric = metric
            best_epoch = epoch
            best_snapshot = _snapshot(params)
        epoch_log(
            {
                "stage": tag,
                "epoch": epoch,
                "losses": {k: v / n_batches for k, v in sums.items()},
                "dev_metric": metric,
                "dev": payload,
                "seconds": round(time.perf_counter() - t0, 4),
            }
        )
        logger.info("%s epoch %d: dev metric %.4f (best %.4f @ %d)", tag, epoch, metric, best_metric, best_epoch)
        if epoch - best_epoch >= config.patience:
            break
    _restore(params, best_snapshot)
    return best_epoch, best_metric


def _pad_freezer(encoder: SentenceEncoder):
    """After backward, drop the <pad> row's gradient so it stays all-zero."""
    if encoder.mode == "trainable_lstm" and not encoder.freeze_embeddings:
        return encoder.table.zero_pad_grad
    return None


# ------------------------------------------------------------------ training


def train_joint(train_docs, dev_docs, config: TrainConfig, precomputed=None, model=None):
    if model is None:
        model = build_joint_model(config, train_docs, precomputed=precomputed)
    batches = make_batches(prepare_examples(train_docs), config.batch_size)
    record = RunRecord(config=config.to_dict())

    def loss_fn(batch_index, step):
        loss = model.batch_loss(
            batches[batch_index],
            train=True,
            seed=config.seed,
            step=step,
            teacher_forcing=config.teacher_forcing,
        )
        return loss.l_total, loss.values()

    def dev_fn():
        preds = [model.predict_document(d, constrain_bio=config.constrain_bio) for d in dev_docs]
        report = evaluate(preds, dev_docs, protocol="joint")
        return report.mean_f1(), report.to_dict()

    t0 = time.perf_counter()
    best_epoch, _ = _fit(
        "joint", model.named_params(), loss_fn, dev_fn, config,
        len(batches), record.epochs.append, post_backward=_pad_freezer(model.encoder),
    )
    record.best_epoch = {"joint": best_epoch}
    preds = [model.predict_document(d, constrain_bio=config.constrain_bio) for d in dev_docs]
    record.dev_report = evaluate(preds, dev_docs, protocol="joint").to_dict()
    record.wall_time = round(time.perf_counter() - t0, 3)
    return model, record


def train_pipeline(train_docs, dev_docs, config: TrainConfig, precomputed=None):
    """Train the three stage models independently on gold upstream inputs."""
    models = build_pipeline_models(config, train_docs, precomputed=precomputed)
    batches = make_batches(prepare_examples(train_docs), config.batch_size)
    record = RunRecord(config=config.to_dict())
    t0 = time.perf_counter()

    # stage 1: concept tagger on its own objective
    def concept_loss(batch_index, step):
        loss = models.concept.batch_loss(batches[batch_index], train=True, seed=config.seed, step=step)
        return loss, {"concept": loss.item()}

    def concept_dev():
        preds = predict_pipeline(models, dev_docs)
        return score_concepts(dev_docs, preds).f1, {}

    best_concept, _ = _fit(
        "pipeline.concept", models.concept.named_params(), concept_loss, concept_dev,
        config, len(batches), record.epochs.append,
        post_backward=_pad_freezer(models.concept.encoder),
    )

    # stage 2: assertion classifier on gold concepts
    def assertion_loss(batch_index, step):
        loss = models.assertion.batch_loss(batches[batch_index], train=True, seed=config.seed, step=step)
        return loss, {"assertion": loss.item()}

    def assertion_dev():
        preds = predict_pipeline(models, dev_docs, inject_gold={"concept"})
        return score_assertions(dev_docs, preds).f1, {}

    best_assertion, _ = _fit(
        "pipeline.assertion", models.assertion.named_params(), assertion_loss, assertion_dev,
        config, len(batches), record.epochs.append,
        post_backward=_pad_freezer(models.assertion.encoder),
    )

    # stage 3: relation classifier on gold concepts and assertions
    def relation_loss(batch_index, step):
        loss = models.relation.batch_loss(batches[batch_index], train=True, seed=config.seed, step=step)
        return loss, {"relation": loss.item()}

    def relation_dev():
        preds = predict_pipeline(models, dev_docs, inject_gold={"concept", "assertion"})
        return score_relations(dev_docs, preds).f1, {}

    best_relation, _ = _fit(
        "pipeline.relation", models.relation.named_params(), relation_loss, relation_dev,
        config, len(batches), record.epochs.append,
        post_backward=_pad_freezer(models.relation.encoder),
    )

    record.best_epoch = {
        "concept": best_concept,
        "assertion": best_assertion,
        "relation": best_relation,
    }
    preds = predict_pipeline(models, dev_docs)
    record.dev_report = evaluate(preds, dev_docs, protocol="joint").to_dict()
    record.wall_time = round(time.perf_counter() - t0, 3)
    return models, record


def train(corpus, config: TrainConfig, out_dir: str | None = None):
    """Split, train per ``config.arch``, optionally persist to ``out_dir``.

    Returns (models, RunRecord); the persisted artifacts are the JCKP1
    checkpoint(s), the flat config, the vocabulary (trainable mode), the run
    record (JSON lines), and the dev report (JSON + aligned text).
    """
    config.validate()
    train_docs, dev_docs = split_train_dev(corpus, config.dev_fraction, config.seed)
    precomputed = None
    if config.encoder_mode != "trainable_lstm" and config.embeddings:
        precomputed = load_precomputed(config.embeddings)
    if config.arch == "joint":
        models, record = train_joint(train_docs, dev_docs, config, precomputed)
    else:
        models, record = train_pipeline(train_docs, dev_docs, config, precomputed)
    if out_dir is not None:
        save_model_dir(out_dir, config, models, record)
    return models, record


def run_seeds(corpus, config: TrainConfig, seeds) -> dict:
    """Train once per seed and average the final dev F1s (1 decimal, as a
    percentage). Every per-seed report is individually reproducible."""
    if not seeds:
        raise ValueError("need at least one seed")
    reports = []
    for seed in seeds:
        _, record = train(corpus, dataclasses.replace(config, seed=seed))
        reports.append(EvalReport.from_dict(record.dev_report))
    out = average_reports(reports)
    out["seeds"] = list(seeds)
    return out


# ---------------------------------------------------------------- persistence


def save_model_dir(out_dir: str, config: TrainConfig, models, record: RunRecord | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.kv"), "w", encoding="utf-8") as f:
        f.write(config.to_kv())
    if isinstance(models, JointModel):
        save_checkpoint(models.named_params(), os.path.join(out_dir, "model.jckp"))
        table = models.encoder.table
    else:
        for name, stage in models.stage_models().items():
            save_checkpoint(stage.named_params(), os.path.join(out_dir, f"{name}.jckp"))
        table = models.concept.encoder.table
    if table is not None:
        by_id = sorted(table.vocab.items(), key=lambda kv: kv[1])
        with open(os.path.join(out_dir, "vocab.txt"), "w", encoding="utf-8") as f:
            for token, _ in by_id:
                f.write(token + "\n")
    if record is not None:
        with open(os.path.join(out_dir, "run.jsonl"), "w", encoding="utf-8") as f:
            f.write(record.to_jsonl())
        report = EvalReport.from_dict(record.dev_report)
        with open(os.path.join(out_dir, "dev_report.json"), "w", encoding="utf-8") as f:
            f.write(report.to_json())
        with open(os.path.join(out_dir, "dev_report.txt"), "w", encoding="utf-8") as f:
            f.write(report.format_table())


def _table_from_dir(model_dir: str, matrix) -> EmbeddingTable:
    vocab_path = os.path.join(model_dir, "vocab.txt")
    with open(vocab_path, "r", encoding="utf-8") as f:
        tokens = [line.rstrip("\n") for line in f if line != "\n"]
    vocab = {tok: i for i, tok in enumerate(tokens)}
    return EmbeddingTable(vocab, matrix)


def load_model_dir(model_dir: str, embeddings: str | None = None):
    """Rebuild trained models from a directory written by save_model_dir."""
    config = TrainConfig.from_file(os.path.join(model_dir, "config.kv"))
    if embeddings:
        config = dataclasses.replace(config, embeddings=embeddings)
    precomputed = None
    if config.encoder_mode != "trainable_lstm":
        if not config.embeddings:
            raise InvalidConfig("loading a precomputed-mode model needs an embeddings path")
        precomputed = load_precomputed(config.embeddings)

    def stage_table(ckpt):
        if config.encoder_mode != "trainable_lstm":
            return None
        if "embeddings" in ckpt:
            return _table_from_dir(model_dir, ckpt["embeddings"])
        # frozen embeddings are not checkpointed; reload the vector file
        return load_word_vectors(config.embeddings)

    def restore(model, ckpt):
        for name, p in model.named_params().items():
            p.data[:] = ckpt[name].data
        return model

    if config.arch == "joint":
        ckpt = load_checkpoint(os.path.join(model_dir, "model.jckp"))
        model = build_joint_model(config, table=stage_table(ckpt), precomputed=precomputed)
        return config, restore(model, ckpt)

    stages = {}
    for name in ("concept", "assertion", "relation"):
        ckpt = load_checkpoint(os.path.join(model_dir, f"{name}.jckp"))
        stage = _build_stage(config, name, table=stage_table(ckpt), precomputed=precomputed)
        stages[name] = restore(stage, ckpt)
    return config, PipelineModels(**stages)

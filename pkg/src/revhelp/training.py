"""Training loop, ablation runner, and checkpoint I/O.

One run = one model trained with Adam for a fixed number of epochs,
reshuffling the data each epoch with a seed derived from the base seed,
and keeping the parameter state of the epoch with the lowest validation
loss (ties go to the earliest epoch).  Ablation variants share the seed,
so their per-epoch data order is identical.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import torch
from torch.nn import functional as F

from revhelp.corpus import SPLIT_NAMES, LabeledCorpus, ReviewRecord, ReviewerProfile
from revhelp.encoders import EncoderConfig, TextEncoder, encoder_from_identity
from revhelp.errors import CheckpointError, CorpusError, NumericsError, TrainingDiverged
from revhelp.evaluation import MetricsReport, evaluate
from revhelp.features import (
    ExampleFeatures,
    FeatureStats,
    LabeledExample,
    expertise_score,
    fit_stats,
    normalize_features,
    review_age_days,
)
from revhelp.model import FusionModel, ModelConfig, build_model

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 3e-5
    batch_size: int = 32
    epochs: int = 5
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float | None = None
    selection_metric: str = "val_loss"

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1 (nothing trained otherwise), got {self.epochs}")
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise ValueError("learning_rate must be positive and batch_size >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.selection_metric != "val_loss":
            raise ValueError(f"unsupported selection metric {self.selection_metric!r}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def to_dict(self) -> dict:
        return {
            "best_epoch": self.best_epoch,
            "epochs": [vars(r) for r in self.records],
        }

    def tsv_rows(self) -> list[str]:
        rows = ["epoch\ttrain_loss\tval_loss\tval_accuracy\tbest"]
        for r in self.records:
            best = "*" if r.epoch == self.best_epoch else ""
            rows.append(
                f"{r.epoch}\t{r.train_loss:.6f}\t{r.val_loss:.6f}\t{r.val_accuracy:.6f}\t{best}"
            )
        return rows


def build_examples(
    reviews_by_id: dict[str, ReviewRecord],
    profiles: dict[str, ReviewerProfile],
    corpus: LabeledCorpus,
    encoder: TextEncoder,
    feature_range: tuple[float, float] = (0.0, 1.0),
    stats: FeatureStats | None = None,
) -> tuple[dict[str, list[LabeledExample]], FeatureStats]:
    """Tokenize and featurize every split; fit normalization on train only.

    Passing ``stats`` (e.g. from a checkpoint) skips fitting and reuses the
    training-time normalization.
    """
    splits: dict[str, list[LabeledExample]] = {}
    for name in SPLIT_NAMES:
        examples = []
        for review_id in corpus.split_ids(name):
            review = reviews_by_id.get(review_id)
            if review is None:
                raise CorpusError(
                    f"review {review_id!r} from the manifest is missing from the review file"
                )
            profile = profiles.get(review.reviewer_id)
            if profile is None:
                raise CorpusError(
                    f"reviewer {review.reviewer_id!r} (review {review_id!r}) has no profile"
                )
            tokens = encoder.tokenize(review.text)
            features = ExampleFeatures(
                expertise_raw=expertise_score(profile.m_votes, profile.n_reviews),
                age_days_raw=review_age_days(review.posted_at, corpus.reference_date),
            )
            examples.append(
                LabeledExample(
                    review_id=review_id,
                    token_ids=tokens.token_ids,
                    pieces=tokens.pieces,
                    features=features,
                    label=corpus.labels[review_id],
                )
            )
        splits[name] = examples
    if stats is None:
        stats = fit_stats([ex.features for ex in splits["train"]], range=feature_range)
    for examples in splits.values():
        for example in examples:
            normalize_features(example.features, stats)
    return splits, stats


class Batch(NamedTuple):
    token_ids: torch.Tensor
    mask: torch.Tensor
    expertise: torch.Tensor
    age: torch.Tensor
    labels0: torch.Tensor  # zero-based gold classes


def collate(examples: Sequence[LabeledExample], pad_id: int, dtype: torch.dtype) -> Batch:
    width = max(len(ex.token_ids) for ex in examples)
    ids = torch.full((len(examples), width), pad_id, dtype=torch.long)
    mask = torch.zeros((len(examples), width), dtype=dtype)
    for row, ex in enumerate(examples):
        ids[row, : len(ex.token_ids)] = torch.tensor(ex.token_ids, dtype=torch.long)
        mask[row, : len(ex.token_ids)] = 1.0
    expertise = torch.tensor([ex.expertise_norm for ex in examples], dtype=dtype)
    age = torch.tensor([ex.age_norm for ex in examples], dtype=dtype)
    labels0 = torch.tensor([ex.label - 1 for ex in examples], dtype=torch.long)
    return Batch(ids, mask, expertise, age, labels0)


def _batched(items: Sequence, size: int) -> Iterable[Sequence]:
    for start in range(0, len(items), size):
        yield items[start : start + size]


def _mean_loss_and_accuracy(
    model: FusionModel, examples: Sequence[LabeledExample], batch_size: int
) -> tuple[float, float]:
    total_loss = 0.0
    correct = 0
    with torch.no_grad():
        for chunk in _batched(examples, batch_size):
            batch = collate(chunk, model.encoder.pad_id, model.dtype)
            logits = model(batch.token_ids, batch.mask, batch.expertise, batch.age)
            loss = F.cross_entropy(logits, batch.labels0, reduction="sum")
            total_loss += float(loss)
            correct += int((torch.argmax(logits, dim=-1) == batch.labels0).sum())
    n = len(examples)
    return total_loss / n, correct / n


def train_model(
    model: FusionModel,
    train_examples: Sequence[LabeledExample],
    valid_examples: Sequence[LabeledExample],
    config: TrainConfig,
) -> TrainLog:
    """Optimize the model in place and load the best-validation-loss state.

    On divergence (non-finite loss or parameters) the model is restored to
    the last finite state and ``TrainingDiverged`` is raised so callers can
    save that state for inspection.
    """
    config.validate()
    if not train_examples:
        raise ValueError("training split is empty")
    if not valid_examples:
        raise ValueError("validation split is empty")
    if not all(torch.isfinite(p).all() for p in model.parameters()):
        raise NumericsError("model parameters are non-finite before training starts")

    optimizer = torch.optim.Adam(
        (p for p in model.parameters() if p.requires_grad),
        lr=config.learning_rate,
        betas=(config.beta1, config.beta2),
        eps=config.eps,
        weight_decay=config.weight_decay,
    )
    last_finite = copy.deepcopy(model.state_dict())
    best_state = None
    best_loss = float("inf")
    train_log = TrainLog()

    for epoch in range(1, config.epochs + 1):
        order = list(range(len(train_examples)))
        random.Random(f"{config.seed}:{epoch}").shuffle(order)
        model.train()
        running = 0.0
        for index_chunk in _batched(order, config.batch_size):
            chunk = [train_examples[i] for i in index_chunk]
            batch = collate(chunk, model.encoder.pad_id, model.dtype)
            optimizer.zero_grad()
            try:
                logits = model(batch.token_ids, batch.mask, batch.expertise, batch.age)
            except NumericsError as exc:
                model.load_state_dict(last_finite)
                raise TrainingDiverged(f"epoch {epoch}: {exc}") from exc
            loss = F.cross_entropy(logits, batch.labels0)
            if not torch.isfinite(loss):
                model.load_state_dict(last_finite)
                raise TrainingDiverged(f"epoch {epoch}: non-finite training loss")
            loss.backward()
            if config.clip_norm is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), config.clip_norm)
            optimizer.step()
            # Parameters must stay finite after every step; the restore
            # point is snapshotted once per epoch to keep the loop cheap.
            if not all(torch.isfinite(p).all() for p in model.parameters()):
                model.load_state_dict(last_finite)
                raise TrainingDiverged(f"epoch {epoch}: non-finite parameters after update")
            running += float(loss.detach()) * len(chunk)
        last_finite = copy.deepcopy(model.state_dict())

        model.eval()
        val_loss, val_accuracy = _mean_loss_and_accuracy(
            model, valid_examples, config.batch_size
        )
        train_log.records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=running / len(train_examples),
                val_loss=val_loss,
                val_accuracy=val_accuracy,
            )
        )
        if val_loss < best_loss:
            best_loss = val_loss
            best_state = copy.deepcopy(model.state_dict())
            train_log.best_epoch = epoch
        log.info(
            "epoch %d: train loss %.4f, val loss %.4f, val acc %.4f",
            epoch,
            train_log.records[-1].train_loss,
            val_loss,
            val_accuracy,
        )

    model.load_state_dict(best_state)
    model.eval()
    return train_log


def predict_classes(
    model: FusionModel, examples: Sequence[LabeledExample], batch_size: int = 64
) -> list[int]:
    preds: list[int] = []
    model.eval()
    with torch.no_grad():
        for chunk in _batched(examples, batch_size):
            batch = collate(chunk, model.encoder.pad_id, model.dtype)
            logits = model(batch.token_ids, batch.mask, batch.expertise, batch.age)
            preds.extend(int(i) + 1 for i in torch.argmax(logits, dim=-1))
    return preds


def evaluate_split(
    model: FusionModel, examples: Sequence[LabeledExample], batch_size: int = 64
) -> MetricsReport:
    preds = predict_classes(model, examples, batch_size)
    golds = [ex.label for ex in examples]
    return evaluate(preds, golds)


#: Variant name -> (use_expertise, use_temporal).
ABLATION_VARIANTS: dict[str, tuple[bool, bool]] = {
    "full": (True, True),
    "no_expertise": (False, True),
    "no_temporal": (True, False),
    "text_only": (False, False),
}

ABLATION_LABELS = {
    "full": "fusion (text+expertise+temporal)",
    "no_expertise": "w/o expertise",
    "no_temporal": "w/o temporal",
    "text_only": "w/o expertise+temporal",
}


@dataclass
class AblationRun:
    variant: str
    report: MetricsReport
    train_log: TrainLog
    model: FusionModel
    n_parameters: int


def run_ablations(
    splits: dict[str, list[LabeledExample]],
    encoder_config: EncoderConfig,
    model_config: ModelConfig,
    train_config: TrainConfig,
    eval_split: str = "test",
    variants: Iterable[str] = tuple(ABLATION_VARIANTS),
) -> dict[str, AblationRun]:
    """Train all feature-ablation variants with shared seed and data order."""
    runs: dict[str, AblationRun] = {}
    for variant in variants:
        use_expertise, use_temporal = ABLATION_VARIANTS[variant]
        variant_config = replace(
            model_config, use_expertise=use_expertise, use_temporal=use_temporal
        )
        model = build_model(encoder_config, variant_config, seed=train_config.seed)
        train_log = train_model(model, splits["train"], splits["valid"], train_config)
        report = evaluate_split(model, splits[eval_split], train_config.batch_size)
        runs[variant] = AblationRun(
            variant=variant,
            report=report,
            train_log=train_log,
            model=model,
            n_parameters=model.trainable_parameter_count(),
        )
        log.info(
            "%s: acc %.4f, mae %.4f, mse %.4f (%d trainable parameters)",
            variant,
            report.accuracy,
            report.mae,
            report.mse,
            runs[variant].n_parameters,
        )
    return runs


CHECKPOINT_FORMAT = "revhelp-checkpoint/1"
MANIFEST_NAME = "manifest.json"
PARAMS_NAME = "params.pt"


def config_hash(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def save_checkpoint(
    directory: str | Path,
    model: FusionModel,
    stats: FeatureStats,
    train_log: TrainLog | None = None,
    run_config: dict | None = None,
    diverged: bool = False,
) -> Path:
    """Write parameters plus a manifest sufficient to rebuild the model.

    Feature statistics ride along in the manifest so inference reproduces
    training-time normalization exactly.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "encoder": model.encoder.identity(),
        "model": model.config.to_dict(),
        "feature_stats": stats.to_dict(),
        "best_epoch": train_log.best_epoch if train_log else None,
        "diverged": diverged,
        "config_hash": config_hash(run_config) if run_config else None,
    }
    (directory / MANIFEST_NAME).write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    torch.save(model.state_dict(), directory / PARAMS_NAME)
    # The hash backend's vocabulary is fully described by its identity; the
    # pretrained backend ships its tokenizer files alongside the parameters.
    tokenizer = getattr(model.encoder, "_tokenizer", None)
    if tokenizer is not None:
        tokenizer.save_pretrained(str(directory / "tokenizer"))
    if train_log is not None:
        (directory / "train_log.json").write_text(
            json.dumps(train_log.to_dict(), indent=1) + "\n", encoding="utf-8"
        )
    return directory


def load_checkpoint(directory: str | Path) -> tuple[FusionModel, FeatureStats, dict]:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    params_path = directory / PARAMS_NAME
    if not manifest_path.exists() or not params_path.exists():
        raise CheckpointError(f"{directory} is not a checkpoint directory")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"unsupported checkpoint format {manifest.get('format')!r}")
    encoder = encoder_from_identity(manifest["encoder"])
    model = FusionModel(encoder, ModelConfig(**manifest["model"]))
    state = torch.load(params_path, weights_only=True)
    try:
        model.load_state_dict(state)
    except RuntimeError as exc:
        raise CheckpointError(f"parameters do not match manifest: {exc}") from exc
    model.eval()
    stats = FeatureStats.from_dict(manifest["feature_stats"])
    return model, stats, manifest

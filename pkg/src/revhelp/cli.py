"""Command-line entry point orchestrating the full workflow.

Every subcommand reads the optional config file, applies flag overrides
(flags win), writes its artifacts under the run directory together with
the effective configuration, and exits nonzero with a single structured
line on stderr when anything fatal happens.
"""

from __future__ import annotations

import json
import sys
from datetime import date
from functools import wraps
from pathlib import Path

import click

from revhelp import analysis as analysis_mod
from revhelp import corpus as corpus_mod
from revhelp import evaluation as evaluation_mod
from revhelp import figures, interpret, synthetic, training
from revhelp.config import (
    RunConfig,
    build_run_config,
    default_out_root,
    set_global_seed,
    write_effective_config,
)
from revhelp.encoders import build_encoder
from revhelp.errors import RevhelpError
from revhelp.features import expertise_score, normalize, review_age_days


def _fail(message: str) -> None:
    click.echo(f"revhelp: error: {message}", err=True)
    sys.exit(1)


def _slug(name: str) -> str:
    """Filesystem-safe fragment for output file names."""
    cleaned = "".join(c if c.isalnum() or c in "-_." else "_" for c in name)
    return cleaned or "review"


def _guarded(func):
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (RevhelpError, OSError, ValueError, LookupError) as exc:
            _fail(str(exc))

    return wrapper


@click.group()
@click.version_option(package_name="revhelp")
@click.option("--config", "config_path", type=click.Path(), default=None, help="Config file (YAML or JSON).")
@click.option("--seed", type=int, default=None, help="Override every section seed.")
@click.option(
    "--encoder",
    "encoder_backend",
    type=click.Choice(["pretrained", "test"]),
    default=None,
    help="Encoder backend ('test' is the deterministic hash encoder).",
)
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Run output directory.")
@click.pass_context
def main(ctx, config_path, seed, encoder_backend, out_dir):
    """Review helpfulness classification: prepare, train, ablate, eval, analyze, explain."""
    ctx.ensure_object(dict)
    ctx.obj.update(
        config_path=config_path, seed=seed, encoder_backend=encoder_backend, out_dir=out_dir
    )


def _resolve_config(ctx_obj: dict, overrides: dict | None = None) -> RunConfig:
    config = build_run_config(ctx_obj.get("config_path"), overrides)
    if ctx_obj.get("encoder_backend"):
        backend = ctx_obj["encoder_backend"]
        config.encoder.backend = "hash" if backend == "test" else backend
    if ctx_obj.get("seed") is not None:
        set_global_seed(config, ctx_obj["seed"])
    if ctx_obj.get("out_dir"):
        config.out = ctx_obj["out_dir"]
    return config


def _run_dir(config: RunConfig, command: str) -> Path:
    out = Path(config.out) if config.out else default_out_root() / command
    out.mkdir(parents=True, exist_ok=True)
    (out / "figures").mkdir(exist_ok=True)
    write_effective_config(config, out / "effective_config.yaml")
    return out


def _load_corpus_files(reviews_path, reviewers_path):
    if reviews_path is None or reviewers_path is None:
        raise ValueError("review and reviewer files are required (flags or config file)")
    return corpus_mod.load_corpus(reviews_path, reviewers_path)


def _load_labeled(config: RunConfig, manifest_path):
    manifest_path = manifest_path or config.corpus.manifest
    if manifest_path is None:
        raise ValueError("a corpus manifest is required (--manifest or config)")
    return corpus_mod.load_manifest(manifest_path)


@main.command()
@click.option("--n-reviews", default=200, show_default=True)
@click.option("--n-reviewers", default=40, show_default=True)
@click.option("--text-signal", default=0.3, show_default=True)
@click.option("--feature-noise", default=0.08, show_default=True)
@click.pass_obj
@_guarded
def synth(ctx_obj, n_reviews, n_reviewers, text_signal, feature_noise):
    """Generate a synthetic corpus (reviews.jsonl / reviewers.jsonl)."""
    config = _resolve_config(ctx_obj)
    out = _run_dir(config, "synth")
    reviews, profiles = synthetic.generate_corpus(
        n_reviews=n_reviews,
        n_reviewers=n_reviewers,
        seed=config.corpus.seed,
        text_signal=text_signal,
        feature_noise=feature_noise,
    )
    synthetic.write_corpus_files(
        reviews, profiles, out / "reviews.jsonl", out / "reviewers.jsonl"
    )
    click.echo(f"wrote {len(reviews)} reviews and {len(profiles)} reviewer profiles to {out}")


@main.command()
@click.option("--reviews", "reviews_path", type=click.Path(), default=None)
@click.option("--reviewers", "reviewers_path", type=click.Path(), default=None)
@click.option("--ratios", nargs=3, type=float, default=None)
@click.option("--reference-date", default=None, help="ISO date anchoring review ages.")
@click.option("--group-by-reviewer", is_flag=True, default=False)
@click.pass_obj
@_guarded
def prepare(ctx_obj, reviews_path, reviewers_path, ratios, reference_date, group_by_reviewer):
    """Load, filter, label, and split a corpus; write its manifest."""
    overrides = {"corpus": {}}
    if ratios:
        overrides["corpus"]["ratios"] = ratios
    if reference_date:
        overrides["corpus"]["reference_date"] = reference_date
    if group_by_reviewer:
        overrides["corpus"]["group_by_reviewer"] = True
    config = _resolve_config(ctx_obj, overrides)
    out = _run_dir(config, "prepare")

    reviews_path = reviews_path or config.corpus.reviews
    reviewers_path = reviewers_path or config.corpus.reviewers
    reviews, profiles, load_report = _load_corpus_files(reviews_path, reviewers_path)
    if not reviews:
        raise ValueError(f"no reviews loaded from {reviews_path}")
    labels = corpus_mod.label_reviews(
        reviews, profiles, exclude=load_report.missing_profile_review_ids
    )
    labeled = [r for r in reviews if r.review_id in labels]
    ref = (
        date.fromisoformat(config.corpus.reference_date)
        if config.corpus.reference_date
        else corpus_mod.default_reference_date(reviews)
    )
    labeled_corpus = corpus_mod.make_splits(
        labeled,
        ratios=config.corpus.ratios,
        seed=config.corpus.seed,
        reference_date=ref,
        group_by_reviewer=config.corpus.group_by_reviewer,
    )
    corpus_mod.save_manifest(labeled_corpus, out / "corpus_manifest.json")

    reviews_by_id = {r.review_id: r for r in reviews}
    stats = corpus_mod.corpus_stats(labeled_corpus, reviews_by_id)
    click.echo(
        f"loaded {len(reviews)} reviews ({load_report.malformed_reviews} malformed, "
        f"{len(load_report.missing_profile_review_ids)} without reviewer profile), "
        f"{len(labels)} labeled"
    )
    click.echo(f"{'split':<8} {'samples':>8} {'avg sentences':>14} {'avg words':>10}")
    rows = ["split\tsamples\tavg_sentences\tavg_words"]
    for name in corpus_mod.SPLIT_NAMES:
        s = stats[name]
        click.echo(
            f"{name:<8} {s['samples']:>8} {s['avg_sentences']:>14.2f} {s['avg_words']:>10.2f}"
        )
        rows.append(
            f"{name}\t{s['samples']}\t{s['avg_sentences']:.4f}\t{s['avg_words']:.4f}"
        )
    (out / "corpus_stats.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    figures.save_class_distribution(
        labeled_corpus.labels, out / "figures" / "class_distribution.png"
    )
    click.echo(f"manifest written to {out / 'corpus_manifest.json'}")


def _prepare_examples(config: RunConfig, reviews_path, reviewers_path, manifest_path, stats=None):
    reviews_path = reviews_path or config.corpus.reviews
    reviewers_path = reviewers_path or config.corpus.reviewers
    labeled_corpus = _load_labeled(config, manifest_path)
    reviews, profiles, _ = _load_corpus_files(reviews_path, reviewers_path)
    reviews_by_id = {r.review_id: r for r in reviews}
    # With checkpoint stats the caller already holds the right encoder.
    encoder = build_encoder(config.encoder) if stats is None else None
    return labeled_corpus, reviews_by_id, profiles, encoder


@main.command()
@click.option("--reviews", "reviews_path", type=click.Path(), default=None)
@click.option("--reviewers", "reviewers_path", type=click.Path(), default=None)
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.pass_obj
@_guarded
def train(ctx_obj, reviews_path, reviewers_path, manifest_path, epochs, batch_size, learning_rate):
    """Train the fusion model and save the best-epoch checkpoint."""
    overrides = {"train": {}}
    if epochs is not None:
        overrides["train"]["epochs"] = epochs
    if batch_size is not None:
        overrides["train"]["batch_size"] = batch_size
    if learning_rate is not None:
        overrides["train"]["learning_rate"] = learning_rate
    config = _resolve_config(ctx_obj, overrides)
    out = _run_dir(config, "train")

    labeled_corpus, reviews_by_id, profiles, encoder = _prepare_examples(
        config, reviews_path, reviewers_path, manifest_path
    )
    splits, stats = training.build_examples(reviews_by_id, profiles, labeled_corpus, encoder)
    model = training.build_model(config.encoder, config.model, seed=config.train.seed)
    try:
        train_log = training.train_model(model, splits["train"], splits["valid"], config.train)
    except RevhelpError as exc:
        training.save_checkpoint(
            out / "checkpoint", model, stats, run_config=config.to_dict(), diverged=True
        )
        raise RevhelpError(f"{exc}; last finite state saved to {out / 'checkpoint'}") from exc
    training.save_checkpoint(
        out / "checkpoint", model, stats, train_log=train_log, run_config=config.to_dict()
    )
    (out / "train_log.tsv").write_text("\n".join(train_log.tsv_rows()) + "\n", encoding="utf-8")
    figures.save_training_curves(train_log, out / "figures" / "training_curves.png")
    report = training.evaluate_split(model, splits["valid"], config.train.batch_size)
    click.echo(
        f"best epoch {train_log.best_epoch}; validation accuracy {report.accuracy:.4f}, "
        f"mae {report.mae:.4f}, mse {report.mse:.4f}"
    )
    click.echo(f"checkpoint written to {out / 'checkpoint'}")


@main.command()
@click.option("--reviews", "reviews_path", type=click.Path(), default=None)
@click.option("--reviewers", "reviewers_path", type=click.Path(), default=None)
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--split", "eval_split", type=click.Choice(corpus_mod.SPLIT_NAMES), default="test")
@click.pass_obj
@_guarded
def ablate(
    ctx_obj,
    reviews_path,
    reviewers_path,
    manifest_path,
    epochs,
    batch_size,
    learning_rate,
    eval_split,
):
    """Train all feature-ablation variants and compare them."""
    overrides = {"train": {}}
    if epochs is not None:
        overrides["train"]["epochs"] = epochs
    if batch_size is not None:
        overrides["train"]["batch_size"] = batch_size
    if learning_rate is not None:
        overrides["train"]["learning_rate"] = learning_rate
    config = _resolve_config(ctx_obj, overrides)
    out = _run_dir(config, "ablate")

    labeled_corpus, reviews_by_id, profiles, encoder = _prepare_examples(
        config, reviews_path, reviewers_path, manifest_path
    )
    splits, stats = training.build_examples(reviews_by_id, profiles, labeled_corpus, encoder)
    runs = training.run_ablations(
        splits, config.encoder, config.model, config.train, eval_split=eval_split
    )
    for variant, run in runs.items():
        training.save_checkpoint(
            out / f"checkpoint_{variant}",
            run.model,
            stats,
            train_log=run.train_log,
            run_config=config.to_dict(),
        )
    reports = {training.ABLATION_LABELS[v]: run.report for v, run in runs.items()}
    reference = training.ABLATION_LABELS["text_only"]
    significance = evaluation_mod.compare_systems(reports, reference)
    grid = evaluation_mod.render_metrics_grid(reports, significance, reference)
    click.echo(grid)
    (out / "ablation.tsv").write_text(
        "\n".join(evaluation_mod.metrics_tsv_rows(reports)) + "\n", encoding="utf-8"
    )
    payload = {
        v: {**run.report.to_dict(), "trainable_parameters": run.n_parameters}
        for v, run in runs.items()
    }
    (out / "ablation.json").write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    figures.save_ablation_bars(runs, out / "figures" / "ablation_metrics.png")
    click.echo(f"ablation artifacts written to {out}")


def _read_class_file(path: Path) -> list[int]:
    values = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            values.append(int(line))
    return values


@main.command("eval")
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), default=None)
@click.option("--reviews", "reviews_path", type=click.Path(), default=None)
@click.option("--reviewers", "reviewers_path", type=click.Path(), default=None)
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--split", "eval_split", type=click.Choice(corpus_mod.SPLIT_NAMES), default="test")
@click.option("--preds", "preds_path", type=click.Path(), default=None, help="Fixture predictions, one class per line.")
@click.option("--golds", "golds_path", type=click.Path(), default=None, help="Fixture golds, one class per line.")
@click.pass_obj
@_guarded
def eval_command(
    ctx_obj,
    checkpoint_path,
    reviews_path,
    reviewers_path,
    manifest_path,
    eval_split,
    preds_path,
    golds_path,
):
    """Score a checkpoint on a split, or score fixture prediction files."""
    config = _resolve_config(ctx_obj)
    out = _run_dir(config, "eval")
    if preds_path or golds_path:
        if not (preds_path and golds_path):
            raise ValueError("--preds and --golds must be given together")
        preds = _read_class_file(preds_path)
        golds = _read_class_file(golds_path)
        name = "fixture"
        report = evaluation_mod.evaluate(preds, golds)
    else:
        if checkpoint_path is None:
            raise ValueError("provide --checkpoint, or --preds/--golds fixture files")
        model, stats, _ = training.load_checkpoint(checkpoint_path)
        labeled_corpus, reviews_by_id, profiles, _ = _prepare_examples(
            config, reviews_path, reviewers_path, manifest_path, stats=stats
        )
        splits, _ = training.build_examples(
            reviews_by_id, profiles, labeled_corpus, model.encoder, stats=stats
        )
        name = f"checkpoint:{eval_split}"
        report = training.evaluate_split(model, splits[eval_split])
        figures.save_confusion_matrix(report, out / "figures" / "confusion_matrix.png")
    reports = {name: report}
    click.echo(evaluation_mod.render_metrics_grid(reports))
    click.echo(f"accuracy {report.accuracy:.4f}  mae {report.mae:.4f}  mse {report.mse:.4f}")
    (out / "metrics.tsv").write_text(
        "\n".join(evaluation_mod.metrics_tsv_rows(reports)) + "\n", encoding="utf-8"
    )
    (out / "metrics.json").write_text(
        json.dumps(report.to_dict(), indent=1) + "\n", encoding="utf-8"
    )


@main.command()
@click.option("--reviews", "reviews_path", type=click.Path(), default=None)
@click.option("--reviewers", "reviewers_path", type=click.Path(), default=None)
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--lexicon", "lexicon_path", type=click.Path(), default=None)
@click.option("--stopwords", "stopwords_path", type=click.Path(), default=None)
@click.option("--top-k", type=int, default=None)
@click.option("--min-freq", type=int, default=None)
@click.option("--sample", "sample_per_class", type=int, default=None)
@click.pass_obj
@_guarded
def analyze(
    ctx_obj,
    reviews_path,
    reviewers_path,
    manifest_path,
    lexicon_path,
    stopwords_path,
    top_k,
    min_freq,
    sample_per_class,
):
    """Extract per-class aspect n-grams and their cross-class overlap."""
    overrides = {"analysis": {}}
    for key, value in (
        ("lexicon", lexicon_path),
        ("stopwords", stopwords_path),
        ("top_k", top_k),
        ("min_freq", min_freq),
        ("sample_per_class", sample_per_class),
    ):
        if value is not None:
            overrides["analysis"][key] = value
    config = _resolve_config(ctx_obj, overrides)
    out = _run_dir(config, "analyze")

    labeled_corpus = _load_labeled(config, manifest_path)
    reviews, _, _ = _load_corpus_files(
        reviews_path or config.corpus.reviews, reviewers_path or config.corpus.reviewers
    )
    reviews_by_id = {r.review_id: r for r in reviews}
    texts_by_class: dict[int, list[str]] = {cls: [] for cls in range(1, 6)}
    for review_id, cls in labeled_corpus.labels.items():
        texts_by_class[cls].append(reviews_by_id[review_id].text)

    pipeline = analysis_mod.AspectPipeline(
        stopwords_path=config.analysis.stopwords, lexicon_path=config.analysis.lexicon
    )
    report = analysis_mod.analyze_classes(
        texts_by_class,
        pipeline,
        k=config.analysis.top_k,
        min_freq=config.analysis.min_freq,
        sample_size=config.analysis.sample_per_class,
        seed=config.analysis.seed,
    )
    click.echo(analysis_mod.render_ngram_grid(report))
    (out / "ngrams.tsv").write_text(
        "\n".join(analysis_mod.ngram_tsv_rows(report)) + "\n", encoding="utf-8"
    )
    payload = {
        "top_k": report.top_k,
        "unigrams": {cls: ranked for cls, ranked in report.unigrams.items()},
        "bigrams": {
            cls: [[list(pair), score] for pair, score in ranked]
            for cls, ranked in report.bigrams.items()
        },
        "overlap": {ngram: sorted(classes) for ngram, classes in report.overlap.items()},
    }
    (out / "ngrams.json").write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
    figures.save_ngram_bars(report, out / "figures" / "ngram_aspects.png")
    click.echo(f"aspect reports written to {out}")


@main.command()
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), required=True)
@click.option("--reviews", "reviews_path", type=click.Path(), default=None)
@click.option("--reviewers", "reviewers_path", type=click.Path(), default=None)
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--review-id", default=None, help="Attribute this review from the corpus.")
@click.option("--text", default=None, help="Attribute ad-hoc text instead of a corpus review.")
@click.option("--expertise", type=float, default=0.0, help="Raw expertise for --text mode.")
@click.option("--age-days", type=float, default=0.0, help="Raw review age for --text mode.")
@click.option("--steps", type=int, default=None)
@click.option("--target", "target_class", type=int, default=None)
@click.option("--top", "top_k", type=int, default=None)
@click.pass_obj
@_guarded
def explain(
    ctx_obj,
    checkpoint_path,
    reviews_path,
    reviewers_path,
    manifest_path,
    review_id,
    text,
    expertise,
    age_days,
    steps,
    target_class,
    top_k,
):
    """Integrated-gradients token attribution for one review."""
    overrides = {"explain": {}}
    if steps is not None:
        overrides["explain"]["steps"] = steps
    if top_k is not None:
        overrides["explain"]["top"] = top_k
    config = _resolve_config(ctx_obj, overrides)
    out = _run_dir(config, "explain")

    model, stats, _ = training.load_checkpoint(checkpoint_path)
    if text is None and review_id is None:
        raise ValueError("provide --review-id (with corpus files) or --text")
    if text is not None:
        raw_expertise, raw_age = expertise, age_days
        review_text = text
        name = "adhoc"
    else:
        labeled_corpus = _load_labeled(config, manifest_path)
        reviews, profiles, _ = _load_corpus_files(
            reviews_path or config.corpus.reviews, reviewers_path or config.corpus.reviewers
        )
        reviews_by_id = {r.review_id: r for r in reviews}
        if review_id not in reviews_by_id:
            raise ValueError(f"review {review_id!r} not found in {reviews_path}")
        review = reviews_by_id[review_id]
        profile = profiles.get(review.reviewer_id)
        if profile is None:
            raise ValueError(f"reviewer {review.reviewer_id!r} has no profile record")
        raw_expertise = expertise_score(profile.m_votes, profile.n_reviews)
        raw_age = review_age_days(review.posted_at, labeled_corpus.reference_date)
        review_text = review.text
        name = review_id

    expertise_norm = normalize(
        raw_expertise, stats.min_expertise, stats.max_expertise, stats.range
    )
    age_norm = normalize(raw_age, stats.min_age_days, stats.max_age_days, stats.range)
    tokens = model.encoder.tokenize(review_text)
    report = interpret.attribute(
        model,
        tokens,
        expertise_norm,
        age_norm,
        steps=config.explain.steps,
        target_class=target_class,
    )
    heat = interpret.render_heat(report, top=config.explain.top)
    click.echo(heat)
    name = _slug(name)
    (out / f"attribution_{name}.txt").write_text(heat + "\n", encoding="utf-8")
    (out / f"attribution_{name}.tsv").write_text(
        "\n".join(interpret.attribution_tsv_rows(report)) + "\n", encoding="utf-8"
    )
    payload = {
        "review": name,
        "predicted_class": report.predicted_class,
        "target_class": report.target_class,
        "steps": report.steps,
        "completeness_gap": report.completeness_gap,
        "delta": report.delta,
        "tokens": report.tokens,
        "scores": report.scores,
        "top": [[w, s] for w, s in interpret.top_tokens(report, config.explain.top)],
    }
    (out / f"attribution_{name}.json").write_text(
        json.dumps(payload, indent=1) + "\n", encoding="utf-8"
    )
    figures.save_attribution_heat(report, out / "figures" / f"attribution_{name}.png")


if __name__ == "__main__":
    main()

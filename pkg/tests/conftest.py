import json

import pytest

from revhelp.corpus import label_reviews, make_splits
from revhelp.encoders import EncoderConfig
from revhelp.model import ModelConfig, build_model
from revhelp.synthetic import generate_corpus, write_corpus_files
from revhelp.training import TrainConfig, build_examples, train_model


def small_encoder_config(**overrides) -> EncoderConfig:
    base = dict(backend="hash", vocab_size=4096, embed_dim=16, out_dim=16, max_len=64)
    base.update(overrides)
    return EncoderConfig(**base)


def small_model_config(**overrides) -> ModelConfig:
    base = dict(expertise_dim=8, temporal_dim=8)
    base.update(overrides)
    return ModelConfig(**base)


@pytest.fixture(scope="session")
def encoder_config():
    return small_encoder_config()


@pytest.fixture(scope="session")
def synthetic_splits():
    """Tokenized, normalized splits over a 160-review synthetic corpus."""
    reviews, profiles = generate_corpus(n_reviews=160, n_reviewers=30, seed=13)
    labels = label_reviews(reviews, profiles)
    labeled = [r for r in reviews if r.review_id in labels]
    corpus = make_splits(labeled, (0.7, 0.15, 0.15), seed=17)
    encoder_model = build_model(small_encoder_config(), small_model_config(), seed=0)
    splits, stats = build_examples(
        {r.review_id: r for r in reviews}, profiles, corpus, encoder_model.encoder
    )
    return splits, stats


@pytest.fixture(scope="session")
def trained_model(synthetic_splits):
    """A small fusion model trained enough to be non-trivial."""
    splits, stats = synthetic_splits
    model = build_model(small_encoder_config(), small_model_config(), seed=5)
    config = TrainConfig(learning_rate=0.05, batch_size=16, epochs=10, seed=5)
    log = train_model(model, splits["train"], splits["valid"], config)
    return model, stats, log


@pytest.fixture()
def corpus_files(tmp_path):
    """Small JSONL corpus written to disk, returning the two paths."""
    reviews, profiles = generate_corpus(n_reviews=60, n_reviewers=15, seed=3)
    reviews_path = tmp_path / "reviews.jsonl"
    reviewers_path = tmp_path / "reviewers.jsonl"
    write_corpus_files(reviews, profiles, reviews_path, reviewers_path)
    return reviews_path, reviewers_path


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
    return path


def review_line(review_id="r1", reviewer_id="u1", text="A fine stay.", votes=3, posted="2019-05-01"):
    return {
        "review_id": review_id,
        "reviewer_id": reviewer_id,
        "text": text,
        "helpful_votes": votes,
        "posted_at": posted,
    }


def reviewer_line(reviewer_id="u1", n_reviews=4, m_votes=10):
    return {"reviewer_id": reviewer_id, "n_reviews": n_reviews, "m_votes": m_votes}

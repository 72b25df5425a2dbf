"""Pretrained-transformer backend, exercised offline with tiny local weights.

A randomly initialized miniature BERT saved to disk drives the same code
paths as a published checkpoint (tokenization, pooling, attribution,
fine-tuning, checkpoint round-trip) without any network access.
"""

import random

import pytest
import torch

transformers = pytest.importorskip("transformers")

from revhelp.encoders import TransformerEncoder
from revhelp.features import ExampleFeatures, FeatureStats, LabeledExample
from revhelp.interpret import attribute
from revhelp.model import FusionModel, ModelConfig
from revhelp.training import TrainConfig, load_checkpoint, save_checkpoint, train_model

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "room", "was", "clean", "dirty", "staff", "great", "pool",
    "view", "a", "and", "##s", "desk", "front",
]


@pytest.fixture(scope="module")
def tiny_weights_dir(tmp_path_factory):
    from transformers import BertConfig, BertModel, BertTokenizer

    directory = tmp_path_factory.mktemp("tiny_transformer")
    (directory / "vocab.txt").write_text("\n".join(VOCAB), encoding="utf-8")
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(0)
    BertModel(config).save_pretrained(directory)
    BertTokenizer(str(directory / "vocab.txt")).save_pretrained(directory)
    return directory


@pytest.fixture(scope="module")
def encoder(tiny_weights_dir):
    return TransformerEncoder(model_name=str(tiny_weights_dir), out_dim=8, max_len=16)


def make_examples(encoder, n=24, seed=0):
    rng = random.Random(seed)
    words = ["room", "clean", "dirty", "staff", "great", "pool", "view", "front", "desk"]
    examples = []
    for i in range(n):
        tokens = encoder.tokenize(" ".join(rng.choice(words) for _ in range(6)))
        features = ExampleFeatures(rng.random(), rng.random(), rng.random(), rng.random())
        examples.append(
            LabeledExample(f"r{i}", tokens.token_ids, tokens.pieces, features, rng.randint(1, 5))
        )
    return examples


class TestTokenizer:
    def test_markers_and_pieces(self, encoder):
        tokens = encoder.tokenize("The room was clean")
        assert tokens.pieces[0] == "[CLS]" and tokens.pieces[-1] == "[SEP]"
        assert "room" in tokens.pieces
        assert not tokens.degenerate

    def test_empty_text_degenerate(self, encoder):
        assert encoder.tokenize("").degenerate

    def test_truncation(self, encoder):
        tokens = encoder.tokenize(" ".join(["room"] * 60))
        assert tokens.length == 16 and tokens.truncated


class TestForward:
    def test_encode_shape_and_determinism(self, encoder):
        tokens = encoder.tokenize("great view and clean pool")
        first = encoder.encode(tokens)
        second = encoder.encode(tokens)
        assert first.vector.shape == (8,)
        assert (first.vector == second.vector).all()
        assert first.source == "pretrained"

    def test_attribution_through_backbone(self, encoder):
        model = FusionModel(encoder, ModelConfig(expertise_dim=4, temporal_dim=4))
        model.eval()
        tokens = encoder.tokenize("the room was clean and the staff great")
        report = attribute(model, tokens, 0.5, 0.5, steps=128)
        assert len(report.tokens) == len(report.scores) == tokens.length
        assert report.scores[0] == 0.0 and report.scores[-1] == 0.0
        assert report.completeness_gap < float("inf")
        # float32 backbone: looser than the hash backend but still tight
        assert report.completeness_gap <= 0.05 * max(abs(report.delta), 1e-6)


class TestTraining:
    def test_fine_tune_and_checkpoint_round_trip(self, encoder, tmp_path):
        model = FusionModel(encoder, ModelConfig(expertise_dim=4, temporal_dim=4))
        examples = make_examples(encoder)
        config = TrainConfig(learning_rate=1e-3, batch_size=8, epochs=2, seed=0)
        log = train_model(model, examples, examples, config)
        assert len(log.records) == 2
        directory = save_checkpoint(tmp_path / "ckpt", model, FeatureStats(0, 1, 0, 1))
        assert (directory / "tokenizer").is_dir()
        assert any((directory / "tokenizer").iterdir())
        restored, _, manifest = load_checkpoint(directory)
        assert manifest["encoder"]["backend"] == "pretrained"
        tokens = encoder.tokenize("front desk staff")
        before = model.predict_one(tokens.token_ids, 0.3, 0.7)
        after = restored.predict_one(tokens.token_ids, 0.3, 0.7)
        assert (before.probs == after.probs).all()

    def test_freeze_flag_leaves_backbone_untouched(self, tiny_weights_dir):
        frozen = TransformerEncoder(
            model_name=str(tiny_weights_dir), out_dim=8, max_len=16, freeze=True
        )
        model = FusionModel(frozen, ModelConfig(expertise_dim=4, temporal_dim=4))
        backbone_before = {
            name: p.detach().clone() for name, p in frozen.backbone.named_parameters()
        }
        projection_before = frozen.projection.weight.detach().clone()
        examples = make_examples(frozen, seed=1)
        config = TrainConfig(learning_rate=1e-2, batch_size=8, epochs=1, seed=1)
        train_model(model, examples, examples, config)
        for name, param in frozen.backbone.named_parameters():
            assert torch.equal(param, backbone_before[name]), name
        assert not torch.equal(frozen.projection.weight, projection_before)

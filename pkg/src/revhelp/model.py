"""Fusion classifier over text, expertise, and temporal representations.

Each enabled scalar feature passes through its own affine head with tanh;
the head outputs are concatenated with the text vector (expertise, text,
temporal, in that order) and a single affine classifier over the fused
vector produces logits for the five helpfulness classes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from revhelp.corpus import N_CLASSES
from revhelp.encoders import EncoderConfig, TextEncoder, build_encoder
from revhelp.errors import NumericsError

log = logging.getLogger(__name__)

LOSS_EPSILON = 1e-12


@dataclass
class ModelConfig:
    expertise_dim: int = 16
    temporal_dim: int = 16
    use_expertise: bool = True
    use_temporal: bool = True
    n_classes: int = N_CLASSES
    dropout: float = 0.0
    dtype: str = "float64"

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def torch_dtype(self) -> torch.dtype:
        return {"float64": torch.float64, "float32": torch.float32}[self.dtype]


@dataclass
class Prediction:
    """Class distribution and its argmax decode (ties break to the lowest class)."""

    probs: np.ndarray
    predicted_class: int

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)


def predict_class(probs) -> int:
    """Argmax class in 1..5; numpy argmax returns the first (lowest) maximum."""
    return int(np.argmax(np.asarray(probs))) + 1


def cross_entropy_loss(probs, label: int) -> float:
    """Negative log probability of the gold class.

    ``probs`` is a valid distribution over the five classes and ``label``
    is 1-based.  A zero gold probability is clamped to 1e-12 with a warning
    rather than producing infinity.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if not 1 <= label <= len(probs):
        raise ValueError(f"label {label} outside 1..{len(probs)}")
    p = float(probs[label - 1])
    if p <= 0.0:
        log.warning("gold-class probability %.3g clamped to %.0e", p, LOSS_EPSILON)
        p = LOSS_EPSILON
    return -math.log(p)


class FusionModel(nn.Module):
    """Text + scalar-feature classifier with toggleable feature heads.

    Disabled heads are never constructed, so an ablated variant has
    strictly fewer trainable parameters and its checkpoint carries no
    parameters for the removed component.
    """

    def __init__(self, encoder: TextEncoder, config: ModelConfig | None = None):
        super().__init__()
        self.config = config or ModelConfig()
        self.encoder = encoder
        dtype = self.config.torch_dtype()
        fused = encoder.out_dim
        if self.config.use_expertise:
            self.expertise_head = nn.Linear(1, self.config.expertise_dim, dtype=dtype)
            fused += self.config.expertise_dim
        if self.config.use_temporal:
            self.temporal_head = nn.Linear(1, self.config.temporal_dim, dtype=dtype)
            fused += self.config.temporal_dim
        self.fused_dim = fused
        self.dropout = nn.Dropout(self.config.dropout)
        self.classifier = nn.Linear(fused, self.config.n_classes, dtype=dtype)
        if encoder.backend == "hash":
            # Keep the whole module in one dtype; the hash backend is cheap
            # enough to run in float64 for tight gradient checks.
            self.to(dtype)

    @property
    def dtype(self) -> torch.dtype:
        return self.classifier.weight.dtype

    def fuse(
        self, text_vec: torch.Tensor, expertise: torch.Tensor, age: torch.Tensor
    ) -> torch.Tensor:
        parts = []
        if self.config.use_expertise:
            parts.append(torch.tanh(self.expertise_head(expertise.unsqueeze(-1))))
        parts.append(text_vec.to(self.dtype))
        if self.config.use_temporal:
            parts.append(torch.tanh(self.temporal_head(age.unsqueeze(-1))))
        return torch.cat(parts, dim=-1)

    def logits_from_text(
        self, text_vec: torch.Tensor, expertise: torch.Tensor, age: torch.Tensor
    ) -> torch.Tensor:
        logits = self.classifier(self.dropout(self.fuse(text_vec, expertise, age)))
        if not torch.isfinite(logits).all():
            raise NumericsError(
                "non-finite logits; parameter norms: " + self.describe_parameters()
            )
        return logits

    def forward(
        self,
        token_ids: torch.Tensor,
        mask: torch.Tensor,
        expertise: torch.Tensor,
        age: torch.Tensor,
    ) -> torch.Tensor:
        text_vec = self.encoder(token_ids, mask)
        return self.logits_from_text(text_vec, expertise, age)

    def logits_from_embeddings(
        self,
        embeddings: torch.Tensor,
        mask: torch.Tensor,
        expertise: torch.Tensor,
        age: torch.Tensor,
    ) -> torch.Tensor:
        """Forward pass starting from token embeddings (attribution path)."""
        text_vec = self.encoder.forward_from_embeddings(embeddings, mask)
        return self.logits_from_text(text_vec, expertise, age)

    def predict_proba(
        self,
        token_ids: torch.Tensor,
        mask: torch.Tensor,
        expertise: torch.Tensor,
        age: torch.Tensor,
    ) -> torch.Tensor:
        with torch.no_grad():
            return F.softmax(self(token_ids, mask, expertise, age), dim=-1)

    def predict_one(self, token_ids: list[int], expertise: float, age: float) -> Prediction:
        ids = torch.tensor([token_ids], dtype=torch.long)
        mask = torch.ones_like(ids, dtype=self.dtype)
        e = torch.tensor([expertise], dtype=self.dtype)
        a = torch.tensor([age], dtype=self.dtype)
        probs = self.predict_proba(ids, mask, e, a)[0].cpu().numpy()
        return Prediction(probs=probs, predicted_class=predict_class(probs))

    def trainable_parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters() if p.requires_grad)

    def describe_parameters(self) -> str:
        norms = {
            name: float(param.detach().norm()) for name, param in self.named_parameters()
        }
        return ", ".join(f"{name}={value:.4g}" for name, value in sorted(norms.items()))


def build_model(
    encoder_config: EncoderConfig, model_config: ModelConfig | None = None, seed: int = 0
) -> FusionModel:
    """Construct encoder and fusion model with seeded initialization.

    Linear layers keep torch's default uniform(-1/sqrt(fan_in),
    +1/sqrt(fan_in)) initialization; seeding the global generator before
    construction makes two builds with equal seed and config identical.
    """
    torch.manual_seed(seed)
    encoder = build_encoder(encoder_config)
    return FusionModel(encoder, model_config)

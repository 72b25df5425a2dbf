"""Reviewer expertise and review age features with min-max normalization.

Expertise is a reviewer's mean helpful votes per review; age is the
whole-day distance between posting date and the corpus reference date.
Both are rescaled into a fixed target interval (default [0, 1]) using
statistics fitted on the training split only, so inference never leaks
information from held-out data.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Iterable, Sequence


@dataclass(frozen=True)
class FeatureStats:
    """Training-split extrema for both scalar features plus the target range."""

    min_expertise: float
    max_expertise: float
    min_age_days: float
    max_age_days: float
    range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        a, b = self.range
        if not a < b:
            raise ValueError(f"target range must satisfy a < b, got ({a}, {b})")
        if self.min_expertise > self.max_expertise or self.min_age_days > self.max_age_days:
            raise ValueError("feature minimum exceeds maximum")

    def to_dict(self) -> dict:
        return {
            "min_expertise": self.min_expertise,
            "max_expertise": self.max_expertise,
            "min_age_days": self.min_age_days,
            "max_age_days": self.max_age_days,
            "range": list(self.range),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FeatureStats":
        return cls(
            min_expertise=float(payload["min_expertise"]),
            max_expertise=float(payload["max_expertise"]),
            min_age_days=float(payload["min_age_days"]),
            max_age_days=float(payload["max_age_days"]),
            range=tuple(payload.get("range", (0.0, 1.0))),
        )


@dataclass
class ExampleFeatures:
    """Raw and normalized feature values for one review."""

    expertise_raw: float
    age_days_raw: float
    expertise_norm: float | None = None
    age_norm: float | None = None


@dataclass
class LabeledExample:
    """Model-ready sample: token sequence, normalized scalars, gold class."""

    review_id: str
    token_ids: list[int]
    pieces: list[str]
    features: ExampleFeatures
    label: int

    @property
    def expertise_norm(self) -> float:
        return self.features.expertise_norm

    @property
    def age_norm(self) -> float:
        return self.features.age_norm


def expertise_score(m_votes: int, n_reviews: int) -> float:
    """Mean helpful votes per review for a reviewer: m_votes / n_reviews."""
    if n_reviews < 1:
        raise ValueError(f"n_reviews must be >= 1, got {n_reviews}")
    if m_votes < 0:
        raise ValueError(f"m_votes must be >= 0, got {m_votes}")
    return m_votes / n_reviews


def review_age_days(posted_at: date, reference_date: date) -> float:
    """Whole days between posting date and the corpus reference date."""
    if posted_at > reference_date:
        raise ValueError(f"review posted {posted_at} is after reference date {reference_date}")
    return float((reference_date - posted_at).days)


def fit_stats(
    train_features: Sequence[ExampleFeatures], range: tuple[float, float] = (0.0, 1.0)
) -> FeatureStats:
    """Componentwise min/max over the training split."""
    if not train_features:
        raise ValueError("cannot fit feature statistics on an empty training split")
    expertise = [f.expertise_raw for f in train_features]
    ages = [f.age_days_raw for f in train_features]
    return FeatureStats(
        min_expertise=min(expertise),
        max_expertise=max(expertise),
        min_age_days=min(ages),
        max_age_days=max(ages),
        range=range,
    )


def normalize(x: float, lo: float, hi: float, range: tuple[float, float] = (0.0, 1.0)) -> float:
    """Affine rescale of ``x`` from [lo, hi] onto [a, b], clamped at the ends.

    A degenerate fit (hi == lo) maps everything to ``a``; out-of-range
    inputs (held-out values beyond the training extrema) are clamped so the
    classifier input stays bounded.
    """
    a, b = range
    if hi == lo:
        return a
    z = (b - a) * (x - lo) / (hi - lo) + a
    return min(max(z, a), b)


def normalize_features(features: ExampleFeatures, stats: FeatureStats) -> ExampleFeatures:
    features.expertise_norm = normalize(
        features.expertise_raw, stats.min_expertise, stats.max_expertise, stats.range
    )
    features.age_norm = normalize(
        features.age_days_raw, stats.min_age_days, stats.max_age_days, stats.range
    )
    return features


def normalize_all(
    feature_sets: Iterable[Sequence[ExampleFeatures]], stats: FeatureStats
) -> None:
    """Normalize several splits in place against shared training stats."""
    for split in feature_sets:
        for features in split:
            normalize_features(features, stats)

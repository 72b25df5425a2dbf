"""Synthetic review corpora for demos, CI runs, and directional checks.

The generator controls how much each signal carries: the helpfulness
class is the quintile of a noisy blend of reviewer expertise and review
age, while the text mentions a class-typical aspect only with probability
``text_signal``.  A fusion model therefore has headroom over a text-only
model by construction, which is exactly what the directional ablation
check needs; vote counts are sampled inside the class's own interval so
labeling recovers the intended class.
"""

from __future__ import annotations

import json
import random
from datetime import date, timedelta
from pathlib import Path

from revhelp.corpus import ReviewRecord, ReviewerProfile

_COMMON_OPENERS = (
    "We stayed here last month",
    "I visited with my family",
    "My partner and I ate here",
    "They hosted our group for a week",
    "I booked a room on short notice",
)

_COMMON_MIDDLES = (
    "the room was {adj} and the staff were {adj2}",
    "the location is {adj} but the service felt {adj2}",
    "breakfast was {adj} and the pool area looked {adj2}",
    "the view from the balcony was {adj}",
    "the front desk handled our check in, which was {adj}",
    "parking cost extra and the lobby seemed {adj}",
    "the food at dinner tasted {adj} and portions were {adj2}",
)

_ADJECTIVES = ("great", "nice", "dirty", "noisy", "clean", "lovely", "awful", "pleasant")

#: One aspect phrase per class; mentioned with probability ``text_signal``.
_CLASS_ASPECTS = {
    1: "the shuttle schedule to the airport",
    2: "the breakfast buffet selection",
    3: "the resort fee at checkout",
    4: "the spa booking process",
    5: "the conference center layout",
}

_CLOSERS = (
    "Overall it was a memorable trip.",
    "We would consider coming back.",
    "Hard to say if it suits everyone.",
    "Ask for a room away from the elevator.",
    "Check the latest policies before booking.",
)


def _review_text(rng: random.Random, cls: int, text_signal: float) -> str:
    sentences = [rng.choice(_COMMON_OPENERS) + "."]
    for _ in range(rng.randint(1, 3)):
        template = rng.choice(_COMMON_MIDDLES)
        sentence = template.format(adj=rng.choice(_ADJECTIVES), adj2=rng.choice(_ADJECTIVES))
        sentences.append(sentence[0].upper() + sentence[1:] + ".")
    if rng.random() < text_signal:
        sentences.append(f"I kept thinking about {_CLASS_ASPECTS[cls]}.")
    sentences.append(rng.choice(_CLOSERS))
    return " ".join(sentences)


def _votes_for_class(rng: random.Random, cls: int) -> int:
    lo = 2 ** (cls - 1)
    hi = 2**cls - 1 if cls < 5 else 48
    return rng.randint(lo, hi)


def generate_corpus(
    n_reviews: int = 200,
    n_reviewers: int = 40,
    seed: int = 0,
    text_signal: float = 0.3,
    feature_noise: float = 0.08,
    zero_vote_fraction: float = 0.05,
    start: date = date(2015, 1, 1),
    end: date = date(2019, 12, 31),
) -> tuple[list[ReviewRecord], dict[str, ReviewerProfile]]:
    """Build a corpus whose classes derive from expertise and age quintiles.

    A ``zero_vote_fraction`` of extra unlabeled reviews is appended so the
    preparation path exercises its vote filter.
    """
    rng = random.Random(seed)
    span_days = (end - start).days

    profiles: dict[str, ReviewerProfile] = {}
    expertise_by_reviewer: dict[str, float] = {}
    for i in range(n_reviewers):
        reviewer_id = f"u{i:04d}"
        n = rng.randint(1, 30)
        target_expertise = rng.uniform(0.0, 20.0)
        m = round(target_expertise * n)
        profiles[reviewer_id] = ReviewerProfile(reviewer_id=reviewer_id, n_reviews=n, m_votes=m)
        expertise_by_reviewer[reviewer_id] = m / n

    drafts = []
    for i in range(n_reviews):
        reviewer_id = f"u{rng.randrange(n_reviewers):04d}"
        posted_at = start + timedelta(days=rng.randint(0, span_days))
        age_frac = (end - posted_at).days / span_days
        signal = (
            0.6 * expertise_by_reviewer[reviewer_id] / 20.0
            + 0.4 * age_frac
            + rng.gauss(0.0, feature_noise)
        )
        drafts.append((i, reviewer_id, posted_at, signal))

    # Class = quintile of the blended signal, so classes come out balanced.
    by_signal = sorted(drafts, key=lambda d: d[3])
    classes: dict[int, int] = {}
    for rank, draft in enumerate(by_signal):
        classes[draft[0]] = min(5, 1 + (rank * 5) // len(by_signal))

    reviews: list[ReviewRecord] = []
    for i, reviewer_id, posted_at, _ in drafts:
        cls = classes[i]
        reviews.append(
            ReviewRecord(
                review_id=f"r{i:05d}",
                reviewer_id=reviewer_id,
                text=_review_text(rng, cls, text_signal),
                helpful_votes=_votes_for_class(rng, cls),
                posted_at=posted_at,
            )
        )

    # Keep profiles consistent: cumulative votes must cover any single
    # review's votes.  The bump only moves rare tail cases.
    for review in reviews:
        profile = profiles[review.reviewer_id]
        if profile.m_votes < review.helpful_votes:
            profiles[review.reviewer_id] = ReviewerProfile(
                reviewer_id=profile.reviewer_id,
                n_reviews=profile.n_reviews,
                m_votes=review.helpful_votes,
            )

    for j in range(round(n_reviews * zero_vote_fraction)):
        reviewer_id = f"u{rng.randrange(n_reviewers):04d}"
        posted_at = start + timedelta(days=rng.randint(0, span_days))
        reviews.append(
            ReviewRecord(
                review_id=f"z{j:05d}",
                reviewer_id=reviewer_id,
                text=_review_text(rng, rng.randint(1, 5), text_signal),
                helpful_votes=0,
                posted_at=posted_at,
            )
        )
    return reviews, profiles


def write_corpus_files(
    reviews: list[ReviewRecord],
    profiles: dict[str, ReviewerProfile],
    reviews_path: str | Path,
    reviewers_path: str | Path,
) -> None:
    """Serialize to the line-delimited JSON layout the loader expects."""
    with open(reviews_path, "w", encoding="utf-8") as handle:
        for r in reviews:
            handle.write(
                json.dumps(
                    {
                        "review_id": r.review_id,
                        "reviewer_id": r.reviewer_id,
                        "text": r.text,
                        "helpful_votes": r.helpful_votes,
                        "posted_at": r.posted_at.isoformat(),
                    }
                )
                + "\n"
            )
    with open(reviewers_path, "w", encoding="utf-8") as handle:
        for profile in profiles.values():
            handle.write(
                json.dumps(
                    {
                        "reviewer_id": profile.reviewer_id,
                        "n_reviews": profile.n_reviews,
                        "m_votes": profile.m_votes,
                    }
                )
                + "\n"
            )

"""Corpus ingestion, helpfulness labeling, and train/valid/test splits.

Reviews and reviewer profiles arrive as line-delimited JSON (one record per
line, UTF-8, unknown fields ignored).  Labeling maps helpful-vote counts
onto five classes along power-of-two intervals; zero-vote reviews stay in
the raw corpus (they feed reviewer aggregates) but are never labeled.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from revhelp.errors import CorpusError

log = logging.getLogger(__name__)

N_CLASSES = 5

#: Half-open vote intervals for classes 1..5; the top interval is unbounded.
VOTE_INTERVALS: tuple[tuple[int, int | None], ...] = (
    (1, 2),
    (2, 4),
    (4, 8),
    (8, 16),
    (16, None),
)

SPLIT_NAMES = ("train", "valid", "test")

_SENTENCE_RE = re.compile(r"[.!?]+")


@dataclass(frozen=True)
class ReviewRecord:
    """One review: body text, accumulated helpful votes, posting date."""

    review_id: str
    reviewer_id: str
    text: str
    helpful_votes: int
    posted_at: date


@dataclass(frozen=True)
class ReviewerProfile:
    """Aggregate reviewer history: reviews contributed and cumulative helpful votes."""

    reviewer_id: str
    n_reviews: int
    m_votes: int


@dataclass
class LoadReport:
    """Counts of records rejected or flagged while loading a corpus."""

    malformed_reviews: int = 0
    malformed_profiles: int = 0
    duplicate_reviews: int = 0
    duplicate_profiles: int = 0
    missing_profile_review_ids: set[str] = field(default_factory=set)
    consistency_warnings: int = 0


class CorpusLoadResult(NamedTuple):
    reviews: list[ReviewRecord]
    profiles: dict[str, ReviewerProfile]
    report: LoadReport


@dataclass
class LabeledCorpus:
    """Split membership plus labels for every labeled review.

    Splits are disjoint and exhaust the labeled set; ``reference_date`` is
    the anchor used downstream to turn posting dates into review ages.
    """

    train: list[str]
    valid: list[str]
    test: list[str]
    labels: dict[str, int]
    reference_date: date
    seed: int
    ratios: tuple[float, float, float]

    def split_ids(self, name: str) -> list[str]:
        if name not in SPLIT_NAMES:
            raise KeyError(f"unknown split {name!r}; expected one of {SPLIT_NAMES}")
        return getattr(self, name)

    @property
    def n_labeled(self) -> int:
        return len(self.labels)


def bucket_votes(helpful_votes: int) -> int:
    """Map a positive helpful-vote count to its class in 1..5.

    The class is ``min(floor(log2(votes)) + 1, 5)``, i.e. membership in the
    intervals [1,2), [2,4), [4,8), [8,16), [16,inf).  Computed with integer
    bit arithmetic, so it is exact for arbitrarily large counts.
    """
    votes = int(helpful_votes)
    if votes < 1:
        raise ValueError(f"helpful_votes must be >= 1 to be bucketed, got {helpful_votes}")
    return min(votes.bit_length(), N_CLASSES)


def _parse_review(obj: dict) -> ReviewRecord:
    review_id = obj["review_id"]
    reviewer_id = obj["reviewer_id"]
    text = obj["text"]
    votes = obj["helpful_votes"]
    posted = obj["posted_at"]
    if not isinstance(review_id, str) or not review_id:
        raise ValueError("review_id must be a non-empty string")
    if not isinstance(reviewer_id, str) or not reviewer_id:
        raise ValueError("reviewer_id must be a non-empty string")
    if not isinstance(text, str):
        raise ValueError("text must be a string")
    if isinstance(votes, bool) or not isinstance(votes, int) or votes < 0:
        raise ValueError(f"helpful_votes must be a non-negative integer, got {votes!r}")
    return ReviewRecord(
        review_id=review_id,
        reviewer_id=reviewer_id,
        text=text,
        helpful_votes=votes,
        posted_at=date.fromisoformat(posted),
    )


def _parse_profile(obj: dict) -> ReviewerProfile:
    reviewer_id = obj["reviewer_id"]
    n_reviews = obj["n_reviews"]
    m_votes = obj["m_votes"]
    if not isinstance(reviewer_id, str) or not reviewer_id:
        raise ValueError("reviewer_id must be a non-empty string")
    if isinstance(n_reviews, bool) or not isinstance(n_reviews, int) or n_reviews < 1:
        raise ValueError(f"n_reviews must be a positive integer, got {n_reviews!r}")
    if isinstance(m_votes, bool) or not isinstance(m_votes, int) or m_votes < 0:
        raise ValueError(f"m_votes must be a non-negative integer, got {m_votes!r}")
    return ReviewerProfile(reviewer_id=reviewer_id, n_reviews=n_reviews, m_votes=m_votes)


def _iter_jsonl(path: Path):
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if line.strip():
                yield lineno, line


def load_corpus(reviews_path: str | Path, reviewers_path: str | Path) -> CorpusLoadResult:
    """Load review and reviewer JSONL files.

    Malformed lines are counted in the returned report and logged, never
    fatal; an unreadable file is.  Reviews whose reviewer has no profile are
    flagged in ``report.missing_profile_review_ids`` so labeling can skip
    them.
    """
    report = LoadReport()
    reviews: list[ReviewRecord] = []
    seen_ids: set[str] = set()
    for lineno, line in _iter_jsonl(Path(reviews_path)):
        try:
            record = _parse_review(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            report.malformed_reviews += 1
            log.warning("%s:%d: skipping malformed review (%s)", reviews_path, lineno, exc)
            continue
        if record.review_id in seen_ids:
            report.duplicate_reviews += 1
            log.warning("%s:%d: duplicate review_id %s", reviews_path, lineno, record.review_id)
            continue
        seen_ids.add(record.review_id)
        reviews.append(record)

    profiles: dict[str, ReviewerProfile] = {}
    for lineno, line in _iter_jsonl(Path(reviewers_path)):
        try:
            profile = _parse_profile(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            report.malformed_profiles += 1
            log.warning("%s:%d: skipping malformed profile (%s)", reviewers_path, lineno, exc)
            continue
        if profile.reviewer_id in profiles:
            report.duplicate_profiles += 1
            continue
        profiles[profile.reviewer_id] = profile

    max_single = {}
    for record in reviews:
        profile = profiles.get(record.reviewer_id)
        if profile is None:
            report.missing_profile_review_ids.add(record.review_id)
            continue
        prev = max_single.get(record.reviewer_id, 0)
        max_single[record.reviewer_id] = max(prev, record.helpful_votes)
    # Cumulative votes below a single review's votes means the scrape is
    # inconsistent; real data is noisy, so warn instead of rejecting.
    for reviewer_id, votes in max_single.items():
        if profiles[reviewer_id].m_votes < votes:
            report.consistency_warnings += 1
            log.warning(
                "reviewer %s: cumulative votes %d below single-review maximum %d",
                reviewer_id,
                profiles[reviewer_id].m_votes,
                votes,
            )
    return CorpusLoadResult(reviews, profiles, report)


def label_reviews(
    reviews: Iterable[ReviewRecord],
    profiles: dict[str, ReviewerProfile],
    exclude: set[str] | None = None,
) -> dict[str, int]:
    """Assign helpfulness classes to every labelable review.

    Zero-vote reviews and reviews without a reviewer profile are excluded;
    ids listed in ``exclude`` (e.g. flagged at load time) are skipped too.
    """
    exclude = exclude or set()
    labels: dict[str, int] = {}
    for record in reviews:
        if record.review_id in exclude or record.reviewer_id not in profiles:
            continue
        if record.helpful_votes < 1:
            continue
        labels[record.review_id] = bucket_votes(record.helpful_votes)
    return labels


def split_counts(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    """Partition ``n`` items into three counts matching ``ratios`` within one.

    Uses cumulative rounding so the counts always sum to ``n`` exactly.
    """
    if len(ratios) != 3:
        raise ValueError(f"expected three split ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be non-negative and sum to 1, got {ratios}")
    first = round(n * ratios[0])
    second = round(n * (ratios[0] + ratios[1]))
    return first, second - first, n - second


def default_reference_date(reviews: Iterable[ReviewRecord]) -> date:
    """Day after the newest review in the corpus."""
    latest = max(record.posted_at for record in reviews)
    return latest + timedelta(days=1)


def make_splits(
    labeled_reviews: Sequence[ReviewRecord],
    ratios: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
    reference_date: date | None = None,
    group_by_reviewer: bool = False,
) -> LabeledCorpus:
    """Shuffle labeled reviews deterministically and cut train/valid/test.

    Every input review must carry at least one helpful vote.  With
    ``group_by_reviewer`` all reviews of a reviewer land in the same split
    (sizes then only approximate the ratios).
    """
    if len(labeled_reviews) < len(SPLIT_NAMES):
        raise CorpusError(
            f"need at least {len(SPLIT_NAMES)} labeled reviews to split, got {len(labeled_reviews)}"
        )
    labels = {r.review_id: bucket_votes(r.helpful_votes) for r in labeled_reviews}
    if len(labels) != len(labeled_reviews):
        raise CorpusError("labeled reviews contain duplicate review ids")
    if reference_date is None:
        reference_date = default_reference_date(labeled_reviews)
    future = [r.review_id for r in labeled_reviews if r.posted_at > reference_date]
    if future:
        raise CorpusError(
            f"{len(future)} reviews posted after reference date {reference_date} (first: {future[0]})"
        )

    n_train, n_valid, _ = split_counts(len(labeled_reviews), ratios)
    rng = random.Random(seed)
    if group_by_reviewer:
        groups: dict[str, list[str]] = {}
        for record in sorted(labeled_reviews, key=lambda r: r.review_id):
            groups.setdefault(record.reviewer_id, []).append(record.review_id)
        ordered_groups = [groups[k] for k in sorted(groups)]
        rng.shuffle(ordered_groups)
        ids = [rid for group in ordered_groups for rid in group]
        # Keep reviewer groups intact: each boundary advances to the end of
        # the group its target count falls in.
        group_ends: list[int] = []
        for group in ordered_groups:
            group_ends.append((group_ends[-1] if group_ends else 0) + len(group))

        def boundary(target: int) -> int:
            if target <= 0:
                return 0
            return next(end for end in group_ends if end >= target)

        first = boundary(n_train)
        second = max(first, boundary(n_train + n_valid))
        train_ids, valid_ids, test_ids = ids[:first], ids[first:second], ids[second:]
    else:
        ids = sorted(labels)
        rng.shuffle(ids)
        train_ids = ids[:n_train]
        valid_ids = ids[n_train : n_train + n_valid]
        test_ids = ids[n_train + n_valid :]

    return LabeledCorpus(
        train=train_ids,
        valid=valid_ids,
        test=test_ids,
        labels=labels,
        reference_date=reference_date,
        seed=seed,
        ratios=(float(ratios[0]), float(ratios[1]), float(ratios[2])),
    )


MANIFEST_FORMAT = "revhelp-corpus/1"


def save_manifest(corpus: LabeledCorpus, path: str | Path) -> None:
    """Write split membership, labels, seed, ratios, and reference date."""
    payload = {
        "format": MANIFEST_FORMAT,
        "seed": corpus.seed,
        "ratios": list(corpus.ratios),
        "reference_date": corpus.reference_date.isoformat(),
        "labels": corpus.labels,
        "train": corpus.train,
        "valid": corpus.valid,
        "test": corpus.test,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> LabeledCorpus:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CorpusError(f"cannot read manifest {path}: {exc}") from exc
    if payload.get("format") != MANIFEST_FORMAT:
        raise CorpusError(f"unsupported corpus manifest format {payload.get('format')!r}")
    return LabeledCorpus(
        train=list(payload["train"]),
        valid=list(payload["valid"]),
        test=list(payload["test"]),
        labels={k: int(v) for k, v in payload["labels"].items()},
        reference_date=date.fromisoformat(payload["reference_date"]),
        seed=int(payload["seed"]),
        ratios=tuple(payload["ratios"]),
    )


def count_sentences(text: str) -> int:
    return sum(1 for chunk in _SENTENCE_RE.split(text) if chunk.strip()) or (1 if text.strip() else 0)


def count_words(text: str) -> int:
    return len(text.split())


def corpus_stats(
    corpus: LabeledCorpus, reviews_by_id: dict[str, ReviewRecord]
) -> dict[str, dict[str, float]]:
    """Per-split sample counts and average sentence/word lengths."""
    stats: dict[str, dict[str, float]] = {}
    for name in SPLIT_NAMES:
        ids = corpus.split_ids(name)
        texts = [reviews_by_id[rid].text for rid in ids]
        n = len(texts)
        stats[name] = {
            "samples": n,
            "avg_sentences": (sum(count_sentences(t) for t in texts) / n) if n else 0.0,
            "avg_words": (sum(count_words(t) for t in texts) / n) if n else 0.0,
        }
    return stats

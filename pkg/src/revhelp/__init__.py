"""Review helpfulness classification from text, reviewer expertise, and review age.

The package provides a corpus pipeline (ingest, label, split), a fusion
classifier combining a text encoder with two normalized scalar features,
training/ablation/evaluation harnesses, per-class aspect extraction, and
integrated-gradients token attribution.  The ``revhelp`` CLI orchestrates
the full workflow and writes delimited reports plus rendered figures.
"""

from revhelp.corpus import ReviewRecord, ReviewerProfile, LabeledCorpus, bucket_votes
from revhelp.features import FeatureStats, expertise_score, review_age_days, normalize
from revhelp.evaluation import MetricsReport, SignificanceResult, evaluate, paired_t_test

__version__ = "0.1.0"

__all__ = [
    "ReviewRecord",
    "ReviewerProfile",
    "LabeledCorpus",
    "bucket_votes",
    "FeatureStats",
    "expertise_score",
    "review_age_days",
    "normalize",
    "MetricsReport",
    "SignificanceResult",
    "evaluate",
    "paired_t_test",
    "__version__",
]

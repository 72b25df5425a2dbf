"""Accuracy/MAE/MSE over predicted classes and paired significance tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from scipy import special

from revhelp.corpus import N_CLASSES

ALPHA = 0.05


@dataclass
class MetricsReport:
    accuracy: float
    mae: float
    mse: float
    n: int
    per_example: list[tuple[int, int, float, float, bool]]

    def correctness(self) -> list[float]:
        return [1.0 if row[4] else 0.0 for row in self.per_example]

    def abs_errors(self) -> list[float]:
        return [row[2] for row in self.per_example]

    def sq_errors(self) -> list[float]:
        return [row[3] for row in self.per_example]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "mae": self.mae,
            "mse": self.mse,
            "n": self.n,
        }


@dataclass
class SignificanceResult:
    t_statistic: float
    p_value: float
    significant: bool
    metric: str = ""
    degenerate: bool = False


def evaluate(preds: Sequence[int], golds: Sequence[int]) -> MetricsReport:
    """Accuracy, mean absolute error, and mean squared error over classes."""
    if len(preds) != len(golds):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(golds)} golds")
    if not preds:
        raise ValueError("cannot evaluate an empty prediction list")
    per_example = []
    for pred, gold in zip(preds, golds):
        if not (1 <= pred <= N_CLASSES and 1 <= gold <= N_CLASSES):
            raise ValueError(f"classes must be in 1..{N_CLASSES}, got pred={pred}, gold={gold}")
        err = abs(pred - gold)
        per_example.append((gold, pred, float(err), float(err * err), pred == gold))
    n = len(per_example)
    return MetricsReport(
        accuracy=sum(1 for row in per_example if row[4]) / n,
        mae=sum(row[2] for row in per_example) / n,
        mse=sum(row[3] for row in per_example) / n,
        n=n,
        per_example=per_example,
    )


def paired_t_test(
    errors_a: Sequence[float], errors_b: Sequence[float], metric: str = ""
) -> SignificanceResult:
    """Two-tailed paired t-test on per-example differences a - b.

    Zero-variance differences short-circuit: all-zero differences give
    p = 1 (flagged degenerate), a constant nonzero difference gives an
    unbounded statistic and p = 0.
    """
    if len(errors_a) != len(errors_b):
        raise ValueError("paired samples must have equal length")
    n = len(errors_a)
    if n < 2:
        raise ValueError(f"need at least 2 paired observations, got {n}")
    diffs = [a - b for a, b in zip(errors_a, errors_b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return SignificanceResult(0.0, 1.0, False, metric=metric, degenerate=True)
        t = math.copysign(math.inf, mean)
        return SignificanceResult(t, 0.0, True, metric=metric, degenerate=True)
    t = mean / math.sqrt(var / n)
    df = n - 1
    # Student-t CDF of -|t| gives one tail; double it for the two-tailed p.
    p = 2.0 * float(special.stdtr(df, -abs(t)))
    return SignificanceResult(t, p, p < ALPHA, metric=metric)


METRIC_COLUMNS = ("accuracy", "mae", "mse")


def compare_systems(
    reports: dict[str, MetricsReport], reference: str
) -> dict[str, dict[str, SignificanceResult]]:
    """Paired tests of every system against a reference, one per metric.

    The per-example quantity matches each metric's decomposition: 0/1
    correctness for accuracy, absolute error for MAE, squared error for
    MSE.
    """
    if reference not in reports:
        raise KeyError(f"reference system {reference!r} not among {sorted(reports)}")
    ref = reports[reference]
    results: dict[str, dict[str, SignificanceResult]] = {}
    for name, report in reports.items():
        if name == reference:
            continue
        results[name] = {
            "accuracy": paired_t_test(report.correctness(), ref.correctness(), "accuracy"),
            "mae": paired_t_test(report.abs_errors(), ref.abs_errors(), "mae"),
            "mse": paired_t_test(report.sq_errors(), ref.sq_errors(), "mse"),
        }
    return results


def render_metrics_grid(
    reports: dict[str, MetricsReport],
    significance: dict[str, dict[str, SignificanceResult]] | None = None,
    reference: str | None = None,
) -> str:
    """Plain-text systems-by-metrics grid with significance daggers."""
    significance = significance or {}
    width = max(len(name) for name in reports) + 2
    lines = [f"{'system':<{width}} {'acc':>9} {'mae':>9} {'mse':>9} {'n':>7}"]
    for name, report in reports.items():
        marks = significance.get(name, {})
        cells = []
        for metric, value in (
            ("accuracy", report.accuracy * 100.0),
            ("mae", report.mae),
            ("mse", report.mse),
        ):
            result = marks.get(metric)
            dagger = "+" if result is not None and result.significant else " "
            fmt = f"{value:8.2f}" if metric == "accuracy" else f"{value:8.3f}"
            cells.append(fmt + dagger)
        suffix = "  (reference)" if name == reference else ""
        lines.append(f"{name:<{width}} {cells[0]} {cells[1]} {cells[2]} {report.n:>7}{suffix}")
    if significance:
        lines.append("+ significant vs reference (paired t-test, p < 0.05)")
    return "\n".join(lines)


def metrics_tsv_rows(reports: dict[str, MetricsReport]) -> list[str]:
    rows = ["system\taccuracy\tmae\tmse\tn"]
    for name, report in reports.items():
        rows.append(
            f"{name}\t{report.accuracy:.6f}\t{report.mae:.6f}\t{report.mse:.6f}\t{report.n}"
        )
    return rows

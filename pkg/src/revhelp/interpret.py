"""Integrated-gradients token attribution for fusion-model predictions.

Attribution integrates the gradient of the target-class logit along the
straight line from a baseline embedding sequence to the real one.  The
baseline replaces every interior token embedding with the pad embedding
while keeping the start/end markers at their real embeddings; the scalar
features stay fixed at the example's values.  The Riemann-sum residual
(completeness gap) is always reported alongside the scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from revhelp.encoders import PIECE_PREFIX, SPECIAL_TOKENS, TokenizedReview
from revhelp.model import FusionModel


@dataclass
class AttributionReport:
    tokens: list[str]
    scores: list[float]
    predicted_class: int
    target_class: int
    completeness_gap: float
    delta: float
    steps: int
    truncated: bool = False

    def __post_init__(self):
        if len(self.tokens) != len(self.scores):
            raise ValueError("tokens and scores must align one-to-one")


def integrated_gradients(func, x: torch.Tensor, baseline: torch.Tensor, steps: int):
    """Core path integral: per-input attributions plus the completeness gap.

    ``func`` maps a batch of points shaped (S, *x.shape) to S scalars.  The
    integral is approximated by the mean gradient at the right endpoints
    x' + (k/steps)(x - x') for k = 1..steps, scaled by (x - x').
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if x.shape != baseline.shape:
        raise ValueError("input and baseline shapes differ")
    alphas = torch.arange(1, steps + 1, dtype=x.dtype) / steps
    shape = (steps,) + (1,) * x.dim()
    path = baseline.unsqueeze(0) + alphas.view(shape) * (x - baseline).unsqueeze(0)
    path = path.detach().requires_grad_(True)
    outputs = func(path)
    if outputs.shape != (steps,):
        raise ValueError(f"func must return one scalar per step, got {tuple(outputs.shape)}")
    (grads,) = torch.autograd.grad(outputs.sum(), path)
    attributions = (x - baseline) * grads.mean(dim=0)
    with torch.no_grad():
        end_values = func(torch.stack([x, baseline]))
    delta = float(end_values[0] - end_values[1])
    gap = abs(float(attributions.sum()) - delta)
    return attributions, gap, delta


def attribute(
    model: FusionModel,
    tokens: TokenizedReview,
    expertise_norm: float,
    age_norm: float,
    steps: int = 50,
    target_class: int | None = None,
) -> AttributionReport:
    """Per-token attribution of the target-class logit.

    The target defaults to the model's predicted class for the example.
    Marker positions have zero input deviation by construction, so their
    attributions are exactly zero.
    """
    encoder = model.encoder
    # The embedding path must stay in the encoder's own dtype (a float32
    # transformer rejects float64 inputs); the fusion step casts afterward.
    enc_dtype = encoder.dtype()
    ids = torch.tensor(tokens.token_ids, dtype=torch.long)
    with torch.no_grad():
        x = encoder.embed_tokens(ids).detach().to(enc_dtype)
        pad = encoder.pad_embedding.to(enc_dtype)
    baseline = x.clone()
    if x.shape[0] > 2:
        baseline[1:-1] = pad

    e = torch.tensor([expertise_norm], dtype=model.dtype)
    a = torch.tensor([age_norm], dtype=model.dtype)

    def class_logits(batch: torch.Tensor) -> torch.Tensor:
        size = batch.shape[0]
        mask = torch.ones(size, batch.shape[1], dtype=enc_dtype)
        return model.logits_from_embeddings(batch, mask, e.expand(size), a.expand(size))

    with torch.no_grad():
        probs = torch.softmax(class_logits(x.unsqueeze(0))[0], dim=-1)
    predicted = int(torch.argmax(probs).item()) + 1
    target = target_class if target_class is not None else predicted
    if not 1 <= target <= model.config.n_classes:
        raise ValueError(f"target class {target} outside 1..{model.config.n_classes}")

    attributions, gap, delta = integrated_gradients(
        lambda batch: class_logits(batch)[:, target - 1], x, baseline, steps
    )
    return AttributionReport(
        tokens=list(tokens.pieces),
        scores=[float(s) for s in attributions.sum(dim=-1)],
        predicted_class=predicted,
        target_class=target,
        completeness_gap=gap,
        delta=delta,
        steps=steps,
        truncated=tokens.truncated,
    )


def merge_pieces(report: AttributionReport) -> list[tuple[str, float]]:
    """Word-level (token, score) pairs: continuation pieces fold into their
    word by summing scores; sequence markers are dropped."""
    words: list[tuple[str, float]] = []
    for piece, score in zip(report.tokens, report.scores):
        if piece in SPECIAL_TOKENS:
            continue
        if piece.startswith(PIECE_PREFIX) and words:
            word, total = words[-1]
            words[-1] = (word + piece[len(PIECE_PREFIX) :], total + score)
        else:
            words.append((piece, score))
    return words


def top_tokens(report: AttributionReport, k: int) -> list[tuple[str, float]]:
    """The k highest-attribution words, descending; k beyond the vocabulary
    of the example returns everything."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    words = merge_pieces(report)
    words.sort(key=lambda item: -item[1])
    return words[:k]


def render_heat(report: AttributionReport, top: int = 10) -> str:
    """Plain-text heat view: one line per word with a signed intensity bar."""
    words = merge_pieces(report)
    peak = max((abs(score) for _, score in words), default=0.0)
    lines = [
        f"predicted class {report.predicted_class}"
        f" (attribution target: class {report.target_class}, {report.steps} steps)",
        f"logit delta {report.delta:+.6f}, completeness gap {report.completeness_gap:.2e}",
        "",
    ]
    for word, score in words:
        if peak > 0:
            width = round(12 * abs(score) / peak)
        else:
            width = 0
        bar = ("+" if score >= 0 else "-") * width
        lines.append(f"  {word:<20} {score:+.6f}  {bar}")
    lines.append("")
    lines.append(f"top {top} words:")
    for rank, (word, score) in enumerate(top_tokens(report, top), start=1):
        lines.append(f"  {rank:2d}. {word}  ({score:+.6f})")
    if report.truncated:
        lines.append("note: input was truncated; trailing tokens are not attributed")
    return "\n".join(lines)


def attribution_tsv_rows(report: AttributionReport) -> list[str]:
    rows = ["position\ttoken\tscore"]
    for i, (token, score) in enumerate(zip(report.tokens, report.scores)):
        rows.append(f"{i}\t{token}\t{score:.10g}")
    return rows

"""Per-class aspect extraction: candidate nouns, n-gram ranking, overlap.

The pipeline lowercases, tokenizes, and lemmatizes review text, drops
stopwords/punctuation/domain words, then keeps only sentiment-neutral
nouns as aspect candidates.  Unigrams are ranked by raw frequency within
a class; bigram collocations are ranked by the Dunning log-likelihood
ratio, comparing a binomial independence hypothesis against a dependence
hypothesis for each adjacent candidate pair (bigrams never cross sentence
boundaries).  An overlap report records which n-grams recur across the
top lists of several classes.
"""

from __future__ import annotations

import random
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from scipy import special

from revhelp.lexicon import (
    DOMAIN_STOPWORDS,
    NOUN_TAGS,
    RuleBasedLemmatizer,
    RuleBasedTagger,
    contains_emoji,
    load_sentiment_lexicon,
    load_stopwords,
    strip_emoji,
)

_SENTENCE_RE = re.compile(r"[.!?]+")
_WORD_RE = re.compile(r"[0-9a-z']+")


@dataclass
class CandidateToken:
    """One surviving token with its tag, lemma, and lexicon valence."""

    surface: str
    lemma: str
    pos_tag: str
    sentiment_valence: float = 0.0

    @property
    def is_noun(self) -> bool:
        return self.pos_tag in NOUN_TAGS


@dataclass
class NgramReport:
    """Ranked per-class n-gram lists plus the cross-class overlap map."""

    top_k: int
    unigrams: dict[int, list[tuple[str, int]]]
    bigrams: dict[int, list[tuple[tuple[str, str], float]]]
    overlap: dict[str, set[int]] = field(default_factory=dict)

    def overlap_count(self, ngram: str) -> int:
        return len(self.overlap.get(ngram, ()))


class AspectPipeline:
    """Preprocessing and candidate filtering with pluggable components.

    The sentiment lexicon is loaded once at construction; a missing file
    fails here, at pipeline start, rather than midway through a corpus.
    """

    def __init__(
        self,
        stopwords: set[str] | None = None,
        stopwords_path: str | Path | None = None,
        sentiment_lexicon: dict[str, float] | None = None,
        lexicon_path: str | Path | None = None,
        tagger: RuleBasedTagger | None = None,
        lemmatizer: RuleBasedLemmatizer | None = None,
        domain_stopwords: Iterable[str] = DOMAIN_STOPWORDS,
    ):
        if stopwords is None:
            stopwords = load_stopwords(stopwords_path)
        self.stopwords = set(stopwords) | set(domain_stopwords)
        if sentiment_lexicon is None:
            sentiment_lexicon = load_sentiment_lexicon(lexicon_path)
        self.sentiment_lexicon = sentiment_lexicon
        self.tagger = tagger or RuleBasedTagger()
        self.lemmatizer = lemmatizer or RuleBasedLemmatizer()

    def preprocess(self, text: str) -> list[list[CandidateToken]]:
        """Tokenized, lemmatized, stopword-free sentences.

        Punctuation never survives tokenization; stopwords are dropped by
        both surface and lemma so inflected domain words go too.  Sentiment
        valence is attached here but acted on later by the candidate
        filter.
        """
        sentences: list[list[CandidateToken]] = []
        for raw_sentence in _SENTENCE_RE.split(strip_emoji(text)):
            tokens: list[CandidateToken] = []
            for surface in _WORD_RE.findall(raw_sentence.lower()):
                if surface in self.stopwords:
                    continue
                tag = self.tagger.tag(surface)
                lemma = self.lemmatizer.lemma(surface, tag)
                if lemma in self.stopwords:
                    continue
                valence = self.sentiment_lexicon.get(
                    lemma, self.sentiment_lexicon.get(surface, 0.0)
                )
                tokens.append(
                    CandidateToken(
                        surface=surface, lemma=lemma, pos_tag=tag, sentiment_valence=valence
                    )
                )
            if tokens:
                sentences.append(tokens)
        return sentences

    def filter_candidates(self, tokens: Sequence[CandidateToken]) -> list[CandidateToken]:
        """Keep sentiment-neutral nouns; emoji-bearing tokens are dropped."""
        return [
            t
            for t in tokens
            if t.is_noun and t.sentiment_valence == 0.0 and not contains_emoji(t.surface)
        ]

    def candidate_sentences(self, text: str) -> list[list[str]]:
        """Lemma sequences of surviving candidates, one list per sentence."""
        result = []
        for sentence in self.preprocess(text):
            kept = [t.lemma for t in self.filter_candidates(sentence)]
            if kept:
                result.append(kept)
        return result


def likelihood_ratio(c12: int, c1: int, c2: int, n: int) -> float:
    """Dunning log-likelihood-ratio score, -2 log lambda, for a bigram.

    Compares the independence hypothesis P(w2|w1) = P(w2|not w1) = c2/n
    against the dependence hypothesis with both conditionals at their
    maximum-likelihood values, under binomial likelihoods with counts
    c(w1) = ``c1``, c(w2) = ``c2``, c(w1 w2) = ``c12`` and ``n`` tokens in
    total.  The score is ~0 when the observed joint count sits exactly at
    the independence expectation c1*c2/n and grows with the strength of
    the collocation.
    """
    if n <= 0:
        raise ValueError("token total n must be positive")
    if not 0 <= c12 <= min(c1, c2):
        raise ValueError(f"inconsistent counts c12={c12}, c1={c1}, c2={c2}")
    if c1 > n or c2 > n:
        raise ValueError("marginal counts cannot exceed the token total")

    def log_binomial(k: int, trials: int, p: float) -> float:
        # xlogy handles the 0*log(0) limits at p in {0, 1}.
        return float(special.xlogy(k, p) + special.xlogy(trials - k, 1.0 - p))

    p = c2 / n
    p1 = c12 / c1 if c1 else 0.0
    rest = n - c1
    p2 = (c2 - c12) / rest if rest else 0.0
    null = log_binomial(c12, c1, p) + log_binomial(c2 - c12, rest, p)
    alternative = log_binomial(c12, c1, p1) + log_binomial(c2 - c12, rest, p2)
    return 2.0 * (alternative - null)


def rank_unigrams(candidates: Iterable[str], k: int) -> list[tuple[str, int]]:
    """Top-k candidate lemmas by frequency; ties break lexicographically."""
    counts = Counter(candidates)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def rank_bigrams(
    sentences: Iterable[Sequence[str]], k: int, min_freq: int = 5
) -> list[tuple[tuple[str, str], float]]:
    """Top-k adjacent-pair collocations by likelihood-ratio score.

    Pairs are counted within sentences only.  Bigrams occurring fewer than
    ``min_freq`` times are excluded: hapax pairs of rare words otherwise
    dominate the ranking with unstable scores.
    """
    unigram_counts: Counter[str] = Counter()
    bigram_counts: Counter[tuple[str, str]] = Counter()
    for sentence in sentences:
        unigram_counts.update(sentence)
        bigram_counts.update(zip(sentence, sentence[1:]))
    n = sum(unigram_counts.values())
    if n == 0:
        return []
    scored = [
        (pair, likelihood_ratio(c12, unigram_counts[pair[0]], unigram_counts[pair[1]], n))
        for pair, c12 in bigram_counts.items()
        if c12 >= min_freq
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


def overlap_report(
    unigrams_by_class: dict[int, list[tuple[str, int]]],
    bigrams_by_class: dict[int, list[tuple[tuple[str, str], float]]],
    top_k: int,
) -> NgramReport:
    """Assemble the report and mark which classes share each top n-gram."""
    overlap: dict[str, set[int]] = {}
    for cls, ranked in unigrams_by_class.items():
        for lemma, _ in ranked:
            overlap.setdefault(lemma, set()).add(cls)
    for cls, ranked in bigrams_by_class.items():
        for pair, _ in ranked:
            overlap.setdefault(" ".join(pair), set()).add(cls)
    return NgramReport(
        top_k=top_k,
        unigrams=unigrams_by_class,
        bigrams=bigrams_by_class,
        overlap=overlap,
    )


def analyze_classes(
    texts_by_class: dict[int, list[str]],
    pipeline: AspectPipeline | None = None,
    k: int = 5,
    min_freq: int = 5,
    sample_size: int | None = None,
    seed: int = 0,
) -> NgramReport:
    """Run the full per-class pipeline and build the overlap report.

    ``sample_size`` caps how many reviews per class are analyzed (seeded
    uniform sample); by default every labeled review is used.
    """
    pipeline = pipeline or AspectPipeline()
    unigrams_by_class: dict[int, list[tuple[str, int]]] = {}
    bigrams_by_class: dict[int, list[tuple[tuple[str, str], float]]] = {}
    for cls in sorted(texts_by_class):
        texts = texts_by_class[cls]
        if sample_size is not None and sample_size < len(texts):
            texts = random.Random(f"{seed}:{cls}").sample(texts, sample_size)
        sentences: list[list[str]] = []
        for text in texts:
            sentences.extend(pipeline.candidate_sentences(text))
        unigrams_by_class[cls] = rank_unigrams(
            (lemma for sentence in sentences for lemma in sentence), k
        )
        bigrams_by_class[cls] = rank_bigrams(sentences, k, min_freq=min_freq)
    return overlap_report(unigrams_by_class, bigrams_by_class, top_k=k)


def render_ngram_grid(report: NgramReport) -> str:
    """Plain-text grid: one block per class, overlap counts in brackets."""
    lines = []
    for cls in sorted(report.unigrams):
        lines.append(f"class {cls}")
        lines.append(f"  {'unigram':<24} {'freq':>6}   {'bigram':<28} {'score':>9}")
        unigrams = report.unigrams[cls]
        bigrams = report.bigrams.get(cls, [])
        for i in range(max(len(unigrams), len(bigrams))):
            left = right = ""
            freq = score = ""
            if i < len(unigrams):
                lemma, count = unigrams[i]
                left = f"{lemma} [{report.overlap_count(lemma)}]"
                freq = str(count)
            if i < len(bigrams):
                pair, value = bigrams[i]
                text = " ".join(pair)
                right = f"{text} [{report.overlap_count(text)}]"
                score = f"{value:.2f}"
            lines.append(f"  {left:<24} {freq:>6}   {right:<28} {score:>9}")
    lines.append("[n] = number of classes sharing the n-gram in their top lists")
    return "\n".join(lines)


def ngram_tsv_rows(report: NgramReport) -> list[str]:
    rows = ["class\tkind\trank\tngram\tscore\toverlap"]
    for cls in sorted(report.unigrams):
        for rank, (lemma, count) in enumerate(report.unigrams[cls], start=1):
            rows.append(f"{cls}\tunigram\t{rank}\t{lemma}\t{count}\t{report.overlap_count(lemma)}")
        for rank, (pair, score) in enumerate(report.bigrams.get(cls, []), start=1):
            text = " ".join(pair)
            rows.append(
                f"{cls}\tbigram\t{rank}\t{text}\t{score:.6f}\t{report.overlap_count(text)}"
            )
    return rows

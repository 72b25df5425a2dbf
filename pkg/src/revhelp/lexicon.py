"""Bundled rule-based tagging, lemmatization, and lexicon resources.

Everything here is deliberately small and dependency-free so the aspect
pipeline runs out of the box; the tagger, lemmatizer, and lexica are
pluggable, so a full treebank tagger or a published sentiment lexicon can
be dropped in through the same interfaces (the sentiment file format is
tab-separated ``term<TAB>valence``).
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

NOUN_TAGS = frozenset({"NN", "NNS"})

#: Terms so frequent in this review domain that they carry no signal.
DOMAIN_STOPWORDS = frozenset({"hotel", "restaurant"})

_ADJ_SUFFIXES = ("ous", "ful", "ive", "able", "ible", "less", "est")

_IRREGULAR_PLURALS = {
    "buses": "bus",
    "children": "child",
    "feet": "foot",
    "geese": "goose",
    "knives": "knife",
    "leaves": "leaf",
    "lives": "life",
    "men": "man",
    "mice": "mouse",
    "people": "person",
    "shelves": "shelf",
    "shoes": "shoe",
    "teeth": "tooth",
    "thieves": "thief",
    "wives": "wife",
    "women": "woman",
}

# Common emoji and pictograph blocks plus variation selectors.
_EMOJI_RE = re.compile(
    "["
    "\U0001f000-\U0001faff"
    "\U00002600-\U000027bf"
    "\U00002b00-\U00002bff"
    "\U0001f1e6-\U0001f1ff"
    "︀-️"
    "‍"
    "]"
)


def _read_data(name: str) -> str:
    return resources.files("revhelp.data").joinpath(name).read_text(encoding="utf-8")


def load_stopwords(path: str | Path | None = None) -> set[str]:
    """Stopword set from ``path``, or the bundled English list."""
    text = Path(path).read_text(encoding="utf-8") if path else _read_data("stopwords_en.txt")
    return {line.strip().lower() for line in text.splitlines() if line.strip()}


def load_sentiment_lexicon(path: str | Path | None = None) -> dict[str, float]:
    """Term-to-valence map from a tab-separated file (bundled default).

    Only the first two columns are read, so richer published lexica in the
    same layout load unchanged.
    """
    if path is not None and not Path(path).exists():
        raise FileNotFoundError(f"sentiment lexicon not found: {path}")
    text = Path(path).read_text(encoding="utf-8") if path else _read_data("sentiment_lexicon.tsv")
    lexicon: dict[str, float] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            continue
        lexicon[parts[0].strip().lower()] = float(parts[1])
    return lexicon


def contains_emoji(text: str) -> bool:
    return bool(_EMOJI_RE.search(text))


def strip_emoji(text: str) -> str:
    return _EMOJI_RE.sub("", text)


class RuleBasedTagger:
    """Lexicon lookup plus suffix heuristics; defaults to noun tags.

    Good enough for aspect extraction over lowercased review text, where
    the downstream filter only cares about the NN/NNS-vs-rest distinction.
    """

    def __init__(self, lexicon: dict[str, str] | None = None):
        if lexicon is None:
            lexicon = {}
            for line in _read_data("pos_lexicon.tsv").splitlines():
                if line.strip():
                    word, tag = line.split("\t")
                    lexicon[word] = tag
        self.lexicon = lexicon

    def tag(self, word: str) -> str:
        word = word.lower()
        if word.endswith("'s"):
            word = word[:-2]
        known = self.lexicon.get(word)
        if known:
            return known
        if word.endswith("ly") and len(word) > 3:
            return "RB"
        if word.endswith("ing") and len(word) > 4:
            return "VBG"
        if word.endswith("ed") and len(word) > 3:
            return "VBD"
        if any(word.endswith(suffix) for suffix in _ADJ_SUFFIXES):
            return "JJ"
        if word.endswith("s") and not word.endswith(("ss", "us", "is")):
            return "NNS"
        return "NN"


class RuleBasedLemmatizer:
    """Singularizes plural nouns; other tags keep their surface form."""

    def lemma(self, word: str, tag: str) -> str:
        word = word.lower()
        if word.endswith("'s"):
            word = word[:-2]
        elif word.endswith("'"):
            word = word[:-1]
        if tag != "NNS":
            return word
        if word in _IRREGULAR_PLURALS:
            return _IRREGULAR_PLURALS[word]
        if word.endswith("ies") and len(word) > 4:
            return word[:-3] + "y"
        if word.endswith(("sses", "shes", "ches", "xes", "zes")):
            return word[:-2]
        if word.endswith("oes") and len(word) > 4:
            return word[:-2]
        if word.endswith("s") and not word.endswith("ss"):
            return word[:-1]
        return word

"""Aspect pipeline: preprocessing, filtering, n-gram ranking, overlap."""

import math
from collections import Counter

import pytest

from revhelp.analysis import (
    AspectPipeline,
    CandidateToken,
    analyze_classes,
    likelihood_ratio,
    ngram_tsv_rows,
    overlap_report,
    rank_bigrams,
    rank_unigrams,
    render_ngram_grid,
)
from revhelp.lexicon import (
    RuleBasedLemmatizer,
    RuleBasedTagger,
    load_sentiment_lexicon,
    load_stopwords,
)


def brute_force_llr(c12, c1, c2, n):
    """Oracle: direct evaluation of the binomial log-likelihood formula."""

    def ll(k, trials, p):
        if p <= 0.0 or p >= 1.0:
            # 0 log 0 -> 0; impossible outcomes under the hypothesis
            # contribute -inf, which never occurs at the MLE values used.
            total = 0.0
            if k > 0:
                total += k * math.log(p) if p > 0 else float("-inf")
            if trials - k > 0:
                total += (trials - k) * math.log(1 - p) if p < 1 else float("-inf")
            return total
        return k * math.log(p) + (trials - k) * math.log(1 - p)

    p = c2 / n
    p1 = c12 / c1
    p2 = (c2 - c12) / (n - c1) if n > c1 else 0.0
    null = ll(c12, c1, p) + ll(c2 - c12, n - c1, p)
    alt = ll(c12, c1, p1) + ll(c2 - c12, n - c1, p2)
    return 2 * (alt - null)


class TestLexiconResources:
    def test_stopwords_load(self):
        stopwords = load_stopwords()
        assert {"the", "was", "were", "and"} <= stopwords

    def test_sentiment_lexicon_load(self):
        lexicon = load_sentiment_lexicon()
        assert lexicon["great"] > 0 and lexicon["dirty"] < 0

    def test_missing_lexicon_file_fatal(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_sentiment_lexicon(tmp_path / "absent.tsv")
        with pytest.raises(FileNotFoundError):
            AspectPipeline(lexicon_path=tmp_path / "absent.tsv")


class TestTaggerAndLemmatizer:
    def test_tagging_rules(self):
        tagger = RuleBasedTagger()
        assert tagger.tag("dirty") == "JJ"
        assert tagger.tag("rooms") == "NNS"
        assert tagger.tag("room") == "NN"
        assert tagger.tag("quickly") == "RB"
        assert tagger.tag("swimming") == "VBG"
        assert tagger.tag("business") == "NN"

    def test_lemmatization_rules(self):
        lemmatizer = RuleBasedLemmatizer()
        assert lemmatizer.lemma("rooms", "NNS") == "room"
        assert lemmatizer.lemma("amenities", "NNS") == "amenity"
        assert lemmatizer.lemma("beaches", "NNS") == "beach"
        assert lemmatizer.lemma("glasses", "NNS") == "glass"
        assert lemmatizer.lemma("people", "NNS") == "person"
        assert lemmatizer.lemma("dirty", "JJ") == "dirty"


class TestPreprocess:
    def test_hand_traced_sentence(self):
        pipeline = AspectPipeline()
        sentences = pipeline.preprocess("The hotel rooms were dirty!!")
        assert len(sentences) == 1
        tokens = sentences[0]
        # stopwords (the, were), the domain word, and punctuation are gone;
        # the sentiment adjective survives preprocessing and is removed
        # later by the candidate filter.
        assert [(t.lemma, t.pos_tag) for t in tokens] == [("room", "NNS"), ("dirty", "JJ")]
        assert tokens[1].sentiment_valence < 0
        assert pipeline.filter_candidates(tokens) == [tokens[0]]

    def test_empty_text(self):
        assert AspectPipeline().preprocess("") == []

    def test_domain_stopwords_removed(self):
        assert AspectPipeline().preprocess("Hotel hotel HOTEL") == []
        # plural form goes through the lemma check
        assert AspectPipeline().preprocess("Nice hotels everywhere") != []
        lemmas = [
            t.lemma
            for s in AspectPipeline().preprocess("Nice hotels everywhere")
            for t in s
        ]
        assert "hotel" not in lemmas

    def test_sentences_do_not_cross_boundaries(self):
        pipeline = AspectPipeline()
        sentences = pipeline.candidate_sentences("Lovely room. Broken shower!")
        assert sentences == [["room"], ["shower"]]


class TestFilterCandidates:
    def test_keeps_neutral_nouns_only(self):
        tokens = [
            CandidateToken("room", "room", "NN", 0.0),
            CandidateToken("great", "great", "JJ", 3.1),
            CandidateToken("pool", "pool", "NN", 0.0),
        ]
        kept = AspectPipeline().filter_candidates(tokens)
        assert [t.lemma for t in kept] == ["room", "pool"]

    def test_all_adjectives_filtered(self):
        tokens = [CandidateToken(w, w, "JJ", 0.0) for w in ("red", "blue")]
        assert AspectPipeline().filter_candidates(tokens) == []

    def test_sentiment_bearing_noun_removed(self):
        tokens = [CandidateToken("love", "love", "NN", 3.2)]
        assert AspectPipeline().filter_candidates(tokens) == []

    def test_emoji_tokens_removed(self):
        tokens = [CandidateToken("room\U0001f600", "room\U0001f600", "NN", 0.0)]
        assert AspectPipeline().filter_candidates(tokens) == []


class TestLikelihoodRatio:
    def test_zero_at_exact_independence(self):
        # joint count equals the independence expectation c1*c2/n
        assert abs(likelihood_ratio(1, 10, 10, 100)) < 1e-9
        assert abs(likelihood_ratio(4, 20, 20, 100)) < 1e-9

    def test_matches_brute_force_formula(self):
        cases = [(10, 10, 10, 100), (5, 40, 20, 200), (2, 7, 50, 300), (1, 10, 10, 100)]
        for c12, c1, c2, n in cases:
            assert likelihood_ratio(c12, c1, c2, n) == pytest.approx(
                brute_force_llr(c12, c1, c2, n), abs=1e-9
            )

    def test_perfect_collocation_dominates(self):
        perfect = likelihood_ratio(10, 10, 10, 100)
        for joint in range(1, 10):
            assert perfect > likelihood_ratio(joint, 10, 10, 100)

    def test_nonnegative_above_independence(self):
        n = 500
        for c1 in (5, 20, 50):
            for c2 in (5, 20, 50):
                expectation = c1 * c2 / n
                for c12 in range(math.ceil(expectation), min(c1, c2) + 1):
                    assert likelihood_ratio(c12, c1, c2, n) >= -1e-9

    def test_inconsistent_counts_rejected(self):
        with pytest.raises(ValueError):
            likelihood_ratio(11, 10, 20, 100)
        with pytest.raises(ValueError):
            likelihood_ratio(1, 10, 10, 0)


class TestRanking:
    def test_unigrams_by_frequency(self):
        candidates = ["room"] * 5 + ["staff"] * 3 + ["view"]
        assert rank_unigrams(candidates, 2) == [("room", 5), ("staff", 3)]

    def test_unigram_ties_lexicographic(self):
        assert rank_unigrams(["b", "a", "a", "b"], 2) == [("a", 2), ("b", 2)]

    def test_empty_class(self):
        assert rank_unigrams([], 5) == []
        assert rank_bigrams([], 5) == []

    def test_bigrams_never_cross_sentences(self):
        sentences = [["front", "desk"], ["desk", "front"]] * 3
        ranked = rank_bigrams(sentences, 10, min_freq=1)
        pairs = [pair for pair, _ in ranked]
        assert ("desk", "desk") not in pairs
        assert ("front", "desk") in pairs

    def test_min_freq_excludes_rare_pairs(self):
        sentences = [["a", "b"]] * 4 + [["c", "d"]]
        ranked = rank_bigrams(sentences, 10, min_freq=2)
        assert [pair for pair, _ in ranked] == [("a", "b")]

    def test_matches_exhaustive_recomputation_on_small_corpus(self):
        # Oracle: score every adjacent pair directly from recounted
        # frequencies and compare the full ranking.
        import random

        rng = random.Random(23)
        vocab = ["room", "staff", "pool", "view", "desk", "fee", "area", "bar"]
        sentences = [
            [rng.choice(vocab) for _ in range(rng.randint(2, 6))] for _ in range(50)
        ]
        unigrams = Counter(t for s in sentences for t in s)
        bigrams = Counter(pair for s in sentences for pair in zip(s, s[1:]))
        n = sum(unigrams.values())
        expected = sorted(
            (
                (pair, brute_force_llr(c12, unigrams[pair[0]], unigrams[pair[1]], n))
                for pair, c12 in bigrams.items()
                if c12 >= 2
            ),
            key=lambda item: (-item[1], item[0]),
        )[:5]
        actual = rank_bigrams(sentences, 5, min_freq=2)
        assert [pair for pair, _ in actual] == [pair for pair, _ in expected]
        for (_, got), (_, want) in zip(actual, expected):
            assert got == pytest.approx(want, abs=1e-9)


class TestOverlap:
    def test_identical_lists_full_overlap(self):
        unigrams = {cls: [("room", 3), ("staff", 2)] for cls in range(1, 6)}
        bigrams = {cls: [(("front", "desk"), 9.0)] for cls in range(1, 6)}
        report = overlap_report(unigrams, bigrams, top_k=2)
        assert report.overlap["room"] == set(range(1, 6))
        assert report.overlap_count("front desk") == 5

    def test_disjoint_lists_overlap_one(self):
        unigrams = {cls: [(f"word{cls}", 1)] for cls in range(1, 6)}
        report = overlap_report(unigrams, {cls: [] for cls in range(1, 6)}, top_k=1)
        assert all(report.overlap_count(f"word{cls}") == 1 for cls in range(1, 6))


class TestAnalyzeClasses:
    def make_texts(self):
        return {
            1: ["The room was clean. Front desk helped fast."] * 6,
            2: ["Great pool area. The room had a view."] * 6,
            3: ["Resort fee surprised us. Front desk again."] * 6,
            4: ["The staff moved our bags. Pool area again."] * 6,
            5: ["Front desk and resort fee. Bed bugs everywhere!"] * 6,
        }

    def test_deterministic_and_shaped(self):
        report = analyze_classes(self.make_texts(), k=3, min_freq=2)
        again = analyze_classes(self.make_texts(), k=3, min_freq=2)
        assert report.unigrams == again.unigrams
        assert report.bigrams == again.bigrams
        for cls in range(1, 6):
            assert len(report.unigrams[cls]) <= 3
            scores = [s for _, s in report.bigrams[cls]]
            assert scores == sorted(scores, reverse=True)

    def test_shared_terms_show_overlap(self):
        report = analyze_classes(self.make_texts(), k=5, min_freq=2)
        assert report.overlap_count("front desk") >= 3

    def test_removing_a_class_only_affects_it(self):
        texts = self.make_texts()
        full = analyze_classes(texts, k=3, min_freq=2)
        del texts[5]
        partial = analyze_classes(texts, k=3, min_freq=2)
        for cls in range(1, 5):
            assert full.unigrams[cls] == partial.unigrams[cls]
            assert full.bigrams[cls] == partial.bigrams[cls]

    def test_sampling_is_seeded(self):
        texts = {1: [f"The room number {i} was fine." for i in range(30)]}
        a = analyze_classes(texts, k=3, min_freq=1, sample_size=10, seed=4)
        b = analyze_classes(texts, k=3, min_freq=1, sample_size=10, seed=4)
        assert a.unigrams == b.unigrams

    def test_rendering(self):
        report = analyze_classes(self.make_texts(), k=3, min_freq=2)
        grid = render_ngram_grid(report)
        assert "class 1" in grid and "class 5" in grid
        rows = ngram_tsv_rows(report)
        assert rows[0] == "class\tkind\trank\tngram\tscore\toverlap"
        assert any("\tbigram\t" in row for row in rows)

import random

import pytest
from hypothesis import given, settings, strategies as st

from _oracles import brute_force_cooccurrences
from ctrserve.errors import CtrServeError, MappingError
from ctrserve.keywords import (KeywordMap, assign_clusters, build_keyword_map,
                               confidence, count_cooccurrences, load_keyword_map,
                               resolve_page_value, save_keyword_map,
                               select_centroids)

FOOTBALL_TXNS = [{"football", "soccer"}, {"football", "ronaldo"}, {"football"}]


def random_corpus(seed, n_txns=200, vocab_size=12):
    rng = random.Random(seed)
    vocab = [f"kw{i}" for i in range(vocab_size)]
    txns = []
    for _ in range(n_txns):
        size = rng.randint(1, 5)
        txns.append(set(rng.sample(vocab, size)))
    return txns


class TestCountCooccurrences:
    def test_small_example(self):
        stats = count_cooccurrences(FOOTBALL_TXNS, "sports")
        assert stats.support == {"football": 3, "soccer": 1, "ronaldo": 1}
        assert stats.pair_count == {
            frozenset({"football", "soccer"}): 1,
            frozenset({"football", "ronaldo"}): 1,
        }
        assert stats.transaction_count == 3

    def test_singleton(self):
        stats = count_cooccurrences([{"a"}], "x")
        assert stats.support == {"a": 1}
        assert stats.pair_count == {}

    def test_empty_corpus_rejected(self):
        with pytest.raises(CtrServeError):
            count_cooccurrences([], "sports")

    def test_against_brute_force(self):
        txns = random_corpus(seed=42, n_txns=1000)
        stats = count_cooccurrences(txns, "x")
        support, pairs = brute_force_cooccurrences(txns)
        assert stats.support == support
        assert stats.pair_count == pairs


class TestConfidence:
    @pytest.fixture()
    def stats(self):
        return count_cooccurrences(FOOTBALL_TXNS, "sports")

    def test_directional(self, stats):
        assert confidence(stats, "soccer", "football") == 1.0
        assert confidence(stats, "football", "soccer") == pytest.approx(1 / 3)

    def test_self_rule(self, stats):
        assert confidence(stats, "football", "football") == 1.0

    def test_unknown_keyword(self, stats):
        with pytest.raises(MappingError):
            confidence(stats, "hockey", "football")

    def test_range(self):
        txns = random_corpus(seed=3)
        stats = count_cooccurrences(txns, "x")
        for a in stats.support:
            for b in stats.support:
                assert 0.0 <= confidence(stats, a, b) <= 1.0


class TestSelectCentroids:
    def test_most_common_win(self):
        txns = (
            [{"football", "ronaldo"}] * 3 + [{"football"}] * 3
            + [{"cricket", "afridi"}] * 2 + [{"cricket"}] * 3
            + [{"tennis"}] * 3 + [{"nadal", "tennis"}]
        )
        stats = count_cooccurrences(txns, "sports")
        assert select_centroids(stats, 3) == ["football", "cricket", "tennis"]

    def test_tie_breaks_lexicographically(self):
        stats = count_cooccurrences([{"a"}, {"b"}, {"a"}, {"b"}, {"b", "a"}], "x")
        assert select_centroids(stats, 1) == ["a"]

    def test_k_zero(self):
        stats = count_cooccurrences([{"a"}], "x")
        with pytest.raises(CtrServeError):
            select_centroids(stats, 0)

    def test_k_exceeds_vocabulary(self):
        stats = count_cooccurrences([{"a"}], "x")
        with pytest.raises(CtrServeError):
            select_centroids(stats, 2)


class TestAssignClusters:
    def test_neutral_tie_goes_to_earliest_centroid(self):
        # england co-occurs equally with football and cricket
        txns = (
            [{"football"}] * 10 + [{"cricket"}] * 8 + [{"tennis"}] * 6
            + [{"england", "football"}] * 3 + [{"england", "cricket"}] * 3
        )
        stats = count_cooccurrences(txns, "sports")
        cluster_of, diagnostics = assign_clusters(stats, ["football", "cricket", "tennis"])
        assert cluster_of["england"] == "football"
        assert diagnostics == []

    def test_argmax(self):
        txns = [{"ronaldo", "football"}] * 9 + [{"ronaldo"}] * 1 + [{"cricket"}] * 12
        stats = count_cooccurrences(txns, "sports")
        cluster_of, _ = assign_clusters(stats, ["football", "cricket"])
        assert cluster_of["ronaldo"] == "football"

    def test_zero_confidence_is_flagged(self):
        txns = [{"football"}] * 5 + [{"knitting"}]
        stats = count_cooccurrences(txns, "sports")
        cluster_of, diagnostics = assign_clusters(stats, ["football"])
        assert cluster_of["knitting"] == "football"
        assert diagnostics == ["knitting"]

    def test_centroids_self_assigned(self):
        stats = count_cooccurrences(FOOTBALL_TXNS, "sports")
        cluster_of, _ = assign_clusters(stats, ["football"])
        assert cluster_of["football"] == "football"


def engineered_stats():
    # confidence(soccer->football)=0.98, confidence(ronaldo->football)=0.5
    txns = [{"soccer", "football"}] * 49 + [{"soccer"}] * 1
    txns += [{"ronaldo", "football"}] * 10 + [{"ronaldo"}] * 10
    txns += [{"football"}] * 30
    return count_cooccurrences(txns, "sports")


class TestBuildKeywordMap:
    def test_distance_tracks_confidence(self):
        kmap = build_keyword_map(engineered_stats(), 1)
        base = kmap.values["football"]
        assert abs(kmap.values["soccer"] - base) < abs(kmap.values["ronaldo"] - base)

    def test_single_centroid_no_members(self):
        stats = count_cooccurrences([{"a"}], "x")
        kmap = build_keyword_map(stats, 1)
        assert kmap.values == {"a": 50.0}

    def test_centroid_bases(self):
        txns = [{"a"}] * 5 + [{"b"}] * 4 + [{"c"}] * 3
        kmap = build_keyword_map(count_cooccurrences(txns, "x"), 3)
        assert kmap.values["a"] == 50.0
        assert kmap.values["b"] == 60.0
        assert kmap.values["c"] == 70.0

    def test_determinism_byte_identical(self):
        txns = random_corpus(seed=11)
        first = save_keyword_map(build_keyword_map(count_cooccurrences(txns, "x"), 3))
        second = save_keyword_map(build_keyword_map(count_cooccurrences(txns, "x"), 3))
        assert first == second

    @pytest.mark.parametrize("seed", range(10))
    def test_injectivity_random_corpora(self, seed):
        txns = random_corpus(seed=seed)
        kmap = build_keyword_map(count_cooccurrences(txns, "x"), 3)
        assert len(set(kmap.values.values())) == len(kmap.values)

    @pytest.mark.parametrize("seed", range(5))
    def test_cluster_sanity(self, seed):
        txns = random_corpus(seed=seed)
        stats = count_cooccurrences(txns, "x")
        kmap = build_keyword_map(stats, 3)
        for kw, centroid in kmap.cluster_of.items():
            if kw in kmap.centroids:
                continue
            best = max(confidence(stats, kw, c) for c in kmap.centroids)
            assert confidence(stats, kw, centroid) == best

    def test_alternating_signs(self):
        kmap = build_keyword_map(engineered_stats(), 1)
        assert kmap.values["soccer"] > 50.0  # strongest member placed above
        assert kmap.values["ronaldo"] < 50.0

    def test_save_load_round_trip(self):
        kmap = build_keyword_map(engineered_stats(), 1)
        loaded = load_keyword_map(save_keyword_map(kmap))
        assert loaded.values == kmap.values
        assert loaded.centroids == kmap.centroids
        assert loaded.cluster_of == kmap.cluster_of
        assert loaded.rank == kmap.rank


class TestResolvePageValue:
    def test_highest_support_wins(self, sports_map):
        assert resolve_page_value(sports_map, {"england", "ronaldo"}) == 51.0

    def test_fallback_returns_first_centroid_base(self, sports_map):
        assert resolve_page_value(sports_map, {"unknownword"}, mode="fallback") == 50.0

    def test_strict_unknown_errors(self, sports_map):
        with pytest.raises(MappingError, match="unknownword"):
            resolve_page_value(sports_map, {"unknownword"}, mode="strict")

    def test_empty_page_rejected(self, sports_map):
        with pytest.raises(MappingError):
            resolve_page_value(sports_map, set())


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sets(st.sampled_from([f"k{i}" for i in range(8)]),
                        min_size=1, max_size=4), min_size=3, max_size=40))
def test_map_properties_hold_on_arbitrary_corpora(txns):
    stats = count_cooccurrences(txns, "x")
    k = min(2, len(stats.support))
    kmap = build_keyword_map(stats, k)
    # injectivity
    assert len(set(kmap.values.values())) == len(kmap.values)
    # base separation
    for r, c in enumerate(kmap.centroids):
        assert kmap.values[c] == 50.0 + 10.0 * r
    # distance monotonicity among non-nudged members of each cluster
    for c in kmap.centroids:
        members = [kw for kw, cen in kmap.cluster_of.items()
                   if cen == c and kw != c and kw not in kmap.nudged]
        members.sort(key=lambda m: -confidence(stats, m, c))
        for a, b in zip(members, members[1:]):
            if confidence(stats, a, c) > confidence(stats, b, c):
                assert abs(kmap.values[a] - kmap.values[c]) < abs(kmap.values[b] - kmap.values[c])

import math
import random

import pytest

from polyjudge.curation import SplitConfig, SplitInfeasibleError, TaggedSample, split_by_label, split_heldout
from polyjudge.curation.splitting import geometric_mean_ratio, split_once


def corpus_single_tag(n: int) -> list[TaggedSample]:
    return [TaggedSample(uid=f"s{i}", problem=f"p{i}", tags={"only"}) for i in range(n)]


def corpus_multi_tag(rng: random.Random, n: int = 40, tags: int = 3) -> list[TaggedSample]:
    names = [f"t{k}" for k in range(tags)]
    samples = []
    for i in range(n):
        mine = set(rng.sample(names, rng.randint(1, tags)))
        samples.append(TaggedSample(uid=f"s{i}", problem=f"p{i}", tags=frozenset(mine)))
    return samples


class TestSplitHeldout:
    def test_single_tag_exact_ratio(self):
        # 60 samples, gamma=0.2 -> slice at 1/6 -> 10 vs 50, mu = 10/50 = gamma
        result = split_heldout(corpus_single_tag(60), SplitConfig(gamma=0.2, num_seeds=5))
        assert len(result.valid) == 10
        assert len(result.test) == 50
        assert result.mu == pytest.approx(0.2)
        assert abs(result.mu - 0.2) < 1e-12

    def test_singleton_tag_discards_every_seed(self):
        samples = corpus_single_tag(30)
        samples.append(TaggedSample(uid="rare", problem="px", tags={"unicorn"}))
        with pytest.raises(SplitInfeasibleError) as err:
            split_heldout(samples, SplitConfig(gamma=0.2, num_seeds=20))
        assert "unicorn" in str(err.value)

    def test_tag_sets_match_on_every_returned_split(self):
        rng = random.Random(21)
        for trial in range(5):
            samples = corpus_multi_tag(rng, n=30 + trial * 10)
            result = split_heldout(samples, SplitConfig(gamma=0.25, num_seeds=50))
            tags_valid = {t for s in result.valid for t in s.tags}
            tags_test = {t for s in result.test for t in s.tags}
            assert tags_valid == tags_test

    def test_returned_split_minimizes_distance_over_replayed_stream(self):
        rng = random.Random(22)
        samples = corpus_multi_tag(rng, n=40, tags=3)
        config = SplitConfig(gamma=0.2, num_seeds=200)
        result = split_heldout(samples, config)

        # independent replay of the identical seed stream
        distances = []
        for seed in range(200):
            valid, test = split_once(samples, seed, config.slice_fraction)
            tv = {t for s in valid for t in s.tags}
            tt = {t for s in test for t in s.tags}
            if tv != tt or not valid or not test:
                continue
            distances.append(abs(config.gamma - geometric_mean_ratio(valid, test)))
        assert distances, "replay retained no seeds"
        assert abs(config.gamma - result.mu) == pytest.approx(min(distances), abs=0.0)
        assert result.retained_seeds == len(distances)

    def test_partition_is_exact(self):
        rng = random.Random(23)
        samples = corpus_multi_tag(rng, n=25)
        result = split_heldout(samples, SplitConfig(gamma=0.5, num_seeds=30))
        uids = sorted(s.uid for s in result.valid) + sorted(s.uid for s in result.test)
        assert sorted(uids) == sorted(s.uid for s in samples)

    def test_explicit_seed_stream_is_honored(self):
        rng = random.Random(24)
        samples = corpus_multi_tag(rng, n=30)
        config = SplitConfig(gamma=0.2, num_seeds=3, seed_stream=[7, 8, 9])
        result = split_heldout(samples, config)
        assert result.seed in {7, 8, 9}
        assert result.tried_seeds == 3

    def test_count_improvements_mode_terminates(self):
        rng = random.Random(25)
        samples = corpus_multi_tag(rng, n=30)
        config = SplitConfig(gamma=0.2, num_seeds=2, count_improvements=True, max_attempts=500)
        result = split_heldout(samples, config)
        assert result.tried_seeds <= 500

    def test_untagged_sample_rejected(self):
        samples = corpus_single_tag(10) + [TaggedSample(uid="bare", problem="p", tags=set())]
        with pytest.raises(ValueError, match="bare"):
            split_heldout(samples, SplitConfig(gamma=0.2))

    def test_gamma_validation(self):
        with pytest.raises(ValueError):
            SplitConfig(gamma=0.0)
        with pytest.raises(ValueError):
            SplitConfig(gamma=1.0, num_seeds=0)


class TestGeometricMean:
    def test_matches_direct_formula(self):
        rng = random.Random(30)
        samples = corpus_multi_tag(rng, n=36, tags=3)
        valid, test = split_once(samples, seed=4, fraction=0.25)
        tags = {t for s in samples for t in s.tags}
        ratios = []
        for tag in tags:
            v = sum(1 for s in valid if tag in s.tags)
            t = sum(1 for s in test if tag in s.tags)
            if v == 0 or t == 0:
                pytest.skip("seed split a tag entirely to one side")
            ratios.append(v / t)
        expected = math.prod(ratios) ** (1 / len(ratios))
        assert geometric_mean_ratio(valid, test) == pytest.approx(expected, rel=1e-12)


class TestSplitByLabel:
    def test_equal_label_counts_on_both_sides(self):
        rng = random.Random(31)
        samples = []
        for i in range(60):
            samples.append(TaggedSample(uid=f"s{i}", problem=f"p{i}", tags={"x"}, payload=i % 3 == 0))
        result = split_by_label(samples, label_of=lambda s: bool(s.payload), config=SplitConfig(gamma=0.5, num_seeds=40))
        for side in (result.valid, result.test):
            trues = sum(1 for s in side if bool(s.payload))
            falses = sum(1 for s in side if not bool(s.payload))
            assert trues == falses
            assert trues > 0

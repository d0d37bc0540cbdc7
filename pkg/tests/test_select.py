import random

import pytest

from oracles import CirculationInstance, feasible_totals_oracle
from polyjudge.curation import (
    InconsistentFlowError,
    SelectionParams,
    TaggedSample,
    build_flow_network,
    evaluate_tuple,
    feasible_circulation,
    search_params,
    select_samples,
)
from test_flow import samples_from_instance


def small_skewed_corpus(rng: random.Random, problems: int = 8, tags: int = 4) -> list[TaggedSample]:
    tag_names = [f"t{k}" for k in range(tags)]
    samples = []
    uid = 0
    for i in range(problems):
        chosen = set(rng.sample(tag_names, rng.randint(1, min(3, tags))))
        chosen.add(tag_names[0])  # one dominant tag to skew the distribution
        for _ in range(rng.randint(1, 6)):
            samples.append(TaggedSample(uid=f"s{uid}", problem=f"p{i}", tags=frozenset(chosen)))
            uid += 1
    return samples


class TestSelectSamples:
    def test_counts_follow_flow(self):
        samples = [TaggedSample(uid=f"s{i}", problem="p1", tags={"t1"}) for i in range(3)]
        network = build_flow_network(samples, SelectionParams(m_p=2, m_t=1, x_p=2, x_t=3))
        flow = feasible_circulation(network)
        selection = select_samples(samples, flow, rng_seed=5)
        assert len(selection) == flow.problem_count("p1") == 2
        assert len({s.uid for s in selection.samples}) == 2

    def test_total_equals_both_side_sums(self):
        rng = random.Random(3)
        samples = small_skewed_corpus(rng)
        network = build_flow_network(samples, SelectionParams(m_p=1, m_t=2, x_p=3, x_t=10))
        flow = feasible_circulation(network)
        selection = select_samples(samples, flow, rng_seed=0)
        per_problem = sum(flow.problem_count(p) for p in network.problems)
        per_tag = sum(flow.tag_count(k) for k in network.tags)
        assert len(selection) == per_problem == per_tag

    def test_attribution_is_single_and_legal(self):
        rng = random.Random(4)
        samples = small_skewed_corpus(rng)
        by_uid = {s.uid: s for s in samples}
        network = build_flow_network(samples, SelectionParams(m_p=1, m_t=1, x_p=2, x_t=8))
        flow = feasible_circulation(network)
        selection = select_samples(samples, flow, rng_seed=1)
        assert set(selection.attribution) == {s.uid for s in selection.samples}
        for uid, tag in selection.attribution.items():
            assert tag in by_uid[uid].tags
        # attributed tag counts realize the flow exactly
        counts = selection.attributed_tag_counts()
        for tag in network.tags:
            assert counts.get(tag, 0) == flow.tag_count(tag)

    def test_selection_respects_tag_bounds(self):
        rng = random.Random(5)
        samples = small_skewed_corpus(rng)
        params = SelectionParams(m_p=1, m_t=2, x_p=3, x_t=9)
        network = build_flow_network(samples, params)
        flow = feasible_circulation(network)
        selection = select_samples(samples, flow, rng_seed=2)
        counts = selection.attributed_tag_counts()
        for tag in network.tags:
            lo, hi = network.edges[(("T", tag), "t")]
            assert lo <= counts.get(tag, 0) <= hi

    def test_deterministic_under_seed(self):
        rng = random.Random(6)
        samples = small_skewed_corpus(rng)
        network = build_flow_network(samples, SelectionParams(m_p=1, m_t=1, x_p=2, x_t=12))
        flow = feasible_circulation(network)
        first = select_samples(samples, flow, rng_seed=42)
        second = select_samples(samples, flow, rng_seed=42)
        assert [s.uid for s in first.samples] == [s.uid for s in second.samples]
        assert first.attribution == second.attribution

    def test_inconsistent_flow_rejected(self):
        samples = [TaggedSample(uid="s0", problem="p1", tags={"t1"})]
        network = build_flow_network(samples, SelectionParams(m_p=1, m_t=1, x_p=1, x_t=1))
        flow = feasible_circulation(network)
        with pytest.raises(InconsistentFlowError):
            select_samples([], flow, rng_seed=0)


class StagedSearchOracle:
    """Independent replay of the three-stage search: brute-force feasibility
    (subset-condition enumeration) and closest-total d per tuple, stage pivots
    taken from the implementation's reported flow peaks."""

    def __init__(self, instance: CirculationInstance, M: int, delta: int):
        self.instance = instance
        self.M = M
        self.delta = delta
        self._cache: dict = {}

    def evaluate(self, m_p: int, m_t: int, x_p: int, x_t: int):
        if not (1 <= m_p <= x_p and 1 <= m_t <= x_t):
            return None
        key = (m_p, m_t, x_p, x_t)
        if key not in self._cache:
            totals = feasible_totals_oracle(self.instance, m_p, x_p, m_t, x_t)
            if not totals:
                self._cache[key] = None
            else:
                total = min(max(self.M, min(totals)), max(totals))
                assert total in totals  # the totals form a contiguous interval
                d = (total - self.M) ** 2 // self.delta
                self._cache[key] = (-d, m_t, -x_t, -x_p, m_p)
        return self._cache[key]

    def best(self, grid):
        candidates = [(key, t) for t in grid if (key := self.evaluate(*t)) is not None]
        return max(candidates) if candidates else None

    def run(self, stage_peaks) -> tuple:
        stage1 = self.best(
            (m_p, m_t, 1000, 1000) for m_t in range(1, 497, 5) for m_p in range(1, 20)
        )
        assert stage1 is not None
        winners = [stage1]
        f_p1, f_t1 = stage_peaks[0]
        stage2 = self.best(
            (m_p, m_t, x_p, x_t)
            for m_t in range(stage1[1][1], stage1[1][1] + 50)
            for x_t in range(f_t1 - 100, f_t1 + 1, 20)
            for x_p in range(f_p1 - 5, f_p1 + 1)
            for m_p in (stage1[1][0], stage1[1][0] + 1)
        )
        if stage2 is not None:
            winners.append(stage2)
            assert len(stage_peaks) == 2
            f_p2, f_t2 = stage_peaks[1]
            m_p2, m_t2, x_p2, _ = stage2[1]
            stage3 = self.best((m_p2, m_t2, x_p2, x_t) for x_t in range(f_t2 - 100, f_t2 + 1))
            if stage3 is not None:
                winners.append(stage3)
        else:
            assert len(stage_peaks) == 1
        return max(winners)[1]


class TestSearchParams:
    def test_base_tuple_probed_first(self):
        # two mandatory tags on a single sample: even (1,1,1000,1000) fails
        samples = [TaggedSample(uid="a", problem="p1", tags={"t1", "t2"})]
        with pytest.raises(ValueError, match="base tuple"):
            search_params(samples, M=1)

    def test_exact_hit_gives_zero_d(self):
        rng = random.Random(8)
        samples = small_skewed_corpus(rng, problems=6, tags=3)
        # with m_p >= 1, any total from #problems up to #samples is reachable
        M = (6 + len(samples)) // 2
        result = search_params(samples, M=M, delta=1)
        assert result.total == M
        assert result.d == 0

    def test_lexicographic_tiebreak_prefers_larger_m_t(self):
        rng = random.Random(9)
        samples = small_skewed_corpus(rng, problems=5, tags=3)
        M = len(samples)  # everything selectable: many tuples reach d=0
        result = search_params(samples, M=M, delta=10**9)
        # with delta huge, every valid tuple has d=0, so m_t decides stage 1
        evaluations = [
            evaluate_tuple(samples, m_p, m_t, 1000, 1000, M, 10**9)
            for m_t in range(1, 497, 5)
            for m_p in range(1, 20)
        ]
        best = max((e.lexi_key, e.params) for e in evaluations if e is not None)
        assert result.d == 0
        assert result.params.m_t >= best[1].m_t

    @pytest.mark.parametrize("seed", [11, 12, 13])
    def test_matches_staged_brute_force_oracle(self, seed):
        rng = random.Random(seed)
        n = rng.randint(2, 4)
        k = rng.randint(2, 3)
        instance = CirculationInstance(
            p_counts=[rng.randint(1, 4) for _ in range(n)],
            tag_masks=[rng.randint(1, (1 << k) - 1) for _ in range(n)],
            num_tags=k,
        )
        samples = samples_from_instance(instance)
        M = rng.randint(1, sum(instance.p_counts))
        result = search_params(samples, M=M, delta=2)
        oracle = StagedSearchOracle(instance, M=M, delta=2)
        expected = oracle.run(result.stage_peaks)
        got = (result.params.m_p, result.params.m_t, result.params.x_p, result.params.x_t)
        assert got == expected

    def test_result_flow_is_valid_and_matches_params(self):
        rng = random.Random(14)
        samples = small_skewed_corpus(rng, problems=7, tags=4)
        result = search_params(samples, M=10, delta=5)
        network = build_flow_network(samples, result.params)
        result.flow.check(network)
        assert result.flow.total == result.total
        assert result.d == (result.total - 10) ** 2 // 5
        assert len(result.stage_winners) == 3

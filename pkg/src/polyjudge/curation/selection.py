"""Realize a feasible flow as a concrete sample subset, and search the
(m_p, m_t, x_p, x_t) grid for the best selection bounds.

The grid search runs the three-stage procedure: a coarse stage over
m_t in {1, 6, ..., 496} x m_p in {1..19} with x_p = x_t = 1000, a refinement
around the stage-1 winner's peak per-problem/per-tag flows, and a final
single-step sweep of x_t. Tuples are ranked by the lexicographic key
(-d, m_t, -x_t, -x_p, m_p), where d = floor((total - M)^2 / delta) measures
the squared distance between the achievable total closest to M and M itself.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .flow import (
    CirculationInfeasibleError,
    Flow,
    FlowNetwork,
    SelectionParams,
    TaggedSample,
    _Dinic,
    build_flow_network,
    feasible_circulation,
    total_flow_range,
    SINK,
    SOURCE,
)


class InconsistentFlowError(ValueError):
    """The flow does not match the sample list it is being applied to."""


@dataclass(frozen=True)
class Selection:
    samples: tuple[TaggedSample, ...]
    attribution: Mapping[str, str]  # sample uid -> tag it was counted under

    def __len__(self) -> int:
        return len(self.samples)

    def attributed_tag_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for tag in self.attribution.values():
            counts[tag] = counts.get(tag, 0) + 1
        return counts


def select_samples(samples: Sequence[TaggedSample], flow: Flow, rng_seed: int = 0) -> Selection:
    """Pick exactly f(s,P_i) samples per problem, attributing f(P_i,T_k) of
    them to tag k; a sample is counted under exactly one of its tags, so the
    grand total equals both side sums. Deterministic for a given seed."""
    rng = random.Random(rng_seed)
    by_problem: dict[str, list[TaggedSample]] = {}
    for sample in samples:
        by_problem.setdefault(sample.problem, []).append(sample)

    flow_problems = {edge[1][1] for edge in flow.values if edge[0] == SOURCE and flow[edge] > 0}
    missing = flow_problems - set(by_problem)
    if missing:
        raise InconsistentFlowError(f"flow references problem(s) absent from the sample list: {sorted(missing)}")

    chosen: list[TaggedSample] = []
    attribution: dict[str, str] = {}
    for problem, pool in by_problem.items():
        want_total = flow.problem_count(problem)
        if want_total == 0:
            continue
        if want_total > len(pool):
            raise InconsistentFlowError(
                f"flow wants {want_total} samples from problem {problem!r}, only {len(pool)} exist"
            )
        quotas = {
            tag: flow[(("P", problem), ("T", tag))]
            for tag in {t for s in pool for t in s.tags}
        }
        quotas = {tag: q for tag, q in quotas.items() if q > 0}
        if sum(quotas.values()) != want_total:
            raise InconsistentFlowError(
                f"problem {problem!r}: tag quotas {sum(quotas.values())} != f(s,P)={want_total}"
            )
        shuffled = list(pool)
        rng.shuffle(shuffled)
        assignment = _assign_samples_to_tags(shuffled, quotas)
        if assignment is None:
            raise InconsistentFlowError(
                f"problem {problem!r}: no sample-to-tag assignment realizes the flow"
            )
        for sample, tag in assignment:
            chosen.append(sample)
            attribution[sample.uid] = tag
    return Selection(samples=tuple(chosen), attribution=attribution)


def _assign_samples_to_tags(
    pool: Sequence[TaggedSample], quotas: Mapping[str, int]
) -> Optional[list[tuple[TaggedSample, str]]]:
    """Bipartite assignment (each sample once, tag k exactly quotas[k] times)
    via a small max-flow; None when the quotas cannot be met."""
    dinic = _Dinic()
    for i, sample in enumerate(pool):
        dinic.add_edge(SOURCE, ("s", i), 1)
        for tag in sample.tags:
            if tag in quotas:
                dinic.add_edge(("s", i), ("T", tag), 1)
    for tag, quota in quotas.items():
        dinic.add_edge(("T", tag), SINK, quota)
    need = sum(quotas.values())
    if dinic.max_flow(SOURCE, SINK) < need:
        return None
    result = []
    for i, sample in enumerate(pool):
        for to, cap, _ in dinic.graph[("s", i)]:
            if isinstance(to, tuple) and to[0] == "T" and cap == 0:  # saturated: used
                result.append((sample, to[1]))
                break
    return result


@dataclass(frozen=True)
class TupleEvaluation:
    params: SelectionParams
    flow: Flow
    total: int
    d: int

    @property
    def lexi_key(self) -> tuple[int, int, int, int, int]:
        p = self.params
        return (-self.d, p.m_t, -p.x_t, -p.x_p, p.m_p)


@dataclass(frozen=True)
class SearchResult:
    params: SelectionParams
    flow: Flow
    total: int
    d: int
    stage_peaks: tuple[tuple[int, int], ...]  # (max f(s,P_i), max f(T_k,t)) per stage
    stage_winners: tuple[SelectionParams, ...]  # best tuple found by each stage


def evaluate_tuple(
    samples: Sequence[TaggedSample],
    m_p: int,
    m_t: int,
    x_p: int,
    x_t: int,
    M: int,
    delta: int,
) -> Optional[TupleEvaluation]:
    """Validity probe for one tuple: feasible -> evaluation with the flow whose
    total is the achievable value closest to M; infeasible or ill-formed -> None."""
    try:
        params = SelectionParams(m_p=m_p, m_t=m_t, x_p=x_p, x_t=x_t, M=M, delta=delta)
    except ValueError:
        return None
    network = build_flow_network(samples, params)
    try:
        low, high = total_flow_range(network)
    except CirculationInfeasibleError:
        return None
    total = min(max(M, low), high)
    flow = feasible_circulation(network, target_total=total)
    d = (total - M) ** 2 // delta
    return TupleEvaluation(params=params, flow=flow, total=total, d=d)


def _best(evals: Iterable[TupleEvaluation]) -> Optional[TupleEvaluation]:
    best = None
    for ev in evals:
        if best is None or ev.lexi_key > best.lexi_key:
            best = ev
    return best


def _peaks(flow: Flow, network: FlowNetwork) -> tuple[int, int]:
    f_p = max(flow.problem_count(p) for p in network.problems)
    f_t = max(flow.tag_count(k) for k in network.tags)
    return f_p, f_t


def search_params(samples: Sequence[TaggedSample], M: int, delta: int = 1000) -> SearchResult:
    """Three-stage lexicographic grid search for selection bounds.

    The base tuple (1, 1, 1000, 1000) must be valid for the sample set; this
    is probed first and a ValueError raised otherwise.
    """
    base = evaluate_tuple(samples, 1, 1, 1000, 1000, M, delta)
    if base is None:
        raise ValueError("base tuple (m_p=1, m_t=1, x_p=1000, x_t=1000) is not valid for these samples")

    # stage 1: coarse sweep, caps pinned at 1000
    stage1 = _best(
        ev
        for m_t in range(1, 497, 5)
        for m_p in range(1, 20)
        if (ev := evaluate_tuple(samples, m_p, m_t, 1000, 1000, M, delta)) is not None
    )
    assert stage1 is not None  # the base tuple is in the stage-1 grid
    network1 = build_flow_network(samples, stage1.params)
    f_p1, f_t1 = _peaks(stage1.flow, network1)
    peaks = [(f_p1, f_t1)]

    # stage 2: refine around the winner's peak flows; on tiny instances the
    # tightened caps can all fall below m_t, leaving nothing valid to refine
    m_t1, m_p1 = stage1.params.m_t, stage1.params.m_p
    stage2 = _best(
        ev
        for m_t in range(m_t1, m_t1 + 50)
        for x_t in range(f_t1 - 100, f_t1 + 1, 20)
        for x_p in range(f_p1 - 5, f_p1 + 1)
        for m_p in (m_p1, m_p1 + 1)
        if (ev := evaluate_tuple(samples, m_p, m_t, x_p, x_t, M, delta)) is not None
    )

    # stage 3: single-step sweep of x_t only
    stage3 = None
    if stage2 is not None:
        network2 = build_flow_network(samples, stage2.params)
        f_p2, f_t2 = _peaks(stage2.flow, network2)
        peaks.append((f_p2, f_t2))
        p2 = stage2.params
        stage3 = _best(
            ev
            for x_t in range(f_t2 - 100, f_t2 + 1)
            if (ev := evaluate_tuple(samples, p2.m_p, p2.m_t, p2.x_p, x_t, M, delta)) is not None
        )

    # the result is the lexicographic max over everything the stages evaluated
    final = _best(ev for ev in (stage1, stage2, stage3) if ev is not None)
    assert final is not None
    return SearchResult(
        params=final.params,
        flow=final.flow,
        total=final.total,
        d=final.d,
        stage_peaks=tuple(peaks),
        stage_winners=tuple(ev.params for ev in (stage1, stage2, stage3) if ev is not None),
    )

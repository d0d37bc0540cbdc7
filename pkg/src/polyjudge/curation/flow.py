"""Feasible circulation with lower and upper bounds on the s->problems->tags->t
selection network.

Network construction: edge (s, P_i) bounded [min(m_p, p_i), min(x_p, p_i)],
edge (T_k, t) bounded [min(m_t, t_k), min(x_t, t_k)], and an unbounded edge
(P_i, T_k) whenever problem i carries tag k (infinity materialized as the
total sample count). A feasible flow obeys l(e) <= f(e) <= c(e) everywhere
plus conservation, making f(s,P_i) the per-problem and f(T_k,t) the per-tag
pick counts, with equal totals on both sides.

Feasibility is decided by the standard lower-bound reduction: subtract the
lower bounds, add super source/sink demands plus a t->s return edge, and
saturate the demands with a max-flow (Dinic's algorithm).
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Hashable, Mapping, Optional, Sequence

SOURCE = "s"
SINK = "t"

Node = Hashable
EdgeKey = tuple[Node, Node]


class CirculationInfeasibleError(ValueError):
    """No flow satisfies the bounds; carries the unmet lower-bound deficit."""

    def __init__(self, deficit: int):
        self.deficit = deficit
        super().__init__(f"no feasible circulation: {deficit} unit(s) of lower-bound demand unmet")


@dataclass(frozen=True)
class TaggedSample:
    """One selectable sample: its problem, its tag set, and an opaque payload."""

    uid: str
    problem: str
    tags: frozenset[str]
    payload: object = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tags", frozenset(self.tags))


@dataclass(frozen=True)
class SelectionParams:
    """(m_p, x_p) per-problem and (m_t, x_t) per-tag pick bounds, the target
    total M, and the difference-resolution divisor delta."""

    m_p: int
    m_t: int
    x_p: int
    x_t: int
    M: int = 1
    delta: int = 1000

    def __post_init__(self) -> None:
        if not (1 <= self.m_p <= self.x_p):
            raise ValueError("need 1 <= m_p <= x_p")
        if not (1 <= self.m_t <= self.x_t):
            raise ValueError("need 1 <= m_t <= x_t")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.delta < 1:
            raise ValueError("delta must be >= 1")


@dataclass(frozen=True)
class FlowNetwork:
    problems: tuple[str, ...]
    tags: tuple[str, ...]
    p_counts: Mapping[str, int]  # samples per problem
    t_counts: Mapping[str, int]  # samples per tag
    edges: Mapping[EdgeKey, tuple[int, int]]  # (lower, upper)

    def __post_init__(self) -> None:
        for (u, v), (lo, hi) in self.edges.items():
            if not 0 <= lo <= hi:
                raise ValueError(f"edge ({u!r}, {v!r}) violates 0 <= l <= c: [{lo}, {hi}]")

    @property
    def problem_nodes(self) -> list[Node]:
        return [("P", p) for p in self.problems]

    @property
    def tag_nodes(self) -> list[Node]:
        return [("T", k) for k in self.tags]


@dataclass(frozen=True)
class Flow:
    """An integral edge flow; check() re-verifies every feasibility invariant."""

    values: Mapping[EdgeKey, int]

    def __getitem__(self, edge: EdgeKey) -> int:
        return self.values.get(edge, 0)

    @property
    def total(self) -> int:
        return sum(v for (u, _), v in self.values.items() if u == SOURCE)

    def problem_count(self, problem: str) -> int:
        return self[(SOURCE, ("P", problem))]

    def tag_count(self, tag: str) -> int:
        return self[(("T", tag), SINK)]

    def check(self, network: FlowNetwork) -> None:
        balance: dict[Node, int] = defaultdict(int)
        for edge, (lo, hi) in network.edges.items():
            value = self[edge]
            if not lo <= value <= hi:
                raise AssertionError(f"edge {edge!r}: flow {value} outside [{lo}, {hi}]")
            balance[edge[0]] -= value
            balance[edge[1]] += value
        for node, net in balance.items():
            if node in (SOURCE, SINK):
                continue
            if net != 0:
                raise AssertionError(f"conservation violated at {node!r}: net {net}")
        out_s = sum(self[e] for e in network.edges if e[0] == SOURCE)
        in_t = sum(self[e] for e in network.edges if e[1] == SINK)
        if out_s != in_t:
            raise AssertionError(f"source outflow {out_s} != sink inflow {in_t}")


def build_flow_network(samples: Sequence[TaggedSample], params: SelectionParams) -> FlowNetwork:
    """Construct the selection network from a tagged sample list.

    Problems appear in first-seen order; a problem's tag set is the union of
    its samples' tags. Raises on problems carrying no tags at all.
    """
    problems: list[str] = []
    problem_tags: dict[str, set[str]] = defaultdict(set)
    p_counts: Counter = Counter()
    t_counts: Counter = Counter()
    tags_seen: list[str] = []
    for sample in samples:
        if sample.problem not in problem_tags:
            problems.append(sample.problem)
        problem_tags[sample.problem].update(sample.tags)
        p_counts[sample.problem] += 1
        for tag in sample.tags:
            if tag not in t_counts:
                tags_seen.append(tag)
            t_counts[tag] += 1
    untagged = [p for p in problems if not problem_tags[p]]
    if untagged:
        raise ValueError(f"problem(s) without any tag: {untagged}")

    infinity = sum(p_counts.values())
    edges: dict[EdgeKey, tuple[int, int]] = {}
    for p in problems:
        edges[(SOURCE, ("P", p))] = (min(params.m_p, p_counts[p]), min(params.x_p, p_counts[p]))
    for k in tags_seen:
        edges[(("T", k), SINK)] = (min(params.m_t, t_counts[k]), min(params.x_t, t_counts[k]))
    for p in problems:
        for k in sorted(problem_tags[p], key=tags_seen.index):
            edges[(("P", p), ("T", k))] = (0, infinity)
    return FlowNetwork(
        problems=tuple(problems),
        tags=tuple(tags_seen),
        p_counts=dict(p_counts),
        t_counts=dict(t_counts),
        edges=edges,
    )


# -- Dinic max-flow ---------------------------------------------------------------


class _Dinic:
    def __init__(self) -> None:
        self.graph: dict[Node, list[list]] = defaultdict(list)  # [to, cap, rev_index]

    def add_edge(self, u: Node, v: Node, cap: int) -> tuple[Node, int]:
        """Returns a handle (u, index) to read residual capacity later."""
        self.graph[u].append([v, cap, len(self.graph[v])])
        self.graph[v].append([u, 0, len(self.graph[u]) - 1])
        return (u, len(self.graph[u]) - 1)

    def flow_through(self, handle: tuple[Node, int], original_cap: int) -> int:
        u, idx = handle
        return original_cap - self.graph[u][idx][1]

    def max_flow(self, source: Node, sink: Node) -> int:
        total = 0
        while True:
            level = {source: 0}
            frontier = [source]
            while frontier:
                nxt = []
                for u in frontier:
                    for v, cap, _ in self.graph[u]:
                        if cap > 0 and v not in level:
                            level[v] = level[u] + 1
                            nxt.append(v)
                frontier = nxt
            if sink not in level:
                return total
            iters = {u: 0 for u in self.graph}

            def dfs(u: Node, pushed: int) -> int:
                if u == sink:
                    return pushed
                while iters[u] < len(self.graph[u]):
                    edge = self.graph[u][iters[u]]
                    v, cap, rev = edge
                    if cap > 0 and level.get(v, -1) == level[u] + 1:
                        got = dfs(v, min(pushed, cap))
                        if got > 0:
                            edge[1] -= got
                            self.graph[v][rev][1] += got
                            return got
                    iters[u] += 1
                return 0

            while True:
                pushed = dfs(source, 10**18)
                if pushed == 0:
                    break
                total += pushed


# -- circulation ------------------------------------------------------------------


def feasible_circulation(network: FlowNetwork, target_total: Optional[int] = None) -> Flow:
    """A feasible flow for the network, or CirculationInfeasibleError.

    With ``target_total`` the returned flow moves exactly that many units
    end to end (the t->s return edge is pinned to [T, T]).
    """
    infinity = sum(network.p_counts.values())
    if target_total is None:
        return_bounds = (0, infinity)
    else:
        return_bounds = (target_total, target_total)

    dinic = _Dinic()
    handles: dict[EdgeKey, tuple[tuple[Node, int], int, int]] = {}
    excess: dict[Node, int] = defaultdict(int)

    all_edges: dict[EdgeKey, tuple[int, int]] = dict(network.edges)
    all_edges[(SINK, SOURCE)] = return_bounds

    for (u, v), (lo, hi) in all_edges.items():
        handle = dinic.add_edge(u, v, hi - lo)
        handles[(u, v)] = (handle, lo, hi - lo)
        excess[v] += lo
        excess[u] -= lo

    super_source, super_sink = ("super", "S"), ("super", "T")
    demand = 0
    for node, net in excess.items():
        if net > 0:
            dinic.add_edge(super_source, node, net)
            demand += net
        elif net < 0:
            dinic.add_edge(node, super_sink, -net)

    saturated = dinic.max_flow(super_source, super_sink)
    if saturated < demand:
        raise CirculationInfeasibleError(demand - saturated)

    values = {}
    for edge, (handle, lo, residual_cap) in handles.items():
        if edge == (SINK, SOURCE):
            continue
        values[edge] = lo + dinic.flow_through(handle, residual_cap)
    flow = Flow(values=values)
    flow.check(network)
    return flow


def total_flow_range(network: FlowNetwork) -> tuple[int, int]:
    """[min, max] achievable end-to-end totals over all feasible flows.

    Every integer in between is achievable (augmenting paths change the total
    in integer steps). Raises CirculationInfeasibleError when nothing is.
    """
    base = feasible_circulation(network)
    base_total = base.total
    top = _retarget(network, maximize=True, start=base)
    bottom = _retarget(network, maximize=False, start=base)
    assert bottom <= base_total <= top
    return bottom, top


def _retarget(network: FlowNetwork, maximize: bool, start: Flow) -> int:
    """Max (or min) total: push augmenting flow s->t (or t->s) on the residual
    of the base feasible flow, keeping every edge inside its bounds."""
    dinic = _Dinic()
    for (u, v), (lo, hi) in network.edges.items():
        current = start[(u, v)]
        dinic.graph[u].append([v, hi - current, len(dinic.graph[v])])
        dinic.graph[v].append([u, current - lo, len(dinic.graph[u]) - 1])
    if maximize:
        delta = dinic.max_flow(SOURCE, SINK)
        return start.total + delta
    delta = dinic.max_flow(SINK, SOURCE)
    return start.total - delta

"""Evaluation metrics: pass@k, macro-F1, accuracy, top-k retrieval accuracy.

All metrics are pure functions. pass@k follows the unbiased estimator
1 - C(n-c, k) / C(n, k), evaluated in exact rational arithmetic via the
product form (no factorial blow-up) and converted to float once at the end.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from .model import ExecOutcome


@dataclass(frozen=True)
class ProblemResultSet:
    """Sampling record for one problem: n generations, c with job-level PASSED."""

    src_uid: str
    n: int
    c: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 <= self.c <= self.n:
            raise ValueError("c must satisfy 0 <= c <= n")


@dataclass(frozen=True)
class LabelSetPair:
    """Gold and predicted tag sets for one classified sample."""

    gold: frozenset[str]
    predicted: frozenset[str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "gold", frozenset(self.gold))
        object.__setattr__(self, "predicted", frozenset(self.predicted))


def pass_at_k(n: int, c: int, k: int) -> float:
    """Probability that at least one of k samples (drawn from n, c correct)
    passes: 1 - C(n-c, k)/C(n, k); 1.0 whenever n - c < k."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if not 0 <= c <= n:
        raise ValueError(f"need 0 <= c <= n, got c={c}, n={n}")
    if n - c < k:
        return 1.0
    miss = Fraction(1)
    for i in range(k):
        miss *= Fraction(n - c - i, n - i)
    return float(1 - miss)


def corpus_pass_at_k(results: Sequence[ProblemResultSet], k: int) -> float:
    """Mean of per-problem pass@k, each problem weighted equally."""
    if not results:
        raise ValueError("results must be non-empty")
    return sum(pass_at_k(r.n, r.c, k) for r in results) / len(results)


def macro_f1(pairs: Sequence[LabelSetPair], universe: Iterable[str]) -> float:
    """Mean over the tag universe of per-tag F1 = 2TP / (2TP + FP + FN).

    A tag absent from both gold and predictions everywhere has an undefined
    F1; it contributes 0 (conservative convention).
    """
    tags = set(universe)
    if not tags:
        raise ValueError("universe must be non-empty")
    tp: dict[str, int] = defaultdict(int)
    fp: dict[str, int] = defaultdict(int)
    fn: dict[str, int] = defaultdict(int)
    for pair in pairs:
        stray = (pair.gold | pair.predicted) - tags
        if stray:
            raise ValueError(f"labels outside the declared universe: {sorted(stray)}")
        for tag in pair.predicted:
            if tag in pair.gold:
                tp[tag] += 1
            else:
                fp[tag] += 1
        for tag in pair.gold - pair.predicted:
            fn[tag] += 1
    total = 0.0
    for tag in tags:
        denom = 2 * tp[tag] + fp[tag] + fn[tag]
        total += (2 * tp[tag] / denom) if denom else 0.0
    return total / len(tags)


def accuracy(predictions: Sequence[Any], gold: Sequence[Any]) -> float:
    """Proportion of correct predictions among all predictions."""
    if len(predictions) != len(gold):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(gold)} gold")
    if not predictions:
        raise ValueError("inputs must be non-empty")
    return sum(p == g for p, g in zip(predictions, gold)) / len(gold)


def top_k_accuracy(
    queries: Sequence[tuple[Sequence[Any], Callable[[Any], bool]]],
    k: int,
) -> float:
    """Fraction of queries whose top-k ranked candidates contain at least one
    correct entry (per the query's own correctness predicate)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not queries:
        raise ValueError("queries must be non-empty")
    hits = 0
    for ranked, is_correct in queries:
        if any(is_correct(candidate) for candidate in list(ranked)[:k]):
            hits += 1
    return hits / len(queries)


# -- result-log ingestion ---------------------------------------------------------
#
# A result log is line-delimited JSON, one judged sample per line:
#   {"src_uid": ..., "lang_cluster": ..., "verdicts": [<wire verdict>, ...]}
# A sample counts as correct when every verdict in the line is PASSED.


def _line_passed(record: Mapping[str, Any]) -> bool:
    verdicts = record.get("verdicts") or []
    outcomes = [v.get("exec_outcome") for v in verdicts]
    return bool(outcomes) and all(o == ExecOutcome.PASSED.value for o in outcomes)


def load_result_log(path: str | Path) -> dict[str, list[ProblemResultSet]]:
    """Group judged samples by language cluster, then by problem."""
    counts: dict[tuple[str, str], list[int]] = defaultdict(lambda: [0, 0])  # (n, c)
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed record: {exc}") from None
            key = (record.get("lang_cluster") or "", record["src_uid"])
            counts[key][0] += 1
            counts[key][1] += int(_line_passed(record))
    grouped: dict[str, list[ProblemResultSet]] = defaultdict(list)
    for (cluster, src_uid), (n, c) in sorted(counts.items()):
        grouped[cluster].append(ProblemResultSet(src_uid=src_uid, n=n, c=c))
    return dict(grouped)


def pass_at_k_report(grouped: Mapping[str, Sequence[ProblemResultSet]], ks: Sequence[int]) -> dict[str, Any]:
    """Per-cluster and overall corpus pass@k for every requested k that fits."""
    report: dict[str, Any] = {"clusters": {}, "overall": {}}
    everything: list[ProblemResultSet] = []
    for cluster, results in sorted(grouped.items()):
        everything.extend(results)
        entry = {}
        for k in ks:
            if all(k <= r.n for r in results):
                entry[f"pass@{k}"] = corpus_pass_at_k(results, k)
        report["clusters"][cluster or "(all)"] = {"problems": len(results), **entry}
    for k in ks:
        if everything and all(k <= r.n for r in everything):
            report["overall"][f"pass@{k}"] = corpus_pass_at_k(everything, k)
    return report


def format_report(report: Mapping[str, Any]) -> str:
    """Plain-text table for terminals; the dict form stays machine-readable."""
    lines = []
    clusters = report.get("clusters", {})
    metric_names = sorted({m for data in clusters.values() for m in data if m != "problems"})
    header = ["cluster", "problems", *metric_names]
    rows = [header]
    for cluster, data in clusters.items():
        rows.append(
            [cluster, str(data.get("problems", ""))]
            + [f"{data[m]:.4f}" if m in data else "-" for m in metric_names]
        )
    if report.get("overall"):
        rows.append(["overall", ""] + [f"{report['overall'][m]:.4f}" if m in report["overall"] else "-" for m in metric_names])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines)

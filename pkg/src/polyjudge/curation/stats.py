"""Tag-distribution statistics: sample skewness and standard deviation of the
per-tag sample counts, plus the circulation-vs-random balance comparison."""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .flow import TaggedSample


@dataclass(frozen=True)
class TagStats:
    skew: float  # biased sample skewness g1 = m3 / m2^(3/2); 0 for constant counts
    std: float  # population standard deviation sqrt(m2)
    counts: Mapping[str, int]


def _moments(values: Sequence[float]) -> tuple[float, float, float]:
    n = len(values)
    mean = sum(values) / n
    m2 = sum((x - mean) ** 2 for x in values) / n
    m3 = sum((x - mean) ** 3 for x in values) / n
    return mean, m2, m3


def tag_stats(samples: Sequence[TaggedSample]) -> TagStats:
    """Skew and std of the per-tag count vector; needs >= 2 distinct tags."""
    counts: Counter = Counter()
    for s in samples:
        for tag in s.tags:
            counts[tag] += 1
    if len(counts) < 2:
        raise ValueError(f"need at least 2 distinct tags, found {len(counts)}")
    values = [float(v) for v in counts.values()]
    _, m2, m3 = _moments(values)
    skew = 0.0 if m2 == 0 else m3 / m2**1.5
    return TagStats(skew=skew, std=math.sqrt(m2), counts=dict(counts))


@dataclass(frozen=True)
class BalanceComparison:
    selected: TagStats
    random_baseline: TagStats

    @property
    def summary(self) -> dict:
        return {
            "selected": {"skew": self.selected.skew, "std": self.selected.std},
            "random": {"skew": self.random_baseline.skew, "std": self.random_baseline.std},
        }


def compare_with_random_baseline(
    population: Sequence[TaggedSample],
    selected: Sequence[TaggedSample],
    rng_seed: int = 0,
    universe: Optional[Sequence[str]] = None,
) -> BalanceComparison:
    """Tag stats of a selection vs a size-matched uniform-random pick.

    When ``universe`` is given, tags absent from a side still contribute a
    zero count, keeping the two vectors comparable.
    """
    rng = random.Random(rng_seed)
    baseline = rng.sample(list(population), k=min(len(selected), len(population)))
    if universe is None:
        return BalanceComparison(tag_stats(selected), tag_stats(baseline))

    def stats_over(samples: Sequence[TaggedSample]) -> TagStats:
        counts = {tag: 0 for tag in universe}
        for s in samples:
            for tag in s.tags:
                if tag in counts:
                    counts[tag] += 1
        values = [float(v) for v in counts.values()]
        if len(values) < 2:
            raise ValueError("universe must contain at least 2 tags")
        _, m2, m3 = _moments(values)
        return TagStats(skew=0.0 if m2 == 0 else m3 / m2**1.5, std=math.sqrt(m2), counts=counts)

    return BalanceComparison(stats_over(selected), stats_over(baseline))

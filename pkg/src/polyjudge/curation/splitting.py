"""Held-out validation/test splitting by geometric mean of per-tag ratios.

gamma is the target ratio |valid| / |test|, so each shuffle is sliced at
fraction gamma / (1 + gamma). Seeds whose two sides disagree on the tag set
are discarded; among the survivors, the split whose geometric mean of
per-tag ratios lands closest to gamma wins.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

from .flow import TaggedSample


class SplitInfeasibleError(ValueError):
    """No seed produced matching tag sets; lists the tags that kept failing."""

    def __init__(self, offending_tags: Sequence[str], attempts: int):
        self.offending_tags = sorted(offending_tags)
        self.attempts = attempts
        super().__init__(
            f"no retained split after {attempts} seed(s); "
            f"tag sets never matched, offending tag(s): {', '.join(self.offending_tags)}"
        )


@dataclass(frozen=True)
class SplitConfig:
    gamma: float  # target |valid| / |test|
    num_seeds: int = 200
    seed_stream: Optional[Sequence[int]] = None  # defaults to range(num_seeds)
    count_improvements: bool = False  # count only improving seeds toward num_seeds
    max_attempts: Optional[int] = None  # guard for count_improvements mode

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.num_seeds < 1:
            raise ValueError("num_seeds must be >= 1")

    def seeds(self) -> Iterable[int]:
        if self.seed_stream is not None:
            return list(self.seed_stream)
        if self.count_improvements:
            return range(self.max_attempts if self.max_attempts is not None else 100 * self.num_seeds)
        return range(self.num_seeds)

    @property
    def slice_fraction(self) -> float:
        return self.gamma / (1.0 + self.gamma)


@dataclass(frozen=True)
class SplitResult:
    valid: tuple[TaggedSample, ...]
    test: tuple[TaggedSample, ...]
    mu: float  # geometric mean of per-tag ratios for the winning split
    seed: int
    retained_seeds: int
    tried_seeds: int

    @property
    def summary(self) -> dict:
        return {
            "valid_size": len(self.valid),
            "test_size": len(self.test),
            "mu": self.mu,
            "seed": self.seed,
            "retained_seeds": self.retained_seeds,
            "tried_seeds": self.tried_seeds,
        }


def _tag_set(samples: Iterable[TaggedSample]) -> frozenset[str]:
    tags: set[str] = set()
    for s in samples:
        tags |= s.tags
    return frozenset(tags)


def geometric_mean_ratio(valid: Sequence[TaggedSample], test: Sequence[TaggedSample]) -> float:
    """Geometric mean over tags of (#valid with tag) / (#test with tag).

    Caller guarantees both sides share the same tag set, so every ratio is a
    positive finite number.
    """
    tags = _tag_set(valid)
    log_sum = 0.0
    for tag in tags:
        v = sum(1 for s in valid if tag in s.tags)
        t = sum(1 for s in test if tag in s.tags)
        log_sum += math.log(v / t)
    return math.exp(log_sum / len(tags))


def split_once(samples: Sequence[TaggedSample], seed: int, fraction: float) -> tuple[list, list]:
    shuffled = list(samples)
    random.Random(seed).shuffle(shuffled)
    cut = int(len(shuffled) * fraction)
    return shuffled[:cut], shuffled[cut:]


def split_heldout(samples: Sequence[TaggedSample], config: SplitConfig) -> SplitResult:
    """Best split over the configured seed stream.

    Every sample must carry at least one tag. Raises SplitInfeasibleError if
    no seed survives the tag-set-equality gate.
    """
    untagged = [s.uid for s in samples if not s.tags]
    if untagged:
        raise ValueError(f"samples without tags: {untagged[:5]}")
    if len(samples) < 2:
        raise ValueError("need at least two samples to split")

    best: Optional[tuple[float, SplitResult]] = None
    retained = 0
    tried = 0
    improvements = 0
    offending: set[str] = set()
    for seed in config.seeds():
        tried += 1
        valid, test = split_once(samples, seed, config.slice_fraction)
        tags_valid, tags_test = _tag_set(valid), _tag_set(test)
        if tags_valid != tags_test:
            offending |= tags_valid ^ tags_test
            continue
        if not valid or not test:
            continue
        retained += 1
        mu = geometric_mean_ratio(valid, test)
        distance = abs(config.gamma - mu)
        if best is None or distance < best[0]:
            improvements += 1
            best = (
                distance,
                SplitResult(
                    valid=tuple(valid),
                    test=tuple(test),
                    mu=mu,
                    seed=seed,
                    retained_seeds=retained,
                    tried_seeds=tried,
                ),
            )
        if config.count_improvements:
            if improvements >= config.num_seeds:
                break
        elif tried >= config.num_seeds:
            break

    if best is None:
        raise SplitInfeasibleError(sorted(offending), tried)
    _, result = best
    return SplitResult(
        valid=result.valid,
        test=result.test,
        mu=result.mu,
        seed=result.seed,
        retained_seeds=retained,
        tried_seeds=tried,
    )


def split_by_label(
    samples: Sequence[TaggedSample],
    label_of: Callable[[TaggedSample], bool],
    config: SplitConfig,
    trim_seed: int = 0,
) -> SplitResult:
    """Variant stratified on a boolean outcome instead of tags: the label is
    treated as the only stratum, and each side is then trimmed (deterministic
    downsampling of the majority label) so true/false appear in equal numbers."""
    relabeled = [
        TaggedSample(uid=s.uid, problem=s.problem, tags=frozenset({str(bool(label_of(s)))}), payload=s)
        for s in samples
    ]
    result = split_heldout(relabeled, config)

    def balance(side: Sequence[TaggedSample], rng: random.Random) -> tuple[TaggedSample, ...]:
        true_side = [s for s in side if "True" in s.tags]
        false_side = [s for s in side if "False" in s.tags]
        keep = min(len(true_side), len(false_side))
        rng.shuffle(true_side)
        rng.shuffle(false_side)
        kept = true_side[:keep] + false_side[:keep]
        order = {s.uid: i for i, s in enumerate(side)}
        kept.sort(key=lambda s: order[s.uid])
        return tuple(s.payload for s in kept)

    rng = random.Random(trim_seed)
    return SplitResult(
        valid=balance(result.valid, rng),
        test=balance(result.test, rng),
        mu=result.mu,
        seed=result.seed,
        retained_seeds=result.retained_seeds,
        tried_seeds=result.tried_seeds,
    )

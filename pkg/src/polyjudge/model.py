"""Shared domain types: verdicts, unit tests, resource limits, corpus records.

Everything here is an immutable value object, safe to share across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace
from typing import Any, Iterable, Mapping, Optional


class ExecOutcome(enum.Enum):
    """Six-way verdict for a single test run.

    A program is buggy if any executed test yields anything other than
    PASSED; PASSED at job level requires PASSED on every executed test.
    """

    COMPILATION_ERROR = "COMPILATION_ERROR"
    RUNTIME_ERROR = "RUNTIME_ERROR"
    MEMORY_LIMIT_EXCEEDED = "MEMORY_LIMIT_EXCEEDED"
    TIME_LIMIT_EXCEEDED = "TIME_LIMIT_EXCEEDED"
    WRONG_ANSWER = "WRONG_ANSWER"
    PASSED = "PASSED"

    @property
    def is_buggy(self) -> bool:
        return self is not ExecOutcome.PASSED

    @property
    def sort_key(self) -> int:
        """Total order used only for stable report sorting, not semantics."""
        return _OUTCOME_ORDER[self]


_OUTCOME_ORDER = {o: i for i, o in enumerate(ExecOutcome)}


def job_outcome(verdicts: Iterable["TestVerdict"]) -> ExecOutcome:
    """Collapse per-test verdicts into the job-level outcome.

    PASSED only when every executed test passed; otherwise the first
    non-PASSED outcome (execution stops there under stop_at_first_fail).
    """
    result = None
    for v in verdicts:
        result = v.exec_outcome
        if result.is_buggy:
            return result
    if result is None:
        raise ValueError("job has no verdicts")
    return result


@dataclass(frozen=True)
class UnitTest:
    """One (stdin, accepted outputs) pair; matching any entry is correct."""

    input: str
    output: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "output", tuple(self.output))
        if not self.output:
            raise ValueError("unit test needs at least one accepted output")

    def to_dict(self) -> dict[str, Any]:
        return {"input": self.input, "output": list(self.output)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "UnitTest":
        return cls(input=data["input"], output=tuple(data["output"]))


#: Field defaults mirror the engine's stock prlimit table; -1 means unlimited,
#: 0 means forbidden / zero quota.
@dataclass(frozen=True)
class ResourceLimits:
    core: int = 0
    data: int = -1
    fsize: int = 0
    sigpending: int = 0
    rss: int = -1
    nofile: int = 4
    msgqueue: int = 0
    rtprio: int = 0
    stack: int = -1
    cpu: int = 2  # seconds
    nproc: int = 1
    address_space: int = 2 * 1024**3  # bytes
    locks: int = 0

    def __post_init__(self) -> None:
        if self.cpu != -1 and self.cpu < 1:
            raise ValueError("cpu must be >= 1 or -1 (unlimited)")
        if self.nproc != -1 and self.nproc < 1:
            raise ValueError("nproc must be >= 1 or -1 (unlimited)")

    def replace(self, **overrides: int) -> "ResourceLimits":
        """New limits with the given fields overridden, others untouched."""
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ValueError(f"unknown limit fields: {sorted(unknown)}")
        return replace(self, **{k: int(v) for k, v in overrides.items()})

    def to_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ResourceLimits":
        return cls().replace(**dict(data))


def default_limits() -> ResourceLimits:
    """The stock per-process limit table, verbatim."""
    return ResourceLimits()


@dataclass(frozen=True)
class SandboxSettings:
    """Per-job sandbox knobs.

    ``limit_overrides`` carries the caller's partial limit override (the wire
    request's optional ``limits`` object); it wins over both the table
    defaults and any per-runtime customization.
    """

    limits: ResourceLimits = field(default_factory=default_limits)
    block_network: bool = True
    stop_at_first_fail: bool = True
    limit_overrides: Optional[Mapping[str, int]] = None

    def effective_limits(self, runtime_overrides: Optional[Mapping[str, int]] = None) -> ResourceLimits:
        limits = self.limits
        if runtime_overrides:
            limits = limits.replace(**dict(runtime_overrides))
        if self.limit_overrides:
            limits = limits.replace(**dict(self.limit_overrides))
        return limits


@dataclass(frozen=True)
class TestVerdict:
    """Wire-level result for one unit test run."""

    exec_outcome: ExecOutcome
    input: str
    output: tuple[str, ...]
    result: Optional[str] = None  # produced text or diagnostic trace; absent
    # only when the program produced nothing before termination

    def __post_init__(self) -> None:
        object.__setattr__(self, "output", tuple(self.output))

    def to_wire(self) -> dict[str, Any]:
        return {
            "exec_outcome": self.exec_outcome.value,
            "input": self.input,
            "output": list(self.output),
            "result": self.result,
        }

    @classmethod
    def from_wire(cls, data: Mapping[str, Any]) -> "TestVerdict":
        return cls(
            exec_outcome=ExecOutcome(data["exec_outcome"]),
            input=data["input"],
            output=tuple(data["output"]),
            result=data.get("result"),
        )


def _parse_timestamp(value: Any) -> Optional[float]:
    """Lenient unix-epoch parse: int, float, or numeric string."""
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return float(value)
    return float(str(value).strip())


@dataclass(frozen=True)
class Problem:
    src_uid: str
    description: str = ""
    input_spec: str = ""
    output_spec: str = ""
    notes: str = ""
    sample_inputs: tuple[str, ...] = ()
    sample_outputs: tuple[str, ...] = ()
    time_limit: Optional[float] = None  # seconds
    memory_limit: Optional[int] = None  # bytes
    tags: frozenset[str] = frozenset()
    difficulty: Optional[int] = None
    created_at: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "tags", frozenset(self.tags))
        object.__setattr__(self, "sample_inputs", tuple(self.sample_inputs))
        object.__setattr__(self, "sample_outputs", tuple(self.sample_outputs))

    @property
    def difficulty_sort_key(self) -> tuple[int, int]:
        """Absent difficulty sorts after every present value."""
        return (1, 0) if self.difficulty is None else (0, self.difficulty)

    def to_dict(self) -> dict[str, Any]:
        return {
            "src_uid": self.src_uid,
            "description": self.description,
            "input_spec": self.input_spec,
            "output_spec": self.output_spec,
            "notes": self.notes,
            "sample_inputs": list(self.sample_inputs),
            "sample_outputs": list(self.sample_outputs),
            "time_limit": self.time_limit,
            "memory_limit": self.memory_limit,
            "tags": sorted(self.tags),
            "difficulty": self.difficulty,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Problem":
        return cls(
            src_uid=data["src_uid"],
            description=data.get("description", ""),
            input_spec=data.get("input_spec", ""),
            output_spec=data.get("output_spec", ""),
            notes=data.get("notes", ""),
            sample_inputs=tuple(data.get("sample_inputs", ())),
            sample_outputs=tuple(data.get("sample_outputs", ())),
            time_limit=data.get("time_limit"),
            memory_limit=data.get("memory_limit"),
            tags=frozenset(data.get("tags", ())),
            difficulty=data.get("difficulty"),
            created_at=_parse_timestamp(data.get("created_at")),
        )


@dataclass(frozen=True)
class Submission:
    code_uid: str
    src_uid: str
    lang: str  # runtime label, e.g. "GNU C11"
    lang_cluster: str = ""  # generic language name, e.g. "C"
    source_code: str = ""
    exec_outcome: Optional[ExecOutcome] = None
    submitted_at: Optional[float] = None
    author_id: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "code_uid": self.code_uid,
            "src_uid": self.src_uid,
            "lang": self.lang,
            "lang_cluster": self.lang_cluster,
            "source_code": self.source_code,
            "exec_outcome": self.exec_outcome.value if self.exec_outcome else None,
            "submitted_at": self.submitted_at,
            "author_id": self.author_id,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Submission":
        outcome = data.get("exec_outcome")
        return cls(
            code_uid=data["code_uid"],
            src_uid=data["src_uid"],
            lang=data.get("lang", ""),
            lang_cluster=data.get("lang_cluster", ""),
            source_code=data.get("source_code", ""),
            exec_outcome=ExecOutcome(outcome) if outcome else None,
            submitted_at=_parse_timestamp(data.get("submitted_at")),
            author_id=data.get("author_id"),
        )

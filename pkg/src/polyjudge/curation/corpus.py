"""Corpus ingestion: problems JSONL + keyed unit-test document + task JSONL,
joined on src_uid. prob_desc_-prefixed fields inside task records are
recognized as inline problem attributes. Dangling links are collected into a
report and never abort the load; malformed lines do, with the line number."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

from ..model import Problem, UnitTest
from .flow import TaggedSample


class CorpusFormatError(ValueError):
    """Unparseable corpus content; the message pinpoints file and line."""


_MEMORY_UNITS = {
    "b": 1,
    "byte": 1,
    "bytes": 1,
    "kb": 1024,
    "kib": 1024,
    "kilobyte": 1024,
    "kilobytes": 1024,
    "mb": 1024**2,
    "mib": 1024**2,
    "megabyte": 1024**2,
    "megabytes": 1024**2,
    "gb": 1024**3,
    "gib": 1024**3,
    "gigabyte": 1024**3,
    "gigabytes": 1024**3,
}

_TIME_UNITS = {
    "ms": 0.001,
    "millisecond": 0.001,
    "milliseconds": 0.001,
    "s": 1.0,
    "sec": 1.0,
    "second": 1.0,
    "seconds": 1.0,
    "minute": 60.0,
    "minutes": 60.0,
}

_QUANTITY = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*([a-zA-Z]*)\s*$")


def parse_memory_limit(text: Any) -> Optional[int]:
    """Normalize corpus memory-limit text ('256 megabytes') to bytes.

    Numbers without a unit are taken as bytes. Unknown units raise rather
    than guess.
    """
    if text is None:
        return None
    if isinstance(text, (int, float)):
        return int(text)
    match = _QUANTITY.match(str(text))
    if not match:
        raise CorpusFormatError(f"unrecognized memory limit: {text!r}")
    value, unit = float(match.group(1)), match.group(2).lower()
    if unit == "":
        return int(value)
    if unit not in _MEMORY_UNITS:
        raise CorpusFormatError(f"unrecognized memory unit in {text!r}")
    return int(value * _MEMORY_UNITS[unit])


def parse_time_limit(text: Any) -> Optional[float]:
    """Normalize corpus time-limit text ('2 seconds') to seconds."""
    if text is None:
        return None
    if isinstance(text, (int, float)):
        return float(text)
    match = _QUANTITY.match(str(text))
    if not match:
        raise CorpusFormatError(f"unrecognized time limit: {text!r}")
    value, unit = float(match.group(1)), match.group(2).lower()
    if unit == "":
        return value
    if unit not in _TIME_UNITS:
        raise CorpusFormatError(f"unrecognized time unit in {text!r}")
    return value * _TIME_UNITS[unit]


def problem_from_record(record: Mapping[str, Any], prefix: str = "") -> Problem:
    """Build a Problem from a corpus record, honoring an optional prob_desc_
    field prefix."""

    def get(name: str, default: Any = None) -> Any:
        return record.get(prefix + name, record.get(name, default))

    return Problem(
        src_uid=record["src_uid"],
        description=get("description", "") or "",
        input_spec=get("input_spec", "") or "",
        output_spec=get("output_spec", "") or "",
        notes=get("notes", "") or "",
        sample_inputs=tuple(_as_list(get("sample_inputs", ()))),
        sample_outputs=tuple(_as_list(get("sample_outputs", ()))),
        time_limit=parse_time_limit(get("time_limit")),
        memory_limit=parse_memory_limit(get("memory_limit")),
        tags=frozenset(get("tags", ()) or ()),
        difficulty=get("difficulty"),
        created_at=_lenient_float(get("created_at")),
    )


def _as_list(value: Any) -> list:
    if value is None:
        return []
    if isinstance(value, str):
        try:
            decoded = json.loads(value)
            return decoded if isinstance(decoded, list) else [value]
        except json.JSONDecodeError:
            return [value]
    return list(value)


def _lenient_float(value: Any) -> Optional[float]:
    if value is None:
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def _parse_unit_tests(value: Any, where: str) -> list[UnitTest]:
    if isinstance(value, str):  # hidden_unit_tests arrives as a JSON string
        try:
            value = json.loads(value)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"{where}: bad unit-test payload: {exc}") from None
    tests = []
    for i, entry in enumerate(value or []):
        try:
            tests.append(UnitTest(input=entry["input"], output=tuple(entry["output"])))
        except (TypeError, KeyError, ValueError) as exc:
            raise CorpusFormatError(f"{where}: unit test #{i}: {exc}") from None
    return tests


@dataclass(frozen=True)
class LinkedRecord:
    """One task record joined to its problem and unit tests."""

    task: Mapping[str, Any]
    problem: Optional[Problem]
    unit_tests: tuple[UnitTest, ...]
    line: int

    @property
    def src_uid(self) -> str:
        return self.task.get("src_uid", "")

    def to_tagged_sample(self) -> TaggedSample:
        tags = self.task.get("tags") or (sorted(self.problem.tags) if self.problem else [])
        uid = self.task.get("code_uid") or self.task.get("apr_id") or f"line-{self.line}"
        return TaggedSample(uid=str(uid), problem=self.src_uid, tags=frozenset(tags), payload=self)


@dataclass
class CorpusReport:
    """Partial-failure report: which records could not be fully linked."""

    dangling: list[dict] = field(default_factory=list)

    def flag(self, line: int, src_uid: str, missing: str) -> None:
        self.dangling.append({"line": line, "src_uid": src_uid, "missing": missing})

    @property
    def ok(self) -> bool:
        return not self.dangling


@dataclass
class CorpusBundle:
    records: list[LinkedRecord]
    problems: dict[str, Problem]
    unit_tests: dict[str, tuple[UnitTest, ...]]
    report: CorpusReport


def iter_jsonl(path: str | Path):
    """Yield (line_number, record); malformed lines raise with their number."""
    with open(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: malformed JSON: {exc}") from None
            if not isinstance(record, dict):
                raise CorpusFormatError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, record


def load_corpus(
    problems_path: str | Path,
    unittests_path: str | Path,
    task_path: str | Path,
) -> CorpusBundle:
    """Join task records to problems and unit tests via src_uid."""
    problems: dict[str, Problem] = {}
    for lineno, record in iter_jsonl(problems_path):
        if "src_uid" not in record:
            raise CorpusFormatError(f"{problems_path}:{lineno}: problem record missing src_uid")
        problems[record["src_uid"]] = problem_from_record(record)

    try:
        db = json.loads(Path(unittests_path).read_text())
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"{unittests_path}: malformed JSON: {exc}") from None
    if not isinstance(db, dict):
        raise CorpusFormatError(f"{unittests_path}: expected an object keyed by src_uid")
    unit_tests = {
        uid: tuple(_parse_unit_tests(entries, f"{unittests_path}[{uid!r}]")) for uid, entries in db.items()
    }

    report = CorpusReport()
    records: list[LinkedRecord] = []
    for lineno, task in iter_jsonl(task_path):
        src_uid = task.get("src_uid")
        if not src_uid:
            raise CorpusFormatError(f"{task_path}:{lineno}: task record missing src_uid")
        problem = problems.get(src_uid)
        if problem is None and any(k.startswith("prob_desc_") for k in task):
            problem = problem_from_record(task, prefix="prob_desc_")
        if problem is None:
            report.flag(lineno, src_uid, "problem")
        tests = unit_tests.get(src_uid)
        if tests is None and "hidden_unit_tests" in task:
            tests = tuple(_parse_unit_tests(task["hidden_unit_tests"], f"{task_path}:{lineno}"))
        if tests is None:
            report.flag(lineno, src_uid, "unittests")
            tests = ()
        records.append(LinkedRecord(task=task, problem=problem, unit_tests=tests, line=lineno))
    return CorpusBundle(records=records, problems=problems, unit_tests=unit_tests, report=report)

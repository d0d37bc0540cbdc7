"""Bug-fix pair mining from per-author submission histories.

For every PASSED submission, the most lexically similar strictly earlier
buggy submission by the same author on the same problem becomes its bug side.
Similarity is the Ratcliff-Obershelp ratio 2*M / (|a|+|b|) over characters
(difflib's matcher, autojunk off so long sources are not silently degraded),
and the opcode decomposition supplies the edit-operation counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from difflib import SequenceMatcher
from typing import Iterable, Optional

from ..model import ExecOutcome, Submission


def sequence_similarity(a: str, b: str) -> float:
    """Gestalt pattern-matching ratio in [0, 1]; 1.0 iff the texts are equal
    character-for-character, 0.0 when nothing matches.

    The raw matcher's tie-breaking is order-dependent; evaluating both
    directions and keeping the better match makes the score symmetric.
    """
    forward = SequenceMatcher(None, a, b, autojunk=False).ratio()
    backward = SequenceMatcher(None, b, a, autojunk=False).ratio()
    return max(forward, backward)


def opcode_counts(a: str, b: str) -> dict[str, int]:
    counts = {"equal": 0, "replace": 0, "delete": 0, "insert": 0}
    for tag, *_ in SequenceMatcher(None, a, b, autojunk=False).get_opcodes():
        counts[tag] += 1
    return counts


@dataclass(frozen=True)
class AprPair:
    bug_source_code: str
    fix_source_code: str
    similarity_score: float
    equal_cnt: int
    replace_cnt: int
    delete_cnt: int
    insert_cnt: int
    fix_ops_cnt: int  # replace + delete + insert
    src_uid: str
    bug_exec_outcome: ExecOutcome
    bug_code_uid: str = ""
    fix_code_uid: str = ""
    author_id: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "bug_source_code": self.bug_source_code,
            "fix_source_code": self.fix_source_code,
            "similarity_score": self.similarity_score,
            "equal_cnt": self.equal_cnt,
            "replace_cnt": self.replace_cnt,
            "delete_cnt": self.delete_cnt,
            "insert_cnt": self.insert_cnt,
            "fix_ops_cnt": self.fix_ops_cnt,
            "src_uid": self.src_uid,
            "bug_exec_outcome": self.bug_exec_outcome.value,
            "bug_code_uid": self.bug_code_uid,
            "fix_code_uid": self.fix_code_uid,
            "author_id": self.author_id,
        }


def _chronological(group: list[Submission]) -> list[Submission]:
    # submitted_at orders the group when every member has one; ties and
    # missing timestamps fall back to corpus order (stable sort)
    if all(s.submitted_at is not None for s in group):
        return sorted(group, key=lambda s: s.submitted_at)
    return group


def build_apr_pairs(submissions: Iterable[Submission]) -> list[AprPair]:
    """Mine (buggy, fixed) pairs grouped by (author, problem).

    Groups lacking a PASSED submission, or whose PASSED submissions have no
    earlier buggy sibling, contribute nothing. Among earlier buggy candidates
    the highest similarity wins; on ties, the chronologically later one.
    """
    groups: dict[tuple[Optional[str], str], list[Submission]] = {}
    for sub in submissions:
        groups.setdefault((sub.author_id, sub.src_uid), []).append(sub)

    pairs: list[AprPair] = []
    for (author, src_uid), group in groups.items():
        ordered = _chronological(group)
        for j, fix in enumerate(ordered):
            if fix.exec_outcome is not ExecOutcome.PASSED:
                continue
            best: Optional[tuple[float, int, Submission]] = None
            for k in range(j):
                bug = ordered[k]
                if bug.exec_outcome is None or bug.exec_outcome is ExecOutcome.PASSED:
                    continue
                score = sequence_similarity(bug.source_code, fix.source_code)
                if best is None or (score, k) > (best[0], best[1]):
                    best = (score, k, bug)
            if best is None:
                continue
            score, _, bug = best
            ops = opcode_counts(bug.source_code, fix.source_code)
            pairs.append(
                AprPair(
                    bug_source_code=bug.source_code,
                    fix_source_code=fix.source_code,
                    similarity_score=score,
                    equal_cnt=ops["equal"],
                    replace_cnt=ops["replace"],
                    delete_cnt=ops["delete"],
                    insert_cnt=ops["insert"],
                    fix_ops_cnt=ops["replace"] + ops["delete"] + ops["insert"],
                    src_uid=src_uid,
                    bug_exec_outcome=bug.exec_outcome,
                    bug_code_uid=bug.code_uid,
                    fix_code_uid=fix.code_uid,
                    author_id=author,
                )
            )
    return pairs

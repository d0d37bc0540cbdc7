import json

import pytest
from hypothesis import given, strategies as st

from polyjudge.model import (
    ExecOutcome,
    Problem,
    SandboxSettings,
    Submission,
    UnitTest,
    default_limits,
    job_outcome,
)
from polyjudge.model import TestVerdict as Verdict

PAPER_LIMIT_TABLE = {
    "core": 0,
    "data": -1,
    "fsize": 0,
    "sigpending": 0,
    "rss": -1,
    "nofile": 4,
    "msgqueue": 0,
    "rtprio": 0,
    "stack": -1,
    "cpu": 2,
    "nproc": 1,
    "address_space": 2 * 1024**3,
    "locks": 0,
}


class TestDefaultLimits:
    def test_defaults_match_table_verbatim(self):
        assert default_limits().to_dict() == PAPER_LIMIT_TABLE

    def test_defaults_pass_invariants(self):
        limits = default_limits()
        assert limits.cpu >= 1
        assert limits.nproc >= 1
        assert limits.address_space == 2147483648

    def test_override_isolation(self):
        overridden = default_limits().replace(cpu=4)
        assert overridden.cpu == 4
        for name, value in PAPER_LIMIT_TABLE.items():
            if name != "cpu":
                assert getattr(overridden, name) == value
        # the original is untouched
        assert default_limits().cpu == 2

    def test_unknown_override_rejected(self):
        with pytest.raises(ValueError, match="bogus"):
            default_limits().replace(bogus=1)

    @pytest.mark.parametrize("field,value", [("cpu", 0), ("cpu", -3), ("nproc", 0)])
    def test_invalid_values_rejected(self, field, value):
        with pytest.raises(ValueError):
            default_limits().replace(**{field: value})


class TestExecOutcome:
    def test_six_variants(self):
        assert len(ExecOutcome) == 6
        assert {o.value for o in ExecOutcome} == {
            "COMPILATION_ERROR",
            "RUNTIME_ERROR",
            "MEMORY_LIMIT_EXCEEDED",
            "TIME_LIMIT_EXCEEDED",
            "WRONG_ANSWER",
            "PASSED",
        }

    def test_ordering_is_total(self):
        keys = [o.sort_key for o in ExecOutcome]
        assert sorted(keys) == list(range(6))

    def test_buggy_rule(self):
        assert not ExecOutcome.PASSED.is_buggy
        for outcome in ExecOutcome:
            if outcome is not ExecOutcome.PASSED:
                assert outcome.is_buggy

    def test_job_outcome_requires_all_passed(self):
        passed = Verdict(ExecOutcome.PASSED, "1", ("1",), "1")
        wrong = Verdict(ExecOutcome.WRONG_ANSWER, "2", ("2",), "3")
        assert job_outcome([passed, passed]) is ExecOutcome.PASSED
        assert job_outcome([passed, wrong]) is ExecOutcome.WRONG_ANSWER
        assert job_outcome([wrong]) is ExecOutcome.WRONG_ANSWER


class TestUnitTest:
    def test_requires_accepted_output(self):
        with pytest.raises(ValueError):
            UnitTest(input="1", output=())

    def test_round_trip(self):
        t = UnitTest(input="1 1", output=("2", "2.0"))
        assert UnitTest.from_dict(json.loads(json.dumps(t.to_dict()))) == t


class TestSandboxSettings:
    def test_defaults(self):
        settings = SandboxSettings()
        assert settings.block_network is True
        assert settings.stop_at_first_fail is True
        assert settings.limits == default_limits()

    def test_effective_limit_precedence(self):
        settings = SandboxSettings(limit_overrides={"nofile": 4})
        effective = settings.effective_limits(runtime_overrides={"nofile": 64, "nproc": 16})
        assert effective.nofile == 4  # caller wins over runtime customization
        assert effective.nproc == 16  # runtime customization wins over table
        assert effective.cpu == 2


class TestVerdictWire:
    def test_wire_shape(self):
        v = Verdict(ExecOutcome.PASSED, "1 1", ("2",), "2")
        wire = v.to_wire()
        assert set(wire) == {"exec_outcome", "input", "output", "result"}
        assert wire == {"exec_outcome": "PASSED", "input": "1 1", "output": ["2"], "result": "2"}

    def test_absent_result_serializes_null(self):
        v = Verdict(ExecOutcome.TIME_LIMIT_EXCEEDED, "", ("",), None)
        assert json.loads(json.dumps(v.to_wire()))["result"] is None

    @given(
        outcome=st.sampled_from(list(ExecOutcome)),
        text=st.text(max_size=50),
        outputs=st.lists(st.text(max_size=20), min_size=1, max_size=3),
        result=st.none() | st.text(max_size=50),
    )
    def test_round_trip(self, outcome, text, outputs, result):
        v = Verdict(outcome, text, tuple(outputs), result)
        assert Verdict.from_wire(json.loads(json.dumps(v.to_wire()))) == v


class TestProblemAndSubmission:
    def test_difficulty_absent_sorts_last(self):
        rated = Problem(src_uid="a", tags={"t"}, difficulty=3500)
        unrated = Problem(src_uid="b", tags={"t"}, difficulty=None)
        ordered = sorted([unrated, rated], key=lambda p: p.difficulty_sort_key)
        assert ordered == [rated, unrated]

    def test_timestamps_parse_leniently(self):
        assert Problem.from_dict({"src_uid": "x", "created_at": "1267561500"}).created_at == 1267561500.0
        assert Problem.from_dict({"src_uid": "x", "created_at": 1267561500.5}).created_at == 1267561500.5
        assert Problem.from_dict({"src_uid": "x"}).created_at is None

    def test_problem_round_trip(self):
        p = Problem(
            src_uid="uid1",
            description="desc",
            tags={"math", "dp"},
            time_limit=2.0,
            memory_limit=256 * 1024**2,
            difficulty=800,
            created_at=1267561500.0,
            sample_inputs=("1 1",),
            sample_outputs=("2",),
        )
        assert Problem.from_dict(json.loads(json.dumps(p.to_dict()))) == p

    def test_submission_round_trip(self):
        s = Submission(
            code_uid="c1",
            src_uid="p1",
            lang="GNU C11",
            lang_cluster="C",
            source_code="int main(){}",
            exec_outcome=ExecOutcome.WRONG_ANSWER,
            submitted_at=1000.0,
            author_id="u9",
        )
        assert Submission.from_dict(json.loads(json.dumps(s.to_dict()))) == s

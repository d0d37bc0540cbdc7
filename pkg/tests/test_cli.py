import json

import pytest

from polyjudge.cli import main


@pytest.fixture()
def ab_fixture(tmp_path):
    src = tmp_path / "ab.py"
    src.write_text("a, b = map(int, input().strip().split())\nprint(a+b)\n")
    tests = tmp_path / "ab.json"
    tests.write_text(
        json.dumps([{"input": "1 1", "output": ["2"]}, {"input": "1 10", "output": ["11"]}])
    )
    return src, tests


@pytest.fixture()
def tagged_corpus(tmp_path):
    path = tmp_path / "corpus.jsonl"
    lines = []
    uid = 0
    for problem in range(10):
        tags = ["math"] if problem % 2 else ["math", "dp"]
        for _ in range(4):
            lines.append({"code_uid": f"c{uid}", "src_uid": f"p{problem}", "tags": tags})
            uid += 1
    path.write_text("\n".join(json.dumps(l) for l in lines) + "\n")
    return path


def run_cli(capsys, *argv) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestExecCommand:
    def test_ab_fixture_passes(self, capsys, ab_fixture):
        src, tests = ab_fixture
        code, out, _ = run_cli(capsys, "exec", "--lang", "Python 3", "--src", str(src), "--tests", str(tests))
        assert code == 0
        assert out.count("PASSED") == 2

    def test_json_format(self, capsys, ab_fixture):
        src, tests = ab_fixture
        code, out, _ = run_cli(
            capsys, "exec", "--lang", "Python 3", "--src", str(src), "--tests", str(tests), "--format", "json"
        )
        assert code == 0
        body = json.loads(out)
        assert [v["exec_outcome"] for v in body["data"]] == ["PASSED", "PASSED"]
        assert [v["result"] for v in body["data"]] == ["2", "11"]

    def test_unknown_lang_is_domain_error(self, capsys, ab_fixture):
        src, tests = ab_fixture
        code, _, err = run_cli(capsys, "exec", "--lang", "COBOL", "--src", str(src), "--tests", str(tests))
        assert code == 1
        assert "COBOL" in err

    def test_usage_error_exit_code(self, ab_fixture):
        with pytest.raises(SystemExit) as exc:
            main(["exec", "--lang", "Python 3"])  # missing required flags
        assert exc.value.code == 2


class TestPasskCommand:
    def test_direct_counts(self, capsys):
        code, out, _ = run_cli(capsys, "passk", "--n", "5", "--c", "2", "--k", "1")
        assert code == 0
        assert out.strip() == "0.4"

    def test_multiple_k_json(self, capsys):
        code, out, _ = run_cli(capsys, "passk", "--n", "5", "--c", "2", "--k", "1", "5", "--format", "json")
        assert code == 0
        values = json.loads(out)
        assert values["pass@1"] == pytest.approx(0.4)
        assert values["pass@5"] == 1.0

    def test_from_result_log(self, capsys, tmp_path):
        log = tmp_path / "results.jsonl"
        ok = {"exec_outcome": "PASSED", "input": "", "output": [""], "result": ""}
        bad = {"exec_outcome": "WRONG_ANSWER", "input": "", "output": [""], "result": ""}
        rows = [
            {"src_uid": "p1", "lang_cluster": "C", "verdicts": [ok]},
            {"src_uid": "p1", "lang_cluster": "C", "verdicts": [bad]},
        ]
        log.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        code, out, _ = run_cli(capsys, "passk", "--log", str(log), "--k", "1", "--format", "json")
        assert code == 0
        report = json.loads(out)
        assert report["clusters"]["C"]["pass@1"] == pytest.approx(0.5)

    def test_counts_required_without_log(self, capsys):
        code, _, err = run_cli(capsys, "passk", "--k", "1")
        assert code == 1
        assert "--n" in err


class TestMetricsCommand:
    def test_macro_f1_and_accuracy(self, capsys, tmp_path):
        pairs = tmp_path / "pairs.jsonl"
        rows = [
            {"gold": ["a"], "predicted": ["a"]},
            {"gold": ["b"], "predicted": ["a", "b"]},
        ]
        pairs.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        code, out, _ = run_cli(capsys, "metrics", "--pairs", str(pairs), "--format", "json")
        assert code == 0
        payload = json.loads(out)
        assert payload["macro_f1"] == pytest.approx(5 / 6)
        assert payload["accuracy"] == pytest.approx(0.5)


class TestCurationCommands:
    def test_split_writes_sides_and_summary(self, capsys, tagged_corpus, tmp_path):
        out_valid = tmp_path / "valid.jsonl"
        out_test = tmp_path / "test.jsonl"
        code, out, _ = run_cli(
            capsys,
            "split",
            "--corpus",
            str(tagged_corpus),
            "--gamma",
            "0.25",
            "--seeds",
            "50",
            "--out-valid",
            str(out_valid),
            "--out-test",
            str(out_test),
            "--format",
            "json",
        )
        assert code == 0
        summary = json.loads(out)
        assert summary["valid_size"] + summary["test_size"] == 40
        assert len(out_valid.read_text().splitlines()) == summary["valid_size"]
        assert len(out_test.read_text().splitlines()) == summary["test_size"]

    def test_select_reports_tuple_and_d(self, capsys, tagged_corpus, tmp_path):
        out_path = tmp_path / "selected.jsonl"
        code, out, _ = run_cli(
            capsys,
            "select",
            "--corpus",
            str(tagged_corpus),
            "--M",
            "20",
            "--delta",
            "1000",
            "--out",
            str(out_path),
            "--format",
            "json",
        )
        assert code == 0
        report = json.loads(out)
        assert set(report["params"]) == {"m_p", "m_t", "x_p", "x_t"}
        assert report["d"] >= 0
        assert report["total"] == len(out_path.read_text().splitlines())
        assert "balance" in report

    def test_stats_outputs_skew_and_std(self, capsys, tagged_corpus):
        code, out, _ = run_cli(capsys, "stats", "--corpus", str(tagged_corpus), "--format", "json")
        assert code == 0
        payload = json.loads(out)
        assert set(payload) == {"skew", "std", "tags"}
        assert payload["tags"]["math"] == 40

    def test_apr_pairs_end_to_end(self, capsys, tmp_path):
        submissions = tmp_path / "submissions.jsonl"
        rows = [
            {
                "code_uid": "b1",
                "src_uid": "p1",
                "lang": "GNU C11",
                "source_code": "int main(){return 1;}",
                "exec_outcome": "WRONG_ANSWER",
                "submitted_at": 1,
                "author_id": "alice",
            },
            {
                "code_uid": "f1",
                "src_uid": "p1",
                "lang": "GNU C11",
                "source_code": "int main(){return 0;}",
                "exec_outcome": "PASSED",
                "submitted_at": 2,
                "author_id": "alice",
            },
        ]
        submissions.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        out_path = tmp_path / "pairs.jsonl"
        code, out, _ = run_cli(
            capsys, "apr-pairs", "--submissions", str(submissions), "--out", str(out_path), "--format", "json"
        )
        assert code == 0
        assert json.loads(out)["pairs"] == 1
        (pair,) = [json.loads(line) for line in out_path.read_text().splitlines()]
        assert pair["bug_code_uid"] == "b1"
        assert pair["fix_code_uid"] == "f1"
        assert pair["bug_exec_outcome"] == "WRONG_ANSWER"
        assert pair["fix_ops_cnt"] == pair["replace_cnt"] + pair["delete_cnt"] + pair["insert_cnt"]


class TestJudgeCommand:
    def test_batch_judge_then_passk(self, capsys, tmp_path):
        submissions = tmp_path / "submissions.jsonl"
        rows = [
            {
                "code_uid": "good",
                "src_uid": "p1",
                "lang": "Python 3",
                "lang_cluster": "Python",
                "source_code": "a, b = map(int, input().split())\nprint(a+b)",
            },
            {
                "code_uid": "bad",
                "src_uid": "p1",
                "lang": "Python 3",
                "lang_cluster": "Python",
                "source_code": "print(42)",
            },
            {
                "code_uid": "orphan",
                "src_uid": "missing",
                "lang": "Python 3",
                "lang_cluster": "Python",
                "source_code": "print(0)",
            },
        ]
        submissions.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        db = tmp_path / "unittest_db.json"
        db.write_text(json.dumps({"p1": [{"input": "1 1", "output": ["2"]}]}))
        log = tmp_path / "results.jsonl"

        code, _, err = run_cli(
            capsys, "judge", "--submissions", str(submissions), "--unittests", str(db), "--out", str(log)
        )
        assert code == 0
        assert "judged 2" in err and "skipped 1" in err

        records = [json.loads(line) for line in log.read_text().splitlines()]
        assert {r["code_uid"]: r["job_outcome"] for r in records} == {
            "good": "PASSED",
            "bad": "WRONG_ANSWER",
        }

        code, out, _ = run_cli(capsys, "passk", "--log", str(log), "--k", "1", "--format", "json")
        assert code == 0
        assert json.loads(out)["clusters"]["Python"]["pass@1"] == pytest.approx(0.5)

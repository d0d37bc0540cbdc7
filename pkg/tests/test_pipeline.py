"""End-to-end toolkit pipeline: ingest a corpus, split it, select a balanced
subset, and feed judged results into the metrics layer."""

import json
import random

import pytest

from polyjudge.curation import (
    SplitConfig,
    load_corpus,
    search_params,
    select_samples,
    split_heldout,
    tag_stats,
)
from polyjudge.metrics import ProblemResultSet, corpus_pass_at_k


@pytest.fixture()
def corpus_files(tmp_path):
    rng = random.Random(77)
    tag_pool = ["math", "dp", "greedy", "graphs", "brute force"]
    problems = []
    tasks = []
    unittests = {}
    uid = 0
    for i in range(24):
        src_uid = f"prob{i:03d}"
        tags = sorted(rng.sample(tag_pool, rng.randint(1, 2)))
        problems.append(
            {
                "src_uid": src_uid,
                "description": f"problem {i}",
                "time_limit": "2 seconds",
                "memory_limit": "256 megabytes",
                "tags": tags,
                "difficulty": rng.choice([800, 1200, 1600, None]),
            }
        )
        unittests[src_uid] = [{"input": "1 1", "output": ["2"]}]
        for _ in range(rng.randint(2, 8)):
            tasks.append(
                {
                    "src_uid": src_uid,
                    "code_uid": f"code{uid}",
                    "lang": "Python 3",
                    "lang_cluster": "Python",
                    "source_code": "print(sum(map(int, input().split())))",
                    "tags": tags,
                }
            )
            uid += 1
    (tmp_path / "problems.jsonl").write_text("\n".join(json.dumps(p) for p in problems) + "\n")
    (tmp_path / "unittest_db.json").write_text(json.dumps(unittests))
    (tmp_path / "tasks.jsonl").write_text("\n".join(json.dumps(t) for t in tasks) + "\n")
    return tmp_path


def test_ingest_split_select_metrics_pipeline(corpus_files):
    bundle = load_corpus(
        corpus_files / "problems.jsonl",
        corpus_files / "unittest_db.json",
        corpus_files / "tasks.jsonl",
    )
    assert bundle.report.ok
    samples = [record.to_tagged_sample() for record in bundle.records]
    assert all(s.tags for s in samples)

    # held-out split with matching tag sets on both sides
    split = split_heldout(samples, SplitConfig(gamma=0.25, num_seeds=80))
    assert {t for s in split.valid for t in s.tags} == {t for s in split.test for t in s.tags}
    assert len(split.valid) + len(split.test) == len(samples)

    # balanced selection from the test side
    test_side = list(split.test)
    M = max(len({s.problem for s in test_side}), len(test_side) // 3)
    result = search_params(test_side, M=M, delta=100)
    selection = select_samples(test_side, result.flow, rng_seed=1)
    assert len(selection) == result.total
    network_tags = {t for s in test_side for t in s.tags}
    counts = selection.attributed_tag_counts()
    assert set(counts) <= network_tags

    # the selected subset still has enough tag spread for statistics
    stats = tag_stats(list(selection.samples))
    assert len(stats.counts) >= 2

    # pretend every problem got n=2 samples judged with c=1 correct
    per_problem = [ProblemResultSet(src_uid=p, n=2, c=1) for p in {s.problem for s in selection.samples}]
    assert corpus_pass_at_k(per_problem, k=1) == pytest.approx(0.5)
    assert corpus_pass_at_k(per_problem, k=2) == pytest.approx(1.0)


def test_serve_subprocess_boots_and_judges(tmp_path):
    import socket
    import subprocess
    import sys
    import time
    import urllib.request

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]

    proc = subprocess.Popen(
        [sys.executable, "-m", "polyjudge.cli", "serve", "--port", str(port), "--num-workers", "2"],
        env={"PATH": "/usr/local/bin:/usr/bin:/bin", "NUM_WORKERS": "ignored-by-flag"},
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    try:
        body = json.dumps(
            {
                "language": "Python 3",
                "source_code": "a, b = map(int, input().strip().split())\nprint(a+b)",
                "unittests": [{"input": "1 1", "output": ["2"]}],
            }
        ).encode()
        deadline = time.monotonic() + 15
        response = None
        while time.monotonic() < deadline:
            try:
                request = urllib.request.Request(
                    f"http://127.0.0.1:{port}/api/execute_code", data=body, method="POST"
                )
                with urllib.request.urlopen(request, timeout=30) as reply:
                    response = json.loads(reply.read().decode())
                break
            except OSError:
                time.sleep(0.2)
        assert response == {
            "data": [{"exec_outcome": "PASSED", "input": "1 1", "output": ["2"], "result": "2"}]
        }
    finally:
        proc.terminate()
        proc.wait(timeout=10)

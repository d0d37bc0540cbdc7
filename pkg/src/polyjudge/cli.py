"""Command-line entry point: the judging service plus every toolkit operation.

Every subcommand is a thin shell over a library call. Exit codes: 0 success,
1 domain error (bad input data, infeasible instance, judge errors), 2 usage
error (argparse). --format json emits machine-readable output everywhere.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import curation, metrics
from .executor import DEFAULT_BASE_TIME_LIMIT, SandboxExecutor
from .gateway import ExecuteCodeRequest, GatewayService, make_server
from .model import SandboxSettings, Submission, UnitTest, job_outcome
from .registry import load_registry
from .scheduler import WorkerPool, workers_from_env


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except BrokenPipeError:
        return 0
    except (ValueError, LookupError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyjudge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the judging HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=5000)
    p.add_argument("--num-workers", type=int, default=None, help="defaults to NUM_WORKERS or 2")
    p.add_argument("--runtimes-config", type=Path, default=None)
    p.add_argument("--base-time-limit", type=float, default=DEFAULT_BASE_TIME_LIMIT)
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser("exec", help="judge one source file against a unit-test file")
    p.add_argument("--lang", required=True, help="runtime label or language cluster")
    p.add_argument("--src", required=True, type=Path)
    p.add_argument("--tests", required=True, type=Path, help="JSON list of {input, output}")
    p.add_argument("--runtimes-config", type=Path, default=None)
    p.add_argument("--base-time-limit", type=float, default=DEFAULT_BASE_TIME_LIMIT)
    p.add_argument("--run-all", action="store_true", help="keep running after the first failure")
    p.add_argument("--allow-network", action="store_true")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_exec)

    p = sub.add_parser("judge", help="batch-judge submissions into a result log")
    p.add_argument("--submissions", required=True, type=Path, help="JSONL of submission records")
    p.add_argument("--unittests", required=True, type=Path, help="unit-test db keyed by src_uid")
    p.add_argument("--out", required=True, type=Path, help="result-log JSONL to write")
    p.add_argument("--runtimes-config", type=Path, default=None)
    p.add_argument("--base-time-limit", type=float, default=DEFAULT_BASE_TIME_LIMIT)
    p.add_argument("--run-all", action="store_true")
    p.set_defaults(handler=cmd_judge)

    p = sub.add_parser("passk", help="pass@k from counts or from a result log")
    p.add_argument("--n", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--k", type=int, required=True, nargs="+")
    p.add_argument("--log", type=Path, help="result-log JSONL (grouped per problem/language)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_passk)

    p = sub.add_parser("metrics", help="macro-F1 / accuracy over prediction files")
    p.add_argument("--pairs", required=True, type=Path, help="JSONL of {gold: [...], predicted: [...]}")
    p.add_argument("--universe", type=str, default=None, help="comma-separated tag universe (default: union)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser("split", help="geometric-mean validation/test split")
    p.add_argument("--corpus", required=True, type=Path, help="JSONL of tagged samples")
    p.add_argument("--gamma", type=float, required=True, help="target |valid| / |test|")
    p.add_argument("--seeds", type=int, default=200)
    p.add_argument("--out-valid", type=Path)
    p.add_argument("--out-test", type=Path)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("select", help="circulation-balanced sample selection")
    p.add_argument("--corpus", required=True, type=Path, help="JSONL of tagged samples")
    p.add_argument("--M", type=int, required=True, help="target sample count")
    p.add_argument("--delta", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="write selected sample lines here")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_select)

    p = sub.add_parser("apr-pairs", help="mine bug-fix pairs from submission histories")
    p.add_argument("--submissions", required=True, type=Path, help="JSONL of submission records")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_apr_pairs)

    p = sub.add_parser("stats", help="tag-distribution skew and standard deviation")
    p.add_argument("--corpus", required=True, type=Path, help="JSONL of tagged samples")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(handler=cmd_stats)

    return parser


# -- helpers -----------------------------------------------------------------------


def _load_tagged_samples(path: Path) -> list[curation.TaggedSample]:
    samples = []
    for lineno, record in curation.corpus.iter_jsonl(path):
        uid = str(record.get("code_uid") or record.get("uid") or f"line-{lineno}")
        problem = str(record.get("src_uid") or record.get("problem") or uid)
        tags = record.get("tags") or ()
        samples.append(
            curation.TaggedSample(uid=uid, problem=problem, tags=frozenset(tags), payload=record)
        )
    if not samples:
        raise ValueError(f"{path}: no samples found")
    return samples


def _emit(args: argparse.Namespace, payload: dict[str, Any], text: str) -> None:
    if getattr(args, "format", "text") == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


# -- handlers ----------------------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    registry = load_registry(args.runtimes_config)
    num_workers = args.num_workers if args.num_workers is not None else workers_from_env()

    def worker_factory(worker_id: int):
        executor = SandboxExecutor(registry, worker_id=worker_id, base_time_limit=args.base_time_limit)

        def run(request: ExecuteCodeRequest):
            return executor.judge(
                request.source_code,
                request.language,
                request.unittests,
                settings=request.settings(),
            )

        return run

    pool = WorkerPool(run_job=None, num_workers=num_workers, worker_factory=worker_factory).start()
    service = GatewayService(registry, pool, base_time_limit=args.base_time_limit)
    server = make_server(service, args.host, args.port)

    if args.runtimes_config is not None:
        signal.signal(signal.SIGHUP, lambda *_: registry.reload(args.runtimes_config))

    print(f"listening on http://{args.host}:{args.port} with {num_workers} worker(s)", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        pool.shutdown(drain=True)
    return 0


def _print_verdicts(args: argparse.Namespace, verdicts) -> None:
    wire = [v.to_wire() for v in verdicts]
    if args.format == "json":
        print(json.dumps({"data": wire}, indent=2))
    else:
        for i, v in enumerate(wire, start=1):
            result = "" if v["result"] is None else f"  result={v['result']!r}"
            print(f"test {i}: {v['exec_outcome']}{result}")


def cmd_exec(args: argparse.Namespace) -> int:
    registry = load_registry(args.runtimes_config)
    tests_doc = json.loads(args.tests.read_text())
    if isinstance(tests_doc, dict):
        tests_doc = tests_doc.get("unittests") or tests_doc.get("tests") or []
    tests = [UnitTest(input=t["input"], output=tuple(t["output"])) for t in tests_doc]
    executor = SandboxExecutor(registry, base_time_limit=args.base_time_limit)
    settings = SandboxSettings(
        block_network=not args.allow_network,
        stop_at_first_fail=not args.run_all,
    )
    try:
        verdicts = executor.judge(args.src.read_text(), args.lang, tests, settings=settings)
    finally:
        executor.close()
    _print_verdicts(args, verdicts)
    return 0


def cmd_judge(args: argparse.Namespace) -> int:
    registry = load_registry(args.runtimes_config)
    db = json.loads(args.unittests.read_text())
    executor = SandboxExecutor(registry, base_time_limit=args.base_time_limit)
    settings = SandboxSettings(stop_at_first_fail=not args.run_all)
    judged = skipped = 0
    try:
        with open(args.out, "w") as out:
            for lineno, record in curation.corpus.iter_jsonl(args.submissions):
                sub = Submission.from_dict({**record, "code_uid": str(record.get("code_uid", lineno))})
                entries = db.get(sub.src_uid)
                if not entries:
                    skipped += 1
                    continue
                tests = [UnitTest(input=e["input"], output=tuple(e["output"])) for e in entries]
                verdicts = executor.judge(sub.source_code, sub.lang, tests, settings=settings)
                judged += 1
                out.write(
                    json.dumps(
                        {
                            "src_uid": sub.src_uid,
                            "lang_cluster": sub.lang_cluster,
                            "code_uid": sub.code_uid,
                            "job_outcome": job_outcome(verdicts).value,
                            "verdicts": [v.to_wire() for v in verdicts],
                        }
                    )
                    + "\n"
                )
    finally:
        executor.close()
    print(f"judged {judged} submission(s), skipped {skipped} without unit tests", file=sys.stderr)
    return 0


def cmd_passk(args: argparse.Namespace) -> int:
    if args.log is not None:
        grouped = metrics.load_result_log(args.log)
        report = metrics.pass_at_k_report(grouped, args.k)
        _emit(args, report, metrics.format_report(report))
        return 0
    if args.n is None or args.c is None:
        raise ValueError("either --log or both --n and --c are required")
    values = {f"pass@{k}": metrics.pass_at_k(args.n, args.c, k) for k in args.k}
    text = "\n".join(f"{v:.6g}" for v in values.values())
    _emit(args, values, text)
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    pairs = []
    gold_labels: list = []
    predicted_labels: list = []
    for _, record in curation.corpus.iter_jsonl(args.pairs):
        gold = record.get("gold", ())
        predicted = record.get("predicted", ())
        if isinstance(gold, list) and isinstance(predicted, list):
            pairs.append(metrics.LabelSetPair(gold=frozenset(gold), predicted=frozenset(predicted)))
        gold_labels.append(tuple(sorted(gold)) if isinstance(gold, list) else gold)
        predicted_labels.append(tuple(sorted(predicted)) if isinstance(predicted, list) else predicted)
    universe = (
        set(args.universe.split(","))
        if args.universe
        else {t for p in pairs for t in (p.gold | p.predicted)}
    )
    payload = {
        "macro_f1": metrics.macro_f1(pairs, universe),
        "accuracy": metrics.accuracy(predicted_labels, gold_labels),
        "universe_size": len(universe),
    }
    text = f"macro_f1={payload['macro_f1']:.6f}\naccuracy={payload['accuracy']:.6f}"
    _emit(args, payload, text)
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    samples = _load_tagged_samples(args.corpus)
    config = curation.SplitConfig(gamma=args.gamma, num_seeds=args.seeds)
    result = curation.split_heldout(samples, config)
    for path, side in ((args.out_valid, result.valid), (args.out_test, result.test)):
        if path is not None:
            with open(path, "w") as handle:
                for sample in side:
                    handle.write(json.dumps(sample.payload) + "\n")
    summary = result.summary
    text = (
        f"valid={summary['valid_size']} test={summary['test_size']} "
        f"mu={summary['mu']:.6f} seed={summary['seed']} retained={summary['retained_seeds']}"
    )
    _emit(args, summary, text)
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    samples = _load_tagged_samples(args.corpus)
    result = curation.search_params(samples, M=args.M, delta=args.delta)
    selection = curation.select_samples(samples, result.flow, rng_seed=args.seed)
    if args.out is not None:
        with open(args.out, "w") as handle:
            for sample in selection.samples:
                handle.write(json.dumps(sample.payload) + "\n")
    comparison = curation.compare_with_random_baseline(samples, list(selection.samples), rng_seed=args.seed)
    p = result.params
    payload = {
        "params": {"m_p": p.m_p, "m_t": p.m_t, "x_p": p.x_p, "x_t": p.x_t},
        "d": result.d,
        "total": result.total,
        "per_problem": {prob: result.flow.problem_count(prob) for prob in sorted({s.problem for s in samples})},
        "per_tag": selection.attributed_tag_counts(),
        "balance": comparison.summary,
    }
    text = (
        f"selected {result.total} sample(s) with (m_p={p.m_p}, m_t={p.m_t}, x_p={p.x_p}, x_t={p.x_t}), "
        f"d={result.d}\n"
        f"std selected={comparison.selected.std:.3f} vs random={comparison.random_baseline.std:.3f}"
    )
    _emit(args, payload, text)
    return 0


def cmd_apr_pairs(args: argparse.Namespace) -> int:
    submissions = []
    for lineno, record in curation.corpus.iter_jsonl(args.submissions):
        submissions.append(Submission.from_dict({**record, "code_uid": str(record.get("code_uid", lineno))}))
    pairs = curation.build_apr_pairs(submissions)
    with open(args.out, "w") as handle:
        for pair in pairs:
            handle.write(json.dumps(pair.to_dict()) + "\n")
    payload = {"pairs": len(pairs), "out": str(args.out)}
    _emit(args, payload, f"wrote {len(pairs)} bug-fix pair(s) to {args.out}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    samples = _load_tagged_samples(args.corpus)
    stats = curation.tag_stats(samples)
    payload = {"skew": stats.skew, "std": stats.std, "tags": dict(sorted(stats.counts.items()))}
    _emit(args, payload, f"tags={len(stats.counts)} skew={stats.skew:.6f} std={stats.std:.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Compile and run one program against unit tests; classify each run.

Verdict precedence: a budget kill is TIME_LIMIT_EXCEEDED before anything
else; memory-kill evidence is MEMORY_LIMIT_EXCEEDED; any other abnormal end
is RUNTIME_ERROR; only clean exits are judged WRONG_ANSWER / PASSED.
COMPILATION_ERROR is assigned exclusively by the compile stage, which runs
zero user processes on failure.
"""

from __future__ import annotations

import os
import shutil
import signal
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .model import ExecOutcome, ResourceLimits, SandboxSettings, TestVerdict, UnitTest
from .registry import RuntimeRegistry, RuntimeSpec, RuntimeUnavailableError
from .sandbox import ProcessJail, RawRun

DEFAULT_BASE_TIME_LIMIT = 5.0  # seconds, scaled by the runtime's timelimit_factor
COMPILE_WALL_BUDGET = 60.0

# compilers fork helpers and write artifacts; the judged-run table forbids both
COMPILE_LIMITS = ResourceLimits(
    core=0,
    data=-1,
    fsize=-1,
    sigpending=-1,
    rss=-1,
    nofile=256,
    msgqueue=0,
    rtprio=0,
    stack=-1,
    cpu=55,
    nproc=-1,
    address_space=-1,
    locks=-1,
)

#: peak RSS this close to the address-space cap counts as memory-kill evidence
MLE_PEAK_FRACTION = 0.9


@dataclass(frozen=True)
class ComparePolicy:
    """Token-wise output comparison with a float precision boundary."""

    mode: str = "token-wise"
    float_abs_tol: float = 1e-6
    float_rel_tol: float = 1e-6
    trim_trailing_whitespace: bool = True
    ignore_trailing_blank_lines: bool = True

    def __post_init__(self) -> None:
        if self.float_abs_tol < 0 or self.float_rel_tol < 0:
            raise ValueError("tolerances must be >= 0")


def _lines_for_compare(text: str, policy: ComparePolicy) -> list[list[str]]:
    lines = text.split("\n")
    if policy.ignore_trailing_blank_lines:
        blank = (lambda s: not s.strip()) if policy.trim_trailing_whitespace else (lambda s: s == "")
        while lines and blank(lines[-1]):
            lines.pop()
    if policy.trim_trailing_whitespace:
        lines = [line.rstrip() for line in lines]
    return [line.split() for line in lines]


def _is_float_token(token: str) -> bool:
    if "." not in token and "e" not in token and "E" not in token:
        return False
    try:
        float(token)
        return True
    except ValueError:
        return False


def _tokens_match(actual: str, expected: str, policy: ComparePolicy) -> bool:
    if actual == expected:
        return True
    if _is_float_token(expected):
        try:
            a, e = float(actual), float(expected)
        except ValueError:
            return False
        return abs(a - e) <= max(policy.float_abs_tol, policy.float_rel_tol * abs(e))
    return False


def compare_output(actual: str, expected: Sequence[str], policy: Optional[ComparePolicy] = None) -> bool:
    """True iff ``actual`` matches ANY accepted output under the policy.

    Both sides are split into lines, trailing blank lines dropped, per-line
    trailing whitespace trimmed, then compared token by token. A token pair
    compares numerically (within max(abs_tol, rel_tol*|expected|)) when the
    expected token looks like a float ('.' or exponent present), else
    byte-exact. Total function: never raises on any text input.
    """
    policy = policy or ComparePolicy()
    actual_tokens = _lines_for_compare(actual, policy)
    for candidate in expected:
        cand_tokens = _lines_for_compare(candidate, policy)
        if len(actual_tokens) != len(cand_tokens):
            continue
        ok = all(
            len(al) == len(cl) and all(_tokens_match(a, c, policy) for a, c in zip(al, cl))
            for al, cl in zip(actual_tokens, cand_tokens)
        )
        if ok:
            return True
    return False


def classify(raw: RawRun, settings: SandboxSettings, matched: Optional[bool] = None) -> ExecOutcome:
    """Map one raw run to its outcome; ``matched`` must be present iff the
    process exited normally (the caller compared its output)."""
    limits = settings.limits
    cpu_limit = limits.cpu

    if raw.timed_out:
        return ExecOutcome.TIME_LIMIT_EXCEEDED
    if raw.term_signal == signal.SIGXCPU:
        return ExecOutcome.TIME_LIMIT_EXCEEDED
    if cpu_limit != -1 and raw.cpu_time >= cpu_limit:
        return ExecOutcome.TIME_LIMIT_EXCEEDED

    if (
        limits.address_space != -1
        and raw.failed
        and raw.peak_memory is not None
        and raw.peak_memory >= MLE_PEAK_FRACTION * limits.address_space
    ):
        return ExecOutcome.MEMORY_LIMIT_EXCEEDED

    if raw.failed:
        return ExecOutcome.RUNTIME_ERROR

    if matched is None:
        raise ValueError("matched must be provided for a normally exited run")
    return ExecOutcome.PASSED if matched else ExecOutcome.WRONG_ANSWER


@dataclass(frozen=True)
class CompileResult:
    ok: bool
    diagnostics: str = ""
    exe_path: Optional[str] = None  # artifact handle; None for source-run runtimes


class SandboxExecutor:
    """One judging lane: a private workspace plus (when root) a private uid.

    Runs one job at a time; instances share no mutable state, so any number
    can run concurrently side by side.
    """

    SANDBOX_UID_BASE = 64000

    def __init__(
        self,
        registry: RuntimeRegistry,
        worker_id: int = 0,
        workspace_root: Optional[str] = None,
        base_time_limit: float = DEFAULT_BASE_TIME_LIMIT,
        compare_policy: Optional[ComparePolicy] = None,
        sandbox_uid: Optional[int] = None,
    ):
        self.registry = registry
        self.worker_id = worker_id
        self.base_time_limit = base_time_limit
        self.compare_policy = compare_policy or ComparePolicy()
        if sandbox_uid is None and os.geteuid() == 0:
            sandbox_uid = self.SANDBOX_UID_BASE + worker_id
        self._jail = ProcessJail(sandbox_uid=sandbox_uid)
        self._root = Path(workspace_root or tempfile.mkdtemp(prefix=f"polyjudge-w{worker_id}-"))
        self._root.mkdir(parents=True, exist_ok=True)
        # the dropped-uid child must be able to traverse into its job dir
        os.chmod(self._root, 0o711)

    # -- workspace lifecycle ------------------------------------------------------

    def _fresh_workspace(self) -> Path:
        ws = self._root / "job"
        if ws.exists():
            shutil.rmtree(ws, ignore_errors=True)
        ws.mkdir()
        os.chmod(ws, 0o755)
        if self._jail.sandbox_uid is not None and os.geteuid() == 0:
            os.chown(ws, self._jail.sandbox_uid, self._jail.sandbox_uid)
        return ws

    def close(self) -> None:
        shutil.rmtree(self._root, ignore_errors=True)

    # -- stages --------------------------------------------------------------------

    def compile(self, source: str, runtime: RuntimeSpec, workspace: Path) -> CompileResult:
        """Write the source and run the compile step (artifact build or syntax
        check). Runtimes without a compile command succeed trivially."""
        src = workspace / runtime.source_name()
        src.write_text(source)
        os.chmod(src, 0o644)
        exe = workspace / "prog"
        if self._jail.sandbox_uid is not None and os.geteuid() == 0:
            os.chown(src, self._jail.sandbox_uid, self._jail.sandbox_uid)
        if not runtime.has_compile_step:
            return CompileResult(ok=True, exe_path=None)

        argv = runtime.compile_argv(str(src), str(exe), str(workspace))
        env = self._jail._default_env(str(workspace))
        for key, value in runtime.env.items():
            env[key] = value.replace("{dir}", str(workspace))
        raw = self._jail.run(
            argv,
            cwd=str(workspace),
            wall_budget=COMPILE_WALL_BUDGET,
            limits=COMPILE_LIMITS,
            block_network=True,
            env=env,
        )
        if raw.failed or raw.timed_out:
            diagnostics = raw.stderr or raw.stdout or f"compile failed ({raw.exit_status})"
            return CompileResult(ok=False, diagnostics=diagnostics)
        exe_path = str(exe) if runtime.produces_artifact else None
        if exe_path and not os.path.exists(exe_path):
            return CompileResult(ok=False, diagnostics="compiler produced no artifact")
        return CompileResult(ok=True, exe_path=exe_path)

    def execute_one(
        self,
        workspace: Path,
        runtime: RuntimeSpec,
        test: UnitTest,
        settings: SandboxSettings,
        time_budget: float,
    ) -> RawRun:
        src = workspace / runtime.source_name()
        exe = workspace / "prog"
        argv = runtime.execute_argv(str(src), str(exe), str(workspace))
        limits = settings.effective_limits(runtime.limit_overrides)
        return self._jail.run(
            argv,
            stdin_data=test.input.encode(),
            cwd=str(workspace),
            wall_budget=time_budget,
            limits=limits,
            block_network=settings.block_network,
        )

    def judge(
        self,
        source: str,
        runtime_label: str,
        tests: Sequence[UnitTest],
        settings: Optional[SandboxSettings] = None,
        base_time_limit: Optional[float] = None,
    ) -> list[TestVerdict]:
        """Compile once, then run the tests in order.

        Under stop_at_first_fail the run halts after the first non-PASSED
        verdict (returned verdicts include it); otherwise every test gets a
        verdict. Compile failure marks every test COMPILATION_ERROR.
        """
        if not tests:
            raise ValueError("tests must be non-empty")
        settings = settings or SandboxSettings()
        runtime = self.registry.resolve(runtime_label)
        if not runtime.available:
            raise RuntimeUnavailableError(runtime.runtime_name)

        base = base_time_limit if base_time_limit is not None else self.base_time_limit
        budget = base * runtime.timelimit_factor
        workspace = self._fresh_workspace()
        try:
            compiled = self.compile(source, runtime, workspace)
            if not compiled.ok:
                return [
                    TestVerdict(ExecOutcome.COMPILATION_ERROR, t.input, t.output, compiled.diagnostics or None)
                    for t in tests
                ]

            classify_settings = SandboxSettings(limits=settings.effective_limits(runtime.limit_overrides))
            verdicts: list[TestVerdict] = []
            for test in tests:
                raw = self.execute_one(workspace, runtime, test, settings, budget)
                matched = (
                    compare_output(raw.stdout, test.output, self.compare_policy) if not raw.failed else None
                )
                outcome = classify(raw, classify_settings, matched)
                verdicts.append(TestVerdict(outcome, test.input, test.output, _result_text(raw, outcome)))
                if settings.stop_at_first_fail and outcome.is_buggy:
                    break
            return verdicts
        finally:
            shutil.rmtree(workspace, ignore_errors=True)


def _result_text(raw: RawRun, outcome: ExecOutcome) -> Optional[str]:
    """The response's result field: produced text, or the diagnostic trace for
    runtime errors; absent when the program produced nothing."""
    if outcome is ExecOutcome.RUNTIME_ERROR:
        return raw.stderr or raw.stdout or None
    text = raw.stdout
    if outcome in (ExecOutcome.PASSED, ExecOutcome.WRONG_ANSWER):
        text = text.rstrip("\n")
    return text or None

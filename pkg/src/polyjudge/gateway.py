"""HTTP front door: POST /api/execute_code and GET /api/all_runtimes.

Request/response bodies follow the engine's wire contract exactly:
execute_code answers {"data": [{exec_outcome, input, output, result}, ...]}
and all_runtimes answers a list of eight-field runtime objects. Unknown
request fields are rejected (400) to surface client typos; queue pressure
maps to 429 and sandbox-internal failures to 500.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Mapping, Optional, Sequence

from .executor import DEFAULT_BASE_TIME_LIMIT, COMPILE_WALL_BUDGET
from .model import ResourceLimits, SandboxSettings, TestVerdict, UnitTest, default_limits
from .registry import RuntimeRegistry, RuntimeUnavailableError, UnknownRuntimeError
from .scheduler import QueueFullError, WorkerPool

_REQUEST_FIELDS = {"language", "source_code", "unittests", "limits", "block_network", "stop_at_first_fail"}
_UNITTEST_FIELDS = {"input", "output"}
_LIMIT_FIELDS = set(default_limits().to_dict())


class RequestValidationError(ValueError):
    """Schema violation; the message names the offending field."""


@dataclass(frozen=True)
class ExecuteCodeRequest:
    """Wire-level judge job."""

    language: str
    source_code: str
    unittests: tuple[UnitTest, ...]
    limit_overrides: Optional[Mapping[str, int]] = None
    block_network: bool = True
    stop_at_first_fail: bool = True

    def settings(self) -> SandboxSettings:
        return SandboxSettings(
            block_network=self.block_network,
            stop_at_first_fail=self.stop_at_first_fail,
            limit_overrides=self.limit_overrides,
        )

    @classmethod
    def from_wire(cls, body: Any) -> "ExecuteCodeRequest":
        if not isinstance(body, dict):
            raise RequestValidationError("request body must be a JSON object")
        unknown = set(body) - _REQUEST_FIELDS
        if unknown:
            raise RequestValidationError(f"unknown field(s): {', '.join(sorted(unknown))}")
        for required in ("language", "source_code", "unittests"):
            if required not in body:
                raise RequestValidationError(f"missing required field: {required}")
        language = body["language"]
        if not isinstance(language, str) or not language:
            raise RequestValidationError("language must be a non-empty string")
        source = body["source_code"]
        if not isinstance(source, str):
            raise RequestValidationError("source_code must be a string")
        raw_tests = body["unittests"]
        if not isinstance(raw_tests, list) or not raw_tests:
            raise RequestValidationError("unittests must be a non-empty list")
        tests = []
        for i, entry in enumerate(raw_tests):
            if not isinstance(entry, dict) or set(entry) - _UNITTEST_FIELDS:
                raise RequestValidationError(f"unittests[{i}]: expected only fields input, output")
            if "input" not in entry or "output" not in entry:
                raise RequestValidationError(f"unittests[{i}]: missing input or output")
            if not isinstance(entry["output"], list) or not entry["output"]:
                raise RequestValidationError(f"unittests[{i}].output must be a non-empty list")
            tests.append(UnitTest(input=str(entry["input"]), output=tuple(str(o) for o in entry["output"])))
        overrides = body.get("limits")
        if overrides is not None:
            if not isinstance(overrides, dict):
                raise RequestValidationError("limits must be an object")
            bad = set(overrides) - _LIMIT_FIELDS
            if bad:
                raise RequestValidationError(f"limits: unknown field(s): {', '.join(sorted(bad))}")
            try:
                ResourceLimits.from_dict(overrides)
            except (TypeError, ValueError) as exc:
                raise RequestValidationError(f"limits: {exc}") from None
        for flag in ("block_network", "stop_at_first_fail"):
            if flag in body and not isinstance(body[flag], bool):
                raise RequestValidationError(f"{flag} must be a boolean")
        return cls(
            language=language,
            source_code=source,
            unittests=tuple(tests),
            limit_overrides=dict(overrides) if overrides else None,
            block_network=body.get("block_network", True),
            stop_at_first_fail=body.get("stop_at_first_fail", True),
        )


class GatewayService:
    """Protocol-level handlers, separable from the HTTP plumbing for tests."""

    def __init__(
        self,
        registry: RuntimeRegistry,
        pool: WorkerPool,
        base_time_limit: float = DEFAULT_BASE_TIME_LIMIT,
        grace_seconds: float = 15.0,
    ):
        self.registry = registry
        self.pool = pool
        self.base_time_limit = base_time_limit
        self.grace_seconds = grace_seconds

    def request_timeout(self, request: ExecuteCodeRequest) -> float:
        try:
            factor = self.registry.resolve(request.language).timelimit_factor
        except UnknownRuntimeError:
            factor = 1.0
        return self.base_time_limit * factor * len(request.unittests) + COMPILE_WALL_BUDGET + self.grace_seconds

    def handle_execute_code(self, body: Any) -> tuple[int, dict[str, Any]]:
        try:
            request = ExecuteCodeRequest.from_wire(body)
            self.registry.resolve(request.language)  # 400 on unknown labels before queueing
        except RequestValidationError as exc:
            return 400, {"error": str(exc)}
        except UnknownRuntimeError as exc:
            return 400, {"error": str(exc)}
        try:
            verdicts: Sequence[TestVerdict] = self.pool.submit_and_wait(
                request, timeout=self.request_timeout(request)
            )
        except QueueFullError as exc:
            return 429, {"error": str(exc)}
        except (UnknownRuntimeError, RuntimeUnavailableError) as exc:
            return 400, {"error": str(exc)}
        except Exception as exc:  # sandbox-setup and other internal failures
            return 500, {"error": f"{type(exc).__name__}: {exc}"}
        return 200, {"data": [v.to_wire() for v in verdicts]}

    def handle_all_runtimes(self) -> tuple[int, list[dict[str, Any]]]:
        return 200, self.registry.to_wire()


class _GatewayRequestHandler(BaseHTTPRequestHandler):
    service: GatewayService  # injected by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt: str, *args: Any) -> None:  # quiet by default
        pass

    def _send(self, status: int, payload: Any) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:
        if self.path.rstrip("/") == "/api/all_runtimes":
            status, payload = self.service.handle_all_runtimes()
            self._send(status, payload)
        else:
            self._send(404, {"error": f"no such endpoint: {self.path}"})

    def do_POST(self) -> None:
        if self.path.rstrip("/") != "/api/execute_code":
            self._send(404, {"error": f"no such endpoint: {self.path}"})
            return
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            body = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            self._send(400, {"error": f"invalid JSON body: {exc}"})
            return
        status, payload = self.service.handle_execute_code(body)
        self._send(status, payload)


def make_server(service: GatewayService, host: str = "127.0.0.1", port: int = 5000) -> ThreadingHTTPServer:
    handler = type("GatewayRequestHandler", (_GatewayRequestHandler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(service: GatewayService, host: str, port: int) -> ThreadingHTTPServer:
    """Start the gateway on a daemon thread; returns the live server."""
    server = make_server(service, host, port)
    thread = threading.Thread(target=server.serve_forever, daemon=True, name="gateway-http")
    thread.start()
    return server

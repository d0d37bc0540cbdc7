"""Runtime registry: maps runtime labels to compile/execute command templates.

A runtime object carries exactly the eight wire fields (compile_cmd,
compile_flags, execute_cmd, execute_flags, has_sanitizer, is_compiled,
runtime_name, timelimit_factor) plus local-only configuration: the language
cluster it belongs to, whether it is that cluster's default for evaluation,
source-file naming, extra environment, and per-runtime limit overrides
(nofile/nproc and friends are customized per language).

Command templates support {src}, {exe} and {dir} placeholders. Templates
without any placeholder are append-style: the source path (or the compiled
artifact for artifact-producing runtimes) is appended to the argv.
"""

from __future__ import annotations

import json
import shlex
import shutil
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

WIRE_FIELDS = (
    "compile_cmd",
    "compile_flags",
    "execute_cmd",
    "execute_flags",
    "has_sanitizer",
    "is_compiled",
    "runtime_name",
    "timelimit_factor",
)


class UnknownRuntimeError(LookupError):
    """Raised when a label matches neither a runtime name nor a cluster."""

    def __init__(self, label: str, clusters: Iterable[str]):
        self.label = label
        self.clusters = sorted(set(clusters))
        super().__init__(
            f"unknown runtime or language cluster {label!r}; "
            f"known clusters: {', '.join(self.clusters) or '(none)'}"
        )


class RuntimeUnavailableError(RuntimeError):
    """Raised when judging is requested on a runtime whose toolchain is missing."""

    def __init__(self, runtime_name: str):
        self.runtime_name = runtime_name
        super().__init__(f"runtime unavailable: {runtime_name!r}")


@dataclass(frozen=True)
class RuntimeSpec:
    runtime_name: str
    execute_cmd: str
    execute_flags: str = ""
    compile_cmd: str = ""  # empty: no compile step; non-artifact templates act as a syntax check
    compile_flags: str = ""
    is_compiled: bool = False
    has_sanitizer: bool = False  # stored and exposed; behavior intentionally inert
    timelimit_factor: float = 1.0
    cluster: str = ""
    cluster_default: bool = False
    source_filename: str = ""  # defaults to test.<ext by cluster>
    env: Mapping[str, str] = field(default_factory=dict)
    limit_overrides: Mapping[str, int] = field(default_factory=dict)
    available: bool = True

    def __post_init__(self) -> None:
        if self.timelimit_factor < 1:
            raise ValueError("timelimit_factor must be >= 1")
        object.__setattr__(self, "env", dict(self.env))
        object.__setattr__(self, "limit_overrides", dict(self.limit_overrides))

    def to_wire(self) -> dict[str, Any]:
        """Exactly the eight public fields, nothing else."""
        return {name: getattr(self, name) for name in WIRE_FIELDS}

    # -- command template handling -------------------------------------------------

    @property
    def produces_artifact(self) -> bool:
        template = " ".join((self.compile_cmd, self.compile_flags, self.execute_cmd, self.execute_flags))
        return "{exe}" in template

    @property
    def has_compile_step(self) -> bool:
        return bool(self.compile_cmd.strip())

    def source_name(self) -> str:
        if self.source_filename:
            return self.source_filename
        ext = _CLUSTER_EXT.get(self.cluster, "txt")
        return f"test.{ext}"

    def _render(self, cmd: str, flags: str, src: str, exe: str, workdir: str) -> tuple[list[str], bool]:
        tokens = shlex.split(cmd) + shlex.split(flags)
        substituted = False
        rendered = []
        for tok in tokens:
            if "{src}" in tok or "{exe}" in tok or "{dir}" in tok:
                substituted = True
            rendered.append(tok.replace("{src}", src).replace("{exe}", exe).replace("{dir}", workdir))
        return rendered, substituted

    def compile_argv(self, src: str, exe: str, workdir: str) -> list[str]:
        argv, substituted = self._render(self.compile_cmd, self.compile_flags, src, exe, workdir)
        if not substituted:
            argv.append(src)
            if self.produces_artifact:
                argv += ["-o", exe]
        return argv

    def execute_argv(self, src: str, exe: str, workdir: str) -> list[str]:
        argv, substituted = self._render(self.execute_cmd, self.execute_flags, src, exe, workdir)
        if not substituted:
            argv.append(exe if self.produces_artifact else src)
        return argv

    def probe_program(self) -> str:
        """The program whose presence decides availability."""
        argv = shlex.split(self.execute_cmd)
        if not argv or "{" in argv[0]:
            argv = shlex.split(self.compile_cmd)
        return argv[0] if argv else ""


_CLUSTER_EXT = {
    "C": "c",
    "C++": "cpp",
    "C#": "cs",
    "Go": "go",
    "Java": "java",
    "Javascript": "js",
    "Kotlin": "kt",
    "PHP": "php",
    "Python": "py",
    "Ruby": "rb",
    "Rust": "rs",
}


class RuntimeRegistry:
    """Insertion-ordered runtime store with cluster-default resolution.

    Reads take a consistent snapshot; run-time flag updates (reload) happen
    under a single writer lock, so workers never observe a half-applied
    configuration.
    """

    def __init__(self, specs: Iterable[RuntimeSpec] = ()):
        self._lock = threading.Lock()
        self._specs: dict[str, RuntimeSpec] = {}
        self._cluster_defaults: dict[str, str] = {}
        for spec in specs:
            self.register(spec)

    def register(self, spec: RuntimeSpec) -> None:
        with self._lock:
            self._specs[spec.runtime_name] = spec
            # first registration wins as implicit default; explicit marker overrides
            if spec.cluster and (spec.cluster_default or spec.cluster not in self._cluster_defaults):
                self._cluster_defaults[spec.cluster] = spec.runtime_name

    def resolve(self, label: str) -> RuntimeSpec:
        """Exact runtime label wins; otherwise the cluster's configured default."""
        with self._lock:
            if label in self._specs:
                return self._specs[label]
            default = self._cluster_defaults.get(label)
            if default is not None:
                return self._specs[default]
            raise UnknownRuntimeError(label, self._cluster_defaults)

    def list_runtimes(self) -> list[RuntimeSpec]:
        with self._lock:
            return list(self._specs.values())

    def clusters(self) -> list[str]:
        with self._lock:
            return sorted(self._cluster_defaults)

    def probe_availability(self) -> None:
        """Mark runtimes whose toolchain binary is missing as unavailable.

        A missing compiler never fails service boot; the runtime simply
        refuses jobs until the toolchain appears and the config is reloaded.
        """
        with self._lock:
            for name, spec in self._specs.items():
                program = spec.probe_program()
                available = bool(program) and shutil.which(program) is not None
                if spec.available != available:
                    self._specs[name] = _replace_available(spec, available)

    def reload(self, path: str | Path) -> None:
        """Swap in the config file atomically (hot reload, e.g. on SIGHUP)."""
        fresh = load_registry(path, probe=True)
        with self._lock:
            self._specs = fresh._specs
            self._cluster_defaults = fresh._cluster_defaults

    def to_wire(self) -> list[dict[str, Any]]:
        return [spec.to_wire() for spec in self.list_runtimes()]


def _replace_available(spec: RuntimeSpec, available: bool) -> RuntimeSpec:
    from dataclasses import replace

    return replace(spec, available=available)


def spec_from_config(entry: Mapping[str, Any]) -> RuntimeSpec:
    return RuntimeSpec(
        runtime_name=entry["runtime_name"],
        execute_cmd=entry.get("execute_cmd", ""),
        execute_flags=entry.get("execute_flags", ""),
        compile_cmd=entry.get("compile_cmd", ""),
        compile_flags=entry.get("compile_flags", ""),
        is_compiled=bool(entry.get("is_compiled", False)),
        has_sanitizer=bool(entry.get("has_sanitizer", False)),
        timelimit_factor=float(entry.get("timelimit_factor", 1)),
        cluster=entry.get("cluster", ""),
        cluster_default=bool(entry.get("cluster_default", False)),
        source_filename=entry.get("source_filename", ""),
        env=entry.get("env", {}),
        limit_overrides=entry.get("limits", {}),
    )


def load_registry(path: str | Path | None = None, probe: bool = True) -> RuntimeRegistry:
    """Build a registry from a JSON config file, or the built-in defaults."""
    if path is None:
        entries = DEFAULT_RUNTIMES
    else:
        document = json.loads(Path(path).read_text())
        entries = document["runtimes"] if isinstance(document, dict) else document
    registry = RuntimeRegistry(spec_from_config(e) for e in entries)
    if probe:
        registry.probe_availability()
    return registry


def dump_config(registry: RuntimeRegistry) -> dict[str, Any]:
    out = []
    for spec in registry.list_runtimes():
        entry = spec.to_wire()
        entry.update(
            cluster=spec.cluster,
            cluster_default=spec.cluster_default,
        )
        if spec.source_filename:
            entry["source_filename"] = spec.source_filename
        if spec.env:
            entry["env"] = dict(spec.env)
        if spec.limit_overrides:
            entry["limits"] = dict(spec.limit_overrides)
        out.append(entry)
    return {"runtimes": out}


# Built-in configuration: at least one runtime per supported language cluster.
# Cluster defaults follow the evaluation mapping (C -> GNU C11, Python -> PyPy 3,
# C++ -> GNU C++17, ...). Interpreted and VM runtimes get a 3x time-limit factor.
_RELAXED_VM_LIMITS = {"nofile": 64, "nproc": 64, "address_space": -1}

DEFAULT_RUNTIMES: list[dict[str, Any]] = [
    {
        "runtime_name": "GNU C11",
        "cluster": "C",
        "cluster_default": True,
        "is_compiled": True,
        "compile_cmd": "gcc",
        "compile_flags": "-std=c11 -O2 -w",
        "execute_cmd": "{exe}",
    },
    {
        "runtime_name": "GNU C",
        "cluster": "C",
        "is_compiled": True,
        "compile_cmd": "gcc",
        "compile_flags": "-O2 -w",
        "execute_cmd": "{exe}",
    },
    {
        "runtime_name": "GNU C++17",
        "cluster": "C++",
        "cluster_default": True,
        "is_compiled": True,
        "compile_cmd": "g++",
        "compile_flags": "-std=c++17 -O2 -w",
        "execute_cmd": "{exe}",
    },
    {
        "runtime_name": "GNU C++14",
        "cluster": "C++",
        "is_compiled": True,
        "compile_cmd": "g++",
        "compile_flags": "-std=c++14 -O2 -w",
        "execute_cmd": "{exe}",
    },
    {
        "runtime_name": "PyPy 3",
        "cluster": "Python",
        "cluster_default": True,
        "execute_cmd": "pypy3",
        "timelimit_factor": 3,
        "limits": {"nofile": 16},
    },
    {
        "runtime_name": "Python 3",
        "cluster": "Python",
        "execute_cmd": "python3",
        "execute_flags": "-S",
        "timelimit_factor": 3,
    },
    {
        "runtime_name": "Python 3 + libs",
        "cluster": "Python",
        "execute_cmd": "python3",
        "timelimit_factor": 3,
        "limits": {"nofile": 64, "nproc": 16},
    },
    {
        # Field-for-field the stock JavaScript runtime object: the compile
        # command is only a syntax check (node --check).
        "runtime_name": "JavaScript",
        "cluster": "Javascript",
        "is_compiled": True,
        "compile_cmd": "node",
        "compile_flags": "--check",
        "execute_cmd": "node",
        "execute_flags": "",
        "timelimit_factor": 3,
        "limits": dict(_RELAXED_VM_LIMITS),
    },
    {
        "runtime_name": "Node.js",
        "cluster": "Javascript",
        "cluster_default": True,
        "is_compiled": True,
        "compile_cmd": "node",
        "compile_flags": "--check",
        "execute_cmd": "node",
        "timelimit_factor": 3,
        "limits": dict(_RELAXED_VM_LIMITS),
    },
    {
        "runtime_name": "Ruby 3",
        "cluster": "Ruby",
        "cluster_default": True,
        "execute_cmd": "ruby",
        "timelimit_factor": 3,
        "limits": {"nofile": 16, "nproc": 16},
    },
    {
        "runtime_name": "Go",
        "cluster": "Go",
        "cluster_default": True,
        "is_compiled": True,
        "compile_cmd": "go",
        "compile_flags": "build -o {exe} {src}",
        "execute_cmd": "{exe}",
        "env": {"GOCACHE": "{dir}/.gocache", "GOFLAGS": "-mod=mod"},
        "limits": {"nproc": 16},
    },
    {
        "runtime_name": "Java 17",
        "cluster": "Java",
        "cluster_default": True,
        "is_compiled": True,
        "compile_cmd": "javac",
        "compile_flags": "",
        "execute_cmd": "java",
        "execute_flags": "-cp {dir} Main",
        "source_filename": "Main.java",
        "timelimit_factor": 3,
        "limits": dict(_RELAXED_VM_LIMITS),
    },
    {
        "runtime_name": "Mono C#",
        "cluster": "C#",
        "cluster_default": True,
        "is_compiled": True,
        "compile_cmd": "mcs",
        "compile_flags": "-out:{exe} {src}",
        "execute_cmd": "mono",
        "execute_flags": "{exe}",
        "timelimit_factor": 3,
        "limits": dict(_RELAXED_VM_LIMITS),
    },
    {
        "runtime_name": "PHP",
        "cluster": "PHP",
        "cluster_default": True,
        "execute_cmd": "php",
        "timelimit_factor": 3,
        "limits": {"nofile": 16},
    },
    {
        "runtime_name": "Rust 2018",
        "cluster": "Rust",
        "cluster_default": True,
        "is_compiled": True,
        "compile_cmd": "rustc",
        "compile_flags": "--edition 2018 -O -o {exe} {src}",
        "execute_cmd": "{exe}",
    },
    {
        "runtime_name": "Kotlin 1.4",
        "cluster": "Kotlin",
        "cluster_default": True,
        "is_compiled": True,
        "compile_cmd": "kotlinc",
        "compile_flags": "{src} -include-runtime -d {exe}",
        "execute_cmd": "java",
        "execute_flags": "-jar {exe}",
        "timelimit_factor": 3,
        "limits": dict(_RELAXED_VM_LIMITS),
    },
]

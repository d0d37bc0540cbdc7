"""Process jail: run one command under resource limits with network blocked.

The child is forked, moved into its own session, stripped down (rlimits,
optional privilege drop to an unprivileged uid, seccomp filter that makes
socket creation fail with EPERM), and exec'd with stdin wired to the test
input. The parent pumps the pipes with a wall-clock deadline, kills the whole
process group on expiry, and collects exit status plus rusage via wait4.

Constraints that shaped this file:
  * rusage (cpu time, peak RSS) is only available through os.wait4, which
    subprocess does not expose - hence the hand-rolled fork/exec.
  * RLIMIT_CPU is applied as (soft=cpu, hard=cpu+1) so the kernel delivers
    SIGXCPU at the budget - an unambiguous CPU-kill marker for verdicts.
  * A CLOEXEC status pipe distinguishes sandbox-setup failures (internal
    errors) from failures of the judged program itself.
"""

from __future__ import annotations

import ctypes
import errno
import os
import resource
import selectors
import shutil
import signal
import struct
import time
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .model import ResourceLimits

OUTPUT_CAP = 1024 * 1024  # per-stream capture cap, bytes
TRUNCATION_MARKER = "**Truncated**"

_CLONE_NEWNET = 0x40000000
_PR_SET_NO_NEW_PRIVS = 38
_PR_SET_SECCOMP = 22
_SECCOMP_MODE_FILTER = 2

# audit arch constant and the socket-family syscall numbers per machine
_SECCOMP_ARCH = {
    "x86_64": (0xC000003E, (41, 53)),  # socket, socketpair
    "aarch64": (0xC00000B7, (198, 199)),
}


class SandboxSetupError(RuntimeError):
    """The jail itself could not be established (never an exec outcome)."""


_libc = ctypes.CDLL(None, use_errno=True)


def _build_seccomp_program() -> Optional[tuple[ctypes.Array, "ctypes.Structure"]]:
    """BPF filter: kill on foreign-arch syscalls, EPERM on socket/socketpair,
    allow everything else. Returns None on unsupported machines."""
    entry = _SECCOMP_ARCH.get(os.uname().machine)
    if entry is None:
        return None
    arch, blocked = entry

    def ins(code: int, jt: int, jf: int, k: int) -> bytes:
        return struct.pack("HBBI", code, jt, jf, k & 0xFFFFFFFF)

    bpf = [
        ins(0x20, 0, 0, 4),  # A <- seccomp_data.arch
        ins(0x15, 1, 0, arch),  # native? skip the kill
        ins(0x06, 0, 0, 0x00000000),  # SECCOMP_RET_KILL
        ins(0x20, 0, 0, 0),  # A <- syscall nr
    ]
    for i, nr in enumerate(blocked):
        bpf.append(ins(0x15, len(blocked) - i, 0, nr))
    bpf.append(ins(0x06, 0, 0, 0x7FFF0000))  # SECCOMP_RET_ALLOW
    bpf.append(ins(0x06, 0, 0, 0x00050000 | errno.EPERM))  # SECCOMP_RET_ERRNO

    raw = b"".join(bpf)
    buf = ctypes.create_string_buffer(raw, len(raw))

    class SockFprog(ctypes.Structure):
        _fields_ = [("len", ctypes.c_ushort), ("filter", ctypes.c_void_p)]

    prog = SockFprog(len(bpf), ctypes.cast(buf, ctypes.c_void_p))
    return buf, prog


# memory-sizing limits are special: the forked child still carries the (possibly
# large) parent address space, so they must only take effect at the execve
# boundary, not while the pre-exec setup code runs. They are applied last,
# through raw prebuilt libc calls that allocate nothing.
_MEMORY_LIMIT_FIELDS = ("data", "stack", "address_space")

_RLIMIT_MAP = {
    "core": resource.RLIMIT_CORE,
    "data": resource.RLIMIT_DATA,
    "fsize": resource.RLIMIT_FSIZE,
    "sigpending": resource.RLIMIT_SIGPENDING,
    "rss": resource.RLIMIT_RSS,
    "nofile": resource.RLIMIT_NOFILE,
    "msgqueue": resource.RLIMIT_MSGQUEUE,
    "rtprio": resource.RLIMIT_RTPRIO,
    "stack": resource.RLIMIT_STACK,
    "nproc": resource.RLIMIT_NPROC,
    "address_space": resource.RLIMIT_AS,
    "locks": getattr(resource, "RLIMIT_LOCKS", 10),  # not wrapped by CPython; 10 on Linux
}

_RLIM_INFINITY64 = 0xFFFFFFFFFFFFFFFF


class _RLimit64(ctypes.Structure):
    _fields_ = [("rlim_cur", ctypes.c_uint64), ("rlim_max", ctypes.c_uint64)]


def _apply_soft_rlimits(limits: ResourceLimits) -> None:
    """Everything except the memory-sizing limits (those go via _MemoryLimits)."""
    # cpu gets a +1s hard ceiling so SIGXCPU fires at the soft budget first
    if limits.cpu != -1:
        _set_limit(resource.RLIMIT_CPU, limits.cpu, limits.cpu + 1)
    for name, res_id in _RLIMIT_MAP.items():
        if name in _MEMORY_LIMIT_FIELDS:
            continue
        value = getattr(limits, name)
        if value == -1:
            _set_limit(res_id, resource.RLIM_INFINITY, resource.RLIM_INFINITY)
        else:
            _set_limit(res_id, value, value)


def _set_limit(res_id: int, soft: int, hard: int) -> None:
    # without CAP_SYS_RESOURCE the hard limit can only go down; clamp instead
    # of failing so the jail still applies when not running as root
    try:
        resource.setrlimit(res_id, (soft, hard))
    except (ValueError, PermissionError, OSError):
        _, cur_hard = resource.getrlimit(res_id)
        capped = cur_hard if cur_hard != resource.RLIM_INFINITY else hard
        soft_capped = min(soft, capped) if soft != resource.RLIM_INFINITY else capped
        try:
            resource.setrlimit(res_id, (soft_capped, capped))
        except (ValueError, PermissionError, OSError):
            pass  # keep inherited limit; judged code still runs jailed otherwise


class _MemoryLimits:
    """Prebuilt setrlimit arguments for data/stack/address-space.

    Built in the parent so the child applies them with two allocation-free
    libc calls per limit right before execve (libc return codes are cached
    small ints, so nothing has to be allocated under an exhausted limit).
    """

    def __init__(self, limits: ResourceLimits, allow_raise: bool):
        self.calls: list[tuple[int, ctypes.Structure, object]] = []
        for name in _MEMORY_LIMIT_FIELDS:
            value = getattr(limits, name)
            res_id = _RLIMIT_MAP[name]
            target = _RLIM_INFINITY64 if value == -1 else int(value)
            if allow_raise:
                struct_ = _RLimit64(target, target)
            else:
                _, hard = resource.getrlimit(res_id)
                hard64 = _RLIM_INFINITY64 if hard == resource.RLIM_INFINITY else int(hard)
                struct_ = _RLimit64(min(target, hard64), hard64)
            self.calls.append((res_id, struct_, ctypes.byref(struct_)))

    def apply_in_child(self) -> int:
        """Returns 0 when every limit stuck. Runs post-fork: must not allocate
        beyond ctypes' cached-int results."""
        rc = 0
        for res_id, _struct, ref in self.calls:
            rc |= _libc.setrlimit(res_id, ref)
        return rc


@dataclass(frozen=True)
class RawRun:
    """Observable facts about one jailed run; input to verdict classification."""

    exit_code: Optional[int]  # None when killed by a signal
    term_signal: Optional[int]
    stdout: str
    stderr: str
    cpu_time: float  # seconds, utime+stime from rusage
    wall_time: float  # seconds, >= 0
    peak_memory: Optional[int]  # bytes (max RSS), None if unknown
    timed_out: bool  # killed by the wall-clock budget

    @property
    def exit_status(self) -> str:
        if self.term_signal is not None:
            try:
                return f"signal:{signal.Signals(self.term_signal).name}"
            except ValueError:
                return f"signal:{self.term_signal}"
        return str(self.exit_code)

    @property
    def failed(self) -> bool:
        return self.term_signal is not None or self.exit_code != 0


class ProcessJail:
    """Executes argv under a fixed jail configuration.

    One jail per worker; each worker gets its own unprivileged uid so that
    per-user limits (nproc above all) cannot interfere across workers.
    """

    def __init__(self, sandbox_uid: Optional[int] = None):
        self.sandbox_uid = sandbox_uid
        built = _build_seccomp_program()
        self._seccomp_buf = built[0] if built else None
        self._seccomp_prog = built[1] if built else None
        self._max_fd = min(os.sysconf("SC_OPEN_MAX"), 4096)

    def run(
        self,
        argv: Sequence[str],
        *,
        stdin_data: bytes = b"",
        cwd: str,
        wall_budget: float,
        limits: ResourceLimits,
        block_network: bool = True,
        env: Optional[Mapping[str, str]] = None,
    ) -> RawRun:
        if not argv:
            raise SandboxSetupError("empty argv")
        exe = self._which(argv[0])
        environment = dict(env) if env else self._default_env(cwd)

        # Everything the child needs after the memory limits drop is prebuilt
        # here: the forked child still holds this process's (potentially huge)
        # address space, so once RLIMIT_AS is capped, no Python object may be
        # allocated until execve replaces the image. libc return codes are
        # cached small ints, so the final calls below allocate nothing.
        exe_bytes = os.fsencode(exe)
        argv_arr = (ctypes.c_char_p * (len(argv) + 1))(*[os.fsencode(a) for a in argv], None)
        env_arr = (ctypes.c_char_p * (len(environment) + 1))(
            *[os.fsencode(f"{k}={v}") for k, v in environment.items()], None
        )
        memory_limits = _MemoryLimits(limits, allow_raise=os.geteuid() == 0)
        memlimit_failed_msg = b"could not apply memory limits"
        exec_failed_msg = b"execve failed for " + exe_bytes

        in_r, in_w = os.pipe()
        out_r, out_w = os.pipe()
        err_r, err_w = os.pipe()
        status_r, status_w = os.pipe()
        os.set_inheritable(status_w, False)  # CLOEXEC: silently gone on success

        drop_uid = self.sandbox_uid if (self.sandbox_uid is not None and os.geteuid() == 0) else None
        seccomp_ref = ctypes.byref(self._seccomp_prog) if self._seccomp_prog is not None else None

        pid = os.fork()
        if pid == 0:
            try:
                os.dup2(in_r, 0)
                os.dup2(out_w, 1)
                os.dup2(err_w, 2)
                os.closerange(3, status_w)
                os.closerange(status_w + 1, self._max_fd)
                os.setsid()
                os.chdir(cwd)
                os.umask(0o077)
                _apply_soft_rlimits(limits)
                if drop_uid is not None:
                    os.setgroups([])
                    os.setgid(drop_uid)
                    os.setuid(drop_uid)
                _libc.prctl(_PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0)
                if block_network:
                    self._block_network_in_child(seccomp_ref)
                # point of no return: no allocation beyond this line
                if memory_limits.apply_in_child() != 0:
                    os.write(status_w, memlimit_failed_msg)
                    os._exit(127)
                _libc.execve(exe_bytes, argv_arr, env_arr)
                os.write(status_w, exec_failed_msg)
                os._exit(127)
            except BaseException as exc:  # pragma: no cover - runs post-fork
                try:
                    os.write(status_w, f"{type(exc).__name__}: {exc}".encode()[:4096])
                finally:
                    os._exit(127)

        for fd in (in_r, out_w, err_w, status_w):
            os.close(fd)
        # exactly-once close bookkeeping: fd numbers are recycled process-wide,
        # so a stale second close here could destroy another thread's socket
        open_fds = {in_w, out_r, err_r, status_r}

        def close_fd(fd: int) -> None:
            if fd in open_fds:
                open_fds.remove(fd)
                os.close(fd)

        try:
            return self._supervise(pid, in_w, out_r, err_r, status_r, stdin_data, wall_budget, close_fd)
        finally:
            for fd in list(open_fds):
                close_fd(fd)

    def _block_network_in_child(self, seccomp_ref) -> None:
        if seccomp_ref is not None:
            if _libc.prctl(_PR_SET_SECCOMP, _SECCOMP_MODE_FILTER, seccomp_ref, 0, 0) == 0:
                return
        # seccomp unavailable: an empty network namespace blocks traffic too
        if _libc.unshare(_CLONE_NEWNET) != 0:
            raise SandboxSetupError("cannot block network: seccomp and netns both failed")

    def _supervise(
        self,
        pid: int,
        in_w: int,
        out_r: int,
        err_r: int,
        status_r: int,
        stdin_data: bytes,
        wall_budget: float,
        close_fd,
    ) -> RawRun:
        start = time.monotonic()
        sel = selectors.DefaultSelector()
        for fd in (in_w, out_r, err_r):
            os.set_blocking(fd, False)
        if stdin_data:
            sel.register(in_w, selectors.EVENT_WRITE)
        else:
            close_fd(in_w)
        sel.register(out_r, selectors.EVENT_READ)
        sel.register(err_r, selectors.EVENT_READ)

        chunks: dict[int, list[bytes]] = {out_r: [], err_r: []}
        sizes = {out_r: 0, err_r: 0}
        truncated = {out_r: False, err_r: False}
        pending = stdin_data
        timed_out = False

        while sel.get_map():
            remaining = wall_budget - (time.monotonic() - start)
            if remaining <= 0 and not timed_out:
                timed_out = True
                self._kill_group(pid)
            timeout = 0.05 if timed_out else max(0.01, min(remaining, 0.25))
            for key, _ in sel.select(timeout=timeout):
                fd = key.fd
                if fd == in_w:
                    try:
                        written = os.write(fd, pending[:65536])
                        pending = pending[written:]
                    except (BrokenPipeError, BlockingIOError, OSError):
                        pending = b""
                    if not pending:
                        sel.unregister(fd)
                        close_fd(fd)
                else:
                    try:
                        chunk = os.read(fd, 65536)
                    except OSError:
                        chunk = b""
                    if chunk:
                        if sizes[fd] < OUTPUT_CAP:
                            keep = chunk[: OUTPUT_CAP - sizes[fd]]
                            chunks[fd].append(keep)
                            if len(keep) < len(chunk):
                                truncated[fd] = True
                        else:
                            truncated[fd] = True
                        sizes[fd] += len(chunk)
                    else:
                        sel.unregister(fd)
                        close_fd(fd)
            if timed_out and time.monotonic() - start > wall_budget + 5.0:
                break  # pipes held open by an orphan; give up draining

        _, status, rusage = os.wait4(pid, 0)
        self._kill_group(pid)  # reap stragglers left in the session
        wall_time = time.monotonic() - start

        setup_error = os.read(status_r, 4096)
        if setup_error:
            raise SandboxSetupError(setup_error.decode(errors="replace"))

        def decode(fd: int) -> str:
            text = b"".join(chunks[fd]).decode(errors="replace")
            if truncated[fd]:
                text += f"\n{TRUNCATION_MARKER}"
            return text

        return RawRun(
            exit_code=os.WEXITSTATUS(status) if os.WIFEXITED(status) else None,
            term_signal=os.WTERMSIG(status) if os.WIFSIGNALED(status) else None,
            stdout=decode(out_r),
            stderr=decode(err_r),
            cpu_time=rusage.ru_utime + rusage.ru_stime,
            wall_time=wall_time,
            peak_memory=rusage.ru_maxrss * 1024 if rusage.ru_maxrss else None,
            timed_out=timed_out,
        )

    @staticmethod
    def _kill_group(pid: int) -> None:
        try:
            os.killpg(pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            pass

    @staticmethod
    def _which(program: str) -> str:
        if os.path.sep in program:
            return program
        found = shutil.which(program)
        if found is None:
            raise SandboxSetupError(f"program not found: {program!r}")
        return found

    @staticmethod
    def _default_env(cwd: str) -> dict[str, str]:
        return {
            "PATH": "/usr/local/bin:/usr/bin:/bin",
            "HOME": cwd,
            "TMPDIR": cwd,
            "LANG": "C.UTF-8",
            "LC_ALL": "C.UTF-8",
        }

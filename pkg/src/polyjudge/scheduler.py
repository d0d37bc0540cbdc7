"""Fixed worker pool with a bounded FIFO queue.

The pool is the only concurrency hub: submissions arrive from any thread,
each job runs on exactly one worker, and every submitted job ends in exactly
one of {completed, rejected, cancelled}. Pool size is fixed at startup
(NUM_WORKERS); there is no autoscaling.
"""

from __future__ import annotations

import itertools
import os
import queue
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

DEFAULT_QUEUE_SIZE = 1024


class QueueFullError(RuntimeError):
    """Submission rejected: the bounded queue is at capacity."""


class JobCancelledError(RuntimeError):
    """The job was still queued when the pool shut down without draining."""


def workers_from_env(default: int = 2) -> int:
    value = os.environ.get("NUM_WORKERS", "").strip()
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            pass
    return default


@dataclass
class JobTicket:
    """Completion handle for one submitted job."""

    job_id: int
    enqueue_time: float
    request: Any
    _done: threading.Event = field(default_factory=threading.Event, repr=False)
    _result: Any = field(default=None, repr=False)
    _error: Optional[BaseException] = field(default=None, repr=False)

    def _complete(self, result: Any = None, error: Optional[BaseException] = None) -> None:
        self._result = result
        self._error = error
        self._done.set()

    def wait(self, timeout: Optional[float] = None) -> Any:
        if not self._done.wait(timeout):
            raise TimeoutError(f"job {self.job_id} did not finish within {timeout}s")
        if self._error is not None:
            raise self._error
        return self._result


class WorkerPool:
    """num_workers sequential workers pulling from one bounded FIFO queue."""

    def __init__(
        self,
        run_job: Callable[[Any], Any],
        num_workers: Optional[int] = None,
        queue_size: int = DEFAULT_QUEUE_SIZE,
        worker_factory: Optional[Callable[[int], Callable[[Any], Any]]] = None,
    ):
        """``run_job`` handles a request on whichever worker picks it up;
        ``worker_factory(worker_id)`` instead gives each worker its own handler
        (used to bind per-worker executors with distinct uids/workspaces)."""
        self.num_workers = num_workers if num_workers is not None else workers_from_env()
        if self.num_workers < 1:
            raise ValueError("num_workers must be >= 1")
        self._queue: queue.Queue = queue.Queue(maxsize=queue_size)
        self._handlers = [
            worker_factory(i) if worker_factory is not None else run_job for i in range(self.num_workers)
        ]
        self._threads: list[threading.Thread] = []
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._started = False
        self._shutdown = False

    def start(self) -> "WorkerPool":
        with self._lock:
            if self._started or self._shutdown:
                return self
            self._started = True
            for i in range(self.num_workers):
                t = threading.Thread(target=self._worker_loop, args=(i,), daemon=True, name=f"judge-worker-{i}")
                t.start()
                self._threads.append(t)
        return self

    def _worker_loop(self, worker_id: int) -> None:
        handler = self._handlers[worker_id]
        while True:
            item = self._queue.get()
            if item is None:
                self._queue.task_done()
                return
            ticket: JobTicket = item
            try:
                ticket._complete(result=handler(ticket.request))
            except BaseException as exc:
                ticket._complete(error=exc)
            finally:
                self._queue.task_done()

    def submit(self, request: Any) -> JobTicket:
        ticket = JobTicket(job_id=next(self._ids), enqueue_time=time.time(), request=request)
        # enqueue under the pool lock so a concurrent shutdown either sees the
        # ticket (drains or cancels it) or rejects this submission; nothing can
        # slip in behind the worker sentinels and be lost
        with self._lock:
            if self._shutdown:
                raise JobCancelledError("pool is shut down")
            try:
                self._queue.put_nowait(ticket)
            except queue.Full:
                raise QueueFullError(f"job queue full ({self._queue.maxsize} pending)") from None
        self.start()
        return ticket

    def submit_and_wait(self, request: Any, timeout: Optional[float] = None) -> Any:
        return self.submit(request).wait(timeout)

    def shutdown(self, drain: bool = True) -> None:
        """drain=True finishes queued jobs first; drain=False cancels them.

        Idempotent: a second call is a no-op. Running jobs always finish.
        """
        with self._lock:
            if self._shutdown:
                return
            self._shutdown = True
            started = self._started
            if not drain:
                while True:
                    try:
                        item = self._queue.get_nowait()
                    except queue.Empty:
                        break
                    if item is not None:
                        item._complete(error=JobCancelledError(f"job {item.job_id} cancelled by shutdown"))
                    self._queue.task_done()
            if started:
                for _ in self._threads:
                    self._queue.put(None)
        if started:
            for t in self._threads:
                t.join()

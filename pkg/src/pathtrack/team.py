"""Persistent worker team with barrier-separated stages.

Worker 0 is the calling thread and acts as coordinator; workers ``1..p-1``
are threads created once and kept until :meth:`WorkerTeam.close`.  Every
worker calls :meth:`WorkerTeam.sync` at each stage boundary.  An optional
*action* passed by the coordinator runs exactly once after all workers have
arrived and before any is released, which is where coordinator-only writes
(pivot selection, residual test, solution update) happen.
"""
from __future__ import annotations

import queue
import threading
from collections import Counter
from typing import Any, Callable, Optional


class WorkerTeam:
    def __init__(self, p: int = 1):
        if int(p) != p or p < 1:
            raise ValueError(f"worker count must be a positive integer, got {p!r}")
        self.p = int(p)
        self.threads_started = 0
        self.runs = 0
        self.crossings: Counter[str] = Counter()
        self._pending: Optional[Callable[[], Any]] = None
        self._pending_stage: Optional[str] = None
        self._closed = False
        self._barrier = threading.Barrier(self.p, action=self._on_release) if self.p > 1 else None
        self._inbox: list[queue.SimpleQueue] = []
        self._outbox: queue.SimpleQueue = queue.SimpleQueue()
        self._threads: list[threading.Thread] = []
        for wid in range(1, self.p):
            q: queue.SimpleQueue = queue.SimpleQueue()
            th = threading.Thread(target=self._serve, args=(wid, q), name=f"worker-{wid}", daemon=True)
            self._inbox.append(q)
            self._threads.append(th)
            try:
                th.start()
            except RuntimeError as exc:
                self.close()
                raise RuntimeError(f"could not start worker {wid} of {self.p}") from exc
            self.threads_started += 1

    # lifecycle

    def __enter__(self) -> "WorkerTeam":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        for q in self._inbox:
            q.put(None)
        for th in self._threads:
            if th.is_alive():
                th.join()

    def _serve(self, wid: int, inbox: queue.SimpleQueue) -> None:
        while True:
            fn = inbox.get()
            if fn is None:
                return
            try:
                fn(wid)
            except BaseException as exc:  # reported to the caller of run()
                self._barrier.abort()
                self._outbox.put(exc)
            else:
                self._outbox.put(None)

    # execution

    def run(self, fn: Callable[[int], Any]) -> Any:
        """Run ``fn(wid)`` on every worker; returns the coordinator's result."""
        if self._closed:
            raise RuntimeError("worker team is closed")
        self.runs += 1
        if self.p == 1:
            return fn(0)
        for q in self._inbox:
            q.put(fn)
        result, error = None, None
        try:
            result = fn(0)
        except BaseException as exc:
            self._barrier.abort()
            error = exc
        for _ in self._inbox:
            exc = self._outbox.get()
            if exc is not None and (error is None or isinstance(error, threading.BrokenBarrierError)):
                error = exc
        if error is not None:
            self._barrier.reset()
            self._pending = None
            raise error
        return result

    def sync(self, wid: int, action: Optional[Callable[[], Any]] = None, stage: str = "") -> None:
        """Stage boundary.  Only the coordinator's ``action`` is honoured."""
        if wid == 0:
            self._pending = action
            self._pending_stage = stage
        if self._barrier is None:
            self._on_release()
        else:
            self._barrier.wait()

    def _on_release(self) -> None:
        action, self._pending = self._pending, None
        self.crossings[self._pending_stage or ""] += 1
        if action is not None:
            action()

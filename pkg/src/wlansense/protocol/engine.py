"""Single-threaded discrete-event engine driving generator processes.

A process is a generator that yields nonnegative integer delays in ns. The
queue orders resumptions by time, then by insertion order.
"""
from __future__ import annotations

import heapq
import itertools


class Engine:
    def __init__(self, start_ns: int = 0):
        self.now = int(start_ns)
        self._queue = []
        self._seq = itertools.count()

    def spawn(self, proc, at: int | None = None) -> None:
        t = self.now if at is None else int(at)
        if t < self.now:
            raise ValueError("cannot schedule into the past")
        heapq.heappush(self._queue, (t, next(self._seq), proc))

    def step(self) -> bool:
        if not self._queue:
            return False
        t, _, proc = heapq.heappop(self._queue)
        self.now = t
        try:
            delay = next(proc)
        except StopIteration:
            return True
        if not isinstance(delay, int) or delay < 0:
            raise ValueError(f"process yielded a bad delay {delay!r}")
        heapq.heappush(self._queue, (t + delay, next(self._seq), proc))
        return True

    def run(self, until: int | None = None) -> None:
        while self._queue and (until is None or self._queue[0][0] <= until):
            self.step()

    @property
    def idle(self) -> bool:
        return not self._queue

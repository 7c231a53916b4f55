"""Per-stage wall-clock accounting, switched on by the CLI's ``--stats``."""
from __future__ import annotations

import time
from collections import defaultdict
from contextlib import contextmanager
from contextvars import ContextVar

_current: ContextVar = ContextVar("arca_timers", default=None)


class Timers:
    def __init__(self):
        self.seconds = defaultdict(float)
        self.calls = defaultdict(int)

    def report(self) -> dict:
        return {k: {"ms": round(v * 1000, 3), "calls": self.calls[k]}
                for k, v in sorted(self.seconds.items())}


@contextmanager
def recording():
    t = Timers()
    token = _current.set(t)
    try:
        yield t
    finally:
        _current.reset(token)


@contextmanager
def stage(name: str):
    t = _current.get()
    if t is None:
        yield
        return
    start = time.perf_counter()
    try:
        yield
    finally:
        t.seconds[name] += time.perf_counter() - start
        t.calls[name] += 1

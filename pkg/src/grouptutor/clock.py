"""Clock abstraction: real wall time for deployments, a manually
advanced virtual clock for deterministic simulation and tests."""

from __future__ import annotations

import time


class RealClock:
    def now_ms(self) -> int:
        return int(time.time() * 1000)


class VirtualClock:
    def __init__(self, start_ms: int = 0):
        self._now = start_ms

    def now_ms(self) -> int:
        return self._now

    def advance_to(self, at_ms: int) -> None:
        if at_ms < self._now:
            raise ValueError(f"virtual clock cannot go backwards ({at_ms} < {self._now})")
        self._now = at_ms

    def advance(self, delta_ms: int) -> None:
        self.advance_to(self._now + delta_ms)

"""Simulated time base shared by the device-side components.

All timestamps are integer nanoseconds. The single-threaded event loop owns
one Clock instance; components advance it by the cost of each operation, so
a run is deterministic for a fixed (seed, input trace) pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Clock:
    now_ns: int = 0

    def advance(self, cost_ns: int) -> int:
        if cost_ns < 0:
            raise ValueError("time cannot move backwards")
        self.now_ns += int(cost_ns)
        return self.now_ns


@dataclass
class EventLog:
    """Append-only log of (time_ns, kind, payload) tuples."""

    events: list = field(default_factory=list)

    def record(self, time_ns: int, kind: str, payload) -> None:
        self.events.append((int(time_ns), kind, payload))

    def of_kind(self, kind: str) -> list:
        return [e for e in self.events if e[1] == kind]

    def __len__(self) -> int:
        return len(self.events)

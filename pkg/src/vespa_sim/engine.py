"""Event kernel: femtosecond time base, ordered event queue, seeded streams."""

from __future__ import annotations

import heapq
import zlib
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

FS_PER_S = 10**15
U64_MAX = 2**64 - 1

#: Default bound on consecutive events executed at one instant.
DEFAULT_LIVELOCK_BOUND = 1_000_000


class SimTimeOverflow(OverflowError):
    """A time value does not fit the unsigned 64-bit femtosecond range."""


class SchedulingError(RuntimeError):
    """An event was scheduled before the current simulation time."""


class LivelockError(RuntimeError):
    """Too many zero-delay events executed at one simulated instant."""


def cycle_edge_time(freq_hz: int, n: int) -> int:
    """Time in fs of rising edge ``n`` of a clock starting at t=0.

    The value is recomputed from the cycle index, rounded half-up, so
    repeated calls never accumulate drift.
    """
    if freq_hz <= 0:
        raise ValueError(f"frequency must be positive, got {freq_hz}")
    if n < 0:
        raise ValueError(f"cycle index must be non-negative, got {n}")
    t = (2 * n * FS_PER_S + freq_hz) // (2 * freq_hz)
    if t > U64_MAX:
        raise SimTimeOverflow(f"edge {n} at {freq_hz} Hz exceeds 64-bit fs range")
    return t


def format_time(t: int) -> str:
    for unit, scale in (("s", FS_PER_S), ("ms", 10**12), ("us", 10**9), ("ns", 10**6)):
        if t >= scale:
            return f"{t / scale:g} {unit}"
    return f"{t} fs"


_UNITS = {"fs": 1, "ps": 10**3, "ns": 10**6, "us": 10**9, "ms": 10**12, "s": FS_PER_S}


def parse_time(value: int | float | str) -> int:
    """Parse ``"10ms"``-style strings (or a bare fs count) into femtoseconds."""
    if isinstance(value, bool):
        raise ValueError(f"not a time value: {value!r}")
    if isinstance(value, int):
        t = value
    elif isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"bare time values are femtoseconds and must be integral: {value}")
        t = int(value)
    else:
        text = value.strip().lower().replace(" ", "")
        for unit in sorted(_UNITS, key=len, reverse=True):
            if text.endswith(unit):
                number = text[: -len(unit)]
                break
        else:
            unit, number = "fs", text
        try:
            t = round(float(number) * _UNITS[unit])
        except ValueError:
            raise ValueError(f"cannot parse time {value!r}") from None
    if t < 0 or t > U64_MAX:
        raise SimTimeOverflow(f"time {value!r} outside the 64-bit fs range")
    return t


@dataclass(frozen=True, order=True)
class Event:
    """A queued event; ``(time, sequence)`` is unique and totally ordered."""

    time: int
    sequence: int = field(default=-1)
    target: str = field(default="", compare=False)
    payload: Any = field(default=None, compare=False)


@dataclass(frozen=True)
class RunSummary:
    events: int
    final_time: int


def component_rng(seed: int, component_id: str) -> np.random.Generator:
    """Independent stream for one component, keyed by a stable id.

    Adding or removing components never perturbs the other streams.
    """
    key = zlib.crc32(component_id.encode("utf-8"))
    return np.random.default_rng([seed & U64_MAX, key])


class Kernel:
    """Single-threaded event kernel.

    Internal components schedule callbacks with :meth:`at`; the
    :meth:`schedule` entry point accepts :class:`Event` values addressed
    to handlers registered under a component id.
    """

    def __init__(self, livelock_bound: int = DEFAULT_LIVELOCK_BOUND):
        self.now = 0
        self.livelock_bound = livelock_bound
        self._queue: list[tuple[int, int, Callable[..., Any], tuple]] = []
        self._seq = 0
        self._handlers: dict[str, Callable[[Event], Any]] = {}
        self.events_processed = 0
        self.trace: list[tuple[int, int, str]] | None = None
        self._stop = False

    def __len__(self) -> int:
        return len(self._queue)

    def register(self, component_id: str, handler: Callable[[Event], Any]) -> None:
        if component_id in self._handlers:
            raise ValueError(f"component id {component_id!r} already registered")
        self._handlers[component_id] = handler

    def at(self, time: int, fn: Callable[..., Any], *args: Any) -> int:
        if time < self.now:
            raise SchedulingError(
                f"cannot schedule {getattr(fn, '__qualname__', fn)} at {time} fs; now is {self.now} fs"
            )
        if time > U64_MAX:
            raise SimTimeOverflow(f"event time {time} exceeds 64-bit fs range")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (time, seq, fn, args))
        return seq

    def after(self, delay: int, fn: Callable[..., Any], *args: Any) -> int:
        return self.at(self.now + delay, fn, *args)

    def schedule(self, ev: Event) -> Event:
        """Enqueue ``ev``; its sequence number is assigned here."""
        handler = self._handlers.get(ev.target)
        if handler is None:
            raise KeyError(f"no component registered as {ev.target!r}")
        seq = self._seq
        stamped = Event(ev.time, seq, ev.target, ev.payload)
        self.at(ev.time, handler, stamped)
        return stamped

    def stop(self) -> None:
        """Make the running :meth:`run_until` return after the current event."""
        self._stop = True

    def peek(self) -> int | None:
        return self._queue[0][0] if self._queue else None

    def run_until(self, t_end: int | None = None) -> RunSummary:
        """Process every event with time <= ``t_end`` (all events if None)."""
        queue = self._queue
        pop = heapq.heappop
        bound = self.livelock_bound
        trace = self.trace
        count = 0
        same_instant = 0
        last = -1
        limit = U64_MAX if t_end is None else t_end
        self._stop = False
        stopped = False
        while queue and queue[0][0] <= limit:
            time, seq, fn, args = pop(queue)
            if time == last:
                same_instant += 1
                if same_instant > bound:
                    raise LivelockError(
                        f"more than {bound} zero-delay events at t={time} fs "
                        f"(last: {getattr(fn, '__qualname__', fn)})"
                    )
            else:
                same_instant = 0
                last = time
            self.now = time
            if trace is not None:
                trace.append((time, seq, getattr(fn, "__qualname__", repr(fn))))
            fn(*args)
            count += 1
            if self._stop:
                stopped = True
                break
        if t_end is not None and t_end > self.now and not stopped:
            self.now = t_end
        self.events_processed += count
        return RunSummary(count, self.now)

"""Per-island clocks, frequency registers, DFS actuators and CDC delays.

A :class:`ClockDomain` stores its rising edges as a list of segments.
Each segment is a uniform edge train ``anchor + round(n * 1e15 / f)`` for
``n >= first_n`` that stops before ``end``.  A DFS request appends the
post-switch segment immediately, so edge queries into the future stay
exact without revisiting already-issued events.
"""

from __future__ import annotations

import enum
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable

from vespa_sim.config import DfsClock, FixedClock, SoCDescription
from vespa_sim.engine import FS_PER_S, U64_MAX, Kernel, SimTimeOverflow


def _edge(anchor: int, freq: int, n: int) -> int:
    return anchor + (2 * n * FS_PER_S + freq) // (2 * freq)


class _Segment:
    __slots__ = ("anchor", "freq", "first_n", "start", "end")

    def __init__(self, anchor: int, freq: int, first_n: int, end: int | None = None):
        self.anchor = anchor
        self.freq = freq
        self.first_n = first_n
        self.start = _edge(anchor, freq, first_n)
        self.end = end  # exclusive bound on edge times; None = open

    def index_at_or_after(self, t: int) -> int:
        """Smallest n >= first_n with edge(n) >= t."""
        if t <= self.start:
            return self.first_n
        a, f = self.anchor, self.freq
        n = ((t - a) * f) // FS_PER_S
        if n < self.first_n:
            n = self.first_n
        while n > self.first_n and _edge(a, f, n - 1) >= t:
            n -= 1
        while _edge(a, f, n) < t:
            n += 1
        return n

    def last_index(self) -> int | None:
        """Largest valid n, or None for an open segment."""
        if self.end is None:
            return None
        return self.index_at_or_after(self.end) - 1


class ClockMode(str, enum.Enum):
    FIXED = "fixed"
    DFS = "dfs"


class ClockDomain:
    """Rising-edge calendar of one frequency island."""

    def __init__(self, island: int, clock: FixedClock | DfsClock):
        self.island = island
        self.spec = clock
        self.mode = ClockMode.FIXED if isinstance(clock, FixedClock) else ClockMode.DFS
        self._segments: list[_Segment] = [_Segment(0, clock.initial_hz, 0)]
        self._starts: list[int] = [0]
        self.listeners: list[Callable[[int], None]] = []

    # -- legality ---------------------------------------------------------------
    def is_legal(self, freq_hz: int) -> bool:
        if isinstance(self.spec, FixedClock):
            return freq_hz == self.spec.freq_hz
        return self.spec.is_legal(freq_hz)

    @property
    def current_freq(self) -> int:
        return self._segments[-1].freq

    def freq_at(self, t: int) -> int:
        """Frequency of the edge train in force at ``t`` (0 while gated)."""
        for seg in reversed(self._segments):
            if seg.anchor <= t:
                if seg.end is not None and t >= seg.end:
                    return 0
                return seg.freq
        return self._segments[0].freq

    def period_fs(self, t: int | None = None) -> int:
        f = self.current_freq if t is None else (self.freq_at(t) or self.current_freq)
        return (FS_PER_S + f // 2) // f

    # -- edge queries -------------------------------------------------------------
    def _locate(self, t: int) -> tuple[int, int]:
        """(segment index, n) of the first edge >= t."""
        segs = self._segments
        i = bisect_right(self._starts, t) - 1
        if i < 0:
            i = 0
        while True:
            seg = segs[i]
            n = seg.index_at_or_after(t)
            if seg.end is None or _edge(seg.anchor, seg.freq, n) < seg.end:
                return i, n
            i += 1
            t = max(t, segs[i].start)

    def next_edge(self, t: int) -> int:
        """First rising edge at or after ``t``."""
        segs = self._segments
        if len(segs) == 1:
            seg = segs[0]
            return _edge(seg.anchor, seg.freq, seg.index_at_or_after(t))
        i, n = self._locate(t)
        seg = segs[i]
        return _edge(seg.anchor, seg.freq, n)

    def edge_after(self, t: int, k: int = 1) -> int:
        """The ``k``-th rising edge strictly after ``t`` (``k=0``: at or after)."""
        if k <= 0:
            return self.next_edge(t)
        segs = self._segments
        if len(segs) == 1:
            seg = segs[0]
            e = _edge(seg.anchor, seg.freq, seg.index_at_or_after(t + 1) + k - 1)
            if e > U64_MAX:
                raise SimTimeOverflow("clock edge beyond 64-bit fs range")
            return e
        i, n = self._locate(t + 1)
        n += k - 1
        while True:
            seg = segs[i]
            last = seg.last_index()
            if last is None or n <= last:
                e = _edge(seg.anchor, seg.freq, n)
                if e > U64_MAX:
                    raise SimTimeOverflow("clock edge beyond 64-bit fs range")
                return e
            overshoot = n - last - 1
            i += 1
            n = segs[i].first_n + overshoot

    def prev_edge(self, t: int) -> int | None:
        """Last rising edge at or before ``t``."""
        best = None
        for seg in self._segments:
            if seg.start > t:
                break
            n = seg.index_at_or_after(t + 1) - 1
            if seg.end is not None:
                n = min(n, seg.last_index())
            if n >= seg.first_n:
                best = _edge(seg.anchor, seg.freq, n)
        return best

    def edges(self, t0: int, t1: int) -> list[int]:
        """All rising edges in ``[t0, t1]``."""
        out = []
        t = self.next_edge(t0)
        while t <= t1:
            out.append(t)
            t = self.edge_after(t, 1)
        return out

    def count_edges(self, t0: int, t1: int) -> int:
        """Number of rising edges in ``(t0, t1]``."""
        if t1 <= t0:
            return 0
        total = 0
        for seg in self._segments:
            lo = max(t0 + 1, seg.start)
            hi = t1 if seg.end is None else min(t1, seg.end - 1)
            if hi < lo:
                continue
            total += seg.index_at_or_after(hi + 1) - seg.index_at_or_after(lo)
        return total

    # -- reconfiguration ------------------------------------------------------------
    def _retire_after(self, t_last: int) -> None:
        last = self._segments[-1]
        last.end = t_last + 1

    def _append(self, seg: _Segment) -> None:
        self._segments.append(seg)
        self._starts.append(seg.start)

    def switch_glitch_free(self, t_switch: int, freq: int) -> None:
        """Old edges continue up to ``t_switch``; the first new edge follows
        the last old one by one new period."""
        if freq == self.current_freq:
            return
        t_last = self.prev_edge(t_switch)
        if t_last is None:
            t_last = 0
        self._retire_after(t_last)
        self._append(_Segment(t_last, freq, 1))

    def switch_gated(self, t_request: int, t_switch: int, freq: int) -> None:
        """No edges in ``[t_request, t_switch]``; the new train starts one
        period after ``t_switch``."""
        self._retire_after(t_request - 1)
        self._append(_Segment(t_switch, freq, 1))


@dataclass
class Oscillator:
    freq_hz: int
    locked: bool = True


class ActuatorState(str, enum.Enum):
    STABLE = "Stable"
    RECONFIGURING_SLAVE = "ReconfiguringSlave"
    SWAPPING = "Swapping"


class DfsMode(str, enum.Enum):
    DUAL = "dual"
    NAIVE = "naive"


class DfsActuator:
    """Master/slave oscillator pair driving one island's clock.

    In ``dual`` mode the master keeps the output running while the slave
    is reprogrammed, then the two swap roles.  ``naive`` mode uses a
    single oscillator whose output stays low while it relocks.
    """

    def __init__(self, domain: ClockDomain, mode: DfsMode | str = DfsMode.DUAL,
                 reconfig_latency: int | None = None):
        self.domain = domain
        self.mode = DfsMode(mode)
        spec = domain.spec
        self.reconfig_latency = (
            reconfig_latency if reconfig_latency is not None
            else getattr(spec, "reconfig_latency_fs", 0)
        )
        self.master = Oscillator(domain.current_freq)
        self.slave = Oscillator(domain.current_freq)
        self.fsm_state = ActuatorState.STABLE
        self.completes_at: int | None = None
        self.last_completed_freq = domain.current_freq
        self.swaps = 0

    @property
    def busy(self) -> bool:
        return self.fsm_state is not ActuatorState.STABLE

    @property
    def output(self) -> Oscillator | None:
        """The oscillator currently driving the island (None while gated)."""
        if self.mode is DfsMode.NAIVE and self.busy:
            return None
        return self.master

    def request(self, freq_hz: int, t: int) -> int:
        """Start a reconfiguration at ``t``; returns the completion time."""
        if self.busy:
            raise RuntimeError("actuator already reconfiguring")
        done = t + self.reconfig_latency
        if self.mode is DfsMode.DUAL:
            self.slave.freq_hz = freq_hz
            self.slave.locked = False
            self.domain.switch_glitch_free(done, freq_hz)
        else:
            self.master.freq_hz = freq_hz
            self.master.locked = False
            self.domain.switch_gated(t, done, freq_hz)
        self.fsm_state = ActuatorState.RECONFIGURING_SLAVE
        self.completes_at = done
        for listener in self.domain.listeners:
            listener(t)
        return done

    def advance(self, t: int) -> list[tuple[int, int]]:
        """Apply any completion due at or before ``t``.

        Returns the island's edge-train schedule as ``(start_time, freq)``
        pairs so callers can inspect what the output will do.
        """
        if self.busy and self.completes_at is not None and t >= self.completes_at:
            if self.mode is DfsMode.DUAL:
                self.slave.locked = True
                self.fsm_state = ActuatorState.SWAPPING
                self.master, self.slave = self.slave, self.master
                self.swaps += 1
            else:
                self.master.locked = True
            self.fsm_state = ActuatorState.STABLE
            self.last_completed_freq = self.master.freq_hz
            self.completes_at = None
        return [(s.start, s.freq) for s in self.domain._segments]


class WriteResult(str, enum.Enum):
    ACCEPTED = "accepted"
    QUEUED = "queued"
    OUT_OF_RANGE = "out_of_range"
    OFF_STEP_GRID = "off_step_grid"
    BUSY = "busy"
    FIXED_ISLAND = "fixed_island"
    NO_SUCH_ISLAND = "no_such_island"

    @property
    def ok(self) -> bool:
        return self in (WriteResult.ACCEPTED, WriteResult.QUEUED)


@dataclass
class FrequencyRegister:
    requested_freq: int
    busy: bool = False
    pending: int | None = None


@dataclass(frozen=True)
class Resynchronizer:
    src: int
    dst: int
    depth: int = 2

    def __post_init__(self) -> None:
        if self.depth < 2:
            raise ValueError("resynchronizer depth must be >= 2")


class CrossingError(LookupError):
    pass


class Clocking:
    """All clock domains of one SoC plus their frequency registers and CDC."""

    def __init__(self, desc: SoCDescription, kernel: Kernel | None = None):
        self.kernel = kernel
        self.busy_policy = desc.busy_policy
        self.domains: dict[int, ClockDomain] = {}
        self.actuators: dict[int, DfsActuator] = {}
        self.registers: dict[int, FrequencyRegister] = {}
        self.log: list[tuple[int, int, int, WriteResult]] = []
        for isl in desc.islands:
            dom = ClockDomain(isl.id, isl.clock)
            self.domains[isl.id] = dom
            if isinstance(isl.clock, DfsClock):
                self.actuators[isl.id] = DfsActuator(dom, desc.dfs_mode)
                self.registers[isl.id] = FrequencyRegister(isl.clock.initial_hz)
        self.tile_island = {t.position: desc.tile_island(t.position) for t in desc.tiles}
        self.router_island = {t.position: desc.router_island(t.position) for t in desc.tiles}
        depth = desc.noc.resync_depth
        self.resync: dict[tuple[int, int], Resynchronizer] = {}

        def add(a: int, b: int) -> None:
            if a != b:
                self.resync[(a, b)] = Resynchronizer(a, b, depth)
                self.resync[(b, a)] = Resynchronizer(b, a, depth)

        for pos, isl in self.tile_island.items():
            add(isl, self.router_island[pos])
        for (r, c), isl in self.router_island.items():
            for nb in ((r + 1, c), (r, c + 1)):
                if nb in self.router_island:
                    add(isl, self.router_island[nb])

    def domain(self, island: int) -> ClockDomain:
        return self.domains[island]

    def crossing_delay(self, src: int, dst: int, t_arrival: int) -> int:
        """Time at which a signal arriving at ``t_arrival`` is usable in ``dst``."""
        if src == dst:
            return t_arrival
        sync = self.resync.get((src, dst))
        if sync is None:
            raise CrossingError(f"no resynchronizer between islands {src} and {dst}")
        return self.domains[dst].edge_after(t_arrival, sync.depth)

    def write_frequency(self, island: int, freq_hz: int, t: int) -> WriteResult:
        result = self._write(island, freq_hz, t)
        self.log.append((t, island, freq_hz, result))
        return result

    def _write(self, island: int, freq_hz: int, t: int) -> WriteResult:
        if island not in self.domains:
            return WriteResult.NO_SUCH_ISLAND
        if island not in self.actuators:
            return WriteResult.FIXED_ISLAND
        spec = self.domains[island].spec
        if not spec.min_hz <= freq_hz <= spec.max_hz:
            return WriteResult.OUT_OF_RANGE
        if (freq_hz - spec.min_hz) % spec.step_hz:
            return WriteResult.OFF_STEP_GRID
        reg = self.registers[island]
        if reg.busy:
            if self.busy_policy == "queue":
                reg.pending = freq_hz
                return WriteResult.QUEUED
            return WriteResult.BUSY
        self._start(island, freq_hz, t)
        return WriteResult.ACCEPTED

    def _start(self, island: int, freq_hz: int, t: int) -> None:
        reg = self.registers[island]
        act = self.actuators[island]
        reg.requested_freq = freq_hz
        reg.busy = True
        done = act.request(freq_hz, t)
        if self.kernel is not None:
            self.kernel.at(done, self._complete, island)

    def _complete(self, island: int) -> None:
        t = self.kernel.now if self.kernel is not None else 0
        self.complete(island, t)

    def complete(self, island: int, t: int) -> None:
        act = self.actuators[island]
        act.advance(t)
        reg = self.registers[island]
        reg.busy = False
        if reg.pending is not None:
            freq, reg.pending = reg.pending, None
            self._start(island, freq, t)

    def effective_freq(self, island: int, t: int) -> int:
        """Frequency currently driving the island's logic (0 while gated)."""
        act = self.actuators.get(island)
        if act is not None and act.busy:
            return 0 if act.mode is DfsMode.NAIVE else act.master.freq_hz
        return self.domains[island].freq_at(t)

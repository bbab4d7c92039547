"""Behavioral tile models.

An accelerator tile holds ``K`` replicas behind a bridge that multiplexes
their stream interfaces onto the tile's four buffers (rdCtrl, wrCtrl,
rdData, wrData).  The bridge arbitrates two transactions:

* a read transaction owns rdCtrl and rdData from the moment its RdCtrl
  descriptor is issued until the returned data has been streamed into the
  replica (one bridge beat per tile cycle);
* a write transaction owns wrCtrl and wrData from the WrCtrl descriptor
  until memory acknowledges the write with a MemResp.

So every burst pays a full memory round trip while holding a shared
channel, which is what makes replication scale sub-linearly for
memory-heavy profiles.
"""

from __future__ import annotations

import bisect
import enum
import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

from vespa_sim.clocking import ClockDomain, Clocking
from vespa_sim.config import AcceleratorProfile, MemModel, Position, TileKind, TileSpec
from vespa_sim.engine import Kernel, component_rng
from vespa_sim.monitor import TileCounters
from vespa_sim.noc import Network, Packet, PacketClass

#: Upper bound (exclusive) of the random start offset of a traffic generator, in tile cycles.
TG_STAGGER_CYCLES = 128


class ProtocolError(RuntimeError):
    """A replica received a stimulus that is illegal in its current state."""


class ReplicaState(str, enum.Enum):
    IDLE = "Idle"
    ISSUE_READ = "IssueRead"
    AWAIT_DATA = "AwaitData"
    COMPUTE = "Compute"
    ISSUE_WRITE = "IssueWrite"
    DRAINING = "Draining"
    DONE = "Done"


class Channel(enum.IntEnum):
    RD_CTRL = 0
    WR_CTRL = 1
    RD_DATA = 2
    WR_DATA = 3


READ_CHANNELS = (Channel.RD_CTRL, Channel.RD_DATA)
WRITE_CHANNELS = (Channel.WR_CTRL, Channel.WR_DATA)


def bridge_grant(pending: Iterable[int], last: int, k: int) -> int | None:
    """Round-robin: the first pending replica strictly after ``last``."""
    pending = set(pending)
    if not pending:
        return None
    for step in range(1, k + 1):
        cand = (last + step) % k
        if cand in pending:
            return cand
    raise ValueError(f"pending replica ids {sorted(pending)} not below K={k}")


def split_items(items: int, k: int) -> list[int]:
    """Deal ``items`` round-robin over ``k`` replicas."""
    base, extra = divmod(items, k)
    return [base + (1 if i < extra else 0) for i in range(k)]


def chunk_items(items: int, per_burst: int) -> list[int]:
    full, rest = divmod(items, per_burst)
    return [per_burst] * full + ([rest] if rest else [])


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


# Legal (state, event) pairs.  ``None`` as target means "decided by the tile".
_TRANSITIONS: dict[tuple[ReplicaState, str], ReplicaState | None] = {
    (ReplicaState.IDLE, "start"): None,
    (ReplicaState.DONE, "start"): None,
    (ReplicaState.ISSUE_READ, "grant"): ReplicaState.AWAIT_DATA,
    (ReplicaState.AWAIT_DATA, "data"): ReplicaState.AWAIT_DATA,
    (ReplicaState.AWAIT_DATA, "consumed"): None,
    (ReplicaState.COMPUTE, "compute_done"): ReplicaState.ISSUE_WRITE,
    (ReplicaState.ISSUE_WRITE, "grant"): ReplicaState.DRAINING,
    (ReplicaState.DRAINING, "ack"): None,
}


@dataclass
class ReplicaFsm:
    index: int
    state: ReplicaState = ReplicaState.IDLE
    chunks: deque = field(default_factory=deque)
    current: int = 0
    items_remaining: int = 0
    bytes_outstanding: int = 0
    read_issued_at: int = 0
    stop_requested: bool = False
    items_computed: int = 0

    def step(self, event: str, *, compute_cycles: int = 0) -> ReplicaState:
        """Apply ``event`` and return the new state.

        ``compute_cycles`` is the duration of the chunk whose data has just
        been consumed; zero skips the Compute state.
        """
        key = (self.state, event)
        if key not in _TRANSITIONS:
            raise ProtocolError(f"replica {self.index}: event {event!r} illegal in state {self.state.value}")
        target = _TRANSITIONS[key]
        if target is None:
            if event == "consumed":
                target = ReplicaState.COMPUTE if compute_cycles > 0 else ReplicaState.ISSUE_WRITE
            elif event == "ack":
                self.items_remaining -= self.current
                self.current = 0
                target = self._next_chunk_state()
            else:  # start
                target = self._next_chunk_state()
        elif event == "grant" and self.state is ReplicaState.ISSUE_READ:
            self.current = self.chunks.popleft()
        self.state = target
        return target

    def _next_chunk_state(self) -> ReplicaState:
        if self.chunks and not self.stop_requested:
            return ReplicaState.ISSUE_READ
        return ReplicaState.DONE


class CycleTimers:
    """Waits expressed in cycles of one clock domain.

    When the domain's edge train is rewritten by a frequency change, every
    pending wait is re-timed against the new edges.
    """

    def __init__(self, kernel: Kernel, domain: ClockDomain):
        self.kernel = kernel
        self.domain = domain
        self._pending: dict[int, list] = {}
        self._ids = itertools.count()
        domain.listeners.append(self._retime)

    def start(self, t: int, cycles: int, fn: Callable, *args) -> None:
        end = self.domain.edge_after(t, cycles)
        key = next(self._ids)
        self._pending[key] = [t, cycles, end, fn, args]
        self.kernel.at(end, self._fire, key, end)

    def _fire(self, key: int, end: int) -> None:
        entry = self._pending.get(key)
        if entry is None or entry[2] != end:
            return
        del self._pending[key]
        entry[3](*entry[4])

    def _retime(self, t_request: int) -> None:
        for key, entry in self._pending.items():
            end = self.domain.edge_after(entry[0], entry[1])
            if end != entry[2]:
                entry[2] = end
                self.kernel.at(max(end, self.kernel.now), self._fire, key, end)


class Tile:
    """Common plumbing: position, clock, counters and NoC attachment."""

    def __init__(self, spec: TileSpec, kernel: Kernel, net: Network, clocking: Clocking,
                 counters: TileCounters):
        self.spec = spec
        self.pos = spec.position
        self.kernel = kernel
        self.net = net
        self.clocking = clocking
        self.island = clocking.tile_island[self.pos]
        self.domain = clocking.domain(self.island)
        self.counters = counters
        net.attach(self.pos, self.receive)

    @property
    def kind(self) -> TileKind:
        return self.spec.kind

    def send(self, cls: PacketClass, dst: Position, payload: int = 0, req_bytes: int = 0,
             tag=None) -> Packet:
        pkt = self.net.packet(cls, self.pos, dst, payload, tag=tag, req_bytes=req_bytes)
        self.counters.count_out()
        self.net.inject(pkt, self.kernel.now)
        return pkt

    def receive(self, pkt: Packet, t: int) -> None:
        self.counters.count_in()


class StubTile(Tile):
    """CPU or IO tile: owns counters, does nothing else."""


@dataclass
class Invocation:
    items: int
    t_start: int
    t_done: int | None = None
    bytes_read: int = 0
    bytes_written: int = 0

    @property
    def duration(self) -> int:
        if self.t_done is None:
            raise RuntimeError("invocation still running")
        return self.t_done - self.t_start


class AxiBridge:
    """Per-channel round-robin arbiter over the replicas of one tile."""

    def __init__(self, k: int, policy: str = "round_robin"):
        if policy != "round_robin":
            raise ValueError(f"unsupported bridge policy {policy!r}")
        self.k = k
        self.last = {ch: k - 1 for ch in Channel}
        self.grants = {ch: [0] * k for ch in Channel}
        self.owner: dict[Channel, int | None] = {ch: None for ch in Channel}

    def grant(self, channels: tuple[Channel, ...], pending: Iterable[int]) -> int | None:
        if any(self.owner[ch] is not None for ch in channels):
            return None
        winner = bridge_grant(pending, self.last[channels[0]], self.k)
        if winner is not None:
            for ch in channels:
                self.last[ch] = winner
                self.owner[ch] = winner
                self.grants[ch][winner] += 1
        return winner

    def release(self, channels: tuple[Channel, ...], replica: int) -> None:
        for ch in channels:
            if self.owner[ch] != replica:
                raise ProtocolError(f"replica {replica} releasing channel {ch.name} it does not own")
            self.owner[ch] = None


class _Port:
    """One bridge transaction class (read or write) with its request queue."""

    def __init__(self, channels: tuple[Channel, ...]):
        self.channels = channels
        self.pending: set[int] = set()
        self.ready_at = 0
        self.arbitration_at: int | None = None


class MraTile(Tile):
    """Multi-replica accelerator tile (also the base of traffic generators)."""

    def __init__(self, spec: TileSpec, profile: AcceleratorProfile, kernel: Kernel, net: Network,
                 clocking: Clocking, counters: TileCounters, mem_pos: Position,
                 bridge_width: int = 8, buffer_depth: int = 4, bridge_policy: str = "round_robin"):
        super().__init__(spec, kernel, net, clocking, counters)
        if spec.replication < 1:
            raise ValueError("replication must be >= 1")
        self.profile = profile
        self.k = spec.replication
        self.mem_pos = mem_pos
        self.bridge_width = bridge_width
        self.buffer_depth = buffer_depth
        self.replicas = [ReplicaFsm(i) for i in range(self.k)]
        self.bridge = AxiBridge(self.k, bridge_policy)
        self._read = _Port(READ_CHANNELS)
        self._write = _Port(WRITE_CHANNELS)
        self.timers = CycleTimers(kernel, self.domain)
        self.invocation: Invocation | None = None
        self.history: list[Invocation] = []
        self.loop = False
        self.on_complete: list[Callable[[Invocation], None]] = []
        self.chunks_done = 0

    # -- invocation ---------------------------------------------------------------
    @property
    def busy(self) -> bool:
        return self.invocation is not None and self.invocation.t_done is None

    def start_invocation(self, items: int, t: int | None = None) -> Invocation:
        """Split ``items`` over the replicas and start them at the next tile edge."""
        if self.busy:
            raise RuntimeError(f"tile {self.pos} already running an invocation")
        if items < 0:
            raise ValueError("item count must be non-negative")
        t = self.kernel.now if t is None else t
        t0 = self.domain.next_edge(t)
        inv = Invocation(items, t0)
        self.invocation = inv
        if items == 0:
            inv.t_done = t0
            self.counters.start_exec(t0)
            self.counters.stop_exec(t0)
            self.history.append(inv)
            return inv
        per_burst = self.profile.items_per_burst
        for r, share in zip(self.replicas, split_items(items, self.k)):
            r.chunks = deque(chunk_items(share, per_burst))
            r.items_remaining = share
            r.stop_requested = False
        self.kernel.at(t0, self._begin, inv)
        return inv

    def _begin(self, inv: Invocation) -> None:
        now = self.kernel.now
        self.counters.start_exec(now)
        for r in self.replicas:
            if r.step("start") is ReplicaState.ISSUE_READ:
                self._request(self._read, r.index)
        self._check_done()

    def _check_done(self) -> None:
        inv = self.invocation
        if inv is None or inv.t_done is not None:
            return
        if all(r.state is ReplicaState.DONE for r in self.replicas):
            now = self.kernel.now
            inv.t_done = now
            self.counters.stop_exec(now)
            self.history.append(inv)
            for cb in self.on_complete:
                cb(inv)
            if self.loop and not any(r.stop_requested for r in self.replicas):
                self._restart(now)

    def _restart(self, t: int) -> None:
        self.start_invocation(self.profile.items_per_invocation, t)

    def request_stop(self) -> None:
        """Finish the chunk in flight on every replica, then stop."""
        self.loop = False
        for r in self.replicas:
            r.stop_requested = True

    # -- bridge -------------------------------------------------------------------
    def _request(self, port: _Port, replica: int) -> None:
        port.pending.add(replica)
        self._arm(port)

    def _arm(self, port: _Port) -> None:
        if not port.pending or self.bridge.owner[port.channels[0]] is not None:
            return
        g = self.domain.next_edge(max(self.kernel.now, port.ready_at))
        if port.arbitration_at is not None and port.arbitration_at <= g:
            return
        port.arbitration_at = g
        self.kernel.at(g, self._arbitrate, port, g)

    def _arbitrate(self, port: _Port, g: int) -> None:
        if port.arbitration_at != g:
            return
        port.arbitration_at = None
        winner = self.bridge.grant(port.channels, port.pending)
        if winner is None:
            return
        port.pending.discard(winner)
        r = self.replicas[winner]
        r.step("grant")
        if port is self._read:
            self._issue_read(r)
        else:
            self._issue_write(r)

    def _release(self, port: _Port, replica: int) -> None:
        self.bridge.release(port.channels, replica)
        port.ready_at = self.kernel.now + 1
        self._arm(port)

    # -- read path ------------------------------------------------------------------
    def _issue_read(self, r: ReplicaFsm) -> None:
        nbytes = r.current * self.profile.bytes_read_per_item
        r.bytes_outstanding = nbytes
        r.read_issued_at = self.kernel.now
        self.send(PacketClass.RD_CTRL, self.mem_pos, 0, req_bytes=nbytes, tag=r.index)

    def receive(self, pkt: Packet, t: int) -> None:
        self.counters.count_in()
        if not isinstance(pkt.tag, int) or not 0 <= pkt.tag < self.k:
            raise ProtocolError(f"tile {self.pos}: packet {pkt!r} addressed to no replica")
        r = self.replicas[pkt.tag]
        if pkt.cls is PacketClass.RD_DATA:
            r.step("data")
            self.counters.record_rtt(r.read_issued_at, t)
            self.timers.start(t, ceil_div(pkt.payload_bytes, self.bridge_width), self._consumed, r)
        elif pkt.cls is PacketClass.MEM_RESP:
            r.step("ack")
            if self.invocation is not None:
                self.invocation.bytes_written += r.bytes_outstanding
            self.chunks_done += 1
            self._release(self._write, r.index)
            if r.state is ReplicaState.ISSUE_READ:
                self._request(self._read, r.index)
            self._check_done()
        else:
            raise ProtocolError(f"tile {self.pos}: unexpected {pkt.cls.label}")

    def _consumed(self, r: ReplicaFsm) -> None:
        if self.invocation is not None:
            self.invocation.bytes_read += r.bytes_outstanding
        self._release(self._read, r.index)
        cycles = self.compute_cycles(r.current, r.items_computed)
        r.items_computed += r.current
        if r.step("consumed", compute_cycles=cycles) is ReplicaState.COMPUTE:
            self.timers.start(self.kernel.now, cycles, self._computed, r)
        else:
            self._request(self._write, r.index)

    def compute_cycles(self, items: int, done_before: int = 0) -> int:
        """Cycles for a chunk of ``items`` after ``done_before`` items on the same replica.

        Fractional cycles-per-item are carried from chunk to chunk, so the
        total over any run is ``cpi * items`` rounded once rather than per chunk.
        """
        cpi = self.profile.compute_cycles_per_item
        return math.floor(cpi * (done_before + items) + 0.5) - math.floor(cpi * done_before + 0.5)

    def _computed(self, r: ReplicaFsm) -> None:
        r.step("compute_done")
        self._request(self._write, r.index)

    # -- write path -------------------------------------------------------------------
    def _issue_write(self, r: ReplicaFsm) -> None:
        nbytes = r.current * self.profile.bytes_written_per_item
        r.bytes_outstanding = nbytes
        self.send(PacketClass.WR_CTRL, self.mem_pos, 0, req_bytes=nbytes, tag=r.index)
        self.timers.start(self.kernel.now, ceil_div(nbytes, self.bridge_width), self._send_data, r, nbytes)

    def _send_data(self, r: ReplicaFsm, nbytes: int) -> None:
        self.send(PacketClass.WR_DATA, self.mem_pos, nbytes, tag=r.index)


class TrafficGenTile(MraTile):
    """Single-replica tile that loops its profile while enabled."""

    def __init__(self, *args, seed: int = 0, **kwargs):
        super().__init__(*args, **kwargs)
        if self.k != 1:
            raise ValueError("traffic generators have exactly one replica")
        self.rng = component_rng(seed, f"tg@{self.pos[0]},{self.pos[1]}")
        self.enabled = False

    def set_enabled(self, flag: bool, t: int | None = None) -> None:
        t = self.kernel.now if t is None else t
        if flag == self.enabled:
            return
        self.enabled = flag
        if not flag:
            self.request_stop()
            return
        self.loop = True
        if self.busy:
            for r in self.replicas:
                r.stop_requested = False
            return
        offset = int(self.rng.integers(0, TG_STAGGER_CYCLES))
        self.kernel.at(max(t, self.kernel.now), self._kick, offset)

    def _restart(self, t: int) -> None:
        # every loop iteration is relaunched after a fresh random offset, so
        # generators never phase-lock with each other or with the measured tile
        self._kick(int(self.rng.integers(0, TG_STAGGER_CYCLES)))

    def _kick(self, offset: int) -> None:
        if self.enabled and not self.busy:
            self.start_invocation(self.profile.items_per_invocation,
                                  self.domain.edge_after(self.kernel.now, offset))


def tg_set_enabled(tile: Tile, flag: bool, t: int | None = None) -> None:
    if not isinstance(tile, TrafficGenTile):
        raise TypeError(f"tile at {tile.pos} is {tile.kind.value}, not a traffic generator")
    tile.set_enabled(flag, t)


class MemTile(Tile):
    """Pipelined memory controller with one data bus.

    A request becomes visible at the next memory edge, waits the fixed
    latency, then occupies the bus for ``ceil(bytes / rate)`` cycles in
    strict arrival order.  The response leaves when its bus slot ends.
    """

    def __init__(self, spec: TileSpec, model: MemModel, kernel: Kernel, net: Network,
                 clocking: Clocking, counters: TileCounters):
        super().__init__(spec, kernel, net, clocking, counters)
        self.model = model
        self.bus_free = 0
        self._busy_starts: list[int] = []
        self._busy_ends: list[int] = []
        self._busy_prefix: list[int] = [0]
        self.reads = 0
        self.writes = 0
        self.bytes_read = 0
        self.bytes_written = 0

    def service_window(self, t: int, nbytes: int) -> tuple[int, int]:
        """Bus slot ``(start, end)`` for a request arriving at ``t``."""
        dom = self.domain
        s = dom.next_edge(t)
        start = max(dom.edge_after(s, self.model.latency_cycles), self.bus_free)
        start = dom.next_edge(start)
        end = dom.edge_after(start, ceil_div(nbytes, self.model.bytes_per_cycle)) if nbytes else start
        return start, end

    def receive(self, pkt: Packet, t: int) -> None:
        self.counters.count_in()
        if pkt.cls is PacketClass.RD_CTRL or pkt.cls is PacketClass.MEM_REQ:
            nbytes = pkt.req_bytes
            self.reads += 1
            self.bytes_read += nbytes
            reply = (PacketClass.RD_DATA, nbytes)
        elif pkt.cls is PacketClass.WR_DATA:
            nbytes = pkt.payload_bytes
            self.writes += 1
            self.bytes_written += nbytes
            reply = (PacketClass.MEM_RESP, 0)
        elif pkt.cls is PacketClass.WR_CTRL:
            return
        else:
            raise ProtocolError(f"memory tile got {pkt.cls.label}")
        start, end = self.service_window(t, nbytes)
        self.bus_free = end
        if end > start:
            self._busy_starts.append(start)
            self._busy_ends.append(end)
            self._busy_prefix.append(self._busy_prefix[-1] + end - start)
        self.kernel.at(end, self._respond, pkt.src, reply[0], reply[1], pkt.tag)

    def _respond(self, dst: Position, cls: PacketClass, nbytes: int, tag) -> None:
        self.send(cls, dst, nbytes, tag=tag)

    def busy_time(self, t0: int, t1: int) -> int:
        """Bus-occupied femtoseconds within ``[t0, t1]``."""
        starts, ends, prefix = self._busy_starts, self._busy_ends, self._busy_prefix
        lo = bisect.bisect_right(ends, t0)
        hi = bisect.bisect_left(starts, t1)
        if hi <= lo:
            return 0
        total = prefix[hi] - prefix[lo]
        total -= max(0, t0 - starts[lo])
        total -= max(0, ends[hi - 1] - t1)
        return total

    def busy_fraction(self, t0: int, t1: int) -> float:
        return self.busy_time(t0, t1) / (t1 - t0) if t1 > t0 else 0.0

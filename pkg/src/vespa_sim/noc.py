"""Packet-level 2D-mesh NoC: XY routing, bounded FIFOs, two virtual networks.

Timing per router: a packet whose head arrives at ``ta`` may leave at the
``router_latency``-th edge after ``ta``; it then holds the output link for
``size_flits`` cycles and its head reaches the next router one cycle after
departure.  Ejection to the local tile has no pipeline stage, and the
packet is delivered when its tail arrives.  On an idle network this gives
``hops * (latency + 1) + size_flits - 1`` router cycles from injection to
delivery, plus any clock-domain crossings.
"""

from __future__ import annotations

import enum
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

from vespa_sim.clocking import Clocking
from vespa_sim.config import NocParams, Position
from vespa_sim.engine import Kernel


class DeadlockError(RuntimeError):
    """A packet waited longer than the watchdog bound at a router."""


class PacketClass(enum.IntEnum):
    RD_CTRL = 0
    WR_CTRL = 1
    RD_DATA = 2
    WR_DATA = 3
    MEM_REQ = 4
    MEM_RESP = 5

    @property
    def vn(self) -> int:
        """Virtual network: 0 carries requests, 1 carries responses."""
        return 1 if self in (PacketClass.RD_DATA, PacketClass.MEM_RESP) else 0

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    PacketClass.RD_CTRL: "RdCtrl",
    PacketClass.WR_CTRL: "WrCtrl",
    PacketClass.RD_DATA: "RdData",
    PacketClass.WR_DATA: "WrData",
    PacketClass.MEM_REQ: "MemReq",
    PacketClass.MEM_RESP: "MemResp",
}

REQUEST_VN = 0
RESPONSE_VN = 1


class Port(enum.IntEnum):
    LOCAL = 0
    NORTH = 1
    SOUTH = 2
    EAST = 3
    WEST = 4


_OPPOSITE = {Port.NORTH: Port.SOUTH, Port.SOUTH: Port.NORTH, Port.EAST: Port.WEST, Port.WEST: Port.EAST}
_STEP = {Port.NORTH: (-1, 0), Port.SOUTH: (1, 0), Port.EAST: (0, 1), Port.WEST: (0, -1)}

_packet_ids = itertools.count()


def flits_for(payload_bytes: int, link_width_bytes: int) -> int:
    """Header flit plus enough body flits to carry the payload."""
    return -(-payload_bytes // link_width_bytes) + 1


@dataclass(eq=False)
class Packet:
    cls: PacketClass
    src: Position
    dst: Position
    size_flits: int
    payload_bytes: int = 0
    t_injected: int = 0
    tag: Any = None
    req_bytes: int = 0
    id: int = field(default_factory=lambda: next(_packet_ids))
    t_delivered: int | None = None

    def __repr__(self) -> str:
        return (f"Packet(#{self.id} {self.cls.label} {self.src}->{self.dst} "
                f"{self.size_flits}fl {self.payload_bytes}B)")


def hop_count(src: Position, dst: Position) -> int:
    return abs(src[0] - dst[0]) + abs(src[1] - dst[1])


def xy_next_hop(cur: Position, dst: Position, rows: int | None = None, cols: int | None = None) -> Port:
    """Dimension-order route: fix the column first, then the row."""
    if rows is not None and cols is not None:
        for p in (cur, dst):
            if not (0 <= p[0] < rows and 0 <= p[1] < cols):
                raise ValueError(f"position {p} outside {rows}x{cols} grid")
    if dst[1] > cur[1]:
        return Port.EAST
    if dst[1] < cur[1]:
        return Port.WEST
    if dst[0] > cur[0]:
        return Port.SOUTH
    if dst[0] < cur[0]:
        return Port.NORTH
    return Port.LOCAL


class Router:
    __slots__ = ("net", "pos", "island", "domain", "fifos", "out_free", "credits",
                 "neighbors", "wake_at", "route_cache")

    def __init__(self, net: "Network", pos: Position, island: int):
        self.net = net
        self.pos = pos
        self.island = island
        self.domain = net.clocking.domain(island)
        depth = net.params.fifo_depth
        # (in_port, vn) -> deque of [packet, ready_time, out_port]
        self.fifos: dict[tuple[int, int], deque] = {
            (p, vn): deque() for p in Port for vn in (REQUEST_VN, RESPONSE_VN)
        }
        self.out_free = [0] * len(Port)
        self.credits: dict[tuple[int, int], int] = {
            (p, vn): depth for p in Port if p != Port.LOCAL for vn in (REQUEST_VN, RESPONSE_VN)
        }
        self.neighbors: dict[int, Router] = {}
        self.wake_at: int | None = None
        self.route_cache: dict[Position, Port] = {}

    def route(self, dst: Position) -> Port:
        port = self.route_cache.get(dst)
        if port is None:
            port = self.route_cache[dst] = xy_next_hop(self.pos, dst)
        return port

    def occupancy(self, in_port: int, vn: int) -> int:
        return len(self.fifos[(in_port, vn)])

    def accept(self, pkt: Packet, in_port: int, t: int) -> None:
        """Head of ``pkt`` reaches this router's ``in_port`` at ``t``."""
        out = self.route(pkt.dst)
        if out == Port.LOCAL:
            ready = self.domain.next_edge(t)
        else:
            ready = self.domain.edge_after(t, self.net.params.router_latency_cycles)
        q = self.fifos[(in_port, pkt.cls.vn)]
        if len(q) >= self.net.params.fifo_depth:
            raise AssertionError(f"FIFO overflow at router {self.pos} port {in_port}")
        q.append([pkt, ready, out])
        if len(q) == 1:
            self.wake(ready)

    def wake(self, t: int) -> None:
        wa = self.wake_at
        if wa is not None and wa <= t and wa >= self.net.kernel.now:
            return
        self.wake_at = t
        self.net.kernel.at(t, self.arbitrate)

    def arbitrate(self) -> None:
        net = self.net
        now = net.kernel.now
        if self.wake_at is not None and self.wake_at <= now:
            self.wake_at = None
        out_free = self.out_free
        credits = self.credits
        # best candidate per output port
        best: dict[int, tuple[int, int, tuple[int, int]]] = {}
        for key, q in self.fifos.items():
            if not q:
                continue
            pkt, ready, out = q[0]
            if ready > now or out_free[out] > now:
                continue
            if out != Port.LOCAL and credits[(out, key[1])] <= 0:
                continue
            cand = (ready, pkt.id, key)
            cur = best.get(out)
            if cur is None or cand < cur:
                best[out] = cand
        for out, (ready, _, key) in best.items():
            self._depart(key, out, now, ready)
        # next moment something could move
        nxt = None
        for key, q in self.fifos.items():
            if not q:
                continue
            pkt, ready, out = q[0]
            if out != Port.LOCAL and credits[(out, key[1])] <= 0:
                continue  # woken by credit return
            t = ready if ready > out_free[out] else out_free[out]
            if t <= now:
                t = self.domain.edge_after(now, 1)
            if nxt is None or t < nxt:
                nxt = t
        if nxt is not None:
            self.wake(nxt)

    def _depart(self, key: tuple[int, int], out: int, now: int, ready: int) -> None:
        net = self.net
        in_port, vn = key
        pkt, _, _ = self.fifos[key].popleft()
        stall = now - ready
        if stall > net.max_stall:
            net.max_stall = stall
            if stall > net.watchdog_fs:
                raise DeadlockError(
                    f"packet {pkt} stalled {stall} fs at router {self.pos} (watchdog {net.watchdog_fs} fs)"
                )
        dom = self.domain
        self.out_free[out] = dom.edge_after(now, pkt.size_flits)
        # free the slot we occupied
        if in_port == Port.LOCAL:
            net.injection_credit(self.pos, vn, now)
        else:
            up = self.neighbors[in_port]
            up.credits[(_OPPOSITE[in_port], vn)] += 1
            up.wake(up.domain.next_edge(now))
        if out == Port.LOCAL:
            tail = dom.edge_after(now, pkt.size_flits - 1) if pkt.size_flits > 1 else now
            net.eject(pkt, self, tail)
        else:
            self.credits[(out, vn)] -= 1
            nb = self.neighbors[out]
            t_head = dom.edge_after(now, 1)
            if nb.island != self.island:
                t_head = net.clocking.crossing_delay(self.island, nb.island, t_head)
            net.kernel.at(t_head, nb.accept, pkt, _OPPOSITE[out], t_head)
        net.link_flits += pkt.size_flits
        net.hops += 1


class _Injector:
    """Network interface of one tile: per-VN outbound queue and injection link."""

    __slots__ = ("queues", "link_free", "scheduled")

    def __init__(self) -> None:
        self.queues = (deque(), deque())
        self.link_free = 0
        self.scheduled: int | None = None


@dataclass
class NetworkStats:
    injected: int = 0
    delivered: int = 0
    max_stall_fs: int = 0
    hops: int = 0
    link_flits: int = 0


def _slowest_hz(clock: Any) -> int:
    return getattr(clock, "min_hz", None) or clock.freq_hz


class Network:
    """The mesh.  Tiles hand packets to :meth:`inject` and receive them via
    the ``deliver(pkt, t)`` callback registered per destination tile."""

    def __init__(self, kernel: Kernel, rows: int, cols: int, params: NocParams, clocking: Clocking,
                 watchdog_cycles: int = 1_000_000):
        self.kernel = kernel
        self.rows = rows
        self.cols = cols
        self.params = params
        self.clocking = clocking
        self.routers: dict[Position, Router] = {}
        for r in range(rows):
            for c in range(cols):
                self.routers[(r, c)] = Router(self, (r, c), clocking.router_island[(r, c)])
        for (r, c), router in self.routers.items():
            for port, (dr, dc) in _STEP.items():
                nb = self.routers.get((r + dr, c + dc))
                if nb is not None:
                    router.neighbors[port] = nb
        self._injectors = {pos: _Injector() for pos in self.routers}
        self._sinks: dict[Position, Callable[[Packet, int], None]] = {}
        # watchdog expressed in cycles of the slowest legal NoC clock
        slowest = min(_slowest_hz(clocking.domain(r.island).spec) for r in self.routers.values())
        self.watchdog_fs = watchdog_cycles * (10**15 // slowest)
        self.max_stall = 0
        self.injected = 0
        self.delivered = 0
        self.hops = 0
        self.link_flits = 0
        self.on_eject: Callable[[Packet, int], None] | None = None
        self._ids = itertools.count()

    def attach(self, pos: Position, deliver: Callable[[Packet, int], None]) -> None:
        self._sinks[pos] = deliver

    def packet(self, cls: PacketClass, src: Position, dst: Position, payload_bytes: int = 0,
               tag: Any = None, req_bytes: int = 0) -> Packet:
        return Packet(cls, src, dst, flits_for(payload_bytes, self.params.link_width_bytes),
                      payload_bytes, tag=tag, req_bytes=req_bytes, id=next(self._ids))

    @property
    def in_flight(self) -> int:
        return self.injected - self.delivered

    def stats(self) -> NetworkStats:
        return NetworkStats(self.injected, self.delivered, self.max_stall, self.hops, self.link_flits)

    # -- injection -------------------------------------------------------------
    def inject(self, pkt: Packet, t: int) -> None:
        """Hand ``pkt`` from its source tile to the network at tile time ``t``."""
        src = pkt.src
        if not (0 <= pkt.dst[0] < self.rows and 0 <= pkt.dst[1] < self.cols):
            raise ValueError(f"destination {pkt.dst} outside the grid")
        pkt.t_injected = t
        self.injected += 1
        router = self.routers[src]
        t_arr = self.clocking.crossing_delay(self.clocking.tile_island[src], router.island, t)
        inj = self._injectors[src]
        inj.queues[pkt.cls.vn].append((pkt, t_arr))
        self._schedule_injector(src, inj, t_arr)

    def _schedule_injector(self, pos: Position, inj: _Injector, t: int) -> None:
        t = max(t, self.kernel.now)
        if inj.scheduled is not None and self.kernel.now <= inj.scheduled <= t:
            return
        inj.scheduled = t
        self.kernel.at(t, self._try_inject, pos)

    def _try_inject(self, pos: Position) -> None:
        now = self.kernel.now
        inj = self._injectors[pos]
        if inj.scheduled is not None and inj.scheduled <= now:
            inj.scheduled = None
        router = self.routers[pos]
        depth = self.params.fifo_depth
        nxt = None
        for vn in (REQUEST_VN, RESPONSE_VN):
            q = inj.queues[vn]
            if not q:
                continue
            pkt, t_arr = q[0]
            if t_arr > now:
                nxt = t_arr if nxt is None else min(nxt, t_arr)
                continue
            if inj.link_free > now:
                nxt = inj.link_free if nxt is None else min(nxt, inj.link_free)
                continue
            if len(router.fifos[(Port.LOCAL, vn)]) >= depth:
                continue  # injection_credit() will wake us
            q.popleft()
            t_in = router.domain.next_edge(now)
            if t_in != now:
                q.appendleft((pkt, t_in))
                nxt = t_in if nxt is None else min(nxt, t_in)
                continue
            inj.link_free = router.domain.edge_after(now, pkt.size_flits)
            router.accept(pkt, Port.LOCAL, now)
            if q:
                nxt = inj.link_free if nxt is None else min(nxt, inj.link_free)
        if nxt is not None:
            self._schedule_injector(pos, inj, nxt)

    def injection_credit(self, pos: Position, vn: int, t: int) -> None:
        inj = self._injectors[pos]
        if inj.queues[vn]:
            self._schedule_injector(pos, inj, t)

    # -- ejection ----------------------------------------------------------------
    def eject(self, pkt: Packet, router: Router, t_tail: int) -> None:
        dst_island = self.clocking.tile_island[router.pos]
        t = self.clocking.crossing_delay(router.island, dst_island, t_tail)
        self.kernel.at(t, self._deliver, pkt)

    def _deliver(self, pkt: Packet) -> None:
        now = self.kernel.now
        pkt.t_delivered = now
        self.delivered += 1
        if self.on_eject is not None:
            self.on_eject(pkt, now)
        sink = self._sinks.get(pkt.dst)
        if sink is not None:
            sink(pkt, now)

    def assert_drained(self) -> None:
        if self.in_flight:
            raise DeadlockError(f"{self.in_flight} packets still in the network after drain")


def zero_load_cycles(hops: int, size_flits: int, router_latency: int) -> int:
    """Injection-to-delivery router cycles for one packet on an idle mesh."""
    return hops * (router_latency + 1) + size_flits - 1

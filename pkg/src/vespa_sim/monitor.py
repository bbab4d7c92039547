"""Per-tile monitoring counters and the memory-mapped register space.

Register map (32-bit registers, byte addresses)::

    0x0000 + 4*id            frequency of DFS island ``id`` in MHz (RW)
    0x1000 + 0x40*tile + off per-tile block, tile index is row-major

    off   name         reset
    0x00  EXEC_TIME    automatic: cleared at invocation start, frozen at end
    0x04  PKTS_IN      manual
    0x08  PKTS_OUT     manual
    0x0C  RTT_SUM_LO   manual (reading it latches RTT_SUM_HI)
    0x10  RTT_SUM_HI   manual
    0x14  RTT_COUNT    manual
    0x18  CONTROL      bits 0-3 enable EXEC/IN/OUT/RTT; bit 8 is the
                       write-one-to-clear reset of the manual counters
    0x1C  RTT_LAST_LO  manual (reading it latches RTT_LAST_HI)
    0x20  RTT_LAST_HI  manual

RTT values are femtoseconds; EXEC_TIME counts accelerator-island cycles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from vespa_sim.clocking import ClockDomain, Clocking, WriteResult
from vespa_sim.config import MHZ, Position, SoCDescription

STAT_EXEC = 0
STAT_PKTS_IN = 1
STAT_PKTS_OUT = 2
STAT_RTT = 3
STAT_NAMES = ("exec_time", "pkts_in", "pkts_out", "rtt")

FREQ_BASE = 0x0000
TILE_BASE = 0x1000
TILE_STRIDE = 0x40

EXEC_TIME = 0x00
PKTS_IN = 0x04
PKTS_OUT = 0x08
RTT_SUM_LO = 0x0C
RTT_SUM_HI = 0x10
RTT_COUNT = 0x14
CONTROL = 0x18
RTT_LAST_LO = 0x1C
RTT_LAST_HI = 0x20

CTRL_ENABLE_MASK = 0xF
CTRL_RESET = 1 << 8

MASK32 = 0xFFFFFFFF

TILE_REGISTERS = (
    (EXEC_TIME, "exec_time", "auto (invocation start)"),
    (PKTS_IN, "pkts_in", "manual"),
    (PKTS_OUT, "pkts_out", "manual"),
    (RTT_SUM_LO, "rtt_sum_lo", "manual"),
    (RTT_SUM_HI, "rtt_sum_hi", "manual"),
    (RTT_COUNT, "rtt_count", "manual"),
    (CONTROL, "control", "enables persist; bit 8 W1C reset"),
    (RTT_LAST_LO, "rtt_last_lo", "manual"),
    (RTT_LAST_HI, "rtt_last_hi", "manual"),
)


class UnmappedAddress(LookupError):
    pass


@dataclass
class TileCounters:
    """The four statistics of one tile.

    Disabled statistics never change.  ``exec_time`` is driven by the
    tile itself (start/stop); the others only clear on :meth:`reset_manual`.
    """

    domain: ClockDomain | None = None
    exec_time: int = 0
    pkts_in: int = 0
    pkts_out: int = 0
    rtt_sum: int = 0
    rtt_count: int = 0
    rtt_last: int = 0
    enables: list[bool] = field(default_factory=lambda: [True] * 4)
    exec_started: int | None = None

    def start_exec(self, t: int) -> None:
        if not self.enables[STAT_EXEC]:
            return
        self.exec_time = 0
        self.exec_started = t

    def stop_exec(self, t: int) -> None:
        if self.exec_started is None:
            return
        self.exec_time = self._cycles(self.exec_started, t)
        self.exec_started = None

    def exec_time_at(self, t: int) -> int:
        if self.exec_started is None:
            return self.exec_time
        return self._cycles(self.exec_started, t)

    def _cycles(self, t0: int, t1: int) -> int:
        if self.domain is None:
            raise RuntimeError("exec_time needs the tile's clock domain")
        return self.domain.count_edges(t0, t1)

    def count_in(self, n: int = 1) -> None:
        if self.enables[STAT_PKTS_IN]:
            self.pkts_in += n

    def count_out(self, n: int = 1) -> None:
        if self.enables[STAT_PKTS_OUT]:
            self.pkts_out += n

    def record_rtt(self, request_issue: int, data_arrival: int) -> None:
        if data_arrival < request_issue:
            raise ValueError("data arrival precedes its request")
        if not self.enables[STAT_RTT]:
            return
        rtt = data_arrival - request_issue
        self.rtt_sum += rtt
        self.rtt_count += 1
        self.rtt_last = rtt

    @property
    def rtt_mean(self) -> float:
        return self.rtt_sum / self.rtt_count if self.rtt_count else 0.0

    def reset_manual(self) -> None:
        self.pkts_in = 0
        self.pkts_out = 0
        self.rtt_sum = 0
        self.rtt_count = 0
        self.rtt_last = 0

    @property
    def control(self) -> int:
        return sum(1 << i for i, on in enumerate(self.enables) if on)


@dataclass(frozen=True)
class RatePoint:
    time_fs: int
    mpkts: float


class Monitor:
    """Counters of every tile plus the register view over them."""

    def __init__(self, desc: SoCDescription, clocking: Clocking, now=lambda: 0):
        self.desc = desc
        self.clocking = clocking
        self._now = now
        self.counters: dict[Position, TileCounters] = {}
        self.tile_index: dict[Position, int] = {}
        for i, t in enumerate(desc.tiles):
            dom = clocking.domain(clocking.tile_island[t.position])
            self.counters[t.position] = TileCounters(domain=dom)
            self.tile_index[t.position] = i
        self._by_index = {i: pos for pos, i in self.tile_index.items()}
        self._latch: dict[tuple[int, int], int] = {}
        # raw ejection tally per tile for traffic sampling; not resettable
        self.ejected: dict[Position, int] = {pos: 0 for pos in self.counters}
        self.trace: list[tuple[int, str, str, float]] = []

    # -- addresses ------------------------------------------------------------
    @staticmethod
    def tile_address(tile_index: int, offset: int) -> int:
        return TILE_BASE + TILE_STRIDE * tile_index + offset

    def address_of(self, pos: Position, offset: int) -> int:
        return self.tile_address(self.tile_index[pos], offset)

    @staticmethod
    def freq_address(island: int) -> int:
        return FREQ_BASE + 4 * island

    def _decode(self, addr: int) -> tuple[str, int, int]:
        if addr % 4:
            raise UnmappedAddress(f"unaligned address {addr:#06x}")
        if FREQ_BASE <= addr < TILE_BASE:
            island = (addr - FREQ_BASE) // 4
            if island not in self.clocking.registers:
                raise UnmappedAddress(f"no DFS island register at {addr:#06x}")
            return "freq", island, 0
        idx, off = divmod(addr - TILE_BASE, TILE_STRIDE)
        if idx not in self._by_index or off not in dict((o, n) for o, n, _ in TILE_REGISTERS):
            raise UnmappedAddress(f"address {addr:#06x} is not mapped")
        return "tile", idx, off

    # -- access -----------------------------------------------------------------
    def read_register(self, addr: int) -> int:
        """32-bit read; never alters a counter."""
        kind, idx, off = self._decode(addr)
        now = self._now()
        if kind == "freq":
            return self.clocking.effective_freq(idx, now) // MHZ
        c = self.counters[self._by_index[idx]]
        if off == EXEC_TIME:
            return c.exec_time_at(now) & MASK32
        if off == PKTS_IN:
            return c.pkts_in & MASK32
        if off == PKTS_OUT:
            return c.pkts_out & MASK32
        if off == RTT_SUM_LO:
            self._latch[(idx, RTT_SUM_HI)] = (c.rtt_sum >> 32) & MASK32
            return c.rtt_sum & MASK32
        if off == RTT_SUM_HI:
            return self._latch.get((idx, RTT_SUM_HI), (c.rtt_sum >> 32) & MASK32)
        if off == RTT_COUNT:
            return c.rtt_count & MASK32
        if off == CONTROL:
            return c.control
        if off == RTT_LAST_LO:
            self._latch[(idx, RTT_LAST_HI)] = (c.rtt_last >> 32) & MASK32
            return c.rtt_last & MASK32
        if off == RTT_LAST_HI:
            return self._latch.get((idx, RTT_LAST_HI), (c.rtt_last >> 32) & MASK32)
        raise UnmappedAddress(f"address {addr:#06x} is not mapped")

    def write_register(self, addr: int, value: int) -> WriteResult | None:
        kind, idx, off = self._decode(addr)
        if kind == "freq":
            return self.clocking.write_frequency(idx, (value & MASK32) * MHZ, self._now())
        if off != CONTROL:
            raise PermissionError(f"register {addr:#06x} is read-only")
        c = self.counters[self._by_index[idx]]
        c.enables = [bool(value >> i & 1) for i in range(4)]
        if value & CTRL_RESET:
            c.reset_manual()
        return None

    def reset_counters(self, pos: Position | None = None) -> None:
        targets = self.counters.values() if pos is None else [self.counters[pos]]
        for c in targets:
            c.reset_manual()

    def register_table(self) -> list[dict]:
        """Documentation rows: address, owner, statistic, width, reset behavior."""
        rows = []
        for isl in sorted(self.clocking.registers):
            rows.append({"address": f"{self.freq_address(isl):#06x}", "owner": f"island {isl}",
                         "statistic": "frequency_mhz", "width": 32, "reset": "initial frequency"})
        for pos, i in sorted(self.tile_index.items(), key=lambda kv: kv[1]):
            for off, name, reset in TILE_REGISTERS:
                rows.append({"address": f"{self.tile_address(i, off):#06x}", "owner": f"tile ({pos[0]},{pos[1]})",
                             "statistic": name, "width": 32, "reset": reset})
        return rows

    # -- traffic ----------------------------------------------------------------
    def note_ejection(self, pos: Position) -> None:
        self.ejected[pos] += 1

    def rate(self, count: int, window_fs: int, t_end: int) -> RatePoint:
        if window_fs <= 0:
            raise ValueError("sampling window must be positive")
        return RatePoint(t_end, count / (window_fs / 1e15) / 1e6)

"""Assembly of a runnable SoC from its description, plus experiment helpers."""

from __future__ import annotations

from dataclasses import dataclass

from vespa_sim.clocking import Clocking, WriteResult
from vespa_sim.config import Position, SoCDescription, TileKind, validate
from vespa_sim.engine import FS_PER_S, Kernel
from vespa_sim.monitor import Monitor, RatePoint
from vespa_sim.noc import Network
from vespa_sim.tiles import MemTile, MraTile, StubTile, Tile, TrafficGenTile


class SimulationFault(RuntimeError):
    """A run could not reach its goal (e.g. an invocation never finished)."""


@dataclass(frozen=True)
class ThroughputResult:
    position: Position
    accel: str
    replication: int
    items: int
    bytes_read: int
    t_start: int
    t_done: int
    exec_cycles: int
    rtt_mean_fs: float

    @property
    def mbps(self) -> float:
        """Input bytes per simulated second, in MB/s (10^6 bytes/s)."""
        return self.bytes_read / ((self.t_done - self.t_start) / FS_PER_S) / 1e6


class Soc:
    """A simulated SoC instance.

    ``seed`` feeds every stochastic component (traffic-generator start
    offsets); two instances with equal descriptions and seeds behave
    identically.
    """

    def __init__(self, desc: SoCDescription, seed: int = 0, watchdog_cycles: int = 1_000_000):
        problems = validate(desc)
        if problems:
            raise ValueError("invalid SoC description: " + "; ".join(problems))
        self.desc = desc
        self.seed = seed
        self.kernel = Kernel()
        self.clocking = Clocking(desc, self.kernel)
        self.net = Network(self.kernel, desc.rows, desc.cols, desc.noc, self.clocking, watchdog_cycles)
        self.monitor = Monitor(desc, self.clocking, now=lambda: self.kernel.now)
        self.net.on_eject = lambda pkt, t: self.monitor.note_ejection(pkt.dst)
        mem_pos = desc.mem_position
        self.tiles: dict[Position, Tile] = {}
        for spec in desc.tiles:
            counters = self.monitor.counters[spec.position]
            common = (self.kernel, self.net, self.clocking, counters)
            if spec.kind is TileKind.MEM:
                tile: Tile = MemTile(spec, desc.memory, *common)
            elif spec.kind in (TileKind.ACCEL, TileKind.TG):
                extra = dict(mem_pos=mem_pos, bridge_width=desc.bridge_width_bytes,
                             buffer_depth=desc.tile_buffer_depth, bridge_policy=desc.bridge_policy)
                profile = desc.profile(spec.accel)
                if spec.kind is TileKind.TG:
                    tile = TrafficGenTile(spec, profile, *common, seed=seed, **extra)
                else:
                    tile = MraTile(spec, profile, *common, **extra)
            else:
                tile = StubTile(spec, *common)
            self.tiles[spec.position] = tile
        self.mem: MemTile = self.tiles[mem_pos]  # type: ignore[assignment]
        for tg in self.traffic_generators:
            if tg.spec.enabled_at_start:
                tg.set_enabled(True, 0)

    # -- lookups -----------------------------------------------------------------
    @property
    def now(self) -> int:
        return self.kernel.now

    @property
    def traffic_generators(self) -> list[TrafficGenTile]:
        return [t for t in self.tiles.values() if isinstance(t, TrafficGenTile)]

    def tile(self, ref: Position | str) -> Tile:
        if isinstance(ref, str):
            return self.tiles[self.desc.slot(ref).position]
        return self.tiles[tuple(ref)]

    def accelerator(self, ref: Position | str) -> MraTile:
        tile = self.tile(ref)
        if not isinstance(tile, MraTile) or isinstance(tile, TrafficGenTile):
            raise TypeError(f"tile {tile.pos} is not an accelerator slot")
        return tile

    # -- control -----------------------------------------------------------------
    def run_until(self, t: int) -> None:
        self.kernel.run_until(t)

    def run_for(self, dt: int) -> None:
        self.kernel.run_until(self.kernel.now + dt)

    def set_freq(self, island: int | str, freq_hz: int) -> WriteResult:
        return self.clocking.write_frequency(self.desc.island(island).id, freq_hz, self.kernel.now)

    def set_active_tgs(self, count: int) -> None:
        """Enable the first ``count`` traffic generators (row-major), disable the rest."""
        tgs = self.traffic_generators
        if not 0 <= count <= len(tgs):
            raise ValueError(f"active TG count must be in 0..{len(tgs)}, got {count}")
        for i, tg in enumerate(tgs):
            tg.set_enabled(i < count, self.kernel.now)

    def reset_counters(self) -> None:
        self.monitor.reset_counters()

    # -- experiments -------------------------------------------------------------
    def measure_throughput(self, ref: Position | str, budget_bytes: int,
                           timeout_fs: int = 10 * FS_PER_S) -> ThroughputResult:
        """Run one invocation moving ``budget_bytes`` of input and time it."""
        tile = self.accelerator(ref)
        prof = tile.profile
        items = max(1, budget_bytes // prof.bytes_read_per_item)
        tile.counters.reset_manual()
        inv = tile.start_invocation(items, self.kernel.now)
        stop = self.kernel.stop

        def done(finished) -> None:
            if finished is inv:
                stop()

        tile.on_complete.append(done)
        try:
            deadline = self.kernel.now + timeout_fs
            while inv.t_done is None:
                if self.kernel.peek() is None or self.kernel.now >= deadline:
                    raise SimulationFault(f"invocation on {tile.pos} did not complete")
                self.kernel.run_until(deadline)
        finally:
            tile.on_complete.remove(done)
        c = tile.counters
        return ThroughputResult(tile.pos, prof.name, tile.k, items, items * prof.bytes_read_per_item,
                                inv.t_start, inv.t_done, c.exec_time, c.rtt_mean)

    def sample_traffic(self, probe: Position, window_fs: int) -> RatePoint:
        """Advance by ``window_fs`` and report the packet rate ejected at ``probe``."""
        before = self.monitor.ejected[probe]
        self.run_for(window_fs)
        return self.monitor.rate(self.monitor.ejected[probe] - before, window_fs, self.kernel.now)

    def mem_busy_fraction(self, t0: int, t1: int) -> float:
        return self.mem.busy_fraction(t0, t1)

    def drain(self, timeout_fs: int = FS_PER_S) -> None:
        """Stop all generators and accelerator loops, then empty the network."""
        for t in self.tiles.values():
            if isinstance(t, MraTile):
                t.request_stop()
        for tg in self.traffic_generators:
            tg.enabled = False
        self.kernel.run_until(self.kernel.now + timeout_fs)
        self.net.assert_drained()

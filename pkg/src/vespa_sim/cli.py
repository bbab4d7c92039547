"""Command-line front end: ``vespa-sim run | sweep | profile``.

Units in every output file: times in fs, frequencies in Hz, throughput in
MB/s (10^6 bytes/s), traffic in Mpkt/s.  Floats are written with a fixed
number of decimals so that equal runs give byte-identical files.

Exit codes: 0 success, 1 configuration error, 2 simulation fault,
3 at least one failed sweep point.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterator, Sequence

import yaml

from vespa_sim import area
from vespa_sim.config import (
    ConfigError,
    SoCDescription,
    TileKind,
    _freq,
    dump_description,
    resolve_config,
)
from vespa_sim.engine import LivelockError, SchedulingError, parse_time
from vespa_sim.noc import DeadlockError
from vespa_sim.soc import SimulationFault, Soc
from vespa_sim.tiles import MraTile, TrafficGenTile

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAULT = 2
EXIT_PARTIAL = 3

DEFAULT_BUDGET_BYTES = 1 << 20
DEFAULT_WINDOW_FS = parse_time("1ms")
DEFAULT_WARMUP_FS = parse_time("50us")
#: Simulated-time limit for one budget-mode run.
RUN_TIMEOUT_FS = parse_time("100s")

METRICS_COLUMNS = ("tile", "row", "col", "kind", "name", "accel", "replication", "island", "freq_hz",
                   "throughput_mbps", "bytes_read", "invocations", "exec_time_cycles", "pkts_in",
                   "pkts_out", "rtt_count", "rtt_mean_fs", "rtt_last_fs")
TRACE_COLUMNS = ("time_fs", "probe", "stat", "value")
SWEEP_COLUMNS = ("point", "status", "seed", "placement", "active_tgs", "slots", "island_freqs_hz", "measured",
                 "throughput_mbps", "primary_slot", "primary_accel", "primary_replication",
                 "primary_throughput_mbps", "lut", "ff", "bram", "dsp", "capacity_violation",
                 "mem_busy_fraction", "sim_time_fs", "error")
FREQ_COLUMNS = ("time_fs", "island", "freq_hz")
TRAFFIC_COLUMNS = ("time_fs", "window_fs", "mpkts")
EVENT_COLUMNS = ("time_fs", "command", "result")

FAULTS = (SimulationFault, DeadlockError, LivelockError, SchedulingError)


def _f(x: float) -> str:
    return f"{x:.6f}"


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)


# ---------------------------------------------------------------------------
# single run


@dataclass
class RunOutput:
    metrics: list[dict]
    trace: list[dict]
    throughput: dict[str, float]
    mem_busy_fraction: float
    sim_time_fs: int


def _slot_label(tile: MraTile) -> str:
    return tile.spec.name or f"{tile.pos[0]},{tile.pos[1]}"


def _accel_tiles(soc: Soc, measure: Sequence[str] | None) -> list[MraTile]:
    tiles = [t for t in soc.tiles.values() if isinstance(t, MraTile) and not isinstance(t, TrafficGenTile)]
    if measure is None:
        return tiles
    by_label = {_slot_label(t): t for t in tiles}
    unknown = [m for m in measure if m not in by_label]
    if unknown:
        raise ConfigError(f"no accelerator slot named {', '.join(unknown)}")
    return [by_label[m] for m in measure]


def _trace_sample(soc: Soc, t: int, window: int, ejected_before: int, rows: list[dict]) -> None:
    mem = soc.desc.mem_position
    rate = soc.monitor.rate(soc.monitor.ejected[mem] - ejected_before, window, t)
    rows.append({"time_fs": t, "probe": f"tile {mem[0]},{mem[1]}", "stat": "incoming_mpkts",
                 "value": _f(rate.mpkts)})
    for isl in soc.desc.islands:
        rows.append({"time_fs": t, "probe": f"island {isl.name or isl.id}", "stat": "freq_hz",
                     "value": soc.clocking.effective_freq(isl.id, t)})


def simulate_run(desc: SoCDescription, seed: int = 0, *, duration_fs: int | None = None,
                 budget_bytes: int = DEFAULT_BUDGET_BYTES, window_fs: int = DEFAULT_WINDOW_FS,
                 warmup_fs: int = DEFAULT_WARMUP_FS, measure: Sequence[str] | None = None) -> RunOutput:
    """Simulate one configuration.

    Budget mode (``duration_fs`` is None): after ``warmup_fs`` every
    measured slot starts one invocation reading ``budget_bytes`` and the
    run ends when all have finished; throughput is input bytes over each
    slot's own invocation time.  Duration mode: measured slots loop their
    profile for exactly ``duration_fs`` and throughput is input bytes
    consumed over the duration.
    """
    if window_fs <= 0:
        raise ConfigError("sampling window must be positive")
    soc = Soc(desc, seed=seed)
    tiles = _accel_tiles(soc, measure)
    mem = desc.mem_position
    trace: list[dict] = []
    t_prev, ej_prev = 0, 0

    def advance_to(t_end: int) -> None:
        nonlocal t_prev, ej_prev
        while t_prev < t_end:
            t = min(t_prev + window_fs, t_end)
            soc.run_until(t)
            _trace_sample(soc, t, t - t_prev, ej_prev, trace)
            t_prev, ej_prev = t, soc.monitor.ejected[mem]

    throughput: dict[str, float] = {}
    bytes_read: dict[str, int] = {}
    if duration_fs is None:
        advance_to(warmup_fs)
        invs = {}
        for tile in tiles:
            tile.counters.reset_manual()
            items = max(1, budget_bytes // tile.profile.bytes_read_per_item)
            invs[_slot_label(tile)] = tile.start_invocation(items)
        deadline = soc.now + RUN_TIMEOUT_FS
        while any(inv.t_done is None for inv in invs.values()):
            if soc.now >= deadline or soc.kernel.peek() is None:
                raise SimulationFault("accelerator invocation did not complete")
            advance_to(t_prev + window_fs)
        for label, inv in invs.items():
            bytes_read[label] = inv.bytes_read
            throughput[label] = inv.bytes_read / (inv.duration / 1e15) / 1e6
        t0 = warmup_fs
    else:
        if duration_fs > 0:
            for tile in tiles:
                tile.loop = True
                tile.start_invocation(tile.profile.items_per_invocation)
        advance_to(duration_fs)
        for tile in tiles:
            label = _slot_label(tile)
            done = sum(inv.bytes_read for inv in tile.history)
            if tile.busy:
                done += tile.invocation.bytes_read
            bytes_read[label] = done
            throughput[label] = done / (duration_fs / 1e15) / 1e6 if duration_fs else 0.0
        t0 = 0

    t_end = soc.now
    metrics = []
    measured = {_slot_label(t): t for t in tiles}
    for i, spec in enumerate(desc.tiles):
        tile = soc.tiles[spec.position]
        c = tile.counters
        isl = soc.clocking.tile_island[spec.position]
        label = _slot_label(tile) if isinstance(tile, MraTile) else ""
        is_measured = label in measured and measured[label] is tile
        metrics.append({
            "tile": i, "row": spec.position[0], "col": spec.position[1], "kind": spec.kind.value,
            "name": spec.name or "", "accel": spec.accel or "",
            "replication": spec.replication if spec.kind is TileKind.ACCEL else "",
            "island": desc.island(isl).name or isl,
            "freq_hz": soc.clocking.effective_freq(isl, t_end),
            "throughput_mbps": _f(throughput[label]) if is_measured else "",
            "bytes_read": bytes_read[label] if is_measured else "",
            "invocations": len(tile.history) if isinstance(tile, MraTile) else "",
            "exec_time_cycles": c.exec_time_at(t_end),
            "pkts_in": c.pkts_in, "pkts_out": c.pkts_out, "rtt_count": c.rtt_count,
            "rtt_mean_fs": _f(c.rtt_mean), "rtt_last_fs": c.rtt_last,
        })
    busy = soc.mem_busy_fraction(t0, t_end) if t_end > t0 else 0.0
    return RunOutput(metrics, trace, throughput, busy, t_end)


# ---------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SlotChoice:
    accel: str
    replication: int


@dataclass
class SweepSpace:
    """Cartesian design space.  Dimensions are enumerated in this order:
    placement, slots (by name), island frequencies (by name), active TG
    count, seed.  The last dimension varies fastest."""

    base: str = "paper-testbed"
    slots: dict[str, list[SlotChoice]] = field(default_factory=dict)
    islands: dict[str, list[int]] = field(default_factory=dict)
    tgs: list[int] = field(default_factory=lambda: [0])
    placements: list[str] = field(default_factory=lambda: ["default"])
    seeds: list[int] = field(default_factory=lambda: [0])
    measure: list[str] | None = None
    empty: bool = False

    @property
    def size(self) -> int:
        if self.empty:
            return 0
        n = len(self.placements) * len(self.tgs) * len(self.seeds)
        for choices in itertools.chain(self.slots.values(), self.islands.values()):
            n *= len(choices)
        return n

    def points(self) -> Iterator[dict]:
        if self.empty:
            return
        slot_names = sorted(self.slots)
        isl_names = list(self.islands)
        dims = [self.placements, *(self.slots[s] for s in slot_names),
                *(self.islands[i] for i in isl_names), self.tgs, self.seeds]
        for combo in itertools.product(*dims):
            placement, rest = combo[0], combo[1:]
            slots = dict(zip(slot_names, rest[:len(slot_names)]))
            rest = rest[len(slot_names):]
            freqs = dict(zip(isl_names, rest[:len(isl_names)]))
            tgs, seed = rest[len(isl_names):]
            yield {"placement": placement, "slots": slots, "islands": freqs, "tgs": tgs, "seed": seed}


def _as_list(value: Any, where: str) -> list:
    if isinstance(value, list):
        return value
    if value is None:
        raise ConfigError(f"{where}: expected a value or list")
    return [value]


def parse_space(text: str) -> SweepSpace:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"sweep space: {exc}") from None
    if doc is None:
        return SweepSpace(empty=True)
    if not isinstance(doc, dict):
        raise ConfigError("sweep space: expected a mapping")
    unknown = set(doc) - {"base", "slots", "islands", "tgs", "placements", "seeds", "measure"}
    if unknown:
        raise ConfigError(f"sweep space: unknown key(s) {', '.join(sorted(unknown))}")
    space = SweepSpace(base=str(doc.get("base", "paper-testbed")))
    for name, d in (doc.get("slots") or {}).items():
        if not isinstance(d, dict) or "accel" not in d:
            raise ConfigError(f"slots.{name}: needs an 'accel' list")
        accels = [str(a) for a in _as_list(d["accel"], f"slots.{name}.accel")]
        ks = [int(k) for k in _as_list(d.get("replication", 1), f"slots.{name}.replication")]
        space.slots[str(name)] = [SlotChoice(a, k) for a in accels for k in ks]
    for name, freqs in (doc.get("islands") or {}).items():
        space.islands[str(name)] = [_freq(f, f"islands.{name}") for f in _as_list(freqs, f"islands.{name}")]
    if "tgs" in doc:
        space.tgs = [int(n) for n in _as_list(doc["tgs"], "tgs")]
    if "placements" in doc:
        space.placements = [str(p) for p in _as_list(doc["placements"], "placements")]
        bad = set(space.placements) - {"default", "swapped"}
        if bad:
            raise ConfigError(f"placements: unknown variant(s) {', '.join(sorted(bad))}")
    if "seeds" in doc:
        space.seeds = [int(s) for s in _as_list(doc["seeds"], "seeds")]
    if "measure" in doc:
        space.measure = [str(m) for m in _as_list(doc["measure"], "measure")]
    return space


def point_description(base: SoCDescription, point: dict) -> tuple[SoCDescription, dict[str, str]]:
    """Materialize one sweep point; also returns the slot-name mapping
    introduced by its placement variant."""
    desc = base
    for name, choice in point["slots"].items():
        desc = desc.with_tile(desc.slot(name).position, accel=choice.accel, replication=choice.replication)
    for name, hz in point["islands"].items():
        desc = desc.with_island_freq(name, hz)
    desc = desc.with_tg_enabled(point["tgs"])
    return _apply_placement(desc, point["placement"])


def _apply_placement(desc: SoCDescription, placement: str) -> tuple[SoCDescription, dict[str, str]]:
    if placement == "default":
        return desc, {}
    a1, a2 = desc.slot("A1"), desc.slot("A2")
    desc = desc.with_tile(a1.position, accel=a2.accel, replication=a2.replication)
    desc = desc.with_tile(a2.position, accel=a1.accel, replication=a1.replication)
    return desc, {"A1": "A2", "A2": "A1"}


def _kv(d: dict[str, Any]) -> str:
    return ";".join(f"{k}={v}" for k, v in d.items())


def _sweep_worker(job: tuple) -> dict:
    index, space, point, budget, window, warmup = job
    row: dict[str, Any] = {c: "" for c in SWEEP_COLUMNS}
    row.update(point=index, seed=point["seed"], placement=point["placement"], active_tgs=point["tgs"],
               island_freqs_hz=_kv(point["islands"]))
    try:
        base = resolve_config(space.base)
        desc, remap = point_description(base, point)
        accel_slots = [t for t in desc.tiles if t.kind is TileKind.ACCEL]
        row["slots"] = ";".join(f"{t.name or t.position}={t.accel}x{t.replication}" for t in accel_slots)
        measure = None if space.measure is None else [remap.get(m, m) for m in space.measure]
        out = simulate_run(desc, point["seed"], budget_bytes=budget, window_fs=window, warmup_fs=warmup,
                           measure=measure)
        row["measured"] = ";".join(out.throughput)
        row["throughput_mbps"] = _kv({k: _f(v) for k, v in out.throughput.items()})
        if out.throughput:
            first = next(iter(out.throughput))
            spec = desc.slot(first) if any(t.name == first for t in desc.tiles) else None
            row.update(primary_slot=first, primary_throughput_mbps=_f(out.throughput[first]))
            if spec is not None:
                row.update(primary_accel=spec.accel, primary_replication=spec.replication)
        totals = dict.fromkeys(area.RESOURCES, 0)
        violation = False
        for t in accel_slots:
            est = area.estimate(t.accel, t.replication)
            violation |= est.capacity_violation
            for r in area.RESOURCES:
                totals[r] += getattr(est.resources, r)
        row.update(totals, capacity_violation=violation or not
                   area.ResourceVector(**totals).fits(area.device()),
                   mem_busy_fraction=_f(out.mem_busy_fraction), sim_time_fs=out.sim_time_fs, status="ok")
    except Exception as exc:  # one bad point must not abort the sweep
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return row


def run_sweep(space: SweepSpace, *, budget_bytes: int = DEFAULT_BUDGET_BYTES, window_fs: int = DEFAULT_WINDOW_FS,
              warmup_fs: int = DEFAULT_WARMUP_FS, jobs: int = 1) -> list[dict]:
    """Evaluate every point; rows come back in enumeration order."""
    work = [(i, space, p, budget_bytes, window_fs, warmup_fs) for i, p in enumerate(space.points())]
    if jobs <= 1 or len(work) <= 1:
        return [_sweep_worker(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_worker, work))


# ---------------------------------------------------------------------------
# profile


@dataclass(frozen=True)
class Command:
    time_fs: int
    action: str
    args: tuple


@dataclass
class Schedule:
    commands: list[Command] = field(default_factory=list)
    duration_fs: int | None = None

    @property
    def end(self) -> int:
        return self.commands[-1].time_fs if self.commands else 0


_ACTIONS = {"set_freq", "tg", "active_tgs", "reset_counters", "sample"}


def parse_schedule(text: str) -> Schedule:
    """Schedule document::

        duration: 8ms            # optional
        commands:
          - {at: 1ms, set_freq: {island: A1, hz: 30MHz}}
          - {at: 2ms, active_tgs: 11}
          - {at: 2ms, tg: {pos: [1, 0], enabled: false}}
          - {at: 3ms, reset_counters: true}
          - {at: 4ms, sample: true}

    Command times must be strictly increasing.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"schedule: {exc}") from None
    doc = doc or {}
    if not isinstance(doc, dict) or set(doc) - {"duration", "commands"}:
        raise ConfigError("schedule: expected a mapping with 'duration' and 'commands'")
    sched = Schedule(duration_fs=parse_time(doc["duration"]) if "duration" in doc else None)
    prev = -1
    for i, entry in enumerate(doc.get("commands") or []):
        where = f"commands[{i}]"
        if not isinstance(entry, dict) or "at" not in entry:
            raise ConfigError(f"{where}: needs an 'at' time")
        keys = set(entry) - {"at"}
        if len(keys) != 1 or not keys <= _ACTIONS:
            raise ConfigError(f"{where}: exactly one of {', '.join(sorted(_ACTIONS))} required")
        t = parse_time(entry["at"])
        if t <= prev:
            raise ConfigError(f"{where}: command times must be strictly increasing")
        prev = t
        action = keys.pop()
        value = entry[action]
        if action == "set_freq":
            if not isinstance(value, dict) or {"island", "hz"} - set(value):
                raise ConfigError(f"{where}.set_freq: needs island and hz")
            args: tuple = (value["island"], _freq(value["hz"], f"{where}.set_freq.hz"))
        elif action == "tg":
            if not isinstance(value, dict) or {"pos", "enabled"} - set(value):
                raise ConfigError(f"{where}.tg: needs pos and enabled")
            args = (tuple(value["pos"]), bool(value["enabled"]))
        elif action == "active_tgs":
            args = (int(value),)
        else:
            args = ()
        sched.commands.append(Command(t, action, args))
    return sched


@dataclass
class ProfileOutput:
    freq: list[dict]
    traffic: list[dict]
    events: list[dict]
    plot: dict


def _apply(soc: Soc, cmd: Command) -> str:
    try:
        if cmd.action == "set_freq":
            return soc.set_freq(cmd.args[0], cmd.args[1]).value
        if cmd.action == "tg":
            tile = soc.tiles.get(cmd.args[0])
            if not isinstance(tile, TrafficGenTile):
                return f"rejected: no traffic generator at {cmd.args[0]}"
            tile.set_enabled(cmd.args[1])
            return "ok"
        if cmd.action == "active_tgs":
            soc.set_active_tgs(cmd.args[0])
            return "ok"
        if cmd.action == "reset_counters":
            soc.reset_counters()
        return "ok"
    except (KeyError, ValueError) as exc:
        return f"rejected: {exc}"


def simulate_profile(desc: SoCDescription, schedule: Schedule, seed: int = 0, *,
                     window_fs: int = DEFAULT_WINDOW_FS, duration_fs: int | None = None) -> ProfileOutput:
    """Run every accelerator slot in a loop while applying ``schedule``.

    MEM traffic is sampled at each multiple of ``window_fs`` and at every
    ``sample`` command; island frequencies are recorded at the same points
    and right after each command.  The default duration is the last
    command time plus four windows.
    """
    if window_fs <= 0:
        raise ConfigError("sampling window must be positive")
    if duration_fs is None:
        duration_fs = schedule.duration_fs if schedule.duration_fs is not None else schedule.end + 4 * window_fs
    soc = Soc(desc, seed=seed)
    for tile in _accel_tiles(soc, None):
        tile.loop = True
        tile.start_invocation(tile.profile.items_per_invocation)
    mem = desc.mem_position
    labels = {isl.id: isl.name or str(isl.id) for isl in desc.islands}
    freq_rows: list[dict] = []
    traffic: list[dict] = []
    events: list[dict] = []

    def record_freqs(t: int) -> None:
        for isl, label in labels.items():
            freq_rows.append({"time_fs": t, "island": label, "freq_hz": soc.clocking.effective_freq(isl, t)})

    boundaries = set(range(window_fs, duration_fs + 1, window_fs))
    boundaries |= {c.time_fs for c in schedule.commands if c.action == "sample" and 0 < c.time_fs <= duration_fs}
    by_time: dict[int, list[Command]] = {}
    for c in schedule.commands:
        if c.time_fs <= duration_fs:
            by_time.setdefault(c.time_fs, []).append(c)
    record_freqs(0)
    last_t, last_count = 0, 0
    for t in sorted(boundaries | set(by_time)):
        soc.run_until(t)
        if t in boundaries:
            count = soc.monitor.ejected[mem]
            rate = soc.monitor.rate(count - last_count, t - last_t, t)
            traffic.append({"time_fs": t, "window_fs": t - last_t, "mpkts": _f(rate.mpkts)})
            last_t, last_count = t, count
        if t in by_time:
            for c in by_time[t]:
                result = _apply(soc, c)
                events.append({"time_fs": t, "command": f"{c.action} {' '.join(map(str, c.args))}".strip(),
                               "result": result})
                if result not in ("ok", "accepted", "queued"):
                    print(f"[{t} fs] {c.action}: {result}", file=sys.stderr)
        record_freqs(t)
    series = [{"label": f"{label} frequency", "panel": "frequency", "x_label": "time (fs)",
               "y_label": "frequency (Hz)",
               "x": [r["time_fs"] for r in freq_rows if r["island"] == label],
               "y": [r["freq_hz"] for r in freq_rows if r["island"] == label]} for label in labels.values()]
    series.append({"label": "MEM incoming traffic", "panel": "traffic", "x_label": "time (fs)",
                   "y_label": "traffic (Mpkt/s)", "x": [r["time_fs"] for r in traffic],
                   "y": [float(r["mpkts"]) for r in traffic]})
    return ProfileOutput(freq_rows, traffic, events, {"series": series})


def render_plot(plot: dict, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_f, ax_t) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
    for s in plot["series"]:
        ax = ax_f if s["panel"] == "frequency" else ax_t
        xs = [x / 1e12 for x in s["x"]]
        if s["panel"] == "frequency":
            ax.step(xs, [y / 1e6 for y in s["y"]], where="post", label=s["label"])
        else:
            ax.plot(xs, s["y"], label=s["label"])
    ax_f.set_ylabel("frequency (MHz)")
    ax_t.set_ylabel("Mpkt/s")
    ax_t.set_xlabel("time (ms)")
    ax_f.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# ---------------------------------------------------------------------------
# entry point


def _time_arg(text: str) -> int:
    try:
        return parse_time(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vespa-sim", description="Tile-based SoC simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0, help="seed for stochastic components (default 0)")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory (created if missing)")
        p.add_argument("--window", type=_time_arg, default=DEFAULT_WINDOW_FS,
                       help="sampling window, e.g. 250us (default 1ms)")

    p = sub.add_parser("run", help="simulate one configuration")
    p.add_argument("--config", default="paper-testbed", help="configuration file or built-in scenario name")
    p.add_argument("--duration", type=_time_arg, help="fixed simulated duration (default: budget mode)")
    p.add_argument("--budget-bytes", type=int, default=DEFAULT_BUDGET_BYTES,
                   help="input bytes per measured slot in budget mode (default 1 MiB)")
    p.add_argument("--warmup", type=_time_arg, default=DEFAULT_WARMUP_FS,
                   help="time before measured slots start in budget mode (default 50us)")
    p.add_argument("--measure", action="append", help="slot to measure (repeatable; default all)")
    common(p)

    p = sub.add_parser("sweep", help="evaluate a Cartesian design space")
    p.add_argument("space", type=Path, help="sweep space YAML")
    p.add_argument("--config", help="override the space's base configuration")
    p.add_argument("--budget-bytes", type=int, default=DEFAULT_BUDGET_BYTES)
    p.add_argument("--warmup", type=_time_arg, default=DEFAULT_WARMUP_FS)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--emit-configs", action="store_true", help="also write each point's configuration YAML")
    common(p)

    p = sub.add_parser("profile", help="apply a run-time schedule and record frequency and MEM traffic")
    p.add_argument("--config", default="paper-testbed")
    p.add_argument("--schedule", type=Path, help="schedule YAML (default: empty schedule)")
    p.add_argument("--duration", type=_time_arg, help="override the schedule's duration")
    p.add_argument("--render", type=Path, help="also render the two panels to this image file")
    common(p)
    return ap


def _cmd_run(args) -> int:
    desc = resolve_config(args.config)
    out = simulate_run(desc, args.seed, duration_fs=args.duration, budget_bytes=args.budget_bytes,
                       window_fs=args.window, warmup_fs=args.warmup, measure=args.measure)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_csv(args.out / "metrics.csv", METRICS_COLUMNS, out.metrics)
    _write_csv(args.out / "trace.csv", TRACE_COLUMNS, out.trace)
    for label, mbps in out.throughput.items():
        print(f"{label}: {mbps:.4f} MB/s")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    space = parse_space(args.space.read_text(encoding="utf-8"))
    if args.config:
        space.base = args.config
    base = resolve_config(space.base)
    points = list(space.points())
    print(f"sweep: {space.size} points", file=sys.stderr)
    args.out.mkdir(parents=True, exist_ok=True)
    if args.emit_configs:
        cfg_dir = args.out / "configs"
        cfg_dir.mkdir(exist_ok=True)
        for i, point in enumerate(points):
            try:
                desc, _ = point_description(base, point)
            except (KeyError, ValueError):
                continue
            (cfg_dir / f"point-{i:04d}.yaml").write_text(dump_description(desc), encoding="utf-8")
    rows = run_sweep(space, budget_bytes=args.budget_bytes, window_fs=args.window, warmup_fs=args.warmup,
                     jobs=args.jobs)
    _write_csv(args.out / "sweep.csv", SWEEP_COLUMNS, rows)
    failed = sum(r["status"] != "ok" for r in rows)
    if failed:
        print(f"sweep: {failed} of {len(rows)} points failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_profile(args) -> int:
    desc = resolve_config(args.config)
    schedule = parse_schedule(args.schedule.read_text(encoding="utf-8")) if args.schedule else Schedule()
    out = simulate_profile(desc, schedule, args.seed, window_fs=args.window, duration_fs=args.duration)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_csv(args.out / "freq_profile.csv", FREQ_COLUMNS, out.freq)
    _write_csv(args.out / "mem_traffic.csv", TRAFFIC_COLUMNS, out.traffic)
    _write_csv(args.out / "events.csv", EVENT_COLUMNS, out.events)
    (args.out / "plot_data.json").write_text(json.dumps(out.plot, indent=1) + "\n", encoding="utf-8")
    if args.render:
        render_plot(out.plot, args.render)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "sweep": _cmd_sweep, "profile": _cmd_profile}[args.command]
    try:
        return handler(args)
    except FAULTS as exc:
        print(f"vespa-sim: simulation fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"vespa-sim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())

"""Static SoC description: data model, YAML loading/dumping, validation.

The configuration document is YAML with an explicit ``schema_version``.
Top-level keys: ``grid``, ``tiles``, ``islands``, ``noc``, ``memory``,
``profiles`` plus the optional ``dfs`` and ``bridge`` sections.  All
frequencies are in Hz and all positions are 0-based ``[row, col]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Any, Union

import yaml

SCHEMA_VERSION = 1
MHZ = 1_000_000

#: Default DFS reconfiguration latency (10 us).
DEFAULT_RECONFIG_LATENCY_FS = 10_000_000_000

Position = tuple[int, int]


class ConfigError(ValueError):
    """Malformed or invalid configuration document."""


class TileKind(str, enum.Enum):
    CPU = "CPU"
    MEM = "MEM"
    IO = "IO"
    ACCEL = "ACCEL"
    TG = "TG"


@dataclass(frozen=True)
class TileSpec:
    position: Position
    kind: TileKind
    accel: str | None = None
    replication: int = 1
    enabled_at_start: bool = False
    name: str | None = None


@dataclass(frozen=True)
class FixedClock:
    freq_hz: int

    @property
    def initial_hz(self) -> int:
        return self.freq_hz


@dataclass(frozen=True)
class DfsClock:
    min_hz: int
    max_hz: int
    step_hz: int
    initial_hz: int
    reconfig_latency_fs: int = DEFAULT_RECONFIG_LATENCY_FS

    def legal(self) -> list[int]:
        return list(range(self.min_hz, self.max_hz + 1, self.step_hz))

    def is_legal(self, freq_hz: int) -> bool:
        return (
            self.min_hz <= freq_hz <= self.max_hz
            and (freq_hz - self.min_hz) % self.step_hz == 0
        )


Clock = Union[FixedClock, DfsClock]


@dataclass(frozen=True)
class IslandSpec:
    id: int
    tiles: tuple[Position, ...]
    routers: tuple[Position, ...]
    clock: Clock
    name: str | None = None

    @property
    def is_dfs(self) -> bool:
        return isinstance(self.clock, DfsClock)


@dataclass(frozen=True)
class MemModel:
    bytes_per_cycle: int = 2
    latency_cycles: int = 40


@dataclass(frozen=True)
class NocParams:
    link_width_bytes: int = 8
    router_latency_cycles: int = 1
    fifo_depth: int = 4
    resync_depth: int = 2


@dataclass(frozen=True)
class AcceleratorProfile:
    """Behavioral model of one accelerator, fitted to a throughput target."""

    name: str
    items_per_invocation: int
    bytes_read_per_item: int
    bytes_written_per_item: int
    compute_cycles_per_item: float
    burst_bytes: int
    boundedness: str = "compute_bound"

    @property
    def items_per_burst(self) -> int:
        return max(1, self.burst_bytes // self.bytes_read_per_item)


@dataclass(frozen=True)
class SoCDescription:
    rows: int
    cols: int
    tiles: tuple[TileSpec, ...]
    islands: tuple[IslandSpec, ...]
    memory: MemModel = MemModel()
    noc: NocParams = NocParams()
    profiles: tuple[AcceleratorProfile, ...] = ()
    dfs_mode: str = "dual"
    busy_policy: str = "reject"
    bridge_width_bytes: int = 8
    tile_buffer_depth: int = 4
    bridge_policy: str = "round_robin"

    # lookups ---------------------------------------------------------------
    def tile_at(self, pos: Position) -> TileSpec:
        r, c = pos
        return self.tiles[r * self.cols + c]

    def tiles_of_kind(self, kind: TileKind) -> list[TileSpec]:
        return [t for t in self.tiles if t.kind is kind]

    @property
    def mem_position(self) -> Position:
        return self.tiles_of_kind(TileKind.MEM)[0].position

    def slot(self, name: str) -> TileSpec:
        for t in self.tiles:
            if t.name == name:
                return t
        raise KeyError(f"no tile named {name!r}")

    def profile(self, name: str) -> AcceleratorProfile:
        for p in self.profiles:
            if p.name == name:
                return p
        raise KeyError(f"no accelerator profile named {name!r}")

    def island(self, key: int | str) -> IslandSpec:
        for isl in self.islands:
            if isl.id == key or (isl.name is not None and isl.name == key):
                return isl
        raise KeyError(f"no island {key!r}")

    def tile_island(self, pos: Position) -> int:
        for isl in self.islands:
            if pos in isl.tiles:
                return isl.id
        raise KeyError(f"tile {pos} not in any island")

    def router_island(self, pos: Position) -> int:
        for isl in self.islands:
            if pos in isl.routers:
                return isl.id
        raise KeyError(f"router {pos} not in any island")

    # derived variants --------------------------------------------------------
    def with_tile(self, pos: Position, **changes: Any) -> "SoCDescription":
        tiles = list(self.tiles)
        i = pos[0] * self.cols + pos[1]
        tiles[i] = replace(tiles[i], **changes)
        return replace(self, tiles=tuple(tiles))

    def with_island_freq(self, key: int | str, freq_hz: int) -> "SoCDescription":
        """Copy with the island's clock starting at ``freq_hz``."""
        isl = self.island(key)
        if isinstance(isl.clock, DfsClock):
            clock: Clock = replace(isl.clock, initial_hz=freq_hz)
        else:
            clock = FixedClock(freq_hz)
        islands = tuple(replace(i, clock=clock) if i.id == isl.id else i for i in self.islands)
        return replace(self, islands=islands)

    def with_tg_enabled(self, count: int) -> "SoCDescription":
        """Copy with the first ``count`` TG tiles (row-major) enabled at start."""
        tiles = []
        seen = 0
        for t in self.tiles:
            if t.kind is TileKind.TG:
                t = replace(t, enabled_at_start=seen < count)
                seen += 1
            tiles.append(t)
        if count > seen:
            raise ValueError(f"requested {count} active TGs but only {seen} exist")
        return replace(self, tiles=tuple(tiles))


# ---------------------------------------------------------------------------
# validation


def _fmt(pos: Position) -> str:
    return f"({pos[0]},{pos[1]})"


def _check_clock(where: str, clock: Clock) -> list[str]:
    out = []
    if isinstance(clock, FixedClock):
        if clock.freq_hz <= 0:
            out.append(f"{where}: fixed frequency must be positive")
        return out
    if min(clock.min_hz, clock.step_hz) <= 0:
        out.append(f"{where}: min_hz and step_hz must be positive")
        return out
    if not clock.min_hz <= clock.max_hz:
        out.append(f"{where}: min_hz exceeds max_hz")
    elif (clock.max_hz - clock.min_hz) % clock.step_hz:
        out.append(f"{where}: frequency range not divisible by step")
    if not clock.min_hz <= clock.initial_hz <= clock.max_hz:
        out.append(f"{where}: initial frequency {clock.initial_hz} Hz out of range")
    elif (clock.initial_hz - clock.min_hz) % clock.step_hz:
        out.append(f"{where}: frequency not on step grid ({clock.initial_hz} Hz)")
    if clock.reconfig_latency_fs <= 0:
        out.append(f"{where}: reconfig_latency_fs must be positive")
    return out


def validate(desc: SoCDescription) -> list[str]:
    """Return one message per violated invariant; empty means valid."""
    errors: list[str] = []
    if desc.rows <= 0 or desc.cols <= 0:
        return [f"grid must be positive, got {desc.rows}x{desc.cols}"]
    grid = [(r, c) for r in range(desc.rows) for c in range(desc.cols)]
    if len(desc.tiles) != len(grid):
        errors.append(f"expected {len(grid)} tiles for a {desc.rows}x{desc.cols} grid, got {len(desc.tiles)}")
    else:
        for t, pos in zip(desc.tiles, grid):
            if tuple(t.position) != pos:
                errors.append(f"tile list must be row-major: found {_fmt(t.position)} where {_fmt(pos)} expected")
                break

    counts = {k: 0 for k in TileKind}
    for t in desc.tiles:
        counts[t.kind] += 1
    if counts[TileKind.MEM] != 1:
        errors.append(f"exactly one MEM tile required, found {counts[TileKind.MEM]}")
    for kind in (TileKind.CPU, TileKind.IO):
        if counts[kind] > 1:
            errors.append(f"at most one {kind.value} tile allowed, found {counts[kind]}")

    profile_names = [p.name for p in desc.profiles]
    if len(set(profile_names)) != len(profile_names):
        errors.append("duplicate accelerator profile names")
    names = [t.name for t in desc.tiles if t.name is not None]
    if len(set(names)) != len(names):
        errors.append("duplicate tile names")
    for t in desc.tiles:
        where = f"tile {_fmt(t.position)}"
        if t.kind in (TileKind.ACCEL, TileKind.TG):
            if not t.accel:
                errors.append(f"{where}: {t.kind.value} tile needs an accelerator name")
            elif t.accel not in profile_names:
                errors.append(f"{where}: unknown accelerator profile {t.accel!r}")
        if t.replication < 1:
            errors.append(f"{where}: replication factor must be >= 1")
        if t.kind is TileKind.TG and t.replication != 1:
            errors.append(f"{where}: TG tiles have a single replica")
        if t.kind is not TileKind.ACCEL and t.kind is not TileKind.TG and t.replication != 1:
            errors.append(f"{where}: replication applies to ACCEL tiles only")

    ids = [i.id for i in desc.islands]
    if len(set(ids)) != len(ids):
        errors.append("duplicate island ids")
    tile_cover: dict[Position, int] = {}
    router_cover: dict[Position, int] = {}
    for isl in desc.islands:
        where = f"island {isl.id}"
        if not isl.tiles and not isl.routers:
            errors.append(f"{where}: island is empty")
        for pos in isl.tiles:
            if tuple(pos) not in grid:
                errors.append(f"{where}: tile {_fmt(pos)} outside the grid")
            tile_cover[tuple(pos)] = tile_cover.get(tuple(pos), 0) + 1
        for pos in isl.routers:
            if tuple(pos) not in grid:
                errors.append(f"{where}: router {_fmt(pos)} outside the grid")
            router_cover[tuple(pos)] = router_cover.get(tuple(pos), 0) + 1
        errors.extend(_check_clock(where, isl.clock))
    for pos in grid:
        n = tile_cover.get(pos, 0)
        if n == 0:
            errors.append(f"tile {_fmt(pos)} not in any island")
        elif n > 1:
            errors.append(f"tile {_fmt(pos)} in {n} islands")
        n = router_cover.get(pos, 0)
        if n == 0:
            errors.append(f"router {_fmt(pos)} not in any island")
        elif n > 1:
            errors.append(f"router {_fmt(pos)} in {n} islands")

    noc = desc.noc
    if noc.link_width_bytes <= 0 or noc.fifo_depth <= 0 or noc.router_latency_cycles < 0:
        errors.append("noc: link width and FIFO depth must be positive, router latency non-negative")
    if noc.resync_depth < 2:
        errors.append("noc: resynchronizer depth must be >= 2")
    if desc.memory.bytes_per_cycle <= 0 or desc.memory.latency_cycles < 0:
        errors.append("memory: bytes_per_cycle must be positive, latency non-negative")
    if desc.dfs_mode not in ("dual", "naive"):
        errors.append(f"dfs: unknown mode {desc.dfs_mode!r}")
    if desc.busy_policy not in ("reject", "queue"):
        errors.append(f"dfs: unknown busy policy {desc.busy_policy!r}")
    if desc.bridge_width_bytes <= 0 or desc.tile_buffer_depth <= 0:
        errors.append("bridge: width and buffer depth must be positive")
    if desc.bridge_policy != "round_robin":
        errors.append(f"bridge: unknown arbitration policy {desc.bridge_policy!r}")

    for p in desc.profiles:
        where = f"profile {p.name}"
        if min(p.items_per_invocation, p.bytes_read_per_item, p.bytes_written_per_item, p.burst_bytes) <= 0:
            errors.append(f"{where}: counts must be strictly positive")
        elif p.burst_bytes > p.items_per_invocation * p.bytes_read_per_item:
            errors.append(f"{where}: burst_bytes exceeds one invocation's input")
        # zero is allowed and means the replica skips its Compute state
        if not p.compute_cycles_per_item >= 0:
            errors.append(f"{where}: compute_cycles_per_item must be non-negative")
        if p.boundedness not in ("compute_bound", "memory_bound"):
            errors.append(f"{where}: boundedness must be compute_bound or memory_bound")
    return errors


# ---------------------------------------------------------------------------
# document <-> description


def _freq(value: Any, where: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a frequency, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        text = value.strip().lower().replace(" ", "")
        for suffix, scale in (("ghz", 10**9), ("mhz", MHZ), ("khz", 1000), ("hz", 1)):
            if text.endswith(suffix):
                try:
                    number = float(text[: -len(suffix)])
                except ValueError:
                    break
                hz = number * scale
                if hz.is_integer():
                    return int(hz)
                break
    raise ConfigError(f"{where}: expected an integral frequency in Hz, got {value!r}")


def _int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return int(value)


def _mapping(value: Any, where: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(value).__name__}")
    unknown = set(value) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(sorted(map(str, unknown)))}")
    missing = required - set(value)
    if missing:
        raise ConfigError(f"{where}: missing key(s) {', '.join(sorted(missing))}")
    return value


def _pos(value: Any, where: str) -> Position:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{where}: position must be [row, col], got {value!r}")
    return (_int(value[0], where), _int(value[1], where))


def _parse_clock(value: Any, where: str) -> Clock:
    value = _mapping(value, where, {"fixed_hz", "dfs"})
    if len(value) != 1:
        raise ConfigError(f"{where}: give exactly one of fixed_hz or dfs")
    if "fixed_hz" in value:
        return FixedClock(_freq(value["fixed_hz"], f"{where}.fixed_hz"))
    d = _mapping(
        value["dfs"], f"{where}.dfs",
        {"min_hz", "max_hz", "step_hz", "initial_hz", "reconfig_latency_fs"},
        {"min_hz", "max_hz", "step_hz"},
    )
    lo = _freq(d["min_hz"], f"{where}.dfs.min_hz")
    return DfsClock(
        min_hz=lo,
        max_hz=_freq(d["max_hz"], f"{where}.dfs.max_hz"),
        step_hz=_freq(d["step_hz"], f"{where}.dfs.step_hz"),
        initial_hz=_freq(d.get("initial_hz", lo), f"{where}.dfs.initial_hz"),
        reconfig_latency_fs=_int(d.get("reconfig_latency_fs", DEFAULT_RECONFIG_LATENCY_FS),
                                 f"{where}.dfs.reconfig_latency_fs"),
    )


def _parse_profile(value: Any, where: str) -> AcceleratorProfile:
    keys = {"name", "items_per_invocation", "bytes_read_per_item", "bytes_written_per_item",
            "compute_cycles_per_item", "burst_bytes", "boundedness"}
    d = _mapping(value, where, keys, keys - {"boundedness"})
    cpi = d["compute_cycles_per_item"]
    if isinstance(cpi, bool) or not isinstance(cpi, (int, float)):
        raise ConfigError(f"{where}.compute_cycles_per_item: expected a number, got {cpi!r}")
    return AcceleratorProfile(
        name=str(d["name"]),
        items_per_invocation=_int(d["items_per_invocation"], f"{where}.items_per_invocation"),
        bytes_read_per_item=_int(d["bytes_read_per_item"], f"{where}.bytes_read_per_item"),
        bytes_written_per_item=_int(d["bytes_written_per_item"], f"{where}.bytes_written_per_item"),
        compute_cycles_per_item=float(cpi),
        burst_bytes=_int(d["burst_bytes"], f"{where}.burst_bytes"),
        boundedness=str(d.get("boundedness", "compute_bound")),
    )


def _parse_tile(value: Any, where: str) -> TileSpec:
    d = _mapping(value, where, {"pos", "kind", "accel", "replication", "enabled", "name"}, {"pos", "kind"})
    try:
        kind = TileKind(str(d["kind"]).upper())
    except ValueError:
        raise ConfigError(f"{where}.kind: unknown tile kind {d['kind']!r}") from None
    enabled = d.get("enabled", False)
    if not isinstance(enabled, bool):
        raise ConfigError(f"{where}.enabled: expected a boolean")
    return TileSpec(
        position=_pos(d["pos"], f"{where}.pos"),
        kind=kind,
        accel=None if d.get("accel") is None else str(d["accel"]),
        replication=_int(d.get("replication", 1), f"{where}.replication"),
        enabled_at_start=enabled,
        name=None if d.get("name") is None else str(d["name"]),
    )


def _parse_island(value: Any, where: str) -> IslandSpec:
    d = _mapping(value, where, {"id", "name", "tiles", "routers", "clock"}, {"id", "clock"})
    tiles = d.get("tiles") or []
    routers = d.get("routers") or []
    if routers == "all":
        raise ConfigError(f"{where}.routers: list router positions explicitly")
    return IslandSpec(
        id=_int(d["id"], f"{where}.id"),
        tiles=tuple(sorted(_pos(p, f"{where}.tiles[{i}]") for i, p in enumerate(tiles))),
        routers=tuple(sorted(_pos(p, f"{where}.routers[{i}]") for i, p in enumerate(routers))),
        clock=_parse_clock(d["clock"], f"{where}.clock"),
        name=None if d.get("name") is None else str(d["name"]),
    )


def _parse_document(doc: Any) -> SoCDescription:
    top = {"schema_version", "grid", "tiles", "islands", "noc", "memory", "profiles", "dfs", "bridge"}
    doc = _mapping(doc, "document", top, {"schema_version", "grid", "tiles", "islands"})
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported version {doc['schema_version']!r}")
    grid = _mapping(doc["grid"], "grid", {"rows", "cols"}, {"rows", "cols"})
    for key in ("tiles", "islands"):
        if not isinstance(doc[key], list):
            raise ConfigError(f"{key}: expected a list")

    noc_d = _mapping(doc.get("noc", {}), "noc",
                     {"link_width_bytes", "router_latency_cycles", "fifo_depth", "resync_depth"})
    base_noc = NocParams()
    noc = NocParams(**{k: _int(noc_d.get(k, getattr(base_noc, k)), f"noc.{k}")
                       for k in ("link_width_bytes", "router_latency_cycles", "fifo_depth", "resync_depth")})
    mem_d = _mapping(doc.get("memory", {}), "memory", {"bytes_per_cycle", "latency_cycles"})
    base_mem = MemModel()
    memory = MemModel(**{k: _int(mem_d.get(k, getattr(base_mem, k)), f"memory.{k}")
                         for k in ("bytes_per_cycle", "latency_cycles")})
    dfs_d = _mapping(doc.get("dfs", {}), "dfs", {"mode", "busy_policy"})
    bridge_d = _mapping(doc.get("bridge", {}), "bridge", {"width_bytes", "buffer_depth", "policy"})

    if "profiles" in doc:
        if not isinstance(doc["profiles"], list):
            raise ConfigError("profiles: expected a list")
        profiles = tuple(_parse_profile(p, f"profiles[{i}]") for i, p in enumerate(doc["profiles"]))
    else:
        profiles = default_profiles()

    desc = SoCDescription(
        rows=_int(grid["rows"], "grid.rows"),
        cols=_int(grid["cols"], "grid.cols"),
        tiles=tuple(_parse_tile(t, f"tiles[{i}]") for i, t in enumerate(doc["tiles"])),
        islands=tuple(_parse_island(s, f"islands[{i}]") for i, s in enumerate(doc["islands"])),
        memory=memory,
        noc=noc,
        profiles=profiles,
        dfs_mode=str(dfs_d.get("mode", "dual")),
        busy_policy=str(dfs_d.get("busy_policy", "reject")),
        bridge_width_bytes=_int(bridge_d.get("width_bytes", 8), "bridge.width_bytes"),
        tile_buffer_depth=_int(bridge_d.get("buffer_depth", 4), "bridge.buffer_depth"),
        bridge_policy=str(bridge_d.get("policy", "round_robin")),
    )
    # tiles may be listed in any order in the document
    desc = replace(desc, tiles=tuple(sorted(desc.tiles, key=lambda t: t.position)))
    return desc


def load_description(text: str) -> SoCDescription:
    """Parse and validate a configuration document.

    Raises :class:`ConfigError` carrying line/column for syntax errors
    and the offending field for schema violations.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark is not None else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"parse error at {where}{problem}") from None
    desc = _parse_document(doc)
    errors = validate(desc)
    if errors:
        raise ConfigError("; ".join(errors))
    return desc


def load_file(path: str) -> SoCDescription:
    with open(path, encoding="utf-8") as fh:
        return load_description(fh.read())


def _clock_doc(clock: Clock) -> dict:
    if isinstance(clock, FixedClock):
        return {"fixed_hz": clock.freq_hz}
    return {"dfs": {"min_hz": clock.min_hz, "max_hz": clock.max_hz, "step_hz": clock.step_hz,
                    "initial_hz": clock.initial_hz, "reconfig_latency_fs": clock.reconfig_latency_fs}}


def to_document(desc: SoCDescription) -> dict:
    tiles = []
    for t in desc.tiles:
        d: dict[str, Any] = {"pos": list(t.position), "kind": t.kind.value}
        if t.name is not None:
            d["name"] = t.name
        if t.accel is not None:
            d["accel"] = t.accel
        if t.kind is TileKind.ACCEL:
            d["replication"] = t.replication
        if t.kind is TileKind.TG:
            d["enabled"] = t.enabled_at_start
        tiles.append(d)
    islands = []
    for isl in desc.islands:
        d = {"id": isl.id}
        if isl.name is not None:
            d["name"] = isl.name
        d["tiles"] = [list(p) for p in isl.tiles]
        d["routers"] = [list(p) for p in isl.routers]
        d["clock"] = _clock_doc(isl.clock)
        islands.append(d)
    return {
        "schema_version": SCHEMA_VERSION,
        "grid": {"rows": desc.rows, "cols": desc.cols},
        "noc": {
            "link_width_bytes": desc.noc.link_width_bytes,
            "router_latency_cycles": desc.noc.router_latency_cycles,
            "fifo_depth": desc.noc.fifo_depth,
            "resync_depth": desc.noc.resync_depth,
        },
        "memory": {"bytes_per_cycle": desc.memory.bytes_per_cycle, "latency_cycles": desc.memory.latency_cycles},
        "dfs": {"mode": desc.dfs_mode, "busy_policy": desc.busy_policy},
        "bridge": {"width_bytes": desc.bridge_width_bytes, "buffer_depth": desc.tile_buffer_depth,
                   "policy": desc.bridge_policy},
        "tiles": tiles,
        "islands": islands,
        "profiles": [
            {
                "name": p.name,
                "items_per_invocation": p.items_per_invocation,
                "bytes_read_per_item": p.bytes_read_per_item,
                "bytes_written_per_item": p.bytes_written_per_item,
                "compute_cycles_per_item": p.compute_cycles_per_item,
                "burst_bytes": p.burst_bytes,
                "boundedness": p.boundedness,
            }
            for p in desc.profiles
        ],
    }


class _FlowDumper(yaml.SafeDumper):
    pass


def _repr_list(dumper: yaml.SafeDumper, data: list) -> yaml.Node:
    # short scalar lists (positions) read best inline
    flow = len(data) <= 4 and all(isinstance(x, (int, float, str)) for x in data)
    return dumper.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=flow)


_FlowDumper.add_representer(list, _repr_list)


def dump_description(desc: SoCDescription) -> str:
    """Serialize to the configuration document format (inverse of load)."""
    return yaml.dump(to_document(desc), Dumper=_FlowDumper, sort_keys=False, width=100)


# ---------------------------------------------------------------------------
# built-in scenario


@lru_cache(maxsize=None)
def default_profiles() -> tuple[AcceleratorProfile, ...]:
    """Calibrated CHStone profiles shipped with the package."""
    text = resources.files("vespa_sim.data").joinpath("profiles.yaml").read_text(encoding="utf-8")
    doc = yaml.safe_load(text)
    return tuple(_parse_profile(p, f"profiles.yaml[{i}]") for i, p in enumerate(doc["profiles"]))


MEM_POS: Position = (0, 3)
A1_POS: Position = (1, 3)
A2_POS: Position = (3, 0)
CPU_POS: Position = (0, 0)
IO_POS: Position = (0, 1)


def paper_testbed(islands: int = 6, profiles: tuple[AcceleratorProfile, ...] | None = None) -> SoCDescription:
    """The 4x4 reference SoC: CPU, MEM, I/O, eleven dfadd TGs, slots A1/A2.

    MEM sits in the (0,3) corner, A1 is mesh-adjacent to it and A2 is the
    opposite corner.  ``islands=6`` gives CPU and I/O separate clocks;
    ``islands=5`` merges them into one island.
    """
    if islands not in (5, 6):
        raise ValueError("islands must be 5 or 6")
    rows = cols = 4
    tiles = []
    tg_positions = []
    for r in range(rows):
        for c in range(cols):
            pos = (r, c)
            if pos == MEM_POS:
                tiles.append(TileSpec(pos, TileKind.MEM))
            elif pos == CPU_POS:
                tiles.append(TileSpec(pos, TileKind.CPU))
            elif pos == IO_POS:
                tiles.append(TileSpec(pos, TileKind.IO))
            elif pos == A1_POS:
                tiles.append(TileSpec(pos, TileKind.ACCEL, accel="dfsin", replication=1, name="A1"))
            elif pos == A2_POS:
                tiles.append(TileSpec(pos, TileKind.ACCEL, accel="gsm", replication=1, name="A2"))
            else:
                tiles.append(TileSpec(pos, TileKind.TG, accel="dfadd", enabled_at_start=False))
                tg_positions.append(pos)

    def tile_dfs(initial: int = 50 * MHZ) -> DfsClock:
        return DfsClock(10 * MHZ, 50 * MHZ, 5 * MHZ, initial)

    all_routers = tuple((r, c) for r in range(rows) for c in range(cols))
    isl = [
        IslandSpec(0, (A1_POS,), (), tile_dfs(), "A1"),
        IslandSpec(1, (A2_POS,), (), tile_dfs(), "A2"),
        IslandSpec(2, (MEM_POS,), all_routers, DfsClock(10 * MHZ, 100 * MHZ, 5 * MHZ, 100 * MHZ), "noc"),
        IslandSpec(3, tuple(tg_positions), (), tile_dfs(), "tg"),
    ]
    if islands == 6:
        isl.append(IslandSpec(4, (CPU_POS,), (), tile_dfs(), "cpu"))
        isl.append(IslandSpec(5, (IO_POS,), (), tile_dfs(), "io"))
    else:
        isl.append(IslandSpec(4, (CPU_POS, IO_POS), (), tile_dfs(), "cpu_io"))
    return SoCDescription(
        rows=rows,
        cols=cols,
        tiles=tuple(tiles),
        islands=tuple(isl),
        profiles=default_profiles() if profiles is None else profiles,
    )


BUILTIN_SCENARIOS = {
    "paper-testbed": lambda: paper_testbed(6),
    "paper-testbed-5": lambda: paper_testbed(5),
}


def resolve_config(ref: str) -> SoCDescription:
    """Load a built-in scenario by name, or a configuration file by path."""
    if ref in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[ref]()
    return load_file(ref)

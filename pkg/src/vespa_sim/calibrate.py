"""Fit accelerator profiles to baseline throughput targets.

Procedure, for one accelerator:

1. Take its data layout (bytes per item, burst size) from
   ``data/profile_shapes.yaml``.
2. Simulate a single-replica tile in slot A1 of the reference testbed
   (accelerator island 50 MHz, NoC 100 MHz, no traffic generators) with
   zero compute.  This gives the per-burst overhead ``T0``: bridge beats,
   NoC traversals, clock crossings and memory service.
3. The per-burst time needed to hit the target is ``chunk_bytes / target``;
   the difference to ``T0`` is spent computing, so
   ``cycles_per_item = (chunk_bytes / target - T0) / (items_per_burst * T_acc)``.
4. Re-simulate and refine with secant steps on time-per-byte until the
   simulated throughput is within ``tol`` of the target.

Everything is deterministic; running ``python -m vespa_sim.calibrate``
regenerates the shipped ``profiles.yaml``.
"""

from __future__ import annotations

import argparse
import json
from dataclasses import replace
from importlib import resources
from pathlib import Path

import yaml

from vespa_sim.config import A1_POS, MHZ, AcceleratorProfile, MemModel, SoCDescription, paper_testbed
from vespa_sim.engine import FS_PER_S
from vespa_sim.soc import Soc

REFERENCE_ACCEL_HZ = 50 * MHZ
REFERENCE_NOC_HZ = 100 * MHZ
CALIBRATION_BURSTS = 64
ACCELERATORS = ("adpcm", "dfadd", "dfmul", "dfsin", "gsm")


class CalibrationError(ValueError):
    """Unknown accelerator or a target the data layout cannot reach."""


def _data(name: str) -> str:
    return resources.files("vespa_sim.data").joinpath(name).read_text(encoding="utf-8")


def table1() -> dict:
    return json.loads(_data("table1.json"))


def baseline_targets() -> dict[str, float]:
    """Single-replica throughput targets in MB/s."""
    return {name: rows["1"]["throughput_mbps"] for name, rows in table1()["accelerators"].items()}


def profile_shapes() -> dict[str, dict]:
    return yaml.safe_load(_data("profile_shapes.yaml"))["shapes"]


def shaped_profile(name: str, cycles_per_item: float = 1.0, shapes: dict | None = None) -> AcceleratorProfile:
    shapes = profile_shapes() if shapes is None else shapes
    if name not in shapes:
        raise CalibrationError(f"no data layout for accelerator {name!r}")
    return AcceleratorProfile(name=name, compute_cycles_per_item=float(cycles_per_item), **shapes[name])


def reference_description(profile: AcceleratorProfile, memory: MemModel | None = None,
                          shapes: dict | None = None) -> SoCDescription:
    """Reference testbed with ``profile`` alone in slot A1."""
    others = tuple(shaped_profile(n, shapes=shapes) for n in (shapes or profile_shapes()) if n != profile.name)
    desc = paper_testbed(profiles=others + (profile,))
    if memory is not None:
        desc = replace(desc, memory=memory)
    return desc.with_tile(A1_POS, accel=profile.name, replication=1)


def simulate_baseline(profile: AcceleratorProfile, bursts: int = CALIBRATION_BURSTS,
                      memory: MemModel | None = None, shapes: dict | None = None) -> float:
    """Throughput (MB/s) of one replica at the reference condition."""
    soc = Soc(reference_description(profile, memory, shapes))
    budget = bursts * profile.items_per_burst * profile.bytes_read_per_item
    return soc.measure_throughput(A1_POS, budget).mbps


def solve_cycles_per_item(chunk_bytes: int, items_per_chunk: int, target_mbps: float,
                          overhead_fs: float, accel_hz: int = REFERENCE_ACCEL_HZ) -> float:
    """Closed-form inversion of ``target = chunk_bytes / (overhead + cycles * T_acc)``."""
    t_chunk = chunk_bytes / (target_mbps * 1e6) * FS_PER_S
    period = FS_PER_S / accel_hz
    return (t_chunk - overhead_fs) / (items_per_chunk * period)


def calibrate_profile(name: str, targets: dict[str, float] | None = None, *, tol: float = 0.002,
                      max_iter: int = 12, memory: MemModel | None = None,
                      shapes: dict | None = None) -> AcceleratorProfile:
    targets = baseline_targets() if targets is None else targets
    if name not in targets:
        raise CalibrationError(f"no throughput target for accelerator {name!r}")
    target = float(targets[name])
    prof = shaped_profile(name, 0.0, shapes)
    ipb = prof.items_per_burst
    chunk = ipb * prof.bytes_read_per_item

    thr0 = simulate_baseline(prof, memory=memory, shapes=shapes)
    overhead = chunk / (thr0 * 1e6) * FS_PER_S
    c = solve_cycles_per_item(chunk, ipb, target, overhead)
    if c * ipb < 1:
        raise CalibrationError(
            f"{name}: target {target} MB/s needs {c * ipb:.3f} compute cycles per burst; "
            f"zero-compute baseline is only {thr0:.3f} MB/s"
        )

    def err(cpi: float) -> tuple[float, float]:
        thr = simulate_baseline(replace(prof, compute_cycles_per_item=cpi), memory=memory, shapes=shapes)
        return thr, 1.0 / thr - 1.0 / target

    prev_c, prev_e = 0.0, 1.0 / thr0 - 1.0 / target
    for _ in range(max_iter):
        thr, e = err(c)
        if abs(thr / target - 1.0) <= tol:
            return replace(prof, compute_cycles_per_item=round(c, 4))
        if e == prev_e:
            break
        c, prev_c, prev_e = c - e * (c - prev_c) / (e - prev_e), c, e
    raise CalibrationError(f"{name}: calibration did not converge (last {thr:.4f} MB/s vs {target})")


def calibrate_all(memory: MemModel | None = None, shapes: dict | None = None) -> tuple[AcceleratorProfile, ...]:
    return tuple(calibrate_profile(n, memory=memory, shapes=shapes) for n in ACCELERATORS)


def profiles_document(profiles: tuple[AcceleratorProfile, ...]) -> str:
    rows = [{
        "name": p.name,
        "items_per_invocation": p.items_per_invocation,
        "bytes_read_per_item": p.bytes_read_per_item,
        "bytes_written_per_item": p.bytes_written_per_item,
        "compute_cycles_per_item": p.compute_cycles_per_item,
        "burst_bytes": p.burst_bytes,
        "boundedness": p.boundedness,
    } for p in profiles]
    header = "# Generated by `python -m vespa_sim.calibrate`; do not edit by hand.\n"
    return header + yaml.safe_dump({"profiles": rows}, sort_keys=False, default_flow_style=None, width=200)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description="Fit accelerator profiles to the baseline throughput table.")
    ap.add_argument("--out", type=Path, help="write profiles YAML here (default: print)")
    args = ap.parse_args(argv)
    text = profiles_document(calibrate_all())
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""FPGA resource estimates for multi-replica accelerator tiles.

Replication factors 1, 2 and 4 return the measured synthesis results
verbatim.  Any other K comes from a per-resource least-squares line over
those three points (intercept: shared tile logic, slope: one replica),
rounded to whole resources.  DSP blocks are never shared, so their count
is always exactly ``K * dsp(1)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

RESOURCES = ("lut", "ff", "bram", "dsp")
STORED_K = (1, 2, 4)


class UnknownAccelerator(KeyError):
    pass


@dataclass(frozen=True)
class ResourceVector:
    lut: int
    ff: int
    bram: int
    dsp: int

    def __post_init__(self) -> None:
        for name in RESOURCES:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def as_dict(self) -> dict[str, int]:
        return asdict(self)

    def utilization(self, device: "ResourceVector") -> dict[str, float]:
        return {r: getattr(self, r) / getattr(device, r) for r in RESOURCES}

    def fits(self, device: "ResourceVector") -> bool:
        return all(getattr(self, r) <= getattr(device, r) for r in RESOURCES)


@dataclass(frozen=True)
class Estimate:
    accel: str
    k: int
    resources: ResourceVector
    interpolated: bool
    capacity_violation: bool


@dataclass(frozen=True)
class LineFit:
    intercept: float
    slope: float
    residuals: tuple[float, float, float]


@lru_cache(maxsize=1)
def _table() -> dict:
    return json.loads(resources.files("vespa_sim.data").joinpath("table1.json").read_text(encoding="utf-8"))


def device() -> ResourceVector:
    d = _table()["device"]
    return ResourceVector(*(d[r] for r in RESOURCES))


def accelerators() -> tuple[str, ...]:
    return tuple(_table()["accelerators"])


def stored(accel: str, k: int) -> ResourceVector:
    rows = _rows(accel)
    row = rows[str(k)]
    return ResourceVector(*(row[r] for r in RESOURCES))


def stored_throughput(accel: str, k: int) -> float:
    return float(_rows(accel)[str(k)]["throughput_mbps"])


def _rows(accel: str) -> dict:
    try:
        return _table()["accelerators"][accel]
    except KeyError:
        raise UnknownAccelerator(f"no resource data for accelerator {accel!r}") from None


def fit_marginal(accel: str) -> dict[str, LineFit]:
    """Least-squares line per resource over the K = 1, 2, 4 points."""
    ks = np.array(STORED_K, dtype=float)
    out = {}
    for r in RESOURCES:
        ys = np.array([getattr(stored(accel, k), r) for k in STORED_K], dtype=float)
        if r == "dsp":
            slope, intercept = ys[0], 0.0
        else:
            slope, intercept = np.polyfit(ks, ys, 1)
        resid = ys - (intercept + slope * ks)
        out[r] = LineFit(float(intercept), float(slope), tuple(float(x) for x in resid))
    return out


def estimate(accel: str, k: int) -> Estimate:
    if k < 1:
        raise ValueError(f"replication factor must be >= 1, got {k}")
    if k in STORED_K:
        vec = stored(accel, k)
        interpolated = False
    else:
        fits = fit_marginal(accel)
        vals = {r: max(0, int(round(fits[r].intercept + fits[r].slope * k))) for r in RESOURCES}
        vals["dsp"] = k * stored(accel, 1).dsp
        vec = ResourceVector(**vals)
        interpolated = True
    return Estimate(accel, k, vec, interpolated, not vec.fits(device()))


def increment_row(k: int) -> dict[str, float]:
    """Average over accelerators of resource(K) / resource(1) and throughput(K) / throughput(1)."""
    names = accelerators()
    out = {}
    for r in RESOURCES:
        out[r] = sum(getattr(stored(a, k), r) / getattr(stored(a, 1), r) for a in names) / len(names)
    out["throughput"] = sum(stored_throughput(a, k) / stored_throughput(a, 1) for a in names) / len(names)
    return out

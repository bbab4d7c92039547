"""Discrete-event simulator for tile-based heterogeneous SoCs.

Models multi-replica accelerator tiles, DFS frequency islands and the
run-time monitoring counters of a mesh SoC, plus a small DSE harness.
"""

from vespa_sim.config import (
    AcceleratorProfile,
    DfsClock,
    FixedClock,
    IslandSpec,
    MemModel,
    NocParams,
    SoCDescription,
    TileKind,
    TileSpec,
    dump_description,
    load_description,
    paper_testbed,
    validate,
)
from vespa_sim.engine import Kernel, cycle_edge_time
from vespa_sim.soc import Soc

__version__ = "0.1.0"

__all__ = [
    "AcceleratorProfile",
    "DfsClock",
    "FixedClock",
    "IslandSpec",
    "Kernel",
    "MemModel",
    "NocParams",
    "Soc",
    "SoCDescription",
    "TileKind",
    "TileSpec",
    "cycle_edge_time",
    "dump_description",
    "load_description",
    "paper_testbed",
    "validate",
]

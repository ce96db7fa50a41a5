"""hfib: a two-stage (router + SDN switch) FIB failover engine plus a
calibrated convergence simulator for comparing it against a flat FIB.
"""

from .dataplane import FLAT, HIER
from .groups import GroupEngine, VnhAllocator, brute_force_groups
from .metrics import MetricsReport, emit_report, measure_convergence
from .routes import BgpUpdate, Peer, PeerTable, Prefix, Rib, decision_rank
from .scenario import Scenario, load_scenario, parse_scenario
from .sim import Simulation, bench_control_plane, run, run_sweep

__version__ = "0.1.0"

__all__ = [
    "FLAT",
    "HIER",
    "GroupEngine",
    "VnhAllocator",
    "brute_force_groups",
    "MetricsReport",
    "emit_report",
    "measure_convergence",
    "BgpUpdate",
    "Peer",
    "PeerTable",
    "Prefix",
    "Rib",
    "decision_rank",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "Simulation",
    "bench_control_plane",
    "run",
    "run_sweep",
    "__version__",
]

"""Cell-free massive MIMO SWIPT: AP mode selection and power control for sum harvested power."""
from .metrics import Allocation, EhModel, MetricsReport, evaluate, evaluate_benchmark3
from .network import NetworkRealization, generate_network
from .params import SystemParams, load_params
from .sca import (
    SCHEMES,
    SolveOutcome,
    benchmark1,
    benchmark2,
    benchmark2_solve,
    benchmark3_solve,
    brute_force_oracle,
    round_modes,
    sca_solve,
    solve_proposed,
)

__all__ = [
    "Allocation",
    "EhModel",
    "MetricsReport",
    "NetworkRealization",
    "SCHEMES",
    "SolveOutcome",
    "SystemParams",
    "benchmark1",
    "benchmark2",
    "benchmark2_solve",
    "benchmark3_solve",
    "brute_force_oracle",
    "evaluate",
    "evaluate_benchmark3",
    "generate_network",
    "load_params",
    "round_modes",
    "sca_solve",
    "solve_proposed",
]

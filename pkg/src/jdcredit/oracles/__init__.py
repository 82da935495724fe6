"""Independent ground-truth engines: FDM PIDE solver and Monte Carlo simulator."""

from .fdm import FdmGrid, FdmResult, fdm_survival, fdm_survival_curve, fdm_survival_result
from .montecarlo import (
    McConfig,
    mc_bond_price,
    mc_cds_legs,
    mc_implied_spread,
    simulate_default_times,
)

__all__ = [
    "FdmGrid",
    "FdmResult",
    "fdm_survival",
    "fdm_survival_curve",
    "fdm_survival_result",
    "McConfig",
    "mc_bond_price",
    "mc_cds_legs",
    "mc_implied_spread",
    "simulate_default_times",
]

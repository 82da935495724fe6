"""Jump-diffusion structural credit risk toolkit.

Semi-closed Laplace-transform pricing of defaultable coupon bonds and CDS
spreads with downward exponential jumps, Gaver-Stehfest inversion, a no-jump
diffusion baseline, independent FDM/Monte Carlo oracles, per-firm-day
calibration, transition-risk factor construction, and two-step panel quantile
regression.
"""

from .inversion import (
    BromwichConfig,
    GaverStehfestConfig,
    bromwich_invert,
    gs_invert,
    gs_weights,
)
from .model import (
    LAMBDA_FLOOR,
    ContractTerms,
    DiffusionParams,
    JumpDiffusionParams,
    RootPair,
    g_of_q,
    jump_compensator,
    log_drift,
    solve_roots,
)
from .pricing import (
    CANONICAL_GRID,
    TermStructure,
    bond_price,
    cds_spread,
    cds_spread_diffusion,
    default_probability,
    green_spread,
    model_spreads,
    price_term_structure,
    survival_probability_diffusion,
)
from .transforms import (
    bond_transform,
    first_passage_transform,
    premium_leg_transform,
    protection_leg_transform,
    survival_factor,
)

__version__ = "0.1.0"

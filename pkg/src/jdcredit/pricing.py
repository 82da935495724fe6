"""User-facing prices: default probability, bonds, CDS spreads, green spread.

Jump-model prices invert the closed-form transforms with Gaver-Stehfest; at
jump intensities below the degeneracy floor pricing routes through the
closed-form diffusion (no-jump) formulas. Spreads are decimals per annum
internally; basis points appear only at the I/O boundary.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import norm

from .errors import (
    DegenerateJumpless,
    NearDefaultIllConditioned,
    PricingError,
    QuadratureFailure,
)
from .inversion import DEFAULT_GS, GaverStehfestConfig, _gs_weights_extended, gs_invert
from .model import LAMBDA_FLOOR, ContractTerms, DiffusionParams, JumpDiffusionParams
from .transforms import bond_transform, first_passage_transform, survival_factor

logger = logging.getLogger(__name__)

#: Maturity grid of the market term structures, in years.
CANONICAL_GRID = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0, 20.0, 30.0)

#: Premium-leg inverses below this make the spread ratio ill-conditioned.
PREMIUM_LEG_FLOOR = 1e-10

#: Probabilities may exceed [0, 1] by at most this before a warning is logged.
PROB_EXCURSION_TOL = 1e-6


@dataclass(frozen=True)
class TermStructure:
    """Ordered (maturity years, spread bp) points for one firm-day."""

    points: tuple
    firm: str = ""
    date: str = ""

    def __post_init__(self):
        mats = [p[0] for p in self.points]
        if any(b <= a for a, b in zip(mats, mats[1:])):
            raise ValueError("maturities must be strictly increasing")
        if any(p[1] < 0 for p in self.points):
            raise ValueError("spreads must be nonnegative")

    @property
    def maturities(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def spreads_bp(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @classmethod
    def from_arrays(cls, maturities, spreads_bp, firm="", date=""):
        pts = tuple((float(m), float(s)) for m, s in zip(maturities, spreads_bp))
        return cls(points=pts, firm=firm, date=date)


def _to_diffusion(params: JumpDiffusionParams) -> DiffusionParams:
    return DiffusionParams(r=params.r, sigma=params.sigma, leverage=params.leverage)


def _clip_probability(value: float, where: str) -> float:
    if value < 0.0 or value > 1.0:
        excursion = value - (0.0 if value < 0.0 else 1.0)
        level = logging.WARNING if abs(excursion) > PROB_EXCURSION_TOL else logging.DEBUG
        logger.log(level, "%s: probability %.12g clipped, excursion %.3e", where, value, excursion)
    return min(1.0, max(0.0, value))


def survival_probability_diffusion(params: DiffusionParams, tenor) -> float:
    """Closed-form barrier survival probability of the no-jump model.

    N((z + mT)/(s sqrt(T))) - leverage^(-2m/s^2) N((-z + mT)/(s sqrt(T))),
    with the second term evaluated in log space to survive extreme leverage.
    Vectorized over tenor; tenor 0 maps to the t -> 0+ limit.
    """
    t = np.asarray(tenor, dtype=float)
    scalar = t.ndim == 0
    t1 = np.atleast_1d(t)
    if np.any(t1 < 0.0):
        raise ValueError("tenor must be >= 0")
    z = params.z
    m, sigma = params.m, params.sigma
    out = np.empty(t1.shape)
    zero = t1 == 0.0
    out[zero] = 1.0 if z > 0.0 else 0.0
    pos = ~zero
    tp = t1[pos]
    sq = sigma * np.sqrt(tp)
    d1 = (z + m * tp) / sq
    d2 = (-z + m * tp) / sq
    log_power = -2.0 * m * z / sigma**2
    out[pos] = norm.cdf(d1) - np.exp(np.minimum(log_power + norm.logcdf(d2), 700.0))
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def _adaptive_simpson(f, a: float, b: float, tol: float, max_evals: int) -> float:
    """Adaptive Simpson on [a, b], absolute tolerance tol, vectorized refinement."""
    xl = np.array([a])
    xr = np.array([b])
    fl = f(xl)
    fr = f(xr)
    xm = 0.5 * (xl + xr)
    fm = f(xm)
    s = (xr - xl) / 6.0 * (fl + 4.0 * fm + fr)
    total = 0.0
    n_evals = 3
    span = b - a
    while xl.size:
        lm = 0.5 * (xl + xm)
        rm = 0.5 * (xm + xr)
        flm = f(lm)
        frm = f(rm)
        n_evals += 2 * xl.size
        sl = (xm - xl) / 6.0 * (fl + 4.0 * flm + fm)
        sr = (xr - xm) / 6.0 * (fm + 4.0 * frm + fr)
        err = sl + sr - s
        done = np.abs(err) <= 15.0 * tol * (xr - xl) / span
        total += float(np.sum((sl + sr + err / 15.0)[done]))
        keep = ~done
        if n_evals > max_evals and keep.any():
            raise QuadratureFailure(f"adaptive Simpson exceeded {max_evals} evaluations")
        xl, xm_old, xr_old = xl[keep], xm[keep], xr[keep]
        fl, fm_old, fr_old = fl[keep], fm[keep], fr[keep]
        lm, rm, flm, frm, sl, sr = lm[keep], rm[keep], flm[keep], frm[keep], sl[keep], sr[keep]
        xl = np.concatenate([xl, xm_old])
        xr = np.concatenate([xm_old, xr_old])
        xm = np.concatenate([lm, rm])
        fl = np.concatenate([fl, fm_old])
        fr = np.concatenate([fm_old, fr_old])
        fm = np.concatenate([flm, frm])
        s = np.concatenate([sl, sr])
    return total


def _composite_simpson(f, a: float, b: float, n: int = 200) -> float:
    x = np.linspace(a, b, n + 1)
    y = f(x)
    h = (b - a) / n
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * np.sum(y[1:-1:2]) + 2.0 * np.sum(y[2:-1:2])))


def _diffusion_annuity(params: DiffusionParams, tenor: float, quadrature: str,
                       tol: float, max_evals: int) -> float:
    """Risky annuity integral of the no-jump model: int_0^T e^{-rs} P_surv(s) ds."""

    def integrand(s):
        return np.exp(-params.r * s) * survival_probability_diffusion(params, s)

    if quadrature == "fixed":
        return _composite_simpson(integrand, 0.0, tenor)
    return _adaptive_simpson(integrand, 0.0, tenor, tol, max_evals)


def cds_spread_diffusion(
    params: DiffusionParams,
    recovery: float,
    tenor: float,
    *,
    quadrature: str = "adaptive",
    tol: float = 1e-9,
    max_evals: int = 40000,
) -> float:
    """No-jump CDS spread: (1-Y) ((1 - e^{-rT} P_surv(T)) / annuity - r), >= 0."""
    if not tenor > 0:
        raise ValueError("tenor must be > 0")
    surv = survival_probability_diffusion(params, tenor)
    annuity = _diffusion_annuity(params, tenor, quadrature, tol, max_evals)
    value = (1.0 - recovery) * ((1.0 - math.exp(-params.r * tenor) * surv) / annuity - params.r)
    return max(0.0, value)


def _bond_price_diffusion(params: DiffusionParams, terms: ContractTerms,
                          quadrature: str = "adaptive") -> float:
    """No-jump coupon bond: discounted survival + recovery on default + coupon annuity."""
    t = terms.tenor
    surv = survival_probability_diffusion(params, t)
    annuity = _diffusion_annuity(params, t, quadrature, 1e-9, 40000)
    disc_surv = math.exp(-params.r * t) * surv
    recovery_leg = terms.recovery * (1.0 - disc_surv - params.r * annuity)
    return disc_surv + recovery_leg + terms.coupon * annuity


def default_probability(
    params: JumpDiffusionParams,
    tenor: float,
    config: GaverStehfestConfig = DEFAULT_GS,
    *,
    lambda_floor: float = LAMBDA_FLOOR,
) -> float:
    """P(default by tenor), in [0, 1]; inversion excursions beyond [0,1] are clipped."""
    if not tenor > 0:
        raise ValueError("tenor must be > 0")
    if params.lam <= lambda_floor:
        value = 1.0 - survival_probability_diffusion(_to_diffusion(params), tenor)
    else:
        value = gs_invert(
            lambda om: first_passage_transform(params, om, lambda_floor=lambda_floor),
            tenor,
            config,
        )
    return _clip_probability(value, "default_probability")


def bond_price(
    params: JumpDiffusionParams,
    terms: ContractTerms,
    config: GaverStehfestConfig = DEFAULT_GS,
    *,
    lambda_floor: float = LAMBDA_FLOOR,
) -> float:
    """Defaultable coupon bond price per unit face."""
    if params.lam <= lambda_floor:
        return _bond_price_diffusion(_to_diffusion(params), terms)
    return gs_invert(
        lambda om: bond_transform(params, terms, om, lambda_floor=lambda_floor),
        terms.tenor,
        config,
    )


def _leg_inverses_grid(
    params: JumpDiffusionParams,
    recovery: float,
    grid,
    config: GaverStehfestConfig,
    lambda_floor: float,
):
    """Protection- and premium-leg inverses for every maturity on the grid.

    Both legs share the survival factor E[e^{-(w+r) t_d}], so all transform
    nodes across all maturities are solved in one vectorized root-solving pass.
    """
    grid = np.asarray(grid, dtype=float)
    k = np.arange(1, 2 * config.m + 1, dtype=float)
    ln2 = math.log(2.0)
    omegas = (ln2 / grid)[:, None] * k[None, :]
    if np.any(omegas + params.r <= 0.0):
        raise PricingError(f"omega + r not positive at maturity {grid[np.argmin(omegas[:, 0])]}")
    e = survival_factor(params, (omegas + params.r).ravel(), lambda_floor=lambda_floor)
    e = e.reshape(omegas.shape)
    prot_nodes = (1.0 - recovery) * e / omegas
    prem_nodes = (1.0 - e) / (omegas * (omegas + params.r))
    weights = _gs_weights_extended(config.m)
    scale = ln2 / grid
    prot = scale * (prot_nodes.astype(np.longdouble) @ weights).astype(float)
    prem = scale * (prem_nodes.astype(np.longdouble) @ weights).astype(float)
    return prot, prem


def model_spreads(
    params,
    grid=CANONICAL_GRID,
    recovery: float = 0.6,
    config: GaverStehfestConfig = DEFAULT_GS,
    *,
    lambda_floor: float = LAMBDA_FLOOR,
) -> np.ndarray:
    """CDS spreads (decimal per annum) across a maturity grid.

    Accepts JumpDiffusionParams (jump model, shared-node fast path) or
    DiffusionParams (no-jump model).
    """
    grid = np.asarray(grid, dtype=float)
    if isinstance(params, DiffusionParams):
        return np.array([cds_spread_diffusion(params, recovery, t) for t in grid])
    if params.lam <= lambda_floor:
        dp = _to_diffusion(params)
        return np.array([cds_spread_diffusion(dp, recovery, t) for t in grid])
    prot, prem = _leg_inverses_grid(params, recovery, grid, config, lambda_floor)
    if np.any(prem < PREMIUM_LEG_FLOOR):
        bad = grid[prem < PREMIUM_LEG_FLOOR][0]
        raise NearDefaultIllConditioned(f"premium-leg inverse vanished at maturity {bad}")
    return prot / prem


def cds_spread(
    params: JumpDiffusionParams,
    terms: ContractTerms,
    config: GaverStehfestConfig = DEFAULT_GS,
    *,
    lambda_floor: float = LAMBDA_FLOOR,
) -> float:
    """CDS spread (decimal per annum): protection-leg inverse over premium-leg inverse."""
    return float(
        model_spreads(
            params, [terms.tenor], terms.recovery, config, lambda_floor=lambda_floor
        )[0]
    )


def green_spread(
    params: JumpDiffusionParams,
    tenor: float,
    eta: float | None = None,
    config: GaverStehfestConfig = DEFAULT_GS,
    *,
    lambda_floor: float = LAMBDA_FLOOR,
) -> float:
    """Yield spread of a zero-coupon zero-recovery bond over its jump-free twin.

    The benchmark discounts the no-jump survival probability at matching
    volatility and leverage; nonnegative, zero when the firm has no jump risk.
    """
    if not tenor > 0:
        raise ValueError("tenor must be > 0")
    if eta is not None:
        params = replace(params, eta=eta)
    if params.lam <= lambda_floor:
        return 0.0
    terms = ContractTerms(tenor=tenor, coupon=0.0, recovery=0.0)
    risky = bond_price(params, terms, config, lambda_floor=lambda_floor)
    benchmark = math.exp(-params.r * tenor) * survival_probability_diffusion(
        _to_diffusion(params), tenor
    )
    if risky <= 0.0 or benchmark <= 0.0:
        raise PricingError(f"non-positive bond prices in green spread at tenor {tenor}")
    return max(0.0, -math.log(risky / benchmark) / tenor)


def price_term_structure(
    params,
    recovery: float = 0.6,
    grid=CANONICAL_GRID,
    *,
    model: str = "jd",
    firm: str = "",
    date: str = "",
    config: GaverStehfestConfig = DEFAULT_GS,
    lambda_floor: float = LAMBDA_FLOOR,
) -> TermStructure:
    """Price a CDS term structure on the grid; spreads in basis points."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("maturity grid must be nonempty and strictly increasing")
    if model not in ("jd", "d"):
        raise ValueError(f"unknown model tag {model!r}")
    try:
        if model == "jd":
            spreads = model_spreads(params, grid, recovery, config, lambda_floor=lambda_floor)
        else:
            spreads = np.array([cds_spread_diffusion(params, recovery, t) for t in grid])
    except PricingError:
        raise
    except Exception as exc:
        maturity = getattr(exc, "maturity", None)
        raise PricingError(f"term-structure pricing failed: {exc}", maturity=maturity) from exc
    return TermStructure.from_arrays(grid, spreads * 1e4, firm=firm, date=date)

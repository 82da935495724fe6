"""Model parameters, the characteristic function G, and its root solver.

All rates and intensities are per-annum reals; spreads are converted to basis
points only at the I/O boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DegenerateJumpless, NoConvergence, PoleAtEta

#: Below this jump intensity the (beta - eta), (eta - gamma) coefficients lose
#: precision; pricing routes through the diffusion formulas instead.
LAMBDA_FLOOR = 1e-6

#: Relative half-width of the initial bracket gap around the pole at eta.
POLE_BRACKET_EPS = 1e-9

#: Default guard for g_of_q evaluations near the pole.
POLE_GUARD_REL = 1e-12

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class JumpDiffusionParams:
    """Risk-neutral state of the jump-diffusion firm-value model.

    r        : risk-free rate (per annum, continuous compounding)
    sigma    : diffusion volatility (per sqrt-annum), > 0
    lam      : jump arrival intensity (per annum), >= 0
    eta      : jump-magnitude parameter (mean log-jump size 1/eta), > 0
    leverage : firm value over default barrier, >= 1
    """

    r: float
    sigma: float
    lam: float
    eta: float
    leverage: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if self.leverage < 1:
            raise ValueError(f"leverage must be >= 1, got {self.leverage}")

    @property
    def xhat(self) -> float:
        """Log distance to the default barrier, ln(leverage) >= 0."""
        return math.log(self.leverage)


@dataclass(frozen=True)
class ContractTerms:
    """Bond/CDS contract: tenor in years, continuous coupon rate, recovery of face."""

    tenor: float
    coupon: float = 0.0
    recovery: float = 0.6

    def __post_init__(self):
        if not self.tenor > 0:
            raise ValueError(f"tenor must be > 0, got {self.tenor}")
        if self.coupon < 0:
            raise ValueError(f"coupon must be >= 0, got {self.coupon}")
        if not 0.0 <= self.recovery <= 1.0:
            raise ValueError(f"recovery must be in [0, 1], got {self.recovery}")


@dataclass(frozen=True)
class DiffusionParams:
    """State of the jumpless (geometric Brownian) baseline model."""

    r: float
    sigma: float
    leverage: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.leverage < 1:
            raise ValueError(f"leverage must be >= 1, got {self.leverage}")

    @property
    def m(self) -> float:
        """Log-space drift r - sigma^2 / 2."""
        return self.r - 0.5 * self.sigma**2

    @property
    def z(self) -> float:
        """Log distance to the barrier."""
        return math.log(self.leverage)


@dataclass(frozen=True)
class RootPair:
    """The two positive solutions of G(q) = omega: 0 < gamma < eta < beta."""

    beta: ArrayLike
    gamma: ArrayLike


def jump_compensator(params: JumpDiffusionParams) -> float:
    """Mean relative jump size xi = E[e^Y - 1] = eta/(eta+1) - 1, in (-1, 0)."""
    return params.eta / (params.eta + 1.0) - 1.0


def log_drift(params: JumpDiffusionParams) -> float:
    """Risk-neutral drift of the log firm value: psi = r - sigma^2/2 - lam*xi."""
    return params.r - 0.5 * params.sigma**2 - params.lam * jump_compensator(params)


def _g_raw(a: float, psi: float, lam: float, eta: float, q: ArrayLike) -> ArrayLike:
    return a * q * q - psi * q + lam * (eta / (eta - q) - 1.0)


def g_of_q(params: JumpDiffusionParams, q: ArrayLike, pole_guard: float | None = None) -> ArrayLike:
    """Evaluate G(q) = sigma^2 q^2 / 2 - psi q + lam (eta/(eta-q) - 1).

    Raises PoleAtEta when q is within the pole guard of eta; the caller must
    bracket away from the pole.
    """
    eta = params.eta
    if pole_guard is None:
        pole_guard = POLE_GUARD_REL * eta
    q_arr = np.asarray(q, dtype=float)
    if np.any(np.abs(q_arr - eta) < pole_guard):
        raise PoleAtEta(f"q within {pole_guard} of the pole at eta={eta}")
    out = _g_raw(0.5 * params.sigma**2, log_drift(params), params.lam, eta, q_arr)
    return float(out) if np.ndim(q) == 0 else out


def _cubic(a, psi, lam, eta, om, q):
    """P(q) = (a q^2 - psi q - om)(eta - q) + lam q; G(q) - om = P(q)/(eta - q)."""
    return (a * q * q - psi * q - om) * (eta - q) + lam * q


def _cubic_deriv(a, psi, lam, eta, om, q):
    return (2.0 * a * q - psi) * (eta - q) - (a * q * q - psi * q - om) + lam


def _branch_root(a, psi, lam, eta, om, lower_branch, tol, max_iter):
    """Solve G(q) = om on one side of the pole for a vector of om > 0.

    Brackets by bisection, then polishes with Newton on the pole-free cubic,
    safeguarded to stay inside the bracket.
    """
    n = om.shape[0]
    # sign of (eta - q) is constant on each branch, so sign(G - om) = s * sign(P)
    s = 1.0 if lower_branch else -1.0

    if lower_branch:
        lo = np.full(n, 1e-300)
        eps = POLE_BRACKET_EPS
        hi = np.full(n, eta * (1.0 - eps))
        # widen towards the pole if the root is pinned closer than eps
        for _ in range(6):
            bad = s * _cubic(a, psi, lam, eta, om, hi) <= 0.0
            if not bad.any():
                break
            eps *= 1e-3
            hi[bad] = eta * (1.0 - eps)
        else:
            raise NoConvergence("could not bracket the root below eta")
    else:
        eps = POLE_BRACKET_EPS
        lo = np.full(n, eta * (1.0 + eps))
        for _ in range(6):
            bad = s * _cubic(a, psi, lam, eta, om, lo) >= 0.0
            if not bad.any():
                break
            eps *= 1e-3
            lo[bad] = eta * (1.0 + eps)
        else:
            raise NoConvergence("could not bracket the root above eta")
        hi = np.full(n, eta + max(1.0, eta))
        for _ in range(200):
            low_side = s * _cubic(a, psi, lam, eta, om, hi) <= 0.0
            if not low_side.any():
                break
            hi[low_side] = eta + 2.0 * (hi[low_side] - eta)
        else:
            raise NoConvergence("G(q_max) did not exceed omega while growing q_max")

    for _ in range(30):
        mid = 0.5 * (lo + hi)
        below = s * _cubic(a, psi, lam, eta, om, mid) < 0.0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)

    q = 0.5 * (lo + hi)
    tol_abs = tol * np.maximum(1.0, om)
    for _ in range(max_iter):
        p = _cubic(a, psi, lam, eta, om, q)
        resid = np.abs(p / (eta - q))
        width = hi - lo
        done = (resid <= tol_abs) | (width <= 4.0 * np.spacing(np.abs(hi)))
        if done.all():
            break
        below = s * p < 0.0
        lo = np.where(below & ~done, q, lo)
        hi = np.where(below | done, hi, q)
        dp = _cubic_deriv(a, psi, lam, eta, om, q)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = p / dp
        q_new = q - step
        inside = (q_new > lo) & (q_new < hi) & np.isfinite(q_new)
        q = np.where(done, q, np.where(inside, q_new, 0.5 * (lo + hi)))
    else:
        p = _cubic(a, psi, lam, eta, om, q)
        resid = np.abs(p / (eta - q))
        ok = (resid <= tol_abs) | ((hi - lo) <= 4.0 * np.spacing(np.abs(hi)))
        if not ok.all():
            raise NoConvergence(
                f"root residual {float(np.max(resid / np.maximum(1.0, om))):.3e} "
                f"above tolerance after {max_iter} iterations"
            )
    return q


def solve_roots(
    params: JumpDiffusionParams,
    omega: ArrayLike,
    *,
    lambda_floor: float = LAMBDA_FLOOR,
    tol: float = 1e-12,
    max_iter: int = 60,
) -> RootPair:
    """Find the two positive roots (beta, gamma) of G(q) = omega.

    omega may be a scalar or an array (all entries > 0). The returned roots
    satisfy 0 < gamma < eta < beta with |G(root) - omega| <= tol * max(1, omega),
    or resolved to floating-point bracket exactness where the pole makes the
    G-residual itself ill-conditioned.

    Raises DegenerateJumpless when lam <= lambda_floor (route pricing through
    the diffusion formulas), and NoConvergence if the tolerance is unmet.
    """
    if params.lam <= lambda_floor or params.lam <= 0.0:
        raise DegenerateJumpless(
            f"lam={params.lam} at or below floor {lambda_floor}; use the diffusion model"
        )
    om = np.asarray(omega, dtype=float)
    scalar = om.ndim == 0
    om1 = np.atleast_1d(om).astype(float)
    if np.any(om1 <= 0.0):
        raise ValueError("omega must be > 0")

    a = 0.5 * params.sigma**2
    psi = log_drift(params)
    gamma = _branch_root(a, psi, params.lam, params.eta, om1, True, tol, max_iter)
    beta = _branch_root(a, psi, params.lam, params.eta, om1, False, tol, max_iter)
    if scalar:
        return RootPair(beta=float(beta[0]), gamma=float(gamma[0]))
    return RootPair(beta=beta.reshape(om.shape), gamma=gamma.reshape(om.shape))

"""Closed-form Laplace transforms: first-passage, bond price, and CDS legs.

The bond and premium-leg transforms are evaluated in telescoped form, with the
1/r terms cancelled analytically, so r = 0 and the mildly negative rates of the
sample period need no special casing. The telescoped expressions are algebraic
identities of the originals (covered by tests against the literal forms).
"""

from __future__ import annotations

import numpy as np

from .errors import TransformEvaluationFailed, ZeroRateUnsupported
from .model import (
    LAMBDA_FLOOR,
    ArrayLike,
    ContractTerms,
    JumpDiffusionParams,
    log_drift,
    solve_roots,
)

#: Exponent cap; leverage can be huge during calibration line searches.
EXP_CAP = 700.0

#: omega + r must exceed this for the shifted transforms to converge.
OMEGA_MARGIN = 1e-12

#: |r| below this counts as a zero rate for the ZeroRateUnsupported guard.
ZERO_RATE_GUARD = 1e-12


def _as_output(value, omega):
    if np.ndim(omega) == 0:
        arr = np.asarray(value)
        return complex(arr) if np.iscomplexobj(arr) else float(arr)
    return value


def _bracket_from_roots(beta, gamma, eta: float, xhat: float):
    """[gamma(beta-eta) e^{-beta x} + beta(eta-gamma) e^{-gamma x}] / (eta(beta-gamma))."""
    eb = np.exp(-np.minimum(beta * xhat, EXP_CAP))
    eg = np.exp(-np.minimum(gamma * xhat, EXP_CAP))
    return (gamma * (beta - eta) * eb + beta * (eta - gamma) * eg) / (eta * (beta - gamma))


def _survival_factor_complex(params: JumpDiffusionParams, omega: np.ndarray) -> np.ndarray:
    """E[e^{-omega t_d}] continued to complex omega with Re(omega) > 0.

    The characteristic equation G(q) = omega is a cubic in q; for Re(omega) > 0
    exactly two of its roots lie in the right half-plane and those continue the
    real roots (beta, gamma). The expectation formula is symmetric in the pair.
    """
    a = 0.5 * params.sigma**2
    psi = log_drift(params)
    lam, eta, xhat = params.lam, params.eta, params.xhat
    out = np.empty(omega.shape, dtype=complex)
    for i, om in np.ndenumerate(omega):
        roots = np.roots([-a, a * eta + psi, om + lam - psi * eta, -om * eta])
        right = roots[roots.real > 0.0]
        if right.size != 2:
            raise TransformEvaluationFailed(
                f"expected 2 right-half-plane roots at omega={om}, found {right.size}"
            )
        b, g = right[0], right[1]
        eb = np.exp(np.clip(-(b * xhat).real, -745.0, EXP_CAP) - 1j * (b * xhat).imag)
        eg = np.exp(np.clip(-(g * xhat).real, -745.0, EXP_CAP) - 1j * (g * xhat).imag)
        out[i] = (g * (b - eta) * eb + b * (eta - g) * eg) / (eta * (b - g))
    return out


def survival_factor(
    params: JumpDiffusionParams, omega: ArrayLike, *, lambda_floor: float = LAMBDA_FLOOR
) -> ArrayLike:
    """E[e^{-omega t_d}] in (0, 1] for real omega > 0; complex omega supported."""
    om = np.asarray(omega)
    if np.iscomplexobj(om):
        if np.any(om.real <= 0.0):
            raise ValueError("Re(omega) must be > 0")
        res = _survival_factor_complex(params, np.atleast_1d(om))
        return _as_output(res[0] if om.ndim == 0 else res.reshape(om.shape), omega)
    roots = solve_roots(params, omega, lambda_floor=lambda_floor)
    return _as_output(
        _bracket_from_roots(roots.beta, roots.gamma, params.eta, params.xhat), omega
    )


def first_passage_transform(
    params: JumpDiffusionParams, omega: ArrayLike, *, lambda_floor: float = LAMBDA_FLOOR
) -> ArrayLike:
    """Laplace transform of the default probability: H(x,t;omega) = E[e^{-omega t_d}]/omega."""
    if np.any(np.real(np.asarray(omega)) <= 0.0):
        raise ValueError("omega must have positive real part")
    value = survival_factor(params, omega, lambda_floor=lambda_floor) / np.asarray(omega)
    return _as_output(value, omega)


def _check_shifted(omega, r: float, allow_zero_rate: bool):
    om = np.asarray(omega)
    if np.any(np.real(om) <= 0.0) or np.any(np.real(om) + r <= OMEGA_MARGIN):
        raise ValueError(f"need omega > max(0, -r) + margin; got omega={omega}, r={r}")
    if not allow_zero_rate and abs(r) < ZERO_RATE_GUARD:
        raise ZeroRateUnsupported(f"|r|={abs(r)} below guard and the r->0 branch is disabled")


def bond_transform(
    params: JumpDiffusionParams,
    terms: ContractTerms,
    omega: ArrayLike,
    *,
    lambda_floor: float = LAMBDA_FLOOR,
    allow_zero_rate: bool = True,
) -> ArrayLike:
    """Laplace transform of the defaultable coupon bond price.

    Telescoped form of
        H(x,t;w+r)(b/r - b(w+r)/(rw) + Y(r+w)/w - 1) + 1/(w+r) + b/(rw) - b/(r(w+r)).
    """
    r, b, recov = params.r, terms.coupon, terms.recovery
    _check_shifted(omega, r, allow_zero_rate)
    om = np.asarray(omega)
    e = survival_factor(params, om + r, lambda_floor=lambda_floor)
    value = ((om + b) * (1.0 - e) + e * recov * (om + r)) / (om * (om + r))
    return _as_output(value, omega)


def premium_leg_transform(
    params: JumpDiffusionParams,
    terms: ContractTerms,
    omega: ArrayLike,
    *,
    lambda_floor: float = LAMBDA_FLOOR,
    allow_zero_rate: bool = True,
) -> ArrayLike:
    """Laplace transform of the premium leg divided by the spread; strictly positive.

    Telescoped form of H(x,t;w+r)(1/r - (r+w)/(rw)) + 1/(rw) - 1/(r(r+w)).
    """
    r = params.r
    _check_shifted(omega, r, allow_zero_rate)
    om = np.asarray(omega)
    e = survival_factor(params, om + r, lambda_floor=lambda_floor)
    value = (1.0 - e) / (om * (om + r))
    return _as_output(value, omega)


def protection_leg_transform(
    params: JumpDiffusionParams,
    terms: ContractTerms,
    omega: ArrayLike,
    *,
    lambda_floor: float = LAMBDA_FLOOR,
) -> ArrayLike:
    """Laplace transform of the protection leg: H(x,t;w+r) (1-Y)(r+w)/w."""
    _check_shifted(omega, params.r, allow_zero_rate=True)
    om = np.asarray(omega)
    e = survival_factor(params, om + params.r, lambda_floor=lambda_floor)
    value = (1.0 - terms.recovery) * e / om
    return _as_output(value, omega)

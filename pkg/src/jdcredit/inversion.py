"""Numerical inverse Laplace transforms.

Gaver-Stehfest on the real axis is the method of record; a Bromwich-line
inversion with Euler summation is kept as an optional cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np

from .errors import ContourFailure, OrderTooLarge, TransformEvaluationFailed

#: Orders above this suffer catastrophic cancellation in double precision.
MAX_ORDER = 10


@lru_cache(maxsize=None)
def _gs_weights_exact(m: int) -> tuple:
    """Weights alpha_k, k = 1..2m, as exact rationals.

    alpha_k = ((-1)^(m+k) / m!) * sum_{j=ceil(k/2)}^{min(k,m)}
              j^(m+1) C(m,j) C(2j,j) C(j,k-j)

    Integer combinatorics keep the alternating sum free of rounding until the
    final float conversion.
    """
    fact_m = factorial(m)
    weights = []
    for k in range(1, 2 * m + 1):
        acc = 0
        for j in range((k + 1) // 2, min(k, m) + 1):
            acc += j ** (m + 1) * comb(m, j) * comb(2 * j, j) * comb(j, k - j)
        weights.append(Fraction((-1) ** (m + k) * acc, fact_m))
    return tuple(weights)


def gs_weights(m: int) -> np.ndarray:
    """Gaver-Stehfest weights for half-order m (2m values, alternating structure)."""
    if m > MAX_ORDER:
        raise OrderTooLarge(f"half-order {m} > {MAX_ORDER}")
    if m < 1:
        raise ValueError(f"half-order must be >= 1, got {m}")
    return np.array([float(w) for w in _gs_weights_exact(m)])


@lru_cache(maxsize=None)
def _gs_weights_extended(m: int) -> np.ndarray:
    """Weights as 80-bit long doubles; the alternating sum is ~1e7-conditioned."""
    gs_weights(m)  # order validation
    exact = _gs_weights_exact(m)
    out = np.empty(2 * m, dtype=np.longdouble)
    for i, w in enumerate(exact):
        out[i] = np.longdouble(w.numerator) / np.longdouble(w.denominator)
    return out


@dataclass(frozen=True)
class GaverStehfestConfig:
    """Half-order m (default 8) with the cached weight vector."""

    m: int = 8
    weights: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.weights is None:
            object.__setattr__(self, "weights", gs_weights(self.m))
        elif len(self.weights) != 2 * self.m:
            raise ValueError("weights length must be 2*m")


DEFAULT_GS = GaverStehfestConfig()


def _eval_transform(transform, omegas: np.ndarray) -> np.ndarray:
    """Evaluate a transform on a node vector, tolerating scalar-only callables.

    Preserves the input floating dtype where the transform does; complex
    results are checked and reduced to their real part by the callers.
    """
    try:
        try:
            values = np.asarray(transform(omegas))
            if values.shape != omegas.shape:
                raise ValueError("shape mismatch")
        except (TypeError, ValueError):
            values = np.asarray([transform(w) for w in omegas])
            if values.shape != omegas.shape:
                raise ValueError("transform returned a non-scalar per node")
    except Exception as exc:  # noqa: BLE001 - wrapped per contract
        raise TransformEvaluationFailed(f"transform evaluation failed: {exc}") from exc
    return values


def _real_part(values: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(values):
        if np.any(np.abs(values.imag) > 1e-12 * (1.0 + np.abs(values.real))):
            raise TransformEvaluationFailed(
                "transform returned complex values on the real axis"
            )
        return values.real
    return values


def gs_invert(transform, horizon: float, config: GaverStehfestConfig = DEFAULT_GS) -> float:
    """Invert at t = horizon: (ln 2 / t) * sum_k alpha_k F(k ln 2 / t).

    The transform must be evaluable at omega = k ln2 / horizon for k = 1..2m.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    # nodes and accumulation in extended precision: the alternating sum is
    # ~1e9-conditioned at m = 8, which double precision alone cannot keep
    # below the 1e-8 scale the exactness suite asserts
    scale = np.log(np.longdouble(2.0)) / np.longdouble(horizon)
    omegas = scale * np.arange(1, 2 * config.m + 1, dtype=np.longdouble)
    values = _real_part(_eval_transform(transform, omegas))
    acc = np.dot(_gs_weights_extended(config.m), values.astype(np.longdouble))
    return float(scale * acc)


@dataclass(frozen=True)
class BromwichConfig:
    """Vertical-line Bromwich contour with Euler summation.

    a is the discretization parameter (error ~ e^-a for bounded originals);
    n_terms partial sums are accumulated before m_euler binomial averaging.
    """

    a: float = 18.4
    n_terms: int = 38
    m_euler: int = 11


DEFAULT_BROMWICH = BromwichConfig()


def bromwich_invert(transform, horizon: float, config: BromwichConfig = DEFAULT_BROMWICH) -> float:
    """Invert via the Bromwich integral on Re(omega) = a/(2t), Euler-accelerated.

    Validation tool only; the transform must be evaluable at complex arguments
    with positive real part.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    t = horizon
    a, n, m = config.a, config.n_terms, config.m_euler
    k = np.arange(0, n + m + 1)
    omegas = (a + 2j * np.pi * k) / (2.0 * t)
    values = _eval_transform(transform, omegas)
    if not np.all(np.isfinite(values)):
        raise ContourFailure("non-finite transform values on the contour")
    terms = np.empty(n + m + 1)
    terms[0] = 0.5 * values[0].real
    terms[1:] = ((-1.0) ** k[1:]) * values[1:].real
    partial = np.cumsum(terms) * math.exp(0.5 * a) / t

    binom = np.array([comb(m, j) for j in range(m + 1)], dtype=float)
    euler = float(np.dot(binom, partial[n : n + m + 1])) / 2.0**m
    euler_prev = float(np.dot(binom, partial[n - 1 : n + m])) / 2.0**m
    if not math.isfinite(euler) or abs(euler - euler_prev) > 1e-3 * max(1.0, abs(euler)):
        raise ContourFailure(
            f"Euler summation not settled: successive estimates differ by {abs(euler - euler_prev):.3e}"
        )
    return euler

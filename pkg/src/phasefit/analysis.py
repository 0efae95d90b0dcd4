"""Closed-form z=0 probabilities for linear fits via sinc-squared windows.

For f(x) = y'x with L domain bits, K signed parameter bits and N = L+K+r,
the z=0 probability approaches a window integral of (sin w / w)^2 whose
placement depends only on r and the normalized true parameter
y* = y'/2^K in [-1/2, 1/2]:

    P(r, y*) = (2^r/pi) * integral over w in (pi/2^r)*([-1/2, 1/2] - y*)

The three half-space weights are the sub-window integrals over the low,
middle and high halves of the parameter range divided by the full window.
At r = -1 the probability stays above 0.20 and the heaviest half-space
carries at least 70% for every y*, which is why N = L+K-1 is the standing
recommendation for linear fits: no exponent search needed.

The sum-to-integral and 2^L -> infinity approximation steps are not
re-derived here; they are validated empirically against the exact engine
(see tests), which is also why multivariate values are plain products of
one-dimensional windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .core import DataTable, DomainGrid, ParameterSpace, TrialModel
from .errors import PhasefitError

DEFAULT_QUAD_TOL = 1e-10


@dataclass(frozen=True)
class LinearAnalysisConfig:
    domain_bits: int  # L
    param_bits: int  # K
    dimension: int = 1
    offset: int = -1  # r, with N = L + K + r
    ystar: tuple[float, ...] = (0.0,)
    quad_tol: float = DEFAULT_QUAD_TOL

    def __post_init__(self):
        if self.domain_bits < 1 or self.param_bits < 1 or self.dimension < 1:
            raise PhasefitError("domain_bits, param_bits and dimension must be >= 1")
        if len(self.ystar) != self.dimension:
            raise PhasefitError("need one y* per dimension")
        if any(abs(v) > 0.5 for v in self.ystar):
            raise PhasefitError("each |y*| must be <= 1/2")

    @property
    def n_exp(self) -> int:
        return self.domain_bits + self.param_bits + self.offset


def _sinc_squared(w: float) -> float:
    if w == 0.0:
        return 1.0
    s = math.sin(w) / w
    return s * s


def _window(r: float, a: float, b: float, tol: float) -> float:
    """Integral of sinc^2 over (pi/2^r)*[a, b]."""
    scale = math.pi / 2.0**r
    value, estimate = quad(_sinc_squared, scale * a, scale * b,
                           epsabs=tol, epsrel=tol, limit=400)
    if estimate > max(tol * 100.0, 1e-6):
        raise PhasefitError(f"quadrature error estimate {estimate:.2e} too large")
    return value


def p_zero_integral(r: float, ystar: float, tol: float = DEFAULT_QUAD_TOL) -> float:
    """Window approximation of the z=0 probability for one dimension."""
    return (2.0**r / math.pi) * _window(r, -0.5 - ystar, 0.5 - ystar, tol)


def half_space_weights(
    r: float, ystar: float, tol: float = DEFAULT_QUAD_TOL
) -> tuple[float, float, float]:
    """(low, mid, high) sub-window weights; each numerator window is a subset
    of the full window, so each ratio lies in [0, 1]."""
    full = _window(r, -0.5 - ystar, 0.5 - ystar, tol)
    low = _window(r, -0.5 - ystar, 0.0 - ystar, tol)
    mid = _window(r, -0.25 - ystar, 0.25 - ystar, tol)
    high = _window(r, 0.0 - ystar, 0.5 - ystar, tol)
    return (low / full, mid / full, high / full)


def multivariate_p_zero(r: float, ystars, tol: float = DEFAULT_QUAD_TOL) -> float:
    """Product of per-coordinate windows; decays exponentially in dimension."""
    value = 1.0
    for ystar in ystars:
        value *= p_zero_integral(r, ystar, tol)
    return value


def recommend_n_linear(domain_bits: int, param_bits: int) -> int:
    """Exponent for linear fits: N = L + K - 1 (the r = -1 choice)."""
    if domain_bits < 1 or param_bits < 1:
        raise PhasefitError("bit counts must be >= 1")
    return domain_bits + param_bits - 1


def sweep_surface(r_values, ystar_values, tol: float = DEFAULT_QUAD_TOL):
    """Rows (r, ystar, p_zero, w_low, w_mid, w_high) for CSV emission."""
    rows = []
    for r in r_values:
        for ystar in ystar_values:
            low, mid, high = half_space_weights(r, ystar, tol)
            rows.append((float(r), float(ystar), p_zero_integral(r, ystar, tol),
                         low, mid, high))
    return rows


def linear_instance(
    domain_bits: int, param_bits: int, yprimes
) -> tuple[DataTable, TrialModel, ParameterSpace]:
    """Noiseless exact-engine instance matching the analysis assumptions:
    f = sum_j y'_j x_j on [0, 2^L)^d, g = sum_j y_j x_j, signed K-bit fields."""
    yprimes = [int(v) for v in yprimes]
    d = len(yprimes)
    lo, hi = -(2 ** (param_bits - 1)), 2 ** (param_bits - 1) - 1
    if any(not (lo <= v <= hi) for v in yprimes):
        raise PhasefitError(f"true parameters must lie in [{lo},{hi}]")
    grid = DomainGrid((2**domain_bits,) * d)
    coords = grid.coordinate_arrays()
    values = np.zeros(grid.total_size, dtype=np.int64)
    for j, yp in enumerate(yprimes):
        values += yp * coords[j]
    f = DataTable(grid, values, provenance=f"linear y'={tuple(yprimes)}")
    source = " + ".join(f"y{j + 1}*x{j + 1}" for j in range(d))
    g = TrialModel.from_source(source, d, d)
    space = ParameterSpace.fresh(
        [(f"y{j + 1}", param_bits) for j in range(d)],
        signed=[f"y{j + 1}" for j in range(d)],
    )
    return f, g, space

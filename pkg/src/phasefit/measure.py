"""The interference shape measure Q and its derived quantities.

Q(f, g_y, M) = |sum_x exp(2*pi*i*(f(x)-g_y(x))/M) / |X||^2 is near 1 when the
two functions have the same shape up to a vertical shift, and near 1/|X| for
unrelated ones.  M ("sensitivity") controls how strongly value differences
rotate the phasor.

Summation order over the grid is fixed row-major with compensated summation
(see kernels), and sums over parameter vectors use math.fsum in enumeration
order, so exact-mode results are identical across runs and worker counts.

A model object must provide evaluate_on(xs, ys), value_bounds(grid, space)
and n_params; TrialModel does, and tests may substitute hand-built models
with the same surface.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import DataTable, ParameterSpace
from .errors import CertificateError, DegenerateMeasureError, MeasureOverflowError

_INT64_MAX = 2**63 - 1

_worker_count = 1


def set_worker_count(n: int) -> None:
    """Cap for internal fan-out over parameter chunks (results unchanged)."""
    global _worker_count
    if n < 1:
        raise ValueError("worker count must be >= 1")
    _worker_count = int(n)


def worker_count() -> int:
    return _worker_count


def frac(a: float) -> float:
    """Fractional part: a - floor(a) for a >= 0, a - ceil(a) for a < 0."""
    return a - math.floor(a) if a >= 0 else a - math.ceil(a)


def _guard_diff_range(f: DataTable, g_lo: int, g_hi: int) -> None:
    if f.max_abs + max(abs(g_lo), abs(g_hi)) > _INT64_MAX:
        raise MeasureOverflowError(
            "pointwise differences f - g do not fit in 63-bit integers"
        )


def _profile_rows(f, g, coords, decoded, lo, hi, modulus) -> np.ndarray:
    xs = [c[np.newaxis, :] for c in coords]
    ys = [decoded[lo:hi, j:j + 1] for j in range(decoded.shape[1])]
    gvals = g.evaluate_on(xs, ys)
    diffs = f.values[np.newaxis, :] - gvals
    if diffs.shape[0] != hi - lo:
        diffs = np.broadcast_to(diffs, (hi - lo, f.values.size))
    return kernels.q_values(diffs, modulus)


def q_profile(f: DataTable, g, space: ParameterSpace, modulus: float) -> np.ndarray:
    """Per-parameter-vector Q values in enumeration order, shape (|Y|,)."""
    if space.size < 1:
        raise DegenerateMeasureError("empty parameter space")
    g_lo, g_hi = g.value_bounds(f.grid, space)
    _guard_diff_range(f, g_lo, g_hi)
    coords = f.grid.coordinate_arrays()
    decoded = space.decoded_matrix()
    n = space.size
    workers = min(_worker_count, n)
    if workers <= 1:
        return _profile_rows(f, g, coords, decoded, 0, n, modulus)
    bounds = [(i * n // workers, (i + 1) * n // workers) for i in range(workers)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        chunks = list(
            pool.map(lambda b: _profile_rows(f, g, coords, decoded, b[0], b[1], modulus), bounds)
        )
    return np.concatenate(chunks)


def q_measure(f: DataTable, g, y, modulus: float) -> float:
    """Q for a single decoded parameter vector."""
    coords = f.grid.coordinate_arrays()
    ys = [int(v) for v in y]
    gvals = g.evaluate_on([c for c in coords], ys)
    gvals = np.broadcast_to(gvals, f.values.shape)
    g_abs = int(np.abs(gvals).max()) if gvals.size else 0
    _guard_diff_range(f, -g_abs, g_abs)
    diffs = f.values - gvals
    return float(kernels.q_values(diffs[np.newaxis, :], modulus)[0])


def expected_q(f: DataTable, g, space: ParameterSpace, modulus: float) -> float:
    """Mean Q over the space; equals the z=0 measurement probability."""
    profile = q_profile(f, g, space, modulus)
    return math.fsum(profile) / space.size


def subset_mask(space: ParameterSpace, subset) -> np.ndarray:
    """Boolean mask over enumeration order from a mask, index list or predicate."""
    n = space.size
    if isinstance(subset, np.ndarray) and subset.dtype == bool:
        if subset.shape != (n,):
            raise ValueError(f"mask must have shape ({n},)")
        return subset
    if callable(subset):
        mask = np.zeros(n, dtype=bool)
        for i, vec in enumerate(space.enumerate()):
            mask[i] = bool(subset(vec))
        return mask
    mask = np.zeros(n, dtype=bool)
    mask[np.asarray(list(subset), dtype=np.int64)] = True
    return mask


def parameter_ratio(f: DataTable, g, subset, space: ParameterSpace, modulus: float) -> float:
    """Fraction of total Q-mass carried by the subset: r(Y', Y) in [0, 1]."""
    profile = q_profile(f, g, space, modulus)
    return ratio_from_profile(profile, subset_mask(space, subset))


def ratio_from_profile(profile: np.ndarray, mask: np.ndarray) -> float:
    den = math.fsum(profile)
    if den <= 0.0:
        raise DegenerateMeasureError("total Q mass is zero; ratios undefined")
    num = math.fsum(profile[mask])
    return num / den


def q_star(f: DataTable, g, y, modulus: float) -> float:
    """1 - sqrt(Q): a pseudometric on vertical-shift equivalence classes.

    Metric axioms hold only with high probability for small moduli and large
    grids; callers get the raw value with no certification.
    """
    return 1.0 - math.sqrt(q_measure(f, g, y, modulus))


def _diff_row(f: DataTable, g, y) -> np.ndarray:
    gvals = g.evaluate_on([c for c in f.grid.coordinate_arrays()], [int(v) for v in y])
    gvals = np.broadcast_to(gvals, f.values.shape)
    g_abs = int(np.abs(gvals).max()) if gvals.size else 0
    _guard_diff_range(f, -g_abs, g_abs)
    return f.values - gvals


def l1_star(f: DataTable, g, y, modulus: float) -> float:
    """Average normalized distance sum |f-g| / (|X| * M)."""
    diffs = _diff_row(f, g, y)
    total = int(np.abs(diffs).astype(object).sum()) if diffs.size else 0
    return total / (f.values.size * modulus)


def l2_star(f: DataTable, g, y, modulus: float) -> float:
    """Average normalized squared distance sum |f-g|^2 / (|X| * M^2)."""
    diffs = _diff_row(f, g, y)
    total = int((diffs.astype(object) ** 2).sum()) if diffs.size else 0
    return total / (f.values.size * modulus * modulus)


# ---------------------------------------------------------------------------
# Constructive modulus/shift certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundsCertificate:
    """(M, vertical shifts) placing the phasor walk on the real axis with
    every |f + sum(shifts) - g| <= M/4."""

    final_modulus: float
    vertical_shifts: tuple[float, ...]

    @property
    def iterations(self) -> int:
        return len(self.vertical_shifts)


def _walk_endpoint(diffs: np.ndarray, modulus: float) -> tuple[float, float]:
    phases = 2.0 * np.pi * np.mod(diffs, modulus) / modulus
    return math.fsum(np.cos(phases)), math.fsum(np.sin(phases))


_ENDPOINT_TOL = 1e-9  # |imag| per point; exact zero is unattainable in floats


def bounds_certificate(f: DataTable, g, y, max_iterations: int = 64) -> BoundsCertificate:
    """Iteratively choose M = 4*max|f-g| and a vertical shift that lands the
    walk endpoint on the real axis, re-deriving M while shifts disturb the
    quarter-modulus bound."""
    diffs = _diff_row(f, g, y).astype(np.float64)
    nx = diffs.size
    spread = float(diffs.max() - diffs.min()) if nx else 0.0
    if spread == 0.0:
        # constant difference: same equivalence class; center it and use M=1
        c = float(diffs[0]) if nx else 0.0
        shifts = () if c == 0.0 else (-c,)
        return BoundsCertificate(final_modulus=1.0, vertical_shifts=shifts)

    shifts: list[float] = []
    for _ in range(max_iterations):
        modulus = 4.0 * float(np.abs(diffs).max())
        re, im = _walk_endpoint(diffs, modulus)
        if abs(im) / nx <= _ENDPOINT_TOL:
            return BoundsCertificate(modulus, tuple(shifts))
        shift = -modulus * math.atan2(im, re) / (2.0 * np.pi)
        diffs = diffs + shift
        shifts.append(shift)
        if float(np.abs(diffs).max()) <= modulus / 4.0 * (1.0 + 1e-12):
            re, im = _walk_endpoint(diffs, modulus)
            if abs(im) / nx <= _ENDPOINT_TOL:
                return BoundsCertificate(modulus, tuple(shifts))
    raise CertificateError(
        f"modulus/shift construction did not stabilize in {max_iterations} iterations"
    )


def verify_certificate(f: DataTable, g, y, cert: BoundsCertificate) -> dict:
    """Independent check of the certificate postconditions and the Q* sandwich
    2*pi*L1* + (1 - pi/2) <= Q* <= 2*pi^2*L2* on the shifted pair."""
    diffs = _diff_row(f, g, y).astype(np.float64) + math.fsum(cert.vertical_shifts)
    nx = diffs.size
    modulus = cert.final_modulus
    re, im = _walk_endpoint(diffs, modulus)
    q = (re * re + im * im) / (nx * nx)
    q = min(max(q, 0.0), 1.0)
    qstar = 1.0 - math.sqrt(q)
    l1s = math.fsum(np.abs(diffs)) / (nx * modulus)
    l2s = math.fsum(diffs * diffs) / (nx * modulus * modulus)
    max_ratio = float(np.abs(diffs).max()) / modulus
    lower = 2.0 * math.pi * l1s + (1.0 - math.pi / 2.0)
    upper = 2.0 * math.pi**2 * l2s
    slack = 1e-9
    return {
        "modulus": modulus,
        "max_ratio": max_ratio,
        "endpoint_imag": im / nx,
        "q_star": qstar,
        "lower_bound": lower,
        "upper_bound": upper,
        "quarter_bound_ok": max_ratio <= 0.25 + 1e-12,
        "endpoint_ok": abs(im) / nx <= _ENDPOINT_TOL,
        "sandwich_ok": (lower <= qstar + slack) and (qstar <= upper + slack),
    }

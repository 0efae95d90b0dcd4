"""Phase-summation backend selection and dispatch.

The compiled extension is preferred when importable; set PHASEFIT_PURE_PYTHON=1
to force the numpy/fsum fallback.  Both backends use a fixed row-major
summation order, so results are stable across runs and worker counts; the two
backends agree to within a couple of ulps (tests pin 1e-12).

Dispatch picks the exact power-of-two reduction when the modulus is 2**n with
0 <= n <= 62 and differences are integers; otherwise differences are reduced
as float64, which requires |difference| <= 2**53 to be exact.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .errors import MeasureOverflowError, PhasefitError

_FLOAT_EXACT_LIMIT = 2**53

if os.environ.get("PHASEFIT_PURE_PYTHON"):
    from . import _phase_kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _phase_kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - build environment dependent
        from . import _phase_kernels_py as _impl

        BACKEND = "python"


def backend_name() -> str:
    return BACKEND


def _pow2_exponent(modulus: float) -> int | None:
    if modulus <= 0:
        return None
    exponent = int(round(math.log2(modulus)))
    if 0 <= exponent <= 62 and float(2**exponent) == float(modulus):
        return exponent
    return None


def q_values(diffs: np.ndarray, modulus: float) -> np.ndarray:
    """Per-row |mean unit phasor|^2 of a (ny, nx) difference matrix."""
    if modulus <= 0 or not math.isfinite(modulus):
        raise PhasefitError(f"modulus must be a positive finite real, got {modulus}")
    diffs = np.atleast_2d(diffs)
    exponent = _pow2_exponent(modulus)
    if exponent is not None and np.issubdtype(diffs.dtype, np.integer):
        arr = np.ascontiguousarray(diffs, dtype=np.int64)
        return _impl.q_values_pow2(arr, exponent)
    if np.issubdtype(diffs.dtype, np.integer):
        if diffs.size and int(np.abs(diffs).max()) > _FLOAT_EXACT_LIMIT:
            raise MeasureOverflowError(
                "differences exceed 2**53; non-power-of-two moduli cannot "
                "reduce them exactly"
            )
    arr = np.ascontiguousarray(diffs, dtype=np.float64)
    return _impl.q_values_real(arr, float(modulus))

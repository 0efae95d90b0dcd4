"""Pure-python phase-summation kernels (fallback when the extension is absent).

Per row of the difference matrix: reduce each difference modulo M, sum the
unit phasors in fixed row-major order, and return |mean phasor|^2.  math.fsum
gives an exactly rounded fixed-order sum, matching the compensated summation
of the compiled kernel to within an ulp or two.
"""

from __future__ import annotations

from math import fsum, pi

import numpy as np

_TWO_PI = 2.0 * pi


def _finish(cos_rows: np.ndarray, sin_rows: np.ndarray) -> np.ndarray:
    ny, nx = cos_rows.shape
    out = np.empty(ny, dtype=np.float64)
    inv = 1.0 / (float(nx) * float(nx))
    for i in range(ny):
        c = fsum(cos_rows[i])
        s = fsum(sin_rows[i])
        q = (c * c + s * s) * inv
        out[i] = 0.0 if q < 0.0 else (1.0 if q > 1.0 else q)
    return out


def q_values_pow2(diffs: np.ndarray, n_exp: int) -> np.ndarray:
    """Per-row squared mean phasor with modulus 2**n_exp; exact reduction."""
    mask = np.int64((1 << n_exp) - 1)
    reduced = np.bitwise_and(diffs, mask)  # two's complement AND == mod 2**n_exp
    phases = reduced * (_TWO_PI / float(1 << n_exp))
    return _finish(np.cos(phases), np.sin(phases))


def q_values_real(diffs: np.ndarray, modulus: float) -> np.ndarray:
    """Per-row squared mean phasor for an arbitrary positive real modulus."""
    reduced = np.mod(diffs.astype(np.float64), modulus)
    phases = reduced * (_TWO_PI / modulus)
    return _finish(np.cos(phases), np.sin(phases))

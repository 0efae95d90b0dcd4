# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled phase-summation kernels.

Same contract as _phase_kernels_py: per row, reduce differences modulo the
modulus, accumulate unit phasors in fixed row-major order with Neumaier
compensated summation, return |mean phasor|^2 clipped to [0, 1].
"""

from libc.math cimport cos, sin, fmod, fabs

import numpy as np

cimport numpy as cnp

cdef double TWO_PI = 6.283185307179586476925286766559


cdef inline double _clip01(double q) nogil:
    if q < 0.0:
        return 0.0
    if q > 1.0:
        return 1.0
    return q


def q_values_pow2(cnp.int64_t[:, ::1] diffs, int n_exp):
    cdef Py_ssize_t ny = diffs.shape[0]
    cdef Py_ssize_t nx = diffs.shape[1]
    cdef cnp.uint64_t mask = (<cnp.uint64_t>1 << n_exp) - 1
    cdef double inv_m = 1.0 / (<double>(<cnp.uint64_t>1 << n_exp))
    cdef double inv_nx2 = 1.0 / (<double>nx * <double>nx)
    out = np.empty(ny, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j
    cdef double ph, v, t
    cdef double c_sum, c_comp, s_sum, s_comp, c, s
    with nogil:
        for i in range(ny):
            c_sum = 0.0; c_comp = 0.0; s_sum = 0.0; s_comp = 0.0
            for j in range(nx):
                # uint64 AND == value mod 2**n_exp (2**n_exp divides 2**64)
                ph = TWO_PI * (<double>((<cnp.uint64_t>diffs[i, j]) & mask)) * inv_m
                v = cos(ph)
                t = c_sum + v
                if fabs(c_sum) >= fabs(v):
                    c_comp += (c_sum - t) + v
                else:
                    c_comp += (v - t) + c_sum
                c_sum = t
                v = sin(ph)
                t = s_sum + v
                if fabs(s_sum) >= fabs(v):
                    s_comp += (s_sum - t) + v
                else:
                    s_comp += (v - t) + s_sum
                s_sum = t
            c = c_sum + c_comp
            s = s_sum + s_comp
            ov[i] = _clip01((c * c + s * s) * inv_nx2)
    return out


def q_values_real(double[:, ::1] diffs, double modulus):
    cdef Py_ssize_t ny = diffs.shape[0]
    cdef Py_ssize_t nx = diffs.shape[1]
    cdef double inv_m = 1.0 / modulus
    cdef double inv_nx2 = 1.0 / (<double>nx * <double>nx)
    out = np.empty(ny, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j
    cdef double ph, r, v, t
    cdef double c_sum, c_comp, s_sum, s_comp, c, s
    with nogil:
        for i in range(ny):
            c_sum = 0.0; c_comp = 0.0; s_sum = 0.0; s_comp = 0.0
            for j in range(nx):
                r = fmod(diffs[i, j], modulus)
                if r < 0.0:
                    r += modulus
                ph = TWO_PI * r * inv_m
                v = cos(ph)
                t = c_sum + v
                if fabs(c_sum) >= fabs(v):
                    c_comp += (c_sum - t) + v
                else:
                    c_comp += (v - t) + c_sum
                c_sum = t
                v = sin(ph)
                t = s_sum + v
                if fabs(s_sum) >= fabs(v):
                    s_comp += (s_sum - t) + v
                else:
                    s_comp += (v - t) + s_sum
                s_sum = t
            c = c_sum + c_comp
            s = s_sum + s_comp
            ov[i] = _clip01((c * c + s * s) * inv_nx2)
    return out

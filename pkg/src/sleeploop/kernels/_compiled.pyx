# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: streaming biquad cascade, crossing scan, 24-bit codec.

The biquad recursion mirrors the transposed direct form II used by
scipy.signal.sosfilt, same operation order, so both backends agree bitwise.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def sosfilt_stream(cnp.ndarray[cnp.float64_t, ndim=2] sos,
                   cnp.ndarray[cnp.float64_t, ndim=1] x,
                   cnp.ndarray[cnp.float64_t, ndim=2] zi):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t ns = sos.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, s
    cdef double x_new, x_cur
    for i in range(n):
        x_new = x[i]
        for s in range(ns):
            x_cur = x_new
            x_new = sos[s, 0] * x_cur + zi[s, 0]
            zi[s, 0] = sos[s, 1] * x_cur - sos[s, 4] * x_new + zi[s, 1]
            zi[s, 1] = sos[s, 2] * x_cur - sos[s, 5] * x_new
        y[i] = x_new
    return y


def crossing_candidates(cnp.ndarray[cnp.float64_t, ndim=1] x,
                        double prev, double threshold):
    cdef Py_ssize_t n = x.shape[0]
    cdef list idx = []
    cdef list fracs = []
    cdef double before, after, span
    cdef Py_ssize_t i
    before = prev
    for i in range(n):
        after = x[i]
        if before > threshold and after <= threshold:
            span = before - after
            idx.append(i)
            fracs.append((before - threshold) / span)
        before = after
    return (np.asarray(idx, dtype=np.int64),
            np.asarray(fracs, dtype=np.float64))


def pack_i24(codes):
    cdef cnp.ndarray[cnp.int32_t, ndim=1] c = np.ascontiguousarray(codes, dtype=np.int32)
    cdef Py_ssize_t n = c.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.empty(n * 3, dtype=np.uint8)
    cdef Py_ssize_t i
    cdef unsigned int v
    for i in range(n):
        v = <unsigned int> c[i]
        out[3 * i] = v & 0xFF
        out[3 * i + 1] = (v >> 8) & 0xFF
        out[3 * i + 2] = (v >> 16) & 0xFF
    return out.tobytes()


def unpack_i24(buf):
    cdef const unsigned char[:] u = buf
    cdef Py_ssize_t n = u.shape[0]
    if n % 3:
        raise ValueError("buffer length is not a multiple of 3")
    cdef cnp.ndarray[cnp.int32_t, ndim=1] out = np.empty(n // 3, dtype=np.int32)
    cdef Py_ssize_t i
    cdef int v
    for i in range(n // 3):
        v = u[3 * i] | (u[3 * i + 1] << 8) | (u[3 * i + 2] << 16)
        if v >= 1 << 23:
            v -= 1 << 24
        out[i] = v
    return out

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Signatures and results mirror ``_pycore``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, cos, sin, fabs, copysign, M_PI
from libc.stdint cimport uint64_t

cnp.import_array()

backend_name = "compiled"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t STREAM_SALT = 0x632BE59BD9B4E019ULL
cdef double TWO53 = 1.0 / 9007199254740992.0
cdef double TWO_PI = 2.0 * M_PI
cdef double BOUNDARY_MARGIN = 1e-6


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t stream_key(uint64_t key, uint64_t s) noexcept nogil:
    return mix64(key ^ mix64(s * GOLDEN + STREAM_SALT))


cdef inline uint64_t bits(uint64_t sk, uint64_t c) noexcept nogil:
    return mix64(sk + (c + 1) * GOLDEN)


cdef inline void normal_pair(uint64_t sk, uint64_t q, double* z0, double* z1) noexcept nogil:
    cdef double u1 = <double>((bits(sk, 2 * q) >> 11) + 1) * TWO53
    cdef double u2 = <double>(bits(sk, 2 * q + 1) >> 11) * TWO53
    cdef double r = sqrt(-2.0 * log(u1))
    cdef double theta = u2 * TWO_PI
    z0[0] = r * cos(theta)
    z1[0] = r * sin(theta)


def fill_uniforms(uint64_t key, Py_ssize_t stream0, Py_ssize_t n_streams,
                  Py_ssize_t col0, Py_ssize_t n_cols):
    out = np.empty((n_streams, n_cols))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, c
    cdef uint64_t sk
    with nogil:
        for i in range(n_streams):
            sk = stream_key(key, <uint64_t>(stream0 + i))
            for c in range(n_cols):
                o[i, c] = <double>(bits(sk, <uint64_t>(col0 + c)) >> 11) * TWO53
    return out


def fill_normals(uint64_t key, Py_ssize_t stream0, Py_ssize_t n_streams,
                 Py_ssize_t col0, Py_ssize_t n_cols):
    out = np.empty((n_streams, n_cols))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, c, cend = col0 + n_cols
    cdef uint64_t sk, q
    cdef double z0, z1
    with nogil:
        for i in range(n_streams):
            sk = stream_key(key, <uint64_t>(stream0 + i))
            c = col0
            if c & 1:
                normal_pair(sk, <uint64_t>(c >> 1), &z0, &z1)
                o[i, 0] = z1
                c += 1
            while c + 1 < cend:
                normal_pair(sk, <uint64_t>(c >> 1), &z0, &z1)
                o[i, c - col0] = z0
                o[i, c - col0 + 1] = z1
                c += 2
            if c < cend:
                normal_pair(sk, <uint64_t>(c >> 1), &z0, &z1)
                o[i, c - col0] = z0
    return out


cdef inline double drift(double x, int kind, double alpha, double A, double k) noexcept nogil:
    if kind == 0:
        return -alpha * x
    return -2.0 * k * x / (A * A - x * x)


def euler_paths(x0, drive, noise, int kind, double alpha, double A, double k, double dt):
    cdef double[::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(drive, dtype=np.float64)
    cdef double[:, ::1] nz = np.ascontiguousarray(noise, dtype=np.float64)
    cdef Py_ssize_t P = nz.shape[0], L = nz.shape[1], p, l
    out = np.empty((P, L + 1))
    cdef double[:, ::1] X = out
    cdef double x, xn, bound = A * (1.0 - BOUNDARY_MARGIN)
    cdef long clamps = 0
    with nogil:
        for p in range(P):
            x = x0v[p]
            X[p, 0] = x
            for l in range(L):
                xn = x + (drift(x, kind, alpha, A, k) + dv[l]) * dt + nz[p, l]
                if kind == 1 and fabs(xn) > bound:
                    xn = copysign(bound, xn)
                    clamps += 1
                X[p, l + 1] = xn
                x = xn
    return out, clamps


def euler_step(x, drive, noise, int kind, double alpha, double A, double k, double dt):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(drive, dtype=np.float64)
    cdef double[::1] nz = np.ascontiguousarray(noise, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double xn, bound = A * (1.0 - BOUNDARY_MARGIN)
    cdef long clamps = 0
    with nogil:
        for i in range(n):
            xn = xv[i] + (drift(xv[i], kind, alpha, A, k) + dv[i]) * dt + nz[i]
            if kind == 1 and fabs(xn) > bound:
                xn = copysign(bound, xn)
                clamps += 1
            o[i] = xn
    return out, clamps


def gaussian_matvec(uint64_t key, Py_ssize_t n, double mean, double scale, f,
                    Py_ssize_t row_block=256):
    cdef double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    out = np.empty(n)
    cdef double[::1] o = out
    cdef Py_ssize_t i, c, blk
    cdef uint64_t sk
    cdef double z0, z1, part, total
    with nogil:
        for i in range(n):
            sk = stream_key(key, <uint64_t>i)
            total = 0.0
            part = 0.0
            blk = 0
            c = 0
            while c + 1 < n:
                normal_pair(sk, <uint64_t>(c >> 1), &z0, &z1)
                part += (mean + scale * z0) * fv[c] + (mean + scale * z1) * fv[c + 1]
                c += 2
                blk += 2
                # blocked accumulation bounds the rounding growth for large n
                if blk >= 256:
                    total += part
                    part = 0.0
                    blk = 0
            if c < n:
                normal_pair(sk, <uint64_t>(c >> 1), &z0, &z1)
                part += (mean + scale * z0) * fv[c]
            o[i] = total + part
    return out

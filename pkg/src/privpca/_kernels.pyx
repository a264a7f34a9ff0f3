# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops of the streaming updates.

Each function updates ``w`` in place over a contiguous block of samples and
returns the index of the first step whose unnormalized iterate had zero
norm (-1 when none did).  Signatures mirror ``privpca._fallback``.
"""
from libc.math cimport sqrt


cdef inline Py_ssize_t _finish(double[::1] w, double nrm2, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t j
    cdef double inv
    if nrm2 == 0.0:
        return 1
    inv = 1.0 / sqrt(nrm2)
    for j in range(d):
        w[j] *= inv
    return 0


def oja_rank1(const double[:, ::1] x, const double[::1] etas, double[::1] w):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], t, j
    cdef Py_ssize_t failed = -1
    cdef double proj, nrm2, eta
    with nogil:
        for t in range(n):
            eta = etas[t]
            proj = 0.0
            for j in range(d):
                proj += x[t, j] * w[j]
            nrm2 = 0.0
            for j in range(d):
                w[j] = w[j] + eta * (x[t, j] * proj)
                nrm2 += w[j] * w[j]
            if _finish(w, nrm2, d):
                failed = t
                break
    return failed


def oja_dense(const double[:, :, ::1] a, const double[::1] etas, double[::1] w, double[::1] work):
    cdef Py_ssize_t n = a.shape[0], d = a.shape[1], t, i, j
    cdef Py_ssize_t failed = -1
    cdef double s, nrm2, eta
    with nogil:
        for t in range(n):
            eta = etas[t]
            for i in range(d):
                s = 0.0
                for j in range(d):
                    s += a[t, i, j] * w[j]
                work[i] = s
            nrm2 = 0.0
            for j in range(d):
                w[j] = w[j] + eta * work[j]
                nrm2 += w[j] * w[j]
            if _finish(w, nrm2, d):
                failed = t
                break
    return failed


def private_oja_rank1(const double[:, ::1] x, const double[::1] etas, double[::1] w,
                      double beta, double noise_coef, const double[:, ::1] z):
    """Clip-and-noise updates; returns (failed_step, clipped_steps)."""
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], t, j
    cdef Py_ssize_t clipped = 0, failed = -1
    cdef double proj, gnorm2, scale, nrm2, eta
    with nogil:
        for t in range(n):
            eta = etas[t]
            proj = 0.0
            gnorm2 = 0.0
            for j in range(d):
                proj += x[t, j] * w[j]
            for j in range(d):
                gnorm2 += (x[t, j] * proj) * (x[t, j] * proj)
            scale = 1.0
            if gnorm2 > beta * beta:
                scale = beta / sqrt(gnorm2)
                clipped += 1
            nrm2 = 0.0
            for j in range(d):
                if scale != 1.0:
                    w[j] = w[j] + eta * ((x[t, j] * proj) * scale) + eta * noise_coef * z[t, j]
                else:
                    w[j] = w[j] + eta * (x[t, j] * proj) + eta * noise_coef * z[t, j]
                nrm2 += w[j] * w[j]
            if _finish(w, nrm2, d):
                failed = t
                break
    return failed, clipped


def private_oja_dense(const double[:, :, ::1] a, const double[::1] etas, double[::1] w,
                      double beta, double noise_coef, const double[:, ::1] z, double[::1] work):
    cdef Py_ssize_t n = a.shape[0], d = a.shape[1], t, i, j
    cdef Py_ssize_t clipped = 0, failed = -1
    cdef double s, gnorm2, scale, nrm2, eta
    with nogil:
        for t in range(n):
            eta = etas[t]
            gnorm2 = 0.0
            for i in range(d):
                s = 0.0
                for j in range(d):
                    s += a[t, i, j] * w[j]
                work[i] = s
                gnorm2 += s * s
            scale = 1.0
            if gnorm2 > beta * beta:
                scale = beta / sqrt(gnorm2)
                clipped += 1
            nrm2 = 0.0
            for j in range(d):
                if scale != 1.0:
                    w[j] = w[j] + eta * (work[j] * scale) + eta * noise_coef * z[t, j]
                else:
                    w[j] = w[j] + eta * work[j] + eta * noise_coef * z[t, j]
                nrm2 += w[j] * w[j]
            if _finish(w, nrm2, d):
                failed = t
                break
    return failed, clipped

# cython: language_level=3
"""Compiled RK4 kernels; drop-in twins of ``_pykernels``."""

import numpy as np

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double complex conj(double complex)


cdef inline void _matvec(const double complex[:, ::1] A, const double complex* x,
                         double complex* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double complex acc
    for i in range(n):
        acc = 0
        for j in range(n):
            acc = acc + A[i, j] * x[j]
        out[i] = acc


def rk4_constant(L, y0, double h, Py_ssize_t nsteps, Py_ssize_t stride):
    cdef double complex[:, ::1] A = np.ascontiguousarray(L, dtype=np.complex128)
    cdef Py_ssize_t n = A.shape[0]
    cdef double complex[::1] y = np.array(y0, dtype=np.complex128)
    out_arr = np.empty((nsteps // stride + 1, n), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex[:, ::1] work = np.empty((5, n), dtype=np.complex128)
    cdef double complex* k1 = &work[0, 0]
    cdef double complex* k2 = &work[1, 0]
    cdef double complex* k3 = &work[2, 0]
    cdef double complex* k4 = &work[3, 0]
    cdef double complex* tmp = &work[4, 0]
    cdef double half = 0.5 * h
    cdef double sixth = h / 6.0
    cdef Py_ssize_t step, i, row = 1

    out[0, :] = y
    with nogil:
        for step in range(1, nsteps + 1):
            _matvec(A, &y[0], k1, n)
            for i in range(n):
                tmp[i] = y[i] + half * k1[i]
            _matvec(A, tmp, k2, n)
            for i in range(n):
                tmp[i] = y[i] + half * k2[i]
            _matvec(A, tmp, k3, n)
            for i in range(n):
                tmp[i] = y[i] + h * k3[i]
            _matvec(A, tmp, k4, n)
            for i in range(n):
                y[i] = y[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if step % stride == 0:
                for i in range(n):
                    out[row, i] = y[i]
                row += 1
    return out_arr


cdef inline double complex _modulation(const double complex[::1] amps,
                                       const double[::1] freqs,
                                       double t) noexcept nogil:
    cdef Py_ssize_t m
    cdef double complex acc = 0
    for m in range(amps.shape[0]):
        acc = acc + amps[m] * cexp(1j * freqs[m] * t)
    return acc


cdef inline void _deriv(const double complex[:, ::1] L0,
                        const double complex[:, ::1] K1,
                        const double complex[:, ::1] K2,
                        double complex f, const double complex* x,
                        double complex* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double complex fc = conj(f)
    cdef double complex acc
    for i in range(n):
        acc = 0
        for j in range(n):
            acc = acc + (L0[i, j] + f * K1[i, j] + fc * K2[i, j]) * x[j]
        out[i] = acc


def rk4_modulated(L0, K1, K2, amps, freqs, y0, double t0, double h,
                  Py_ssize_t nsteps, Py_ssize_t stride):
    cdef double complex[:, ::1] A0 = np.ascontiguousarray(L0, dtype=np.complex128)
    cdef double complex[:, ::1] B1 = np.ascontiguousarray(K1, dtype=np.complex128)
    cdef double complex[:, ::1] B2 = np.ascontiguousarray(K2, dtype=np.complex128)
    cdef double complex[::1] a = np.ascontiguousarray(amps, dtype=np.complex128)
    cdef double[::1] w = np.ascontiguousarray(freqs, dtype=np.float64)
    cdef Py_ssize_t n = A0.shape[0]
    cdef double complex[::1] y = np.array(y0, dtype=np.complex128)
    out_arr = np.empty((nsteps // stride + 1, n), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex[:, ::1] work = np.empty((5, n), dtype=np.complex128)
    cdef double complex* k1 = &work[0, 0]
    cdef double complex* k2 = &work[1, 0]
    cdef double complex* k3 = &work[2, 0]
    cdef double complex* k4 = &work[3, 0]
    cdef double complex* tmp = &work[4, 0]
    cdef double half = 0.5 * h
    cdef double sixth = h / 6.0
    cdef double t
    cdef double complex f0, fm, f1
    cdef Py_ssize_t step, i, row = 1

    out[0, :] = y
    with nogil:
        for step in range(1, nsteps + 1):
            t = t0 + (step - 1) * h
            f0 = _modulation(a, w, t)
            fm = _modulation(a, w, t + half)
            f1 = _modulation(a, w, t + h)
            _deriv(A0, B1, B2, f0, &y[0], k1, n)
            for i in range(n):
                tmp[i] = y[i] + half * k1[i]
            _deriv(A0, B1, B2, fm, tmp, k2, n)
            for i in range(n):
                tmp[i] = y[i] + half * k2[i]
            _deriv(A0, B1, B2, fm, tmp, k3, n)
            for i in range(n):
                tmp[i] = y[i] + h * k3[i]
            _deriv(A0, B1, B2, f1, tmp, k4, n)
            for i in range(n):
                y[i] = y[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if step % stride == 0:
                for i in range(n):
                    out[row, i] = y[i]
                row += 1
    return out_arr

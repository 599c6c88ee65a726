"""Pure-Python (numpy) RK4 kernels.

Reference implementation of the compiled kernels in ``_ckernels.pyx``; both
modules expose the same two functions with the same signatures and are
interchangeable through :mod:`pmlep.kernels`.
"""

import numpy as np


def rk4_constant(L, y0, h, nsteps, stride):
    """Classical RK4 for ``y' = L y`` with constant ``L``.

    Returns every ``stride``-th state, starting with ``y0``; the output has
    ``nsteps // stride + 1`` rows.
    """
    L = np.ascontiguousarray(L, dtype=np.complex128)
    y = np.array(y0, dtype=np.complex128)
    out = np.empty((nsteps // stride + 1, y.size), dtype=np.complex128)
    out[0] = y
    half = 0.5 * h
    row = 1
    for step in range(1, nsteps + 1):
        k1 = L @ y
        k2 = L @ (y + half * k1)
        k3 = L @ (y + half * k2)
        k4 = L @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % stride == 0:
            out[row] = y
            row += 1
    return out


def _modulation(amps, freqs, t):
    return complex(np.sum(amps * np.exp(1j * freqs * t)))


def rk4_modulated(L0, K1, K2, amps, freqs, y0, t0, h, nsteps, stride):
    """RK4 for ``y' = (L0 + f(t) K1 + conj(f(t)) K2) y``.

    ``f(t) = sum_m amps[m] * exp(1j * freqs[m] * t)``. Output layout matches
    :func:`rk4_constant`.
    """
    L0 = np.ascontiguousarray(L0, dtype=np.complex128)
    K1 = np.ascontiguousarray(K1, dtype=np.complex128)
    K2 = np.ascontiguousarray(K2, dtype=np.complex128)
    amps = np.asarray(amps, dtype=np.complex128)
    freqs = np.asarray(freqs, dtype=np.float64)
    y = np.array(y0, dtype=np.complex128)
    out = np.empty((nsteps // stride + 1, y.size), dtype=np.complex128)
    out[0] = y
    half = 0.5 * h
    row = 1

    def deriv(f, v):
        return L0 @ v + f * (K1 @ v) + f.conjugate() * (K2 @ v)

    for step in range(1, nsteps + 1):
        t = t0 + (step - 1) * h
        f0 = _modulation(amps, freqs, t)
        fm = _modulation(amps, freqs, t + half)
        f1 = _modulation(amps, freqs, t + h)
        k1 = deriv(f0, y)
        k2 = deriv(fm, y + half * k1)
        k3 = deriv(fm, y + half * k2)
        k4 = deriv(f1, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % stride == 0:
            out[row] = y
            row += 1
    return out

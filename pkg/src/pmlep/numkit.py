"""Small dense complex linear algebra and special functions.

Matrices are 2-D ``complex128`` numpy arrays and vectors 1-D ones; numpy only
provides storage and elementwise arithmetic, the algorithms (matrix
exponential, elimination, Bessel functions, RK4) live here.

Vectorization convention
------------------------
Row stacking throughout: ``vec(m)[3*i + j] == m[i, j]``. With this choice
``vec(A @ rho @ B) == kron(A, B.T) @ vec(rho)``, so the commutator with ``H``
becomes ``kron(H, I) - kron(I, H.T)``.
"""

import cmath
import math
from typing import Callable, NamedTuple, Union

import numpy as np

from . import kernels
from .errors import DomainError, ExpmOverflowError, GridError, SingularMatrixError

EXPM_MAX_NORM = 1e4
TAYLOR_TOL = 1e-13
SINGULAR_PIVOT_TOL = 1e-13
RANK_PIVOT_TOL = 1e-10
BESSEL_SERIES_CUTOFF = 12.0
BESSEL_MAX_ORDER = 50
BESSEL_MAX_ARG = 100.0


def csqrt(z: complex) -> complex:
    """Principal square root with ``Re >= 0`` and ``Im >= 0`` when ``Re == 0``.

    ``cmath.sqrt`` honours the sign of a zero imaginary part, which would put
    ``sqrt(-4 - 0j)`` on the lower half axis; that case is folded back here.
    """
    r = cmath.sqrt(complex(z))
    if r.real == 0.0 and r.imag < 0.0:
        r = complex(0.0, -r.imag)
    return r


def as_cmat(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DomainError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def is_hermitian(m, tol: float = 1e-10) -> bool:
    a = as_cmat(m)
    if a.shape[0] != a.shape[1]:
        return False
    return float(np.max(np.abs(a - a.conj().T), initial=0.0)) < tol


def norm_inf(m) -> float:
    """Maximum absolute row sum."""
    a = np.asarray(m)
    if a.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(a), axis=-1)))


def kron(a, b) -> np.ndarray:
    """Kronecker product, ``out[p*rb + q, r*cb + s] = a[p, r] * b[q, s]``."""
    a = as_cmat(a)
    b = as_cmat(b)
    ra, ca = a.shape
    rb, cb = b.shape
    out = a[:, None, :, None] * b[None, :, None, :]
    return out.reshape(ra * rb, ca * cb)


def vec_rowmajor(m) -> np.ndarray:
    a = as_cmat(m)
    if a.shape != (3, 3):
        raise DomainError(f"vec_rowmajor expects a 3x3 matrix, got {a.shape}")
    return a.reshape(9).copy()


def unvec_rowmajor(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.complex128)
    if a.shape != (9,):
        raise DomainError(f"unvec_rowmajor expects a length-9 vector, got {a.shape}")
    return a.reshape(3, 3).copy()


def expm(m, t: float = 1.0, *, max_norm: float = EXPM_MAX_NORM) -> np.ndarray:
    """Matrix exponential ``exp(m * t)`` by scaling and squaring.

    The scaled matrix has 1-norm at most 1/2 and its Taylor series is summed
    until a term drops below ``TAYLOR_TOL`` relative to the partial sum.

    Raises
    ------
    ExpmOverflowError
        If ``||m t||_1`` is not finite or exceeds ``max_norm``.
    """
    a = as_cmat(m)
    n = a.shape[0]
    if a.shape[1] != n:
        raise DomainError("expm needs a square matrix")
    if not math.isfinite(t):
        raise DomainError("expm time must be finite")
    a = a * t
    norm = float(np.max(np.sum(np.abs(a), axis=0), initial=0.0))
    if not math.isfinite(norm) or norm > max_norm:
        raise ExpmOverflowError(f"||m t|| = {norm:.3g} exceeds bound {max_norm:.3g}")
    squarings = 0
    if norm > 0.5:
        squarings = int(math.ceil(math.log2(norm / 0.5)))
        a = a / (2.0**squarings)
    result = np.eye(n, dtype=np.complex128)
    term = np.eye(n, dtype=np.complex128)
    for k in range(1, 60):
        term = (term @ a) / k
        result = result + term
        if np.max(np.abs(term)) <= TAYLOR_TOL * np.max(np.abs(result)):
            break
    for _ in range(squarings):
        result = result @ result
    return result


class LinearSolution(NamedTuple):
    x: np.ndarray
    condition: float


def solve_linear(m, b) -> LinearSolution:
    """Solve ``m x = b`` by Gaussian elimination with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides (one per column).
    The returned ``condition`` is the ratio of the largest to the smallest
    pivot magnitude, a cheap proxy for the condition number.

    Raises
    ------
    SingularMatrixError
        When a pivot falls below ``1e-13 * ||m||_inf``.
    """
    a = as_cmat(m).copy()
    n = a.shape[0]
    if a.shape[1] != n:
        raise DomainError("solve_linear needs a square matrix")
    rhs = np.array(b, dtype=np.complex128)
    single = rhs.ndim == 1
    if single:
        rhs = rhs[:, None]
    if rhs.shape[0] != n:
        raise DomainError(f"right-hand side has {rhs.shape[0]} rows, expected {n}")
    threshold = SINGULAR_PIVOT_TOL * norm_inf(a)
    pivots = np.empty(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if p != k:
            a[[k, p]] = a[[p, k]]
            rhs[[k, p]] = rhs[[p, k]]
        piv = a[k, k]
        pivots[k] = abs(piv)
        if pivots[k] <= threshold:
            raise SingularMatrixError(f"pivot {pivots[k]:.3g} at column {k} is below {threshold:.3g}")
        factors = a[k + 1:, k] / piv
        a[k + 1:, k:] -= np.outer(factors, a[k, k:])
        rhs[k + 1:] -= np.outer(factors, rhs[k])
    x = np.empty_like(rhs)
    for k in range(n - 1, -1, -1):
        x[k] = (rhs[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    condition = float(pivots.max() / pivots.min())
    return LinearSolution(x[:, 0] if single else x, condition)


def _row_echelon(m, scale: float, rel_tol: float):
    """Complete-pivoting elimination; returns (reduced matrix, column order, rank)."""
    a = as_cmat(m).copy()
    rows, cols = a.shape
    order = np.arange(cols)
    threshold = rel_tol * scale
    rank = 0
    for k in range(min(rows, cols)):
        sub = np.abs(a[k:, k:])
        i, j = np.unravel_index(int(np.argmax(sub)), sub.shape)
        if sub[i, j] <= threshold:
            break
        i += k
        j += k
        a[[k, i]] = a[[i, k]]
        a[:, [k, j]] = a[:, [j, k]]
        order[[k, j]] = order[[j, k]]
        a[k] = a[k] / a[k, k]
        for r in range(rows):
            if r != k and a[r, k] != 0:
                a[r] -= a[r, k] * a[k]
        rank += 1
    return a, order, rank


def kernel_dimension(m, *, scale: float = None, rel_tol: float = RANK_PIVOT_TOL) -> int:
    """Dimension of the null space, counting pivots above ``rel_tol * scale``.

    ``scale`` defaults to ``||m||_inf``; pass the norm of an unshifted
    operator when ``m`` is a shifted one.
    """
    a = as_cmat(m)
    if scale is None:
        scale = norm_inf(a)
    _, _, rank = _row_echelon(a, scale, rel_tol)
    return a.shape[1] - rank


def null_space(m, *, scale: float = None, rel_tol: float = RANK_PIVOT_TOL) -> np.ndarray:
    """Basis of the null space as columns (not orthonormalised)."""
    a = as_cmat(m)
    if scale is None:
        scale = norm_inf(a)
    reduced, order, rank = _row_echelon(a, scale, rel_tol)
    cols = a.shape[1]
    basis = np.zeros((cols, cols - rank), dtype=np.complex128)
    for f in range(cols - rank):
        v = np.zeros(cols, dtype=np.complex128)
        v[rank + f] = 1.0
        v[:rank] = -reduced[:rank, rank + f]
        basis[order, f] = v
    return basis


def _bessel_series(n: int, x: float) -> float:
    half = 0.5 * x
    term = 1.0
    for k in range(1, n + 1):
        term *= half / k
    total = term
    q = -half * half
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + n))
        total += term
        if abs(term) <= 1e-17 * abs(total) or (term == 0.0):
            break
        if k > 500:
            break
    return total


def _bessel_miller(n: int, x: float) -> float:
    """Backward recurrence normalised with J0 + 2*(J2 + J4 + ...) = 1."""
    top = max(n, int(x))
    start = 2 * ((top + 30 + int(math.sqrt(60 * top))) // 2)
    j_next = 0.0
    j_cur = 1e-30
    norm = 0.0
    value = 0.0
    for k in range(start, 0, -1):
        j_prev = (2.0 * k / x) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        # j_cur now holds J_{k-1}
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_next *= 1e-250
            norm *= 1e-250
            value *= 1e-250
        if k - 1 == n:
            value = j_cur
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * j_cur
    norm += j_cur
    return value / norm


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind ``J_n(x)`` for integer order.

    Ascending series for ``|x| < 12``, Miller's backward recurrence beyond.
    Valid for ``|n| <= 50`` and ``|x| <= 100`` with absolute error below 1e-10.
    """
    if int(n) != n:
        raise DomainError("bessel_j takes an integer order")
    n = int(n)
    x = float(x)
    if abs(n) > BESSEL_MAX_ORDER or not abs(x) <= BESSEL_MAX_ARG:
        raise DomainError(f"bessel_j({n}, {x}) outside |n| <= 50, |x| <= 100")
    sign = 1.0
    if n < 0:
        n = -n
        if n % 2:
            sign = -sign
    if x < 0:
        x = -x
        if n % 2:
            sign = -sign
    if x == 0.0:
        return sign * (1.0 if n == 0 else 0.0)
    if x < BESSEL_SERIES_CUTOFF:
        return sign * _bessel_series(n, x)
    return sign * _bessel_miller(n, x)


def uniform_step(times) -> float:
    """Step of a strictly increasing uniform grid; raises :class:`GridError` otherwise."""
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise GridError("time grid must be a non-empty 1-D sequence")
    if t.size == 1:
        return 0.0
    d = np.diff(t)
    if np.any(d <= 0):
        raise GridError("time grid must be strictly increasing")
    h = (t[-1] - t[0]) / (t.size - 1)
    if np.max(np.abs(d - h)) > 1e-9 * max(abs(h), abs(t[-1])):
        raise GridError("time grid must be uniform")
    return float(h)


LinearRhs = Union[np.ndarray, Callable[[float], np.ndarray]]


def integrate_ode(rhs: LinearRhs, y0, times, *, substeps: int = 1) -> np.ndarray:
    """Classical RK4 for the linear system ``y' = A(t) y``.

    ``rhs`` is either a constant matrix ``A`` or a callable ``t -> A(t)``.
    Each grid interval is split into ``substeps`` RK4 steps; row ``k`` of the
    result is ``y(times[k])``.
    """
    h = uniform_step(times)
    t = np.asarray(times, dtype=float)
    y0 = np.asarray(y0, dtype=np.complex128)
    if t.size == 1:
        return y0[None, :].copy()
    substeps = int(substeps)
    if substeps < 1:
        raise DomainError("substeps must be >= 1")
    step = h / substeps
    nsteps = (t.size - 1) * substeps
    if not callable(rhs):
        return kernels.rk4_constant(as_cmat(rhs), y0, step, nsteps, substeps)
    out = np.empty((t.size, y0.size), dtype=np.complex128)
    out[0] = y0
    y = y0.copy()
    half = 0.5 * step
    for s in range(1, nsteps + 1):
        ts = t[0] + (s - 1) * step
        a0 = rhs(ts)
        am = rhs(ts + half)
        a1 = rhs(ts + step)
        k1 = a0 @ y
        k2 = am @ (y + half * k1)
        k3 = am @ (y + half * k2)
        k4 = a1 @ (y + step * k3)
        y = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if s % substeps == 0:
            out[s // substeps] = y
    return out

"""Qubit + pseudomode model in the single-excitation subspace.

Basis order is ``{|l,0>, |u,0>, |l,1>}`` (qubit level, pseudomode photon
number). Rates are angular frequencies; with times in microseconds they are
in rad/us.
"""

from dataclasses import dataclass, field
import math
from typing import Dict, List, Tuple

import numpy as np

from .errors import BracketError, DomainError
from .numkit import csqrt, kernel_dimension, kron, norm_inf

LOWER, UPPER, PHOTON = 0, 1, 2
EP_TOL = 1e-8
INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SystemParams:
    """Coupling ``g`` and pseudomode decay rate / spectral width ``kappa``.

    ``kappa = 0`` is accepted so that the coherent part can be built on its
    own; every spectral or dynamical routine requires ``kappa > 0``.
    """

    g: float
    kappa: float

    def __post_init__(self):
        if not (math.isfinite(self.g) and math.isfinite(self.kappa)):
            raise DomainError("g and kappa must be finite")
        if self.g < 0:
            raise DomainError(f"g must be >= 0, got {self.g}")
        if self.kappa < 0:
            raise DomainError(f"kappa must be >= 0, got {self.kappa}")

    @property
    def ratio(self) -> float:
        """``g / kappa``; the EP sits at 0.25."""
        return self.g / self.kappa

    def require_dissipative(self):
        if not self.kappa > 0:
            raise DomainError("kappa must be > 0")


def lorentzian_density(omega, omega0, kappa):
    """Normalised Lorentzian ``(1/pi) (kappa/2) / ((omega - omega0)^2 + (kappa/2)^2)``."""
    if not kappa > 0:
        raise DomainError("kappa must be > 0")
    half = 0.5 * kappa
    return (half / np.pi) / ((np.asarray(omega) - omega0) ** 2 + half * half)


def lowering_operator() -> np.ndarray:
    """Pseudomode annihilation ``b`` restricted to the subspace: ``|l,1> -> |l,0>``."""
    b = np.zeros((3, 3), dtype=np.complex128)
    b[LOWER, PHOTON] = 1.0
    return b


def hermitian_hamiltonian(p: SystemParams) -> np.ndarray:
    """Swap coupling ``g (b^dag |l><u| + b |u><l|)``."""
    h = np.zeros((3, 3), dtype=np.complex128)
    h[PHOTON, UPPER] = p.g
    h[UPPER, PHOTON] = p.g
    return h


def build_nh_hamiltonian(p: SystemParams) -> np.ndarray:
    """Effective non-Hermitian Hamiltonian: swap coupling minus ``i kappa/2 b^dag b``."""
    h = hermitian_hamiltonian(p)
    h[PHOTON, PHOTON] = -0.5j * p.kappa
    return h


def commutator_superop(h) -> np.ndarray:
    """Superoperator of ``rho -> -i [h, rho]`` in row-stacked form."""
    eye = np.eye(h.shape[0])
    return -1j * (kron(h, eye) - kron(eye, h.T))


def dissipator_superop(kappa: float) -> np.ndarray:
    """Superoperator of ``kappa/2 (2 b rho b^dag - {b^dag b, rho})``."""
    b = lowering_operator()
    n = b.conj().T @ b
    eye = np.eye(3)
    return 0.5 * kappa * (2.0 * kron(b, b.conj()) - kron(n, eye) - kron(eye, n.T))


@dataclass(frozen=True)
class LiouvillianMatrix:
    params: SystemParams
    m: np.ndarray = field(repr=False)

    @property
    def norm(self) -> float:
        return norm_inf(self.m)


def build_liouvillian(p: SystemParams) -> LiouvillianMatrix:
    """9x9 matrix of the extended Liouvillian acting on row-stacked ``rho``."""
    m = commutator_superop(hermitian_hamiltonian(p)) + dissipator_superop(p.kappa)
    return LiouvillianMatrix(p, m)


def xi(p: SystemParams) -> complex:
    """Spectral discriminant ``sqrt(kappa^2 - 16 g^2) / 2`` on the principal branch.

    Real and positive below the EP, zero at ``g = kappa/4``, and ``+i|xi|``
    above it.
    """
    return 0.5 * csqrt(complex(p.kappa * p.kappa - 16.0 * p.g * p.g, 0.0))


@dataclass(frozen=True)
class EigenPair:
    index: int
    eigenvalue: complex
    vector: np.ndarray = field(repr=False)
    normalization: float


@dataclass(frozen=True)
class SpectrumResult:
    params: SystemParams
    xi: complex
    pairs: Tuple[EigenPair, ...]
    at_ep: bool

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([pair.eigenvalue for pair in self.pairs])

    @property
    def basis(self) -> np.ndarray:
        """Matrix whose column ``j`` is ``V_j``."""
        return np.column_stack([pair.vector for pair in self.pairs])


def analytic_spectrum(p: SystemParams) -> SpectrumResult:
    """Closed-form eigenvalues and unit eigenvectors of the Liouvillian.

    Labels follow ``l5 = -kappa/2 - xi`` and ``l6 = -kappa/2 + xi`` together
    with the eigenvectors that go with them. At ``g = kappa/4`` the
    coalesced forms come out of the same formulas (``xi = 0``). At ``g = 0``
    the continuous limits ``V3 -> e6`` and ``V4 -> e2`` are returned, so the
    basis stays complete in the decoupled model.
    """
    p.require_dissipative()
    k, g = p.kappa, p.g
    x = xi(p)
    above = 4.0 * g >= k
    at_ep = x == 0
    s2 = math.sqrt(2.0)

    if above:
        n12 = n34 = 2.0 * s2 * g
        n56 = math.sqrt(k * k + 16.0 * g * g)
        minus = 0.5 * k - x
    else:
        xr = x.real
        n12 = math.sqrt(k * (0.5 * k + xr))
        # kappa/2 - xi without cancellation: (kappa/2)^2 - xi^2 = 4 g^2
        minus = complex(4.0 * g * g / (0.5 * k + xr))
        n34 = math.sqrt(k * minus.real)
        n56 = s2 * k
    plus = 0.5 * k + x
    n7 = math.sqrt(2.0 * k * k + 96.0 * g * g)

    def vec(entries, norm):
        v = np.zeros(9, dtype=np.complex128)
        for idx, val in entries.items():
            v[idx] = val
        if norm > 1e-150:
            return v / norm
        # tiny g: the closed-form norm underflows, rescale before normalising
        _, e = math.frexp(float(np.max(np.abs(v))))
        v = np.ldexp(v.real, -e) + 1j * np.ldexp(v.imag, -e)
        return v / np.linalg.norm(v)

    lam12 = -0.25 * k + 0.5 * x
    lam34 = -0.25 * k - 0.5 * x
    v0 = vec({0: 1.0}, 1.0)
    v1 = vec({3: 1j * plus, 6: 2.0 * g}, n12)
    v2 = vec({1: -1j * plus, 2: 2.0 * g}, n12)
    if g == 0:
        v3 = vec({6: 1.0}, 1.0)
        v4 = vec({2: 1.0}, 1.0)
    else:
        v3 = vec({3: 1j * minus, 6: 2.0 * g}, n34)
        v4 = vec({1: -1j * minus, 2: 2.0 * g}, n34)
    v5 = vec({0: -k, 4: minus, 5: 2j * g, 7: -2j * g, 8: plus}, n56)
    v6 = vec({0: -k, 4: plus, 5: 2j * g, 7: -2j * g, 8: minus}, n56)
    v7 = vec({0: -8.0 * g, 4: 4.0 * g, 5: 1j * k, 7: -1j * k, 8: 4.0 * g}, n7)
    v8 = vec({5: 1.0, 7: 1.0}, s2)

    values = [0.0, lam12, lam12, lam34, lam34, -0.5 * k - x, -0.5 * k + x, -0.5 * k, -0.5 * k]
    vectors = [v0, v1, v2, v3, v4, v5, v6, v7, v8]
    norms = [1.0, n12, n12, n34, n34, n56, n56, n7, s2]
    pairs = tuple(
        EigenPair(j, complex(values[j]), vectors[j], float(norms[j])) for j in range(9)
    )
    return SpectrumResult(p, x, pairs, bool(at_ep))


@dataclass(frozen=True)
class DegeneracyCertificate:
    eigenvalue: complex
    indices: Tuple[int, ...]
    algebraic_multiplicity: int
    kernel_dimension: int

    @property
    def defective(self) -> bool:
        return self.kernel_dimension < self.algebraic_multiplicity


@dataclass(frozen=True)
class EPReport:
    ep2_groups: List[Tuple[int, int]]
    ep3_groups: List[Tuple[int, int, int]]
    non_coalescing_degenerate: List[int]
    degeneracies: List[DegeneracyCertificate]

    @property
    def kernel_dims(self) -> Dict[complex, int]:
        return {d.eigenvalue: d.kernel_dimension for d in self.degeneracies}

    @property
    def is_ep(self) -> bool:
        return bool(self.ep2_groups or self.ep3_groups)


def overlap(a, b) -> float:
    """``|<a, b>|`` of the unit-normalised vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    value = float(abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))
    return min(value, 1.0)  # rounding can push parallel vectors just past 1


def _components(n, linked):
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if linked(i, j):
                parent[find(j)] = find(i)
    groups: Dict[int, List[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [tuple(members) for members in groups.values() if len(members) > 1]


def classify_ep(p: SystemParams, tol: float = EP_TOL) -> EPReport:
    """Group coalescing eigenpairs and certify defectiveness.

    Two eigenpairs coalesce when their eigenvalues differ by less than
    ``tol * kappa`` and ``1 - |<Va, Vb>| < tol``. For every eigenvalue
    cluster the kernel dimension of ``L - lambda I`` is computed by pivoted
    elimination with the threshold ``1e-10 * ||L||``.
    """
    if not 0 < tol < 0.1:
        raise DomainError("tol must lie in (0, 0.1)")
    spec = analytic_spectrum(p)
    lam = spec.eigenvalues
    vecs = [pair.vector for pair in spec.pairs]
    k = p.kappa

    def same_value(i, j):
        return abs(lam[i] - lam[j]) < tol * k

    coalescing = _components(9, lambda i, j: same_value(i, j) and 1.0 - overlap(vecs[i], vecs[j]) < tol)
    clusters = _components(9, same_value)
    grouped = {i for group in coalescing for i in group}
    ep2 = sorted(g for g in coalescing if len(g) == 2)
    ep3 = sorted(g for g in coalescing if len(g) == 3)
    loose = sorted(i for cluster in clusters for i in cluster if i not in grouped)

    L = build_liouvillian(p)
    certificates = []
    for cluster in clusters:
        value = complex(np.mean(lam[list(cluster)]))
        dim = kernel_dimension(L.m - value * np.eye(9), scale=L.norm)
        certificates.append(DegeneracyCertificate(value, cluster, len(cluster), dim))
    return EPReport(ep2, ep3, loose, certificates)


def triple_separation(p: SystemParams) -> float:
    """Sum over pairs of (5, 6, 7) of ``1 - |overlap|``; zero exactly at the EP3."""
    spec = analytic_spectrum(p)
    v = [spec.pairs[j].vector for j in (5, 6, 7)]
    return sum(1.0 - overlap(v[a], v[b]) for a, b in ((0, 1), (0, 2), (1, 2)))


@dataclass(frozen=True)
class EPLocation:
    g: float
    kappa: float
    separation: float
    kernel_dimension: int
    iterations: int

    @property
    def offset(self) -> float:
        """``|g* - kappa/4|``."""
        return abs(self.g - 0.25 * self.kappa)


def locate_ep(kappa: float, g_lo: float, g_hi: float, *, xtol: float = 1e-9,
              max_separation: float = 1e-4) -> EPLocation:
    """Golden-section minimisation of :func:`triple_separation` on ``[g_lo, g_hi]``.

    Raises
    ------
    BracketError
        If the minimum found does not reach ``max_separation`` or sits on the
        bracket edge, i.e. the bracket does not contain the EP.
    """
    if not 0 <= g_lo < g_hi:
        raise DomainError("need 0 <= g_lo < g_hi")

    def f(g):
        return triple_separation(SystemParams(g, kappa))

    a, b = g_lo, g_hi
    c = b - INV_GOLDEN * (b - a)
    d = a + INV_GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    iterations = 0
    while b - a > xtol * kappa and iterations < 200:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_GOLDEN * (b - a)
            fd = f(d)
        iterations += 1
    g_star = 0.5 * (a + b)
    sep = f(g_star)
    edge = min(g_star - g_lo, g_hi - g_star) < 10 * xtol * kappa
    if sep > max_separation or edge:
        raise BracketError(
            f"no exceptional point in [{g_lo:.6g}, {g_hi:.6g}] (separation {sep:.3g} at g={g_star:.6g})"
        )
    L = build_liouvillian(SystemParams(g_star, kappa))
    dim = kernel_dimension(L.m + 0.5 * kappa * np.eye(9), scale=L.norm)
    return EPLocation(g_star, kappa, sep, dim, iterations)

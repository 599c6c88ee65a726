"""Time evolution of the joint qubit + pseudomode state.

States are 3x3 density matrices in the ``{|l,0>, |u,0>, |l,1>}`` basis;
traces store them stacked as an ``(n_times, 3, 3)`` array.
"""

from dataclasses import dataclass, field
import itertools
from typing import List, Tuple

import numpy as np

from .errors import DomainError, NearEPError, SingularMatrixError
from .model import LOWER, PHOTON, UPPER, SystemParams, analytic_spectrum, build_liouvillian, xi
from .numkit import expm, integrate_ode, null_space, solve_linear, uniform_step

EP_GUARD = 1e-6
MAX_BASIS_CONDITION = 1e10
DEFAULT_POINTS = 501
DEFAULT_SPAN = 10.0  # in units of 1/kappa


def default_times(kappa: float, points: int = DEFAULT_POINTS, span: float = DEFAULT_SPAN) -> np.ndarray:
    return np.linspace(0.0, span / kappa, points)


def density_violations(rho, *, herm_tol=1e-10, trace_tol=1e-9, pos_tol=1e-9) -> List[str]:
    """Reasons why ``rho`` is not a valid density matrix (empty when valid).

    Positivity uses the principal-minor test: a Hermitian matrix is positive
    semidefinite iff every principal minor is non-negative.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    problems = []
    if rho.shape != (3, 3):
        return [f"shape {rho.shape} is not 3x3"]
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm >= herm_tol:
        problems.append(f"not Hermitian (residual {herm:.2e})")
    tr = np.trace(rho)
    if abs(tr - 1.0) >= trace_tol:
        problems.append(f"trace {tr:.12g} != 1")
    for size in (1, 2, 3):
        for idx in itertools.combinations(range(3), size):
            minor = np.linalg.det(rho[np.ix_(idx, idx)]).real if size > 1 else rho[idx[0], idx[0]].real
            if minor < -pos_tol:
                problems.append(f"principal minor {idx} = {minor:.3e} < 0")
    return problems


def check_density_matrix(rho, **tols):
    problems = density_violations(rho, **tols)
    if problems:
        raise DomainError("invalid density matrix: " + "; ".join(problems))
    return np.asarray(rho, dtype=np.complex128)


def initial_superposition() -> np.ndarray:
    """``|psi><psi|`` for ``|psi> = (|l,0> + i|u,0>) / sqrt(2)``."""
    psi = np.array([1.0, 1.0j, 0.0]) / np.sqrt(2.0)
    return np.outer(psi, psi.conj())


def initial_excited() -> np.ndarray:
    rho = np.zeros((3, 3), dtype=np.complex128)
    rho[UPPER, UPPER] = 1.0
    return rho


@dataclass(frozen=True)
class EvolutionTrace:
    params: SystemParams
    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    method: str

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise DomainError("times and states differ in length")

    @property
    def vectors(self) -> np.ndarray:
        """Row-stacked states, shape ``(n_times, 9)``."""
        return self.states.reshape(len(self.states), 9)

    def violations(self, **tols) -> List[Tuple[int, List[str]]]:
        out = []
        for k, rho in enumerate(self.states):
            problems = density_violations(rho, **tols)
            if problems:
                out.append((k, problems))
        return out


def _check_start(times):
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0 or t[0] != 0.0:
        raise DomainError("time grid must start at t = 0")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise DomainError("time grid must be strictly increasing")
    return t


def propagate_expm(p: SystemParams, rho0, times) -> np.ndarray:
    """``exp(L t) vec(rho0)`` for each ``t``; no constraints on the grid."""
    L = build_liouvillian(p).m
    v0 = np.asarray(rho0, dtype=np.complex128).reshape(9)
    t = np.atleast_1d(np.asarray(times, dtype=float))
    return np.array([expm(L, tk) @ v0 for tk in t]).reshape(t.size, 3, 3)


def evolve_expm(p: SystemParams, rho0, times) -> EvolutionTrace:
    p.require_dissipative()
    rho0 = check_density_matrix(rho0)
    t = _check_start(times)
    return EvolutionTrace(p, t, propagate_expm(p, rho0, t), "expm")


def evolve_rk4(p: SystemParams, rho0, times, *, substeps: int = 1) -> EvolutionTrace:
    """RK4 on the vectorised master equation; the grid must be uniform."""
    p.require_dissipative()
    rho0 = check_density_matrix(rho0)
    t = _check_start(times)
    uniform_step(t)
    L = build_liouvillian(p).m
    ys = integrate_ode(L, rho0.reshape(9), t, substeps=substeps)
    return EvolutionTrace(p, t, ys.reshape(t.size, 3, 3), "rk4")


@dataclass(frozen=True)
class AmplitudeSeries:
    times: np.ndarray = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)
    condition: float
    eigenvalues: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)

    def reconstruct(self) -> np.ndarray:
        """``sum_j A_j(t) V_j`` for every time, shape ``(n_times, 9)``."""
        return self.amplitudes @ self.basis.T


def require_complete_basis(p: SystemParams, guard: float = EP_GUARD):
    p.require_dissipative()
    if abs(p.g - 0.25 * p.kappa) <= guard * p.kappa:
        raise NearEPError(
            f"g = {p.g:.6g} is within {guard:g} kappa of the exceptional point; "
            "the eigenvectors do not form a basis there"
        )


def decompose_vectors(p: SystemParams, times, vectors, *, guard: float = EP_GUARD) -> AmplitudeSeries:
    """Expand row-stacked states on the analytic eigenbasis at ``p``."""
    require_complete_basis(p, guard)
    spec = analytic_spectrum(p)
    basis = spec.basis
    rhs = np.asarray(vectors, dtype=np.complex128).T
    try:
        solution = solve_linear(basis, rhs)
    except SingularMatrixError as exc:
        raise NearEPError(f"eigenbasis is singular at g = {p.g:.6g}: {exc}") from exc
    if solution.condition > MAX_BASIS_CONDITION:
        raise NearEPError(f"eigenbasis condition {solution.condition:.3g} exceeds {MAX_BASIS_CONDITION:g}")
    return AmplitudeSeries(
        np.asarray(times, dtype=float), solution.x.T, solution.condition, spec.eigenvalues, basis
    )


def decompose_amplitudes(p: SystemParams, trace: EvolutionTrace, *, guard: float = EP_GUARD) -> AmplitudeSeries:
    """Amplitudes ``A_j(t)`` of ``vec(rho(t)) = sum_j A_j(t) V_j``.

    ``g = 0`` is accepted because the analytic basis uses its continuous
    limits there; ``|g - kappa/4| <= guard * kappa`` is refused.

    Raises
    ------
    NearEPError
        Inside the guard band or when the basis solve is ill-conditioned.
    """
    return decompose_vectors(p, trace.times, trace.vectors, guard=guard)


def _reject_ep(p: SystemParams):
    p.require_dissipative()
    if xi(p) == 0:
        raise DomainError("closed forms divide by xi, which vanishes at g = kappa/4")


def closed_form_qubit_state(p: SystemParams, t):
    """Reduced qubit populations and coherence for the superposition start.

    Returns ``(rho_uu, rho_ll, rho_ul)`` with ``rho_ll = 1 - rho_uu`` (the
    pseudomode traced out) and ``rho_ul = <u|rho_Q|l>``. Written with the
    principal-branch ``xi`` so one expression covers both sides of the EP.
    """
    _reject_ep(p)
    k, g = p.kappa, p.g
    x = xi(p)
    t = np.asarray(t, dtype=float)
    uu = np.exp(-0.5 * k * t) / (8.0 * x * x) * (
        -8.0 * g * g + (k * k - 8.0 * g * g) * np.cosh(x * t) + 2.0 * k * x * np.sinh(x * t)
    )
    rho_uu = uu.real
    rho_ul = (1j / (4.0 * x)) * np.exp(-0.25 * k * t) * (
        2.0 * x * np.cosh(0.5 * x * t) + k * np.sinh(0.5 * x * t)
    )
    return rho_uu, 1.0 - rho_uu, rho_ul


def coherences(p: SystemParams, t):
    """Qubit and pseudomode coherences ``(C_Q, C_PM)`` for the superposition start.

    At ``g = kappa/4`` the closed forms are singular and the values are read
    off the propagated state instead.
    """
    p.require_dissipative()
    t = np.asarray(t, dtype=float)
    if xi(p) == 0:
        states = propagate_expm(p, initial_superposition(), t.reshape(-1))
        c_q = 2.0 * np.abs(states[:, UPPER, LOWER]).reshape(t.shape)
        c_pm = 2.0 * np.abs(states[:, PHOTON, LOWER]).reshape(t.shape)
        return c_q, c_pm
    spec = analytic_spectrum(p)
    x = spec.xi
    lam1 = spec.pairs[1].eigenvalue
    lam3 = spec.pairs[3].eigenvalue
    e1 = np.exp(lam1 * t)
    e3 = np.exp(lam3 * t)
    c_q = np.abs((1j / (2.0 * x)) * (0.5 * p.kappa * (e3 - e1) - x * (e3 + e1)))
    c_pm = np.abs((p.g / x) * (e3 - e1))
    return c_q, c_pm


def steady_state(p: SystemParams) -> np.ndarray:
    """Trace-one kernel vector of the Liouvillian, as a density matrix.

    At ``g = 0`` the kernel is four-dimensional (the qubit is frozen); the
    ``g -> 0+`` limit is returned, as for the eigenbasis. The same limit is
    used when the qubit relaxation rate ``~g^2/kappa`` drops below the
    rank test's resolution; the kernel does not depend on ``g > 0``.
    """
    p.require_dissipative()
    if p.g == 0.0:
        p = SystemParams(1.0, p.kappa)
    L = build_liouvillian(p)
    kernel = null_space(L.m, scale=L.norm)
    if kernel.shape[1] > 1 and p.g < 1e-4 * p.kappa:
        L = build_liouvillian(SystemParams(1.0, p.kappa))
        kernel = null_space(L.m, scale=L.norm)
    if kernel.shape[1] != 1:
        raise SingularMatrixError(f"Liouvillian kernel has dimension {kernel.shape[1]}, expected 1")
    v = kernel[:, 0]
    return (v / (v[0] + v[4] + v[8])).reshape(3, 3)


@dataclass(frozen=True)
class ObservableRecord:
    """Populations and coherences of one joint state.

    ``rho_ll`` is the joint population of ``|l,0>`` and ``p_pm`` that of
    ``|l,1>``, so ``rho_uu + rho_ll + p_pm = 1``; the reduced-qubit ground
    population of :func:`closed_form_qubit_state` is ``rho_ll + p_pm``.
    """

    t: float
    rho_uu: float
    rho_ll: float
    p_pm: float
    rho_ul: complex
    c_q: float
    c_pm: float


def observables(trace: EvolutionTrace) -> List[ObservableRecord]:
    records = []
    for t, rho in zip(trace.times, trace.states):
        records.append(
            ObservableRecord(
                t=float(t),
                rho_uu=float(rho[UPPER, UPPER].real),
                rho_ll=float(rho[LOWER, LOWER].real),
                p_pm=float(rho[PHOTON, PHOTON].real),
                rho_ul=complex(rho[UPPER, LOWER]),
                c_q=float(2.0 * abs(rho[UPPER, LOWER])),
                c_pm=float(2.0 * abs(rho[PHOTON, LOWER])),
            )
        )
    return records

"""Parametrically modulated coupling and its effective static limit.

The qubit-resonator coupling is switched on by modulating the qubit
frequency at ``nu`` with amplitude ``eps``. Expanding the phase factor in
Bessel sidebands gives a coupling entry

    g_r * sum_n J_n(eps/nu) exp(-i (n nu - delta_r) t),

whose ``n = 1`` term is static when ``delta_r = nu``. Dropping the other
sidebands leaves the static model of :mod:`pmlep.model` with
``g_eff = g_r J_1(eps/nu)``; this module integrates the full expansion to
check how well that holds.
"""

from dataclasses import dataclass, field, replace
import math
from typing import Optional

import numpy as np

from . import kernels
from .dynamics import DEFAULT_POINTS, EvolutionTrace, check_density_matrix, evolve_expm, initial_superposition
from .errors import DomainError, GridError, ModelDomainError, NumericalError
from .model import LOWER, PHOTON, UPPER, SystemParams, analytic_spectrum, commutator_superop, dissipator_superop
from .numkit import bessel_j, uniform_step
from .spectroscopy import N_FITTED, Extraction, SpectrumScan, default_t_max, fit_trace

J1_ARGMAX = 1.8411837813406593  # first maximum of J_1
J1_MAX = 0.5818652242815963
MAX_STEP_KAPPA = 0.01  # h <= 0.01 / kappa
MAX_STEP_NU = 0.02  # h <= 0.02 / nu


@dataclass(frozen=True)
class SidebandParams:
    g_r: float
    nu: float
    eps: float
    delta_r: float
    n_max: int = 5
    kappa: float = 1.0

    def __post_init__(self):
        values = (self.g_r, self.nu, self.eps, self.delta_r, self.kappa)
        if not all(math.isfinite(v) for v in values):
            raise DomainError("sideband parameters must be finite")
        if not self.nu > 0:
            raise DomainError("nu must be > 0")
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise DomainError("n_max must be a non-negative integer")
        if self.g_r < 0 or self.eps < 0:
            raise DomainError("g_r and eps must be >= 0")
        if self.kappa < 0:
            raise DomainError("kappa must be >= 0")

    @classmethod
    def resonant(cls, g_r: float, kappa: float, *, nu_over_gr: float = 50.0, eps: float = 0.0,
                 n_max: int = 5) -> "SidebandParams":
        """First-order sideband configuration ``nu = delta_r = nu_over_gr * g_r``."""
        nu = nu_over_gr * g_r
        return cls(g_r=g_r, nu=nu, eps=eps, delta_r=nu, n_max=n_max, kappa=kappa)

    @classmethod
    def at_coupling(cls, g_eff: float, kappa: float, *, index: float = J1_ARGMAX,
                    nu_over_gr: float = 50.0, n_max: int = 5) -> "SidebandParams":
        """Resonant configuration reaching ``g_eff`` at modulation index ``eps/nu = index``.

        ``g_r`` is set to ``g_eff / J_1(index)``. The default index is the
        maximum of ``J_1``, where the off-resonant sidebands shift the
        spectrum least for a given ``g_eff``.
        """
        j1 = bessel_j(1, index)
        if not j1 > 0:
            raise DomainError("J_1(index) must be positive")
        g_r = g_eff / j1
        nu = nu_over_gr * g_r
        return cls(g_r=g_r, nu=nu, eps=index * nu, delta_r=nu, n_max=n_max, kappa=kappa)

    @property
    def max_step(self) -> float:
        """Largest RK4 step that resolves both the decay and the modulation."""
        limits = [MAX_STEP_NU / self.nu]
        if self.kappa > 0:
            limits.append(MAX_STEP_KAPPA / self.kappa)
        return min(limits)


def effective_coupling(p: SidebandParams) -> float:
    return p.g_r * bessel_j(1, p.eps / p.nu)


def invert_effective_coupling(g_eff_target: float, p: SidebandParams) -> float:
    """Smallest ``eps >= 0`` with ``g_r J_1(eps/nu) = g_eff_target``.

    Bisection on the rising branch ``eps/nu in [0, 1.8412]``.
    """
    if not g_eff_target >= 0:
        raise DomainError("target coupling must be >= 0")
    if g_eff_target == 0:
        return 0.0
    if not p.g_r > 0 or g_eff_target >= J1_MAX * p.g_r:
        raise DomainError(
            f"target {g_eff_target:.6g} is not below the J_1 maximum {J1_MAX * p.g_r:.6g}"
        )
    ratio = g_eff_target / p.g_r
    lo, hi = 0.0, J1_ARGMAX
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if bessel_j(1, mid) < ratio:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi) * p.nu


def _sideband_terms(p: SidebandParams):
    """Amplitudes and angular frequencies of the coupling entry's Fourier terms."""
    x = p.eps / p.nu
    orders = np.arange(-p.n_max, p.n_max + 1)
    amps = np.array([p.g_r * bessel_j(int(n), x) for n in orders], dtype=np.complex128)
    freqs = -(orders * p.nu - p.delta_r).astype(float)
    return amps, freqs


def coupling_entry(p: SidebandParams, t):
    """The ``|l,1><u,0|`` matrix element at time(s) ``t``."""
    amps, freqs = _sideband_terms(p)
    t = np.asarray(t, dtype=float)
    return np.sum(amps * np.exp(1j * np.multiply.outer(t, freqs)), axis=-1)


def build_sideband_hamiltonian(p: SidebandParams, t: float) -> np.ndarray:
    f = complex(coupling_entry(p, float(t)))
    h = np.zeros((3, 3), dtype=np.complex128)
    h[PHOTON, UPPER] = f
    h[UPPER, PHOTON] = f.conjugate()
    return h


def _unit(i, j):
    e = np.zeros((3, 3), dtype=np.complex128)
    e[i, j] = 1.0
    return e


def liouvillian_parts(p: SidebandParams):
    """``(L0, K1, K2, amps, freqs)`` with ``L(t) = L0 + f(t) K1 + conj(f(t)) K2``."""
    amps, freqs = _sideband_terms(p)
    L0 = dissipator_superop(p.kappa)
    K1 = commutator_superop(_unit(PHOTON, UPPER))
    K2 = commutator_superop(_unit(UPPER, PHOTON))
    return L0, K1, K2, amps, freqs


def effective_params(p: SidebandParams) -> SystemParams:
    return SystemParams(effective_coupling(p), p.kappa)


def simulate_full(p: SidebandParams, rho0, times, *, substeps: int = 1) -> EvolutionTrace:
    """RK4 integration of the modulated master equation on a uniform grid.

    Each grid interval is split into ``substeps`` RK4 steps; the resulting
    step must not exceed :attr:`SidebandParams.max_step`.

    Raises
    ------
    GridError
        Non-uniform grid, or a step too coarse for the modulation.
    """
    if not p.kappa > 0:
        raise DomainError("kappa must be > 0")
    rho0 = check_density_matrix(rho0)
    t = np.asarray(times, dtype=float)
    h = uniform_step(t)
    substeps = int(substeps)
    if substeps < 1:
        raise DomainError("substeps must be >= 1")
    step = h / substeps
    if step > p.max_step * (1.0 + 1e-12):
        raise GridError(
            f"RK4 step {step:.4g} exceeds min(0.01/kappa, 0.02/nu) = {p.max_step:.4g}; "
            "refine the grid or raise substeps"
        )
    L0, K1, K2, amps, freqs = liouvillian_parts(p)
    nsteps = (t.size - 1) * substeps
    ys = kernels.rk4_modulated(L0, K1, K2, amps, freqs, rho0.reshape(9), float(t[0]), step,
                               nsteps, substeps)
    return EvolutionTrace(effective_params(p), t, ys.reshape(t.size, 3, 3), "rk4-sideband")


def substeps_for(p: SidebandParams, h: float) -> int:
    """Smallest split of a grid step ``h`` that satisfies the step limit."""
    return max(1, math.ceil(h / p.max_step * (1.0 - 1e-12)))


def extract_spectrum_full(p: SidebandParams, t_max: Optional[float] = None,
                          n_points: int = DEFAULT_POINTS) -> Extraction:
    """Fitted eigenvalues of the full modulated model, compared with the static model at ``g_eff``.

    The amplitudes are taken on the eigenbasis at ``g_eff``. The static
    model's expm trace serves as the reference for the quality flags, so
    the departure of the full model from it plays the role that injected
    noise plays in :func:`pmlep.spectroscopy.extract_spectrum`.
    """
    if not p.kappa > 0:
        raise DomainError("kappa must be > 0")
    return _extract_on(p, effective_params(p), t_max, n_points)


def apparent_coupling(fitted, kappa: float) -> np.ndarray:
    """Coupling implied by the splitting of the (1,2) and (3,4) pairs.

    Uses ``lambda_1 - lambda_3 = xi = sqrt(kappa^2 - 16 g^2) / 2`` on either
    side of the EP, with each pair averaged.
    """
    lam = np.atleast_2d(np.asarray(fitted, dtype=np.complex128))
    split = 0.5 * (lam[:, 1] + lam[:, 2]) - 0.5 * (lam[:, 3] + lam[:, 4])
    g2 = (kappa * kappa - 4.0 * split * split).real / 16.0
    return np.sqrt(np.maximum(g2, 0.0))


def scan_couplings(base: SidebandParams, g_eff_grid, eps_offset: float = 0.0, t_max: Optional[float] = None,
                   n_points: int = DEFAULT_POINTS) -> SpectrumScan:
    """Full-model spectra on the intended ``g_eff`` grid at fixed ``g_r``.

    Each point sets ``eps = invert(g_eff) + eps_offset``; failures become
    flagged NaN rows.
    """
    g_values = np.asarray(g_eff_grid, dtype=float)
    n = g_values.size
    fitted = np.full((n, N_FITTED), complex(math.nan, math.nan))
    analytic = np.empty((n, N_FITTED), dtype=np.complex128)
    flags = np.ones((n, N_FITTED), dtype=bool)
    errors = {}
    for i, g in enumerate(g_values):
        intended = SystemParams(float(g), base.kappa)
        analytic[i] = analytic_spectrum(intended).eigenvalues[:N_FITTED]
        try:
            eps = invert_effective_coupling(float(g), base)
            run = replace(base, eps=eps + eps_offset)
            # a drifted run is still analysed on the intended coupling's basis
            ex = _extract_on(run, intended, t_max, n_points)
        except (ModelDomainError, NumericalError, DomainError) as exc:
            errors[i] = f"{type(exc).__name__}: {exc}"
            continue
        fitted[i] = ex.eigenvalues
        flags[i] = ex.flags
    return SpectrumScan(base.kappa, g_values, fitted, analytic, flags, errors)


def _extract_on(p: SidebandParams, basis: SystemParams, t_max, n_points) -> Extraction:
    if t_max is None:
        t_max = default_t_max(p.kappa)
    times = np.linspace(0.0, t_max, n_points)
    rho0 = initial_superposition()
    full = simulate_full(p, rho0, times, substeps=substeps_for(p, times[1] - times[0]))
    reference = evolve_expm(basis, rho0, times)
    return fit_trace(basis, full, clean=reference)


@dataclass(frozen=True)
class FluctuationStudy:
    base: SidebandParams
    delta_eps: float
    g_eff_grid: np.ndarray = field(repr=False)
    baseline: SpectrumScan = field(repr=False)
    perturbed: SpectrumScan = field(repr=False)

    def max_shift(self) -> float:
        """Largest ``|perturbed - baseline|`` over unflagged entries."""
        ok = ~(self.baseline.flags | self.perturbed.flags)
        diff = np.abs(self.perturbed.fitted - self.baseline.fitted)[ok]
        return float(np.max(diff)) if diff.size else math.nan

    def apparent_ep(self, which: str = "perturbed") -> float:
        """Intended ``g_eff`` at which the fitted spectrum would sit at its EP.

        The apparent coupling is regressed linearly on the intended one and
        the line is solved for ``kappa/4``.
        """
        scan = self.perturbed if which == "perturbed" else self.baseline
        usable = ~np.any(scan.flags[:, 1:5], axis=1)
        if np.count_nonzero(usable) < 2:
            raise ModelDomainError("fewer than two usable grid points for the EP regression")
        x = scan.g_values[usable]
        y = apparent_coupling(scan.fitted[usable], scan.kappa)
        slope, intercept = np.polyfit(x, y, 1)
        if slope == 0:
            raise NumericalError("apparent coupling does not vary with g_eff")
        return float((0.25 * scan.kappa - intercept) / slope)

    def ep_shift(self) -> float:
        """``apparent_ep(perturbed) - apparent_ep(baseline)``."""
        return self.apparent_ep("perturbed") - self.apparent_ep("baseline")


def fluctuation_study(p: SidebandParams, delta_eps: float, g_eff_grid, t_max: Optional[float] = None,
                      n_points: int = DEFAULT_POINTS) -> FluctuationStudy:
    """Spectra at ``eps = invert(g_eff)`` and at ``eps + delta_eps`` on the intended ``g_eff`` axis.

    ``p.eps`` is ignored; each grid point sets its own amplitude. Points
    that fail (near the EP, target above the J_1 maximum) are flagged.
    """
    grid = np.asarray(g_eff_grid, dtype=float)
    baseline = scan_couplings(p, grid, 0.0, t_max, n_points)
    if delta_eps == 0:
        perturbed = baseline
    else:
        perturbed = scan_couplings(p, grid, float(delta_eps), t_max, n_points)
    return FluctuationStudy(p, float(delta_eps), grid, baseline, perturbed)

"""Eigenvalue extraction from simulated (optionally noisy) state trajectories.

A single input state is evolved, each snapshot is expanded on the Liouvillian
eigenbasis, and every amplitude series ``A_j(t)`` is fitted to one complex
exponential ``C exp(B t)``; ``B`` estimates ``lambda_j``.
"""

from dataclasses import dataclass, field
import math
from typing import Dict, List, Optional, Sequence

import numpy as np

from .dynamics import (
    DEFAULT_POINTS,
    DEFAULT_SPAN,
    EvolutionTrace,
    decompose_amplitudes,
    evolve_expm,
    initial_superposition,
)
from .errors import DomainError, ModelDomainError, NumericalError
from .model import SystemParams, analytic_spectrum

N_FITTED = 8  # A_8 stays zero for the superposition start and is not fitted
GRID_SIZE = 25
FLAG_FACTOR = 10.0
PLAUSIBLE_FACTOR = 3.0


@dataclass(frozen=True)
class FitResult:
    b: complex
    c: complex
    residual: float
    iterations: int
    converged: bool


def _model_cost(tau, v, b, c):
    # trial steps may overflow; such a step is simply rejected
    with np.errstate(over="ignore", invalid="ignore"):
        r = v - c * np.exp(b * tau)
        cost = float(np.vdot(r, r).real)
    return cost if math.isfinite(cost) else math.inf


def _best_prefactor(tau, v, b):
    e = np.exp(b * tau)
    denom = float(np.vdot(e, e).real)
    if denom == 0.0 or not math.isfinite(denom):
        return 0j
    return complex(np.vdot(e, v) / denom)


def _log_ratio_rate(tau, v):
    """Weighted mean of ``log(v[k+1] / v[k]) / dt`` over non-zero neighbours."""
    a, b = v[:-1], v[1:]
    ok = (a != 0) & (b != 0)
    if not np.any(ok):
        return 0j
    rates = np.log(b[ok] / a[ok]) / np.diff(tau)[ok]
    w = np.minimum(np.abs(a[ok]), np.abs(b[ok])) ** 2
    return complex(np.sum(w * rates) / np.sum(w))


def _gauss_newton(tau, v, b, c, max_iter, grad_tol):
    params = np.array([c.real, c.imag, b.real, b.imag])
    cost = _model_cost(tau, v, b, c)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        c = complex(params[0], params[1])
        b = complex(params[2], params[3])
        e = np.exp(b * tau)
        r = v - c * e
        dm = np.column_stack([e, 1j * e, c * tau * e, 1j * c * tau * e])
        jac = np.vstack([dm.real, dm.imag])
        res = np.concatenate([r.real, r.imag])
        grad = -2.0 * jac.T @ res
        if np.linalg.norm(grad) < grad_tol:
            converged = True
            break
        delta = np.linalg.lstsq(jac, res, rcond=None)[0]
        step = 1.0
        for _ in range(40):
            trial = params + step * delta
            trial_cost = _model_cost(tau, v, complex(trial[2], trial[3]), complex(trial[0], trial[1]))
            if trial_cost <= cost:
                break
            step *= 0.5
        else:
            break
        moved = np.linalg.norm(step * delta)
        params, cost = trial, trial_cost
        if moved < 1e-12 * (1.0 + np.linalg.norm(params)):
            converged = True
            break
    return complex(params[2], params[3]), complex(params[0], params[1]), cost, it, converged


def _plausible(b, scale):
    """Decaying (or constant) and within a few ``scale`` of the origin."""
    return b.real <= 1e-9 * scale and abs(b) <= PLAUSIBLE_FACTOR * scale


def _better(candidate, incumbent, scale):
    cand_ok = candidate[4] and _plausible(candidate[0], scale)
    inc_ok = incumbent[4] and _plausible(incumbent[0], scale)
    if cand_ok != inc_ok:
        return cand_ok
    return candidate[2] < incumbent[2]


def fit_exponential(times, values, *, rate_scale: Optional[float] = None,
                    max_iter: int = 100) -> FitResult:
    """Least-squares fit of ``values ~ C exp(B t)`` over complex ``C`` and ``B``.

    Starts from the averaged log-ratio of successive samples and the optimal
    ``C`` for that rate, then runs Gauss-Newton with step halving on the four
    real parameters. If that does not converge, a 25x25 grid over
    ``Re B in [-s, 0]``, ``Im B in [-s, s]`` (``s = rate_scale``) seeds a
    second attempt and the better of the two is returned.

    ``residual`` is the per-sample RMS misfit. An all-zero series has no
    defined rate: ``b`` is NaN, ``c`` is 0 and ``converged`` is False.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=np.complex128)
    if t.ndim != 1 or t.shape != v.shape:
        raise DomainError("times and values must be 1-D and of equal length")
    if t.size < 4:
        raise DomainError("need at least 4 samples")
    if np.any(np.diff(t) <= 0):
        raise DomainError("times must be strictly increasing")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
        raise DomainError("non-finite input")
    if not np.any(v != 0):
        return FitResult(complex(math.nan, math.nan), 0j, 0.0, 0, False)

    t0 = t[0]
    tau = t - t0
    span = tau[-1]
    energy = float(np.vdot(v, v).real)
    grad_tol = 1e-10 * energy * max(1.0, span)

    b0 = _log_ratio_rate(tau, v)
    c0 = _best_prefactor(tau, v, b0)
    best = _gauss_newton(tau, v, b0, c0, max_iter, grad_tol)
    s = rate_scale if rate_scale else max(abs(b0), 10.0 / span)
    if not best[4] or not _plausible(best[0], s):
        grid_best = None
        for br in np.linspace(-s, 0.0, GRID_SIZE):
            for bi in np.linspace(-s, s, GRID_SIZE):
                b = complex(br, bi)
                cost = _model_cost(tau, v, b, _best_prefactor(tau, v, b))
                if grid_best is None or cost < grid_best[0]:
                    grid_best = (cost, b)
        b1 = grid_best[1]
        retry = _gauss_newton(tau, v, b1, _best_prefactor(tau, v, b1), max_iter, grad_tol)
        if _better(retry, best, s):
            best = (retry[0], retry[1], retry[2], best[3] + retry[3], retry[4])
    b, c, cost, iterations, converged = best
    # report the prefactor at t = 0 rather than at the first sample
    c = c * complex(np.exp(-b * t0))
    return FitResult(b, c, math.sqrt(cost / t.size), iterations, converged)


@dataclass(frozen=True)
class NoiseSpec:
    """Per-element Gaussian noise on reconstructed density matrices."""

    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise DomainError("sigma must be >= 0")

    def generator(self, *key: int) -> np.random.Generator:
        """Independent, reproducible stream for the given integer key."""
        seq = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=tuple(key))
        return np.random.Generator(np.random.Philox(seq))


def stream_key(g: float) -> int:
    """Counter key for coupling ``g``: the raw bits of the float."""
    return int(np.float64(g).view(np.uint64))


def add_measurement_noise(trace: EvolutionTrace, spec: NoiseSpec, *key: int) -> EvolutionTrace:
    """Perturb every state with Hermitian Gaussian noise and renormalise its trace.

    Every element gets noise of standard deviation ``sigma``: the real and
    imaginary parts of the strict upper triangle draw ``N(0, sigma^2 / 2)``
    each, the (real) diagonal draws ``N(0, sigma^2)``, and the lower triangle
    mirrors the upper one.
    """
    if spec.sigma == 0:
        return trace
    rng = spec.generator(*key)
    n = len(trace.states)
    re = rng.normal(0.0, 1.0, size=(n, 3, 3))
    im = rng.normal(0.0, 1.0, size=(n, 3, 3))
    part = spec.sigma / np.sqrt(2.0)
    upper = np.triu(part * (re + 1j * im), k=1)
    noise = upper + np.conj(np.swapaxes(upper, 1, 2))
    idx = np.arange(3)
    noise[:, idx, idx] = spec.sigma * re[:, idx, idx]
    states = trace.states + noise
    tr = np.trace(states, axis1=1, axis2=2)
    states = states / tr[:, None, None]
    # enforce exact Hermiticity after the complex division
    states = 0.5 * (states + np.conj(np.swapaxes(states, 1, 2)))
    return EvolutionTrace(trace.params, trace.times, states, trace.method + "+noise")


@dataclass(frozen=True)
class Extraction:
    """Fitted eigenvalues ``lambda_0 .. lambda_7`` for one coupling."""

    params: SystemParams
    eigenvalues: np.ndarray = field(repr=False)
    analytic: np.ndarray = field(repr=False)
    fits: List[FitResult] = field(repr=False)
    flags: np.ndarray = field(repr=False)
    condition: float

    def pair_mismatch(self):
        """``(|l1 - l2|, |l3 - l4|)``: agreement of independently fitted twins."""
        lam = self.eigenvalues
        return abs(lam[1] - lam[2]), abs(lam[3] - lam[4])

    def relative_errors(self) -> np.ndarray:
        return relative_error(self.eigenvalues, self.analytic, self.params.kappa)


def relative_error(fitted, analytic, kappa):
    """``|fitted - analytic| / |analytic|``; zero eigenvalues are measured against ``kappa``."""
    fitted = np.asarray(fitted)
    analytic = np.asarray(analytic)
    scale = np.where(analytic == 0, kappa, np.abs(analytic))
    return np.abs(fitted - analytic) / scale


def default_t_max(kappa: float) -> float:
    return DEFAULT_SPAN / kappa


def fit_trace(basis_params: SystemParams, trace: EvolutionTrace,
              clean: Optional[EvolutionTrace] = None) -> Extraction:
    """Decompose ``trace`` on the eigenbasis at ``basis_params`` and fit ``A_0..A_7``.

    When ``clean`` (the noiseless trace) is given, a channel is flagged if its
    fit residual exceeds ten times the larger of the clean-fit residual and
    the RMS noise that reached that amplitude channel; without it, ten times
    the noiseless fit floor of 1e-12 of the channel scale.
    """
    amps = decompose_amplitudes(basis_params, trace)
    clean_amps = decompose_amplitudes(basis_params, clean) if clean is not None else None
    kappa = basis_params.kappa
    t = amps.times
    fits, lam, flags = [], [], []
    for j in range(N_FITTED):
        series = amps.amplitudes[:, j]
        fit = fit_exponential(t, series, rate_scale=kappa)
        scale = float(np.max(np.abs(series))) if series.size else 0.0
        floor = 1e-12 * max(scale, 1.0)
        if clean_amps is not None:
            clean_series = clean_amps.amplitudes[:, j]
            baseline = fit_exponential(t, clean_series, rate_scale=kappa).residual
            noise_rms = float(np.sqrt(np.mean(np.abs(series - clean_series) ** 2)))
            floor = max(floor, baseline, noise_rms)
        bad = (not fit.converged) or (not np.isfinite(fit.b)) or fit.residual > FLAG_FACTOR * floor
        fits.append(fit)
        lam.append(fit.b)
        flags.append(bad)
    analytic = analytic_spectrum(basis_params).eigenvalues[:N_FITTED]
    return Extraction(basis_params, np.array(lam), analytic, fits, np.array(flags), amps.condition)


def extract_spectrum(p: SystemParams, t_max: Optional[float] = None, n_points: int = DEFAULT_POINTS,
                     noise: Optional[NoiseSpec] = None) -> Extraction:
    """Simulate, optionally add noise, decompose, and fit one coupling value.

    Raises
    ------
    NearEPError
        Propagated from the eigenbasis decomposition near ``g = kappa/4``.
    """
    p.require_dissipative()
    if t_max is None:
        t_max = default_t_max(p.kappa)
    times = np.linspace(0.0, t_max, n_points)
    trace = evolve_expm(p, initial_superposition(), times)
    if noise is None or noise.sigma == 0:
        return fit_trace(p, trace)
    noisy = add_measurement_noise(trace, noise, stream_key(p.g))
    return fit_trace(p, noisy, clean=trace)


@dataclass(frozen=True)
class SpectrumScan:
    kappa: float
    g_values: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)
    analytic: np.ndarray = field(repr=False)
    flags: np.ndarray = field(repr=False)
    errors: Dict[int, str] = field(default_factory=dict)

    def relative_errors(self) -> np.ndarray:
        return relative_error(self.fitted, self.analytic, self.kappa)

    def max_relative_error(self) -> float:
        errs = self.relative_errors()[~self.flags]
        return float(np.max(errs)) if errs.size else math.nan

    def rms_deviation(self) -> float:
        """RMS of ``|fitted - analytic|`` over unflagged entries, in units of kappa."""
        dev = np.abs(self.fitted - self.analytic)[~self.flags]
        return float(np.sqrt(np.mean(dev**2)) / self.kappa) if dev.size else math.nan

    def transition_bracket(self, indices: Sequence[int], tol: float = 2e-3):
        """Adjacent grid points between which ``max |Im lambda_j|`` leaves ``tol * kappa``.

        Returns ``(g_lo, g_hi)`` or ``None`` when no such crossing exists.
        """
        imag = np.max(np.abs(self.fitted[:, list(indices)].imag), axis=1)
        complex_ = imag > tol * self.kappa
        valid = ~np.any(self.flags[:, list(indices)], axis=1)
        for i in range(len(self.g_values) - 1):
            if valid[i] and valid[i + 1] and not complex_[i] and complex_[i + 1]:
                return float(self.g_values[i]), float(self.g_values[i + 1])
        return None


def sweep(kappa: float, g_grid, t_max: Optional[float] = None, n_points: int = DEFAULT_POINTS,
          noise: Optional[NoiseSpec] = None) -> SpectrumScan:
    """Run :func:`extract_spectrum` across ``g_grid``; failures become flagged NaN rows."""
    g_values = np.asarray(g_grid, dtype=float)
    n = g_values.size
    fitted = np.full((n, N_FITTED), complex(math.nan, math.nan))
    analytic = np.empty((n, N_FITTED), dtype=np.complex128)
    flags = np.ones((n, N_FITTED), dtype=bool)
    errors = {}
    for i, g in enumerate(g_values):
        p = SystemParams(float(g), kappa)
        analytic[i] = analytic_spectrum(p).eigenvalues[:N_FITTED]
        try:
            ex = extract_spectrum(p, t_max, n_points, noise)
        except (ModelDomainError, NumericalError) as exc:
            errors[i] = f"{type(exc).__name__}: {exc}"
            continue
        fitted[i] = ex.eigenvalues
        flags[i] = ex.flags
    return SpectrumScan(kappa, g_values, fitted, analytic, flags, errors)

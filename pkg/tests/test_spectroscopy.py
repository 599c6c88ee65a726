import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pmlep.dynamics import EvolutionTrace, evolve_expm, initial_superposition
from pmlep.errors import DomainError, NearEPError
from pmlep.model import SystemParams, analytic_spectrum, xi
from pmlep.spectroscopy import (
    NoiseSpec,
    add_measurement_noise,
    extract_spectrum,
    fit_exponential,
    relative_error,
    sweep,
)


# ---------------------------------------------------------------- fit_exponential


def test_fit_real_decay():
    t = np.linspace(0, 10, 50)
    fit = fit_exponential(t, 0.5 * np.exp(-0.3 * t))
    assert abs(fit.b - (-0.3)) < 1e-9 and abs(fit.c - 0.5) < 1e-9
    assert fit.converged and fit.residual >= 0


def test_fit_complex_rate():
    t = np.linspace(0, 10, 200)
    b = complex(-0.25, 0.43)
    fit = fit_exponential(t, 0.5j * np.exp(b * t))
    assert abs(fit.b.real - b.real) < 1e-8 and abs(fit.b.imag - b.imag) < 1e-8


def test_fit_constant_series():
    fit = fit_exponential(np.linspace(0, 5, 20), np.ones(20))
    assert abs(fit.b) < 1e-12 and abs(fit.c - 1.0) < 1e-12


def test_fit_all_zero_is_degenerate():
    fit = fit_exponential(np.linspace(0, 5, 20), np.zeros(20))
    assert math.isnan(fit.b.real) and fit.c == 0 and not fit.converged


def test_fit_preconditions():
    with pytest.raises(DomainError):
        fit_exponential([0, 1, 2], [1, 1, 1])
    with pytest.raises(DomainError):
        fit_exponential([0, 1, 1, 2], [1, 1, 1, 1])
    with pytest.raises(DomainError):
        fit_exponential([0, 1, 2, 3], [1, math.nan, 1, 1])


def test_fit_prefactor_refers_to_time_zero():
    t = np.linspace(2, 6, 40)
    fit = fit_exponential(t, 3.0 * np.exp(-0.4 * t))
    assert abs(fit.c - 3.0) < 1e-9


def test_fit_oscillation_with_few_samples_per_period():
    # log-ratios alias here; the grid fallback has to find the basin
    t = np.linspace(0, 10, 40)
    b = complex(-0.1, 2.9)
    fit = fit_exponential(t, np.exp(b * t), rate_scale=3.0)
    assert abs(fit.b - b) < 1e-8


rates = st.tuples(st.floats(-2.0, 0.0), st.floats(-2.0, 2.0))


@settings(max_examples=40)
@given(rates, st.floats(0.0, 2 * math.pi), st.floats(0.1, 5.0))
def test_fit_recovers_generating_parameters(rate, phase, mag):
    b = complex(*rate)
    c = mag * complex(math.cos(phase), math.sin(phase))
    t = np.linspace(0, 10, 201)
    if abs(b) * t[-1] > 20:
        return
    fit = fit_exponential(t, c * np.exp(b * t), rate_scale=2.0)
    assert abs(fit.b - b) < 1e-8
    assert abs(fit.c - c) < 1e-8 * max(1.0, abs(c))


@settings(max_examples=30)
@given(st.floats(0.1, 10.0), st.floats(0.0, 2 * math.pi))
def test_fitted_rate_is_scale_invariant(mag, phase):
    t = np.linspace(0, 8, 101)
    v = (0.3 - 0.2j) * np.exp(complex(-0.2, 0.7) * t)
    alpha = mag * complex(math.cos(phase), math.sin(phase))
    a = fit_exponential(t, v)
    b = fit_exponential(t, alpha * v)
    assert abs(a.b - b.b) < 1e-9
    assert abs(b.c - alpha * a.c) < 1e-8 * abs(alpha)


# ---------------------------------------------------------------- noise


def _trace(n=101):
    return evolve_expm(SystemParams(0.2, 1.0), initial_superposition(), np.linspace(0, 10, n))


def test_zero_noise_returns_input():
    trace = _trace()
    assert add_measurement_noise(trace, NoiseSpec(0.0, 1)) is trace


def test_noisy_states_are_hermitian_with_unit_trace():
    noisy = add_measurement_noise(_trace(), NoiseSpec(0.05, 7), 3)
    s = noisy.states
    assert np.max(np.abs(s - np.conj(np.swapaxes(s, 1, 2)))) < 1e-12
    assert np.max(np.abs(np.trace(s, axis1=1, axis2=2) - 1.0)) < 1e-12


def test_noise_standard_deviation():
    # a fixed state whose off-diagonal element is zero, so renormalising the
    # trace only enters at second order
    n = 10_000
    ground = np.zeros((n, 3, 3), dtype=complex)
    ground[:, 0, 0] = 1.0
    trace = EvolutionTrace(SystemParams(0.2, 1.0), np.linspace(0, 1, n), ground, "fixed")
    z = add_measurement_noise(trace, NoiseSpec(0.01, 2024), 0).states[:, 1, 0]
    std = math.sqrt(np.mean(np.abs(z - z.mean()) ** 2))
    assert abs(std / 0.01 - 1.0) < 0.05
    assert abs(np.std(z.real) / (0.01 / math.sqrt(2)) - 1.0) < 0.05


def test_renormalisation_inflates_noise_on_large_elements():
    trace = _trace(10_000)
    d = add_measurement_noise(trace, NoiseSpec(0.01, 2024), 0).states[:, 1, 0] - trace.states[:, 1, 0]
    std = math.sqrt(np.mean(np.abs(d - d.mean()) ** 2))
    assert std > 0.011


def test_noise_is_reproducible_and_keyed():
    trace = _trace()
    a = add_measurement_noise(trace, NoiseSpec(0.01, 5), 1).states
    b = add_measurement_noise(trace, NoiseSpec(0.01, 5), 1).states
    c = add_measurement_noise(trace, NoiseSpec(0.01, 5), 2).states
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_negative_sigma_is_rejected():
    with pytest.raises(DomainError):
        NoiseSpec(-0.1, 0)


# ---------------------------------------------------------------- extraction


def test_extract_below_the_ep():
    ex = extract_spectrum(SystemParams(0.1, 1.0))
    assert np.max(ex.relative_errors()) < 1e-6
    assert abs(ex.eigenvalues[0]) < 1e-8
    assert not np.any(ex.flags)


def test_extract_above_the_ep():
    p = SystemParams(0.45, 1.0)
    ex = extract_spectrum(p)
    assert abs(ex.eigenvalues[1].imag - abs(xi(p)) / 2) < 1e-6
    assert np.max(ex.relative_errors()) < 1e-6


def test_twins_agree():
    for g in (0.1, 0.45):
        m12, m34 = extract_spectrum(SystemParams(g, 1.0)).pair_mismatch()
        assert m12 < 1e-8 and m34 < 1e-8


def test_extract_refuses_at_the_ep():
    with pytest.raises(NearEPError):
        extract_spectrum(SystemParams(0.25, 1.0))


def test_relative_error_of_zero_eigenvalue_uses_kappa():
    assert relative_error([1e-3], [0.0], 2.0)[0] == pytest.approx(5e-4)


# ---------------------------------------------------------------- sweep


@pytest.fixture(scope="module")
def noiseless_scan():
    grid = np.concatenate([np.linspace(0.05, 0.22, 8), np.linspace(0.28, 0.6, 9)])
    return sweep(1.0, grid)


def test_sweep_noiseless_accuracy(noiseless_scan):
    assert not np.any(noiseless_scan.flags)
    assert noiseless_scan.max_relative_error() < 1e-5


def test_sweep_lambda7_is_flat(noiseless_scan):
    assert np.max(np.abs(noiseless_scan.fitted[:, 7] + 0.5)) < 1e-6


def test_sweep_spectral_structure(noiseless_scan):
    scan = noiseless_scan
    below = scan.g_values < 0.25
    assert np.max(np.abs(scan.fitted[below].imag)) < 2e-3
    above = ~below
    assert np.max(np.abs(scan.fitted[above, 1].imag + scan.fitted[above, 3].imag)) < 2e-3


def test_sweep_transition_bracket(noiseless_scan):
    lo, hi = noiseless_scan.transition_bracket([1, 2, 3, 4])
    assert lo < 0.25 < hi
    lo, hi = noiseless_scan.transition_bracket([5, 6])
    assert lo < 0.25 < hi


def test_sweep_records_failures_and_continues():
    scan = sweep(1.0, [0.1, 0.25, 0.4])
    assert 1 in scan.errors and "NearEPError" in scan.errors[1]
    assert np.all(scan.flags[1]) and np.all(np.isnan(scan.fitted[1]))
    assert not np.any(scan.flags[[0, 2]])


def test_sweep_is_deterministic():
    noise = NoiseSpec(0.01, 99)
    a = sweep(1.0, [0.1, 0.4], noise=noise)
    b = sweep(1.0, [0.1, 0.4], noise=noise)
    assert np.array_equal(a.fitted, b.fitted) and np.array_equal(a.flags, b.flags)


def test_noisy_extraction_is_close_for_the_strong_channels():
    ex = extract_spectrum(SystemParams(0.4, 1.0), noise=NoiseSpec(0.01, 3))
    lam, ref = ex.eigenvalues, analytic_spectrum(SystemParams(0.4, 1.0)).eigenvalues
    # A_0 and the lambda_1..4 channels carry O(1) amplitude
    assert np.max(np.abs(lam[:5] - ref[:5])) < 0.05

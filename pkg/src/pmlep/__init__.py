"""Liouvillian exceptional points of a qubit coupled to a Lorentzian reservoir.

The reservoir is replaced by a single damped pseudomode (PM); in the
one-excitation sector the joint state lives on ``{|l,0>, |u,0>, |l,1>}``
and the dynamics is generated by a 9x9 extended Liouvillian.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BracketError,
    DomainError,
    ExpmOverflowError,
    GridError,
    ModelDomainError,
    NearEPError,
    NumericalError,
    PmlepError,
    SingularMatrixError,
)
from .kernels import BACKEND  # noqa: E402
from .model import SystemParams, analytic_spectrum, build_liouvillian, classify_ep, locate_ep  # noqa: E402
from .dynamics import (  # noqa: E402
    closed_form_qubit_state,
    coherences,
    decompose_amplitudes,
    evolve_expm,
    evolve_rk4,
    initial_superposition,
    observables,
    steady_state,
)
from .spectroscopy import NoiseSpec, extract_spectrum, fit_exponential, sweep  # noqa: E402
from .sideband import (  # noqa: E402
    SidebandParams,
    effective_coupling,
    extract_spectrum_full,
    fluctuation_study,
    invert_effective_coupling,
    simulate_full,
)

__all__ = [
    "BACKEND", "BracketError", "DomainError", "ExpmOverflowError", "GridError", "ModelDomainError",
    "NearEPError", "NoiseSpec", "NumericalError", "PmlepError", "SidebandParams", "SingularMatrixError",
    "SystemParams", "analytic_spectrum", "build_liouvillian", "classify_ep", "closed_form_qubit_state",
    "coherences", "decompose_amplitudes", "effective_coupling", "evolve_expm", "evolve_rk4",
    "extract_spectrum", "extract_spectrum_full", "fit_exponential", "fluctuation_study",
    "initial_superposition", "invert_effective_coupling", "locate_ep", "observables",
    "simulate_full", "steady_state", "sweep",
]

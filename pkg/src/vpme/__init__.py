"""Variational polaron master equation rates for molecules in a cavity.

Weak-coupling (WCME) and variational polaron (VPME) transition, dephasing and
Lamb-shift rates for N identical molecules coupled to one cavity mode, with
the self-consistent variational frame, multi-phonon correlation transforms,
absorption spectra and secular population dynamics.
"""

from .correlations import BathFunctions, decoherence_exponent, decoherence_factor, phi
from .eigensystem import bruteforce_secular, dark_basis, secular_coefficients
from .observables import absorption_spectrum, secular_dynamics, stationary_state
from .params import (PhysicalParams, bose_occupation, build_params, classify_regime, load_config,
                     typical_params)
from .rates import (closed_form_coefficients, coherence_rates, nonres_rates, vpme_rates,
                    wcme_rates)
from .spectral import SpectralDensity, reorganization_energy
from .variational import params_for_omega_r, solve_self_consistent

__version__ = "0.1.0"

__all__ = [
    "BathFunctions", "PhysicalParams", "SpectralDensity", "absorption_spectrum",
    "bose_occupation", "bruteforce_secular", "build_params", "classify_regime",
    "closed_form_coefficients", "coherence_rates", "dark_basis", "decoherence_exponent",
    "decoherence_factor", "load_config", "nonres_rates", "params_for_omega_r", "phi",
    "reorganization_energy", "secular_coefficients", "secular_dynamics",
    "solve_self_consistent", "stationary_state", "typical_params", "vpme_rates", "wcme_rates",
]

"""Physical parameters, unit conventions, thermal factors and regime tags.

Units: hbar = 1, energies in eV, times in 1/eV, temperatures in kelvin.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np

K_B = 8.617333262e-5  # Boltzmann constant, eV/K


class ParameterError(ValueError):
    """Raised for missing, malformed or out-of-domain parameters."""


class SingularFrequencyError(ValueError):
    """Raised when a thermal factor is requested at exactly zero frequency."""


class ResonanceConvention(str, enum.Enum):
    MEASURED = "measured"  # omega_c = omega_m - reorganization energy
    BARE = "bare"          # omega_c = omega_m
    EXPLICIT = "explicit"  # omega_c given by the user


@dataclass(frozen=True)
class PhysicalParams:
    """Experimental knobs of the molecular cavity model.

    Attributes
    ----------
    g : float
        Bare single-molecule light-matter coupling (eV).
    N : int or float
        Number of molecules, N >= 2. Large values (1e12 and more) are fine.
    omega_c, omega_m : float
        Cavity and bare molecular transition energies (eV). ``omega_c`` may be
        None unless the convention is explicit; it is then derived.
    T : float
        Temperature (K).
    A, p, omega_0 : float
        Spectral density strength, Ohmicity and Gaussian cutoff (eV).
    resonance : ResonanceConvention
    """

    g: float
    N: float
    T: float
    A: float
    p: float
    omega_0: float
    omega_m: float = 2.0
    omega_c: float | None = None
    resonance: ResonanceConvention = ResonanceConvention.MEASURED

    def __post_init__(self):
        res = self.resonance
        if not isinstance(res, ResonanceConvention):
            try:
                res = ResonanceConvention(str(res).lower())
            except ValueError:
                raise ParameterError(f"unknown resonance convention {self.resonance!r}") from None
            object.__setattr__(self, "resonance", res)
        for name in ("g", "T", "omega_0", "p"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ParameterError(f"{name} must be positive, got {val!r}")
        if not (np.isfinite(self.A) and self.A >= 0):
            raise ParameterError(f"A must be non-negative, got {self.A!r}")
        if not self.N >= 2:
            raise ParameterError(f"N must be at least 2, got {self.N!r}")
        if res is ResonanceConvention.EXPLICIT and self.omega_c is None:
            raise ParameterError("explicit resonance convention needs omega_c")

    @property
    def beta(self) -> float:
        return 1.0 / (K_B * self.T)

    @property
    def omega_beta(self) -> float:
        return 10.0 / self.beta

    @property
    def Omega(self) -> float:
        """Bare collective coupling g*sqrt(N)."""
        return self.g * math.sqrt(self.N)

    def cavity_energy(self, reorganization: float) -> float:
        """Cavity energy implied by the resonance convention."""
        if self.resonance is ResonanceConvention.EXPLICIT:
            return float(self.omega_c)
        if self.resonance is ResonanceConvention.BARE:
            return self.omega_m
        return self.omega_m - reorganization

    def with_(self, **changes) -> "PhysicalParams":
        return replace(self, **changes)


def typical_params(**overrides) -> PhysicalParams:
    """Typical organic-molecule parameter set (g = 0.1 ueV, w0 = 6 meV, A = 0.083, p = 3, 300 K)."""
    base = dict(g=1e-7, N=1e6, T=300.0, A=0.083, p=3.0, omega_0=6e-3, omega_m=2.0)
    base.update(overrides)
    return PhysicalParams(**base)


# config keys -> dataclass fields
_CONFIG_KEYS = {
    "g_eV": "g",
    "N": "N",
    "omega_c_eV": "omega_c",
    "omega_m_eV": "omega_m",
    "T_K": "T",
    "A": "A",
    "p": "p",
    "omega0_eV": "omega_0",
    "resonance": "resonance",
}
_REQUIRED = ("g_eV", "N", "T_K", "A", "p", "omega0_eV")


def build_params(raw: Mapping[str, object]) -> PhysicalParams:
    """Validate a flat key/value map (config-file keys) into PhysicalParams."""
    unknown = set(raw) - set(_CONFIG_KEYS)
    if unknown:
        raise ParameterError(f"unknown keys: {sorted(unknown)}")
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ParameterError(f"missing required keys: {missing}")
    kw = {}
    for key, val in raw.items():
        field = _CONFIG_KEYS[key]
        if field == "resonance":
            kw[field] = str(val).strip().lower()
            continue
        try:
            num = float(val)
        except (TypeError, ValueError):
            raise ParameterError(f"{key}: not a number: {val!r}") from None
        if field == "N":
            if num != int(num):
                raise ParameterError(f"N must be an integer, got {val!r}")
            num = int(num)
        kw[field] = num
    if "omega_c" in kw and "resonance" not in kw:
        kw["resonance"] = "explicit"
    return PhysicalParams(**kw)


def parse_config(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key] = val
    return out


def load_config(path) -> PhysicalParams:
    return build_params(parse_config(Path(path).read_text(encoding="utf-8")))


def bose_occupation(nu, beta):
    """Bose factors (n, n + 1) at frequency ``nu``.

    Raises SingularFrequencyError at nu = 0, where callers must use a limit.
    """
    nu = np.asarray(nu, dtype=float)
    if np.any(nu == 0):
        raise SingularFrequencyError("Bose occupation is singular at nu = 0")
    n = 1.0 / np.expm1(beta * nu)
    return n, 1.0 + n


@dataclass(frozen=True)
class DerivedScales:
    beta: float
    Omega: float
    Omega_r: float
    Omega_beta: float
    theta: float


def derived_scales(params: PhysicalParams, frak_b: float, delta: float = 0.0) -> DerivedScales:
    omega_r = params.Omega * frak_b
    return DerivedScales(
        beta=params.beta,
        Omega=params.Omega,
        Omega_r=omega_r,
        Omega_beta=params.omega_beta,
        theta=math.hypot(delta, 2.0 * omega_r),
    )


class RegimeTag(str, enum.Enum):
    HIGHT_WEAK = "HighT_WeakLM"
    HIGHT_STRONG = "HighT_StrongLM"
    LOWT = "LowT"
    TRANSITORY = "Transitory"


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    resonant: bool


def is_resonant(omega_r: float, delta: float, factor: float = 10.0) -> bool:
    return 2.0 * omega_r > factor * abs(delta)


def classify_regime(params: PhysicalParams, sol, band=(0.3, 3.0),
                    resonance_factor: float = 10.0) -> Regime:
    """Regime of the variational transformation for a solved parameter point.

    The low-temperature regime (w0 above Omega_beta) takes precedence; then the
    transitory band around Omega_r = Omega_beta; otherwise weak or strong
    light-matter coupling relative to Omega_beta.
    """
    ob = params.omega_beta
    ratio = sol.omega_r / ob
    if params.omega_0 > ob:
        tag = RegimeTag.LOWT
    elif band[0] < ratio < band[1]:
        tag = RegimeTag.TRANSITORY
    elif ratio <= band[0]:
        tag = RegimeTag.HIGHT_WEAK
    else:
        tag = RegimeTag.HIGHT_STRONG
    return Regime(tag, is_resonant(sol.omega_r, sol.delta, resonance_factor))

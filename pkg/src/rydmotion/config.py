"""Physical chain parameters and conversion to normalized internal units.

All simulation modules work in normalized units in which the initial
wavepacket width sigma_0 is the unit of length and hbar^2/m the unit of
energy-times-length-squared, i.e.

    length unit  = sigma_0 = sqrt(hbar / (2 pi nu_t m))
    time unit    = m sigma_0^2 / hbar          (equals 1 / (2 pi nu_t))
    energy unit  = hbar^2 / (m sigma_0^2)

In these units the single-atom Schroedinger equation reads
i d/dt psi = -(1/2) d^2/dx^2 psi + V psi and the initial Gaussian
exp(-x^2 / 2 sigma_0^2) becomes exp(-x^2 / 2).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

HBAR = 1.054571817e-34  # J s (CODATA 2018)
AMU = 1.66053906660e-27  # kg

_ALLOWED_EXPONENTS = (3, 6)


def sigma_0(trap_frequency: float, atom_mass: float) -> float:
    """Initial Gaussian width sqrt(hbar / (2 pi nu_t m)) in meters.

    trap_frequency in Hz, atom_mass in atomic mass units.
    """
    if trap_frequency <= 0:
        raise ConfigError(f"trap_frequency must be positive, got {trap_frequency}")
    if atom_mass <= 0:
        raise ConfigError(f"atom_mass must be positive, got {atom_mass}")
    return float(np.sqrt(HBAR / (2.0 * np.pi * trap_frequency * atom_mass * AMU)))


def static_interaction(c_alpha: float, alpha: int, r0: float) -> float:
    """Pair interaction c_alpha / r0^alpha at the rest separation (Joules)."""
    if r0 <= 0:
        raise ValueError(f"separation must be positive, got {r0}")
    return c_alpha * r0 ** (-alpha)


def linearized_force(c_alpha: float, alpha: int, r0: float) -> float:
    """Force -dV/dr at the rest separation: alpha c_alpha / r0^(alpha+1).

    Positive for the repulsive power-law potential. Units J/m.
    """
    if r0 <= 0:
        raise ValueError(f"separation must be positive, got {r0}")
    return alpha * c_alpha * r0 ** (-(alpha + 1))


@dataclass(frozen=True)
class PhysicalParams:
    """Lab-frame description of an L-atom chain.

    atom_mass: atomic mass units. trap_frequency: Hz. trap_centers:
    meters, strictly increasing. rabi / detuning: rad/s, scalar or one
    value per atom. interaction_coefficient: J m^alpha.
    """

    atom_mass: float
    trap_frequency: float
    trap_centers: np.ndarray
    rabi: np.ndarray
    detuning: np.ndarray
    interaction_coefficient: float
    interaction_exponent: int

    def __post_init__(self):
        centers = np.atleast_1d(np.asarray(self.trap_centers, dtype=float))
        if centers.ndim != 1 or centers.size < 2:
            raise ConfigError("trap_centers must list at least two positions")
        if not np.all(np.diff(centers) > 0):
            raise ConfigError("trap_centers must be strictly increasing")
        object.__setattr__(self, "trap_centers", centers)
        L = centers.size
        for name in ("rabi", "detuning"):
            value = np.broadcast_to(
                np.asarray(getattr(self, name), dtype=float), (L,)
            ).copy()
            object.__setattr__(self, name, value)
        if self.atom_mass <= 0:
            raise ConfigError(f"atom_mass must be positive, got {self.atom_mass}")
        if self.trap_frequency <= 0:
            raise ConfigError(
                f"trap_frequency must be positive, got {self.trap_frequency}"
            )
        if self.interaction_coefficient <= 0:
            raise ConfigError("interaction_coefficient must be positive")
        if self.interaction_exponent not in _ALLOWED_EXPONENTS:
            raise ConfigError(
                f"interaction_exponent must be one of {_ALLOWED_EXPONENTS}, "
                f"got {self.interaction_exponent}"
            )

    @property
    def n_atoms(self) -> int:
        return self.trap_centers.size


@dataclass(frozen=True)
class NormalizedChain:
    """Chain parameters in normalized units plus the scale factors.

    spacings, v0, f_bond hold one entry per nearest-neighbor bond
    (length L-1); omega and delta one entry per atom. time_scale_s,
    length_scale_m and energy_scale_J convert normalized quantities
    back to SI.
    """

    n_atoms: int
    spacings: np.ndarray
    v0: np.ndarray
    f_bond: np.ndarray
    omega: np.ndarray
    delta: np.ndarray
    alpha: int
    length_scale_m: float
    time_scale_s: float
    energy_scale_J: float
    rest_positions: np.ndarray = field(default=None)

    def time_to_normalized(self, t_seconds):
        return np.asarray(t_seconds, dtype=float) / self.time_scale_s

    def time_to_physical(self, t_normalized):
        return np.asarray(t_normalized, dtype=float) * self.time_scale_s

    def length_to_normalized(self, x_meters):
        return np.asarray(x_meters, dtype=float) / self.length_scale_m

    def length_to_physical(self, x_normalized):
        return np.asarray(x_normalized, dtype=float) * self.length_scale_m

    def energy_to_normalized(self, e_joules):
        return np.asarray(e_joules, dtype=float) / self.energy_scale_J


def free_spread_normalized(t_normalized):
    """Ballistic width factor sqrt(1 + (t/2)^2) in normalized time."""
    t = np.asarray(t_normalized, dtype=float)
    return np.sqrt(1.0 + (0.5 * t) ** 2)


def free_spread_physical(t_seconds, trap_frequency: float, atom_mass: float):
    """sigma_0 sqrt(1 + (hbar t / 2 m sigma_0^2)^2) in meters."""
    s0 = sigma_0(trap_frequency, atom_mass)
    m = atom_mass * AMU
    t = np.asarray(t_seconds, dtype=float)
    return s0 * np.sqrt(1.0 + (HBAR * t / (2.0 * m * s0**2)) ** 2)


def normalize(params: PhysicalParams) -> NormalizedChain:
    """Convert PhysicalParams into normalized units.

    The conversion is invertible through the stored scale factors:
    lengths divide by sigma_0, times by m sigma_0^2 / hbar, energies by
    hbar^2 / (m sigma_0^2). Angular frequencies (rabi, detuning) carry
    an hbar and normalize as E = hbar Omega.
    """
    s0 = sigma_0(params.trap_frequency, params.atom_mass)
    mass_kg = params.atom_mass * AMU
    time_scale = mass_kg * s0**2 / HBAR
    energy_scale = HBAR / time_scale

    separations = np.diff(params.trap_centers)
    c, a = params.interaction_coefficient, params.interaction_exponent
    v0 = np.array([static_interaction(c, a, r) for r in separations])
    f = np.array([linearized_force(c, a, r) for r in separations])

    return NormalizedChain(
        n_atoms=params.n_atoms,
        spacings=separations / s0,
        v0=v0 / energy_scale,
        f_bond=f * s0 / energy_scale,
        omega=HBAR * params.rabi / energy_scale,
        delta=HBAR * params.detuning / energy_scale,
        alpha=a,
        length_scale_m=s0,
        time_scale_s=time_scale,
        energy_scale_J=energy_scale,
        rest_positions=(params.trap_centers - params.trap_centers[0]) / s0,
    )


def two_atom_params(
    spacing_m: float,
    rabi: float,
    detuning: float,
    *,
    trap_frequency: float = 100e3,
    atom_mass: float = 87.0,
    interaction_coefficient: float,
    interaction_exponent: int = 6,
) -> PhysicalParams:
    """Convenience constructor for the two-atom benchmark geometry."""
    return PhysicalParams(
        atom_mass=atom_mass,
        trap_frequency=trap_frequency,
        trap_centers=np.array([0.0, spacing_m]),
        rabi=rabi,
        detuning=detuning,
        interaction_coefficient=interaction_coefficient,
        interaction_exponent=interaction_exponent,
    )


_SECTION_KEYS = {
    "chain": ("atom_mass", "trap_centers"),
    "trap": ("trap_frequency",),
    "drive": ("rabi", "detuning"),
    "interaction": ("interaction_coefficient", "interaction_exponent"),
}


def _parse_floats(text: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.replace(",", " ").split()])
    except ValueError as exc:
        raise ConfigError(f"could not parse numbers from {text!r}") from exc


def load_params(path) -> PhysicalParams:
    """Read PhysicalParams from an INI file.

    Sections [chain], [trap], [drive], [interaction]; keys named exactly
    like the PhysicalParams fields; SI units (meters, Hz, rad/s,
    J m^alpha) except atom_mass, which is in atomic mass units.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"config file not found: {path}")

    values = {}
    for section, keys in _SECTION_KEYS.items():
        if not parser.has_section(section):
            raise ConfigError(f"missing [{section}] section in {path}")
        for key in keys:
            if not parser.has_option(section, key):
                raise ConfigError(f"missing key {key!r} in [{section}] of {path}")
            values[key] = parser.get(section, key)

    rabi = _parse_floats(values["rabi"])
    detuning = _parse_floats(values["detuning"])
    try:
        exponent = int(values["interaction_exponent"])
    except ValueError as exc:
        raise ConfigError("interaction_exponent must be an integer") from exc

    return PhysicalParams(
        atom_mass=float(values["atom_mass"]),
        trap_frequency=float(values["trap_frequency"]),
        trap_centers=_parse_floats(values["trap_centers"]),
        rabi=rabi if rabi.size > 1 else float(rabi[0]),
        detuning=detuning if detuning.size > 1 else float(detuning[0]),
        interaction_coefficient=float(values["interaction_coefficient"]),
        interaction_exponent=exponent,
    )

"""
Gas property closures: real gas law, Papay compressibility, speed of sound
and conversions between mass flow, volumetric flow and standard flow.

All quantities are SI (Pa, K, kg, m, s). Conversions from bar, km or degrees
Celsius only happen where scenario files are read.
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from gasphs.errors import ModelValidityError

logger = logging.getLogger(__name__)

BAR = 1e5
KILOMETRE = 1e3
CELSIUS_OFFSET = 273.15

# isothermal model validity guard
MIN_TEMPERATURE = 200.0
MAX_TEMPERATURE = 400.0

MAX_COMPRESSIBILITY = 1.2


@dataclass(frozen=True)
class GasProperties:
    specific_gas_constant: float
    dynamic_viscosity: float
    critical_pressure: float
    critical_temperature: float
    standard_pressure: float
    standard_temperature: float
    operating_temperature: float

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not (value > 0 and math.isfinite(value)):
                raise ModelValidityError(f"gas property {name} must be positive and finite, got {value!r}")
        if not MIN_TEMPERATURE <= self.operating_temperature <= MAX_TEMPERATURE:
            raise ModelValidityError(
                f"operating temperature {self.operating_temperature} K outside "
                f"[{MIN_TEMPERATURE}, {MAX_TEMPERATURE}] K"
            )

    @classmethod
    def natural_gas(cls):
        """Natural gas used by the three-node benchmark."""
        return cls(
            specific_gas_constant=518.28,
            dynamic_viscosity=1e-5,
            critical_pressure=46.5 * BAR,
            critical_temperature=190.55,
            standard_pressure=1.01325 * BAR,
            standard_temperature=273.15,
            operating_temperature=278.0,
        )


@dataclass(frozen=True)
class FrozenGasState:
    """Compressibility and derived constants frozen at one reference pressure."""
    compressibility: float
    speed_of_sound_sq: float
    standard_density: float
    reference_pressure: float

    def __post_init__(self):
        if not 0 < self.compressibility <= MAX_COMPRESSIBILITY:
            raise ModelValidityError(f"compressibility {self.compressibility} outside (0, {MAX_COMPRESSIBILITY}]")
        if not self.speed_of_sound_sq > 0:
            raise ModelValidityError("squared speed of sound must be positive")
        if not self.standard_density > 0:
            raise ModelValidityError("standard density must be positive")

    @property
    def speed_of_sound(self):
        return math.sqrt(self.speed_of_sound_sq)


class FlowRates(NamedTuple):
    mass_flow: float
    flow: float
    standard_flow: float


def papay_compressibility(p, T, gas):
    """Papay estimate of Z(p, T), valid for natural gas up to about 150 bar.

    Accepts scalars or arrays. Raises ModelValidityError for negative
    pressures or where the estimate is no longer positive.
    """
    p = np.asarray(p, dtype=float)
    if T <= 0:
        raise ModelValidityError(f"temperature must be positive, got {T}")
    if np.any(p < 0):
        raise ModelValidityError(f"pressure must be non-negative, got {p.min()} Pa")
    pr = p / gas.critical_pressure
    tr = T / gas.critical_temperature
    z = 1.0 - 3.52 * pr * math.exp(-2.26 * tr) + 0.274 * pr**2 * math.exp(-1.878 * tr)
    if np.any(z <= 0):
        raise ModelValidityError(f"Papay compressibility non-positive at p = {p.max():.6g} Pa, T = {T} K")
    return z if z.ndim else float(z)


def standard_density(gas):
    z_n = papay_compressibility(gas.standard_pressure, gas.standard_temperature, gas)
    return gas.standard_pressure / (z_n * gas.specific_gas_constant * gas.standard_temperature)


def freeze_gas_state(gas, p_ref, ideal=False):
    """Evaluate Z once at ``p_ref`` and cache c² and ρn for a scenario.

    With ``ideal=True`` the compressibility is forced to 1 (ideal gas).
    """
    if not p_ref > 0:
        raise ModelValidityError(f"reference pressure must be positive, got {p_ref}")
    z = 1.0 if ideal else papay_compressibility(p_ref, gas.operating_temperature, gas)
    c_sq = z * gas.specific_gas_constant * gas.operating_temperature
    state = FrozenGasState(
        compressibility=z,
        speed_of_sound_sq=c_sq,
        standard_density=standard_density(gas),
        reference_pressure=p_ref,
    )
    logger.debug(f"Froze gas state at {p_ref / BAR:.4g} bar: Z={z:.6f}, c={state.speed_of_sound:.2f} m/s")
    return state


def density(p, gas_state):
    """Real gas law p = c² ρ with the frozen speed of sound."""
    return np.asarray(p, dtype=float) / gas_state.speed_of_sound_sq


def flow_conversions(*, density, standard_density, mass_flow=None, flow=None, standard_flow=None):
    """Convert one of M [kg/s], q [m³/s at (p, T)] or qn [m³/s standard] into all three.

    Uses M = ρ q = ρn qn. Exactly one flow representation must be given.
    """
    if not (density > 0 and standard_density > 0):
        raise ModelValidityError('densities must be strictly positive')
    given = [v is not None for v in (mass_flow, flow, standard_flow)]
    if sum(given) != 1:
        raise ValueError('exactly one of mass_flow, flow, standard_flow is required')
    if mass_flow is not None:
        m = mass_flow
    elif flow is not None:
        m = density * flow
    else:
        m = standard_density * standard_flow
    q = flow if flow is not None else m / density
    qn = standard_flow if standard_flow is not None else m / standard_density
    return FlowRates(mass_flow=m, flow=q, standard_flow=qn)

"""
Reynolds number, laminar and turbulent friction factors, efficiency
correction and the resistive coefficient of a pipe.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from gasphs.errors import ConvergenceError, ModelValidityError

logger = logging.getLogger(__name__)

CRITICAL_REYNOLDS = 2300.0

# returned by effective_friction when qn = 0; the damping path then uses laminar_damping
LAMINAR_CLOSED_FORM = 'laminar closed-form'


@dataclass(frozen=True)
class PipeGeometry:
    length: float
    diameter: float
    roughness: float = 0.012e-3
    efficiency: float = 0.98
    inclination_sin: float = 0.0

    def __post_init__(self):
        if not (self.length > 0 and self.diameter > 0):
            raise ModelValidityError(
                f"pipe length and diameter must be positive, got L={self.length}, D={self.diameter}")
        if self.roughness < 0:
            raise ModelValidityError(f"pipe roughness must be non-negative, got {self.roughness}")
        if not 0 < self.efficiency <= 1:
            raise ModelValidityError(f"friction efficiency must lie in (0, 1], got {self.efficiency}")
        if not -1 <= self.inclination_sin <= 1:
            raise ModelValidityError(f"inclination sine must lie in [-1, 1], got {self.inclination_sin}")

    @property
    def cross_section(self):
        return math.pi * self.diameter**2 / 4

    @property
    def relative_roughness(self):
        return self.roughness / self.diameter

    @property
    def height_change(self):
        return self.length * self.inclination_sin


def reynolds(qn_abs, geom, gs, gas):
    """Re = ρ|q|D/(μA), with ρq = ρn qn."""
    qn_abs = np.asarray(qn_abs, dtype=float)
    if np.any(qn_abs < 0):
        raise ValueError('standard flow magnitude must be non-negative')
    re = gs.standard_density * qn_abs * geom.diameter / (gas.dynamic_viscosity * geom.cross_section)
    return re if re.ndim else float(re)


def friction_laminar(re):
    """Hagen-Poiseuille: f = 64/Re."""
    if not re > 0:
        raise ModelValidityError('laminar friction is undefined at Re = 0; use laminar_damping')
    return 64.0 / re


def _hofer(re, relative_roughness):
    inner = 4.518 / re * np.log10(re / 7.0) + relative_roughness / 3.71
    return (2.0 * np.log10(inner)) ** -2


def friction_turbulent_hofer(re, geom):
    """Explicit Hofer approximation of the Colebrook-White friction factor."""
    re_arr = np.asarray(re, dtype=float)
    if np.any(re_arr < CRITICAL_REYNOLDS):
        raise ModelValidityError(f"Hofer friction requires Re >= {CRITICAL_REYNOLDS:g}, got {re_arr.min():.6g}")
    f = _hofer(re_arr, geom.relative_roughness)
    return f if f.ndim else float(f)


def friction_colebrook_white(re, geom, tol=1e-12, max_iter=100, relaxation=0.9):
    """Solve the implicit Colebrook-White equation for f.

    Damped fixed-point iteration on x = 1/sqrt(f), seeded by the Hofer
    approximation. ``tol`` bounds the residual of the equation in x.
    """
    if re < CRITICAL_REYNOLDS:
        raise ModelValidityError(f"Colebrook-White requires Re >= {CRITICAL_REYNOLDS:g}, got {re:.6g}")
    if not tol > 0:
        raise ValueError('tolerance must be positive')
    rough = geom.relative_roughness / 3.71

    def g(x):
        return -2.0 * math.log10(2.51 * x / re + rough)

    x = 1.0 / math.sqrt(friction_turbulent_hofer(re, geom))
    residual = abs(x - g(x))
    for _ in range(max_iter):
        if residual < tol:
            return 1.0 / x**2
        x = (1.0 - relaxation) * x + relaxation * g(x)
        residual = abs(x - g(x))
    if residual < tol:
        return 1.0 / x**2
    raise ConvergenceError(f"Colebrook-White did not converge for Re={re:.6g}, k/D={geom.relative_roughness:.3g}",
                           residual=residual, iterations=max_iter)


def effective_friction(qn_abs, geom, gs, gas):
    """f_e = f/η², laminar below Re = 2300 and Hofer above.

    Returns LAMINAR_CLOSED_FORM at zero flow.
    """
    re = reynolds(qn_abs, geom, gs, gas)
    if re == 0:
        return LAMINAR_CLOSED_FORM
    f = friction_laminar(re) if re < CRITICAL_REYNOLDS else friction_turbulent_hofer(re, geom)
    return f / geom.efficiency**2


def regime_discontinuity(geom):
    """Relative jump of the friction factor at the laminar/turbulent switch."""
    f_lam = 64.0 / CRITICAL_REYNOLDS
    return abs(friction_turbulent_hofer(CRITICAL_REYNOLDS, geom) - f_lam) / f_lam


def laminar_damping(geom, gs, gas, p_mean):
    """Laminar resistive coefficient of the pipe, independent of the flow.

    Equals 32 ρn c² μ L / (η² D² A pM), the qn -> 0 limit of the turbulent
    resistive entry when f = 64/Re.
    """
    if not p_mean > 0:
        raise ModelValidityError(f"mean pressure must be positive, got {p_mean}")
    return (32.0 * gs.standard_density * gs.speed_of_sound_sq * gas.dynamic_viscosity * geom.length
            / (geom.efficiency**2 * geom.diameter**2 * geom.cross_section * p_mean))


def pipe_resistance(qn, p_mean, length, diameter, roughness, efficiency, rho_n, c_sq, mu):
    """Vectorised resistive coefficient R_m(|qn|, pM) [Pa s/m³].

    R_m = f_e ρn² c² L |qn| / (2 D A² pM) in turbulent flow and the laminar
    closed form below the critical Reynolds number.
    """
    qn_abs = np.abs(np.asarray(qn, dtype=float))
    p_mean = np.asarray(p_mean, dtype=float)
    area = np.pi * np.asarray(diameter, dtype=float)**2 / 4
    re = rho_n * qn_abs * diameter / (mu * area)
    laminar = 32.0 * rho_n * c_sq * mu * length / (efficiency**2 * diameter**2 * area * p_mean)
    f_turb = _hofer(np.maximum(re, CRITICAL_REYNOLDS), roughness / diameter) / efficiency**2
    turbulent = f_turb * rho_n**2 * c_sq * length * qn_abs / (2.0 * diameter * area**2 * p_mean)
    return np.where(re < CRITICAL_REYNOLDS, laminar, turbulent)

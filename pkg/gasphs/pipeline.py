"""
Single pipeline: lumped left/right model, mean pressure, the third-order
port-Hamiltonian form and its split inductive-resistive / capacitive parts.

States are stored as co-states (pl, pr, qnm); the energy variables
x = Q^-1 (pl, pr, qnm) are only formed when the Hamiltonian is needed.
"""
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from gasphs.errors import ModelValidityError
from gasphs.friction import PipeGeometry, pipe_resistance
from gasphs.gas import FrozenGasState, GasProperties

logger = logging.getLogger(__name__)

STANDARD_GRAVITY = 9.80665

PHS_VARIANT = 'phs'
LIVE_PM_VARIANT = 'live_pm'
VARIANTS = (PHS_VARIANT, LIVE_PM_VARIANT)

J_PIPE = np.array([
    [0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0],
    [1.0, -1.0, 0.0],
])
G_PIPE = np.array([
    [1.0, 0.0],
    [0.0, 1.0],
    [0.0, 0.0],
])
E_PIPE = np.array([0.0, 0.0, -1.0])

# sign of the injected flow on each capacitive side
BETA = {'left': 1.0, 'right': -1.0}


@dataclass(frozen=True)
class PipeParams:
    geometry: PipeGeometry
    gas_state: FrozenGasState
    gas: GasProperties
    gravity: float = STANDARD_GRAVITY

    @property
    def capacitive_weight(self):
        """2 ρn c² / (L A), the pressure entries of Q."""
        g = self.geometry
        return 2.0 * self.gas_state.standard_density * self.gas_state.speed_of_sound_sq / (g.length * g.cross_section)

    @property
    def inductive_weight(self):
        """A / (ρn L), the flow entry of Q."""
        g = self.geometry
        return g.cross_section / (self.gas_state.standard_density * g.length)

    @property
    def gravity_factor(self):
        """φ = g L sinθ / c²."""
        return self.gravity * self.geometry.height_change / self.gas_state.speed_of_sound_sq

    def resistance(self, qnm, p_mean):
        g = self.geometry
        return pipe_resistance(qnm, p_mean, g.length, g.diameter, g.roughness, g.efficiency,
                               self.gas_state.standard_density, self.gas_state.speed_of_sound_sq,
                               self.gas.dynamic_viscosity)


class PipelineState(NamedTuple):
    pl: float
    pr: float
    qnm: float

    def validate(self):
        if not (self.pl > 0 and self.pr > 0):
            raise ModelValidityError(f"pipe pressures must stay positive, got pl={self.pl}, pr={self.pr}")
        return self


def _check_pressures(*pressures):
    for p in pressures:
        if np.any(np.asarray(p) <= 0):
            raise ModelValidityError(f"pressure must be positive, got {np.min(p)} Pa")


def mean_pressure(pl, pr):
    """Volume-weighted mean pressure (2/3)(pl + pr - pl pr/(pl + pr))."""
    _check_pressures(pl, pr)
    pl = np.asarray(pl, dtype=float)
    pr = np.asarray(pr, dtype=float)
    pm = 2.0 / 3.0 * (pl + pr - pl * pr / (pl + pr))
    return pm if pm.ndim else float(pm)


def mean_pressure_cubic(pl, pr):
    """(2/3)(pl³ - pr³)/(pl² - pr²), the first closed form; pM = p when pl == pr."""
    _check_pressures(pl, pr)
    if pl == pr:
        return float(pl)
    return 2.0 / 3.0 * (pl**3 - pr**3) / (pl**2 - pr**2)


def lumped_mass_rhs(state, qnl, qnr, params):
    """(ṗl, ṗr) of the lumped mass balance."""
    state.validate()
    k = params.capacitive_weight
    return k * (qnl - state.qnm), k * (state.qnm - qnr)


def lumped_momentum_rhs(state, params, p_mean_gravity=None):
    """q̇nm of the lumped momentum balance.

    The friction denominator always uses the live mean pressure; the gravity
    term uses ``p_mean_gravity`` when given (the frozen value of the PHS form).
    """
    state.validate()
    g = params.geometry
    gs = params.gas_state
    p_mean = mean_pressure(state.pl, state.pr)
    p_grav = p_mean if p_mean_gravity is None else p_mean_gravity
    r_m = params.resistance(state.qnm, p_mean)
    accel = ((state.pl - state.pr) / g.length - r_m * state.qnm / g.length
             - params.gravity * g.inclination_sin * p_grav / gs.speed_of_sound_sq)
    return float(accel * g.cross_section / gs.standard_density)


@dataclass(frozen=True, eq=False)
class PipelinePhs:
    params: PipeParams
    p_mean_frozen: float
    Q: np.ndarray = field(repr=False)
    J: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    e: np.ndarray = field(repr=False)
    d: float = 0.0

    @property
    def q_diagonal(self):
        return np.diag(self.Q)

    def resistance(self, qnm, p_mean):
        """R_m(qnm, pM), the single non-zero entry of R(x)."""
        return float(self.params.resistance(qnm, p_mean))

    def R(self, state):
        state = PipelineState(*state).validate()
        return np.diag([0.0, 0.0, self.resistance(state.qnm, mean_pressure(state.pl, state.pr))])

    def disturbance(self, state, variant=PHS_VARIANT):
        if variant == PHS_VARIANT:
            return self.d
        if variant == LIVE_PM_VARIANT:
            return self.params.gravity_factor * mean_pressure(state[0], state[1])
        raise ValueError(f"unknown model variant {variant!r}")

    def energy_variables(self, costate):
        return np.asarray(costate, dtype=float) / self.q_diagonal

    def rhs(self, state, u, variant=PHS_VARIANT):
        """Time derivative of the co-state (pl, pr, qnm) for inputs u = (qnl, -qnr)."""
        state = PipelineState(*state).validate()
        co = np.array(state, dtype=float)
        x_dot = ((self.J - self.R(state)) @ co + self.G @ np.asarray(u, dtype=float)
                 + self.e * self.disturbance(state, variant))
        return self.Q @ x_dot


def build_pipeline_phs(params, p_mean_frozen):
    """Assemble Q, J, G, e and the constant gravity disturbance d."""
    if not p_mean_frozen > 0:
        raise ModelValidityError(f"frozen mean pressure must be positive, got {p_mean_frozen}")
    q = np.diag([params.capacitive_weight, params.capacitive_weight, params.inductive_weight])
    return PipelinePhs(
        params=params,
        p_mean_frozen=p_mean_frozen,
        Q=q,
        J=J_PIPE.copy(),
        G=G_PIPE.copy(),
        e=E_PIPE.copy(),
        d=params.gravity_factor * p_mean_frozen,
    )


def pipeline_ports(phs, state, u):
    """Outputs y = Gᵀ∂H/∂x = (pl, pr) and z = eᵀ∂H/∂x = -qnm."""
    co = np.asarray(state, dtype=float)
    return phs.G.T @ co, float(phs.e @ co)


def supplied_power(phs, state, u, variant=PHS_VARIANT):
    """yᵀu + z d, the power entering through the input and disturbance ports."""
    y, z = pipeline_ports(phs, state, u)
    return float(y @ np.asarray(u, dtype=float) + z * phs.disturbance(state, variant))


def split_rl_rhs(qnm, pl, pr, params, p_mean_gravity=None):
    """Inductive-resistive part: q̇nm driven by the port pressures (pl, pr)."""
    _check_pressures(pl, pr)
    p_mean = mean_pressure(pl, pr)
    p_grav = p_mean if p_mean_gravity is None else p_mean_gravity
    r_m = float(params.resistance(qnm, p_mean))
    d_m = params.gravity_factor * p_grav
    return params.inductive_weight * (-r_m * qnm + (pl - pr) - d_m)


def split_c_rhs(pk, qn_k, qnm, side, params):
    """Capacitive part at one pipe end: ṗk = Q_k β_k (qn_k - qnm).

    ``qn_k`` is the inflow at the left end or the outflow at the right end.
    """
    _check_pressures(pk)
    try:
        beta = BETA[side]
    except KeyError:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}") from None
    return params.capacitive_weight * beta * (qn_k - qnm)

"""
Passivity and stability diagnostics: Hamiltonian and energy-balance audit,
output feedback passivity index and the eigenvalue analysis of the model
with a live (state dependent) mean pressure in the gravity term.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid

from gasphs.errors import ModelValidityError
from gasphs.friction import laminar_damping
from gasphs.gas import freeze_gas_state
from gasphs.pipeline import mean_pressure

logger = logging.getLogger(__name__)

# pipes with |L sinθ| below this are treated as level for the EIP note
LEVEL_TOLERANCE = 1e-9


@dataclass
class EnergyReport:
    times: np.ndarray = field(repr=False)
    hamiltonian: np.ndarray = field(repr=False)
    dissipation: np.ndarray = field(repr=False)
    port_power: np.ndarray = field(repr=False)
    disturbance_power: np.ndarray = field(repr=False)
    residual: np.ndarray = field(repr=False)
    max_residual: float = 0.0
    ledger: bool = False

    @property
    def passive(self):
        return bool(np.all(self.dissipation >= 0))

    def to_dict(self):
        return {
            'max_normalized_residual': self.max_residual,
            'dissipation_nonnegative': self.passive,
            'min_dissipation': float(np.min(self.dissipation)),
            'hamiltonian_initial': float(self.hamiltonian[0]),
            'hamiltonian_final': float(self.hamiltonian[-1]),
            'hamiltonian_max': float(np.max(self.hamiltonian)),
            'quadrature': 'integrator ledger' if self.ledger else 'trapezoidal',
        }


@dataclass
class StabilityReport:
    edge_id: Optional[str]
    gravity_factor: float
    height_change: float
    threshold: float
    margin: float
    ok: bool
    equilibrium_independent: bool
    kl: Optional[float] = None
    kr: Optional[float] = None
    eigenvalues: Optional[tuple] = None
    worst_case_margin: Optional[float] = None
    pointwise_max_real: Optional[float] = None

    def to_dict(self):
        out = {
            'edge': self.edge_id,
            'phi': self.gravity_factor,
            'height_change_m': self.height_change,
            'threshold_m': self.threshold,
            'margin_m': self.margin,
            'ok': self.ok,
            'eip_note': ('level pipe: passive with respect to any admissible equilibrium'
                         if self.equilibrium_independent else 'inclined pipe: passivity shown about the origin only'),
        }
        if self.kl is not None:
            out['kl'] = self.kl
            out['kr'] = self.kr
        if self.eigenvalues is not None:
            out['eigenvalues'] = [{'real': float(np.real(v)), 'imag': float(np.imag(v))} for v in self.eigenvalues]
        if self.worst_case_margin is not None:
            out['worst_case_margin_m'] = self.worst_case_margin
        if self.pointwise_max_real is not None:
            out['pointwise_max_real_part'] = self.pointwise_max_real
        return out


def hamiltonian(phs, state):
    """H = ½ xᵀQx, evaluated from the co-state (pressures and flows) as ½ Σ e²/Q_ii.

    ``state`` may be a single co-state or an array of them (one per row).
    """
    co = np.asarray(state, dtype=float)
    return 0.5 * np.sum(co * co / phs.q_diagonal, axis=-1)


def energy_balance(trajectory, phs):
    """Audit ΔH against ∫(-∂HᵀR∂H + yᵀu + z d) dt along a trajectory.

    Uses the integrals accumulated by the integrator when the trajectory
    carries them; falls back to trapezoidal quadrature over the samples.
    Residuals are normalised by max H.
    """
    states = np.asarray(trajectory.states, dtype=float)
    h = hamiltonian(phs, states)
    terms = np.array([phs.power_terms(x, u, trajectory.variant)
                      for x, u in zip(states, trajectory.injections)])
    dissipation, port, disturbance = terms.T if len(terms) else (np.zeros(0),) * 3

    ledger = trajectory.ledger
    if ledger is not None:
        supplied = ledger['port'] + ledger['disturbance'] - ledger['dissipation']
    else:
        supplied = cumulative_trapezoid(port + disturbance - dissipation, trajectory.times, initial=0.0)
    residual = (h - h[0]) - supplied
    scale = float(np.max(np.abs(h))) or 1.0
    report = EnergyReport(
        times=np.asarray(trajectory.times),
        hamiltonian=h,
        dissipation=dissipation,
        port_power=port,
        disturbance_power=disturbance,
        residual=residual,
        max_residual=float(np.max(np.abs(residual)) / scale),
        ledger=ledger is not None,
    )
    if not report.passive:
        logger.warning(f"Negative dissipation sample: {report.dissipation.min():.3e}")
    return report


def ofp_index(pipe_params, p_mean, qn_grid=None):
    """Output feedback passivity index of the inductive-resistive pipe part.

    This is the laminar damping coefficient. It is checked against the
    resistive entry sampled over ``qn_grid`` (|qn| in [0, 200] m³/s by default).
    """
    if not p_mean > 0:
        raise ModelValidityError(f"mean pressure must be positive, got {p_mean}")
    index = laminar_damping(pipe_params.geometry, pipe_params.gas_state, pipe_params.gas, p_mean)
    grid = np.linspace(0.0, 200.0, 401) if qn_grid is None else np.abs(np.asarray(qn_grid, dtype=float))
    sampled = pipe_params.resistance(grid, p_mean)
    if np.any(sampled < index * (1 - 1e-12)):
        raise ModelValidityError(f"laminar bound {index:.6g} exceeds sampled resistance {sampled.min():.6g}")
    return index


def pressure_weights(pl, pr):
    """kl, kr with kl pl + kr pr = pM; both lie in (1/3, 2/3)."""
    if not (np.all(np.asarray(pl) > 0) and np.all(np.asarray(pr) > 0)):
        raise ModelValidityError(f"pressures must be positive, got pl={pl}, pr={pr}")
    total = pl + pr
    kl = (2.0 - pr / total) / 3.0
    kr = (2.0 - pl / total) / 3.0
    return kl, kr


def variable_pm_state_matrix(pipe_params, state):
    """3×3 state matrix of the pipe when gravity uses the live mean pressure."""
    pl, pr, qnm = state
    kl, kr = pressure_weights(pl, pr)
    phi = pipe_params.gravity_factor
    r_m = float(pipe_params.resistance(qnm, mean_pressure(pl, pr)))
    return np.array([
        [0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0],
        [1.0 - phi * kl, -1.0 - phi * kr, -r_m],
    ])


def eigenvalues_variable_pm(r_m, phi, kl, kr):
    """Closed-form eigenvalues (0, -R/2 ± ½√(R² - 8 + 4φkl - 4φkr)); complex when needed.

    Accepts arrays; returns a tuple of three complex values or arrays.
    """
    if np.any(np.asarray(r_m) < 0):
        raise ValueError('resistance must be non-negative')
    root = np.emath.sqrt(np.asarray(r_m, dtype=float)**2 - 8.0 + 4.0 * phi * kl - 4.0 * phi * kr)
    half = -np.asarray(r_m, dtype=float) / 2.0
    lam2 = half + root / 2.0
    lam3 = half - root / 2.0
    zero = np.zeros_like(lam2, dtype=complex)
    if np.ndim(lam2) == 0:
        return complex(zero), complex(lam2), complex(lam3)
    return zero, lam2.astype(complex), lam3.astype(complex)


def stability_threshold(speed_of_sound_sq, gravity):
    """6c²/g, the height difference below which the pipe is Lyapunov stable."""
    return 6.0 * speed_of_sound_sq / gravity


def check_stability_condition(pipe_params, state=None, pressure_range=None, edge_id=None):
    """Sufficient stability condition |L sinθ| < 6c²/g for one pipe.

    With ``state`` the weights and eigenvalues at that point are attached;
    with ``pressure_range`` the margin is also evaluated at the smallest c²
    over that range.
    """
    gs = pipe_params.gas_state
    height = pipe_params.geometry.height_change
    threshold = stability_threshold(gs.speed_of_sound_sq, pipe_params.gravity)
    report = StabilityReport(
        edge_id=edge_id,
        gravity_factor=pipe_params.gravity_factor,
        height_change=height,
        threshold=threshold,
        margin=threshold - abs(height),
        ok=abs(height) < threshold,
        equilibrium_independent=abs(height) < LEVEL_TOLERANCE,
    )
    if state is not None:
        pl, pr, qnm = state
        report.kl, report.kr = pressure_weights(pl, pr)
        r_m = float(pipe_params.resistance(qnm, mean_pressure(pl, pr)))
        report.eigenvalues = eigenvalues_variable_pm(r_m, report.gravity_factor, report.kl, report.kr)
    if pressure_range is not None:
        c_sq_min = worst_case_speed_of_sound_sq(pipe_params.gas, pressure_range)
        report.worst_case_margin = stability_threshold(c_sq_min, pipe_params.gravity) - abs(height)
    return report


def worst_case_speed_of_sound_sq(gas, pressure_range, samples=201):
    lo, hi = pressure_range
    if not 0 < lo <= hi:
        raise ModelValidityError(f"invalid pressure range ({lo}, {hi})")
    pressures = np.linspace(lo, hi, samples)
    return min(freeze_gas_state(gas, p).speed_of_sound_sq for p in pressures)


def pointwise_eigen_check(phs, trajectory):
    """Largest real part of the live-pM eigenvalues per edge along a trajectory."""
    p = np.asarray(trajectory.pressures, dtype=float)
    q = np.asarray(trajectory.flows, dtype=float)
    pl = p[:, phs.source_index]
    pr = p[:, phs.target_index]
    kl, kr = pressure_weights(pl, pr)
    r_m = phs.resistance(q, mean_pressure(pl, pr))
    _, lam2, lam3 = eigenvalues_variable_pm(r_m, phs.gravity_factor, kl, kr)
    worst = np.maximum(np.real(lam2), np.real(lam3)).max(axis=0)
    return dict(zip(phs.edge_ids, (float(v) for v in worst)))

"""
Time integration of the network model, steady-state initialisation and the
three-node benchmark.

Integration runs on scaled co-states (pressures in bar, flows in m³/s).
Four ledger states ride along: the integrals of dissipation, port power and
disturbance power (normalised by the initial Hamiltonian) and of the net
standard-volume injection (normalised by the initial linepack). The energy
and mass audits read them directly instead of re-integrating sampled data.
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp
from scipy.optimize import approx_fprime

from gasphs import analysis
from gasphs.errors import ConvergenceError, GasNetworkError, ModelValidityError, ScenarioError, TopologyError
from gasphs.gas import BAR, GasProperties, freeze_gas_state
from gasphs.network import (DEMAND, SUPPLY, NetworkTopology, Node, Pipe, apply_supply_node,
                            assemble_network_phs, edge_params, network_rhs)
from gasphs.pipeline import LIVE_PM_VARIANT, PHS_VARIANT, STANDARD_GRAVITY, VARIANTS

logger = logging.getLogger(__name__)

RK45 = 'rk45'
TRAPEZOIDAL = 'trapezoidal'
METHODS = (RK45, TRAPEZOIDAL)

DEFAULT_VELOCITY_LIMIT = 15.0
LEDGER_NAMES = ('dissipation', 'port', 'disturbance', 'net_injection')
# demand pressures seen by the integrand [Pa]; the collapse event watches the raw state
PRESSURE_FLOOR = 1.0

BENCHMARK_HEIGHTS = (-1000.0, -500.0, 0.0, 500.0, 1000.0)
BENCHMARK_LENGTH = 80e3
BENCHMARK_SUPPLY_PRESSURE = 50 * BAR


@dataclass(frozen=True)
class LoadProfile:
    """Piecewise-linear withdrawal qn(t) [m³/s]; constant outside its breakpoints."""
    times: tuple
    values: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.size == 0 or t.shape != v.shape:
            raise ScenarioError('load profile needs matching, non-empty times and values')
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ScenarioError('load profile entries must be finite')
        if np.any(np.diff(t) <= 0):
            raise ScenarioError('load profile times must be strictly increasing')

    @classmethod
    def constant(cls, value):
        return cls(times=(0.0,), values=(float(value),))

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    def covers(self, t_start, t_end):
        return len(self.times) == 1 or (self.times[0] <= t_start and self.times[-1] >= t_end)


@dataclass(frozen=True)
class SolverOptions:
    method: str = RK45
    rtol: float = 1e-8
    atol: float = 1e-8
    max_step: float = np.inf
    sample_dt: float = 60.0
    variant: str = PHS_VARIANT
    steady_tol: float = 1e-10
    steady_max_iter: int = 60
    velocity_limit: float = DEFAULT_VELOCITY_LIMIT

    def __post_init__(self):
        if self.method not in METHODS:
            raise ScenarioError(f"unknown integration method {self.method!r}; expected one of {METHODS}")
        if self.variant not in VARIANTS:
            raise ScenarioError(f"unknown model variant {self.variant!r}; expected one of {VARIANTS}")
        if not (self.rtol > 0 and self.atol > 0):
            raise ScenarioError('rtol and atol must be positive')
        if not (self.sample_dt > 0 and self.max_step > 0):
            raise ScenarioError('sample_dt and max_step must be positive')


@dataclass(frozen=True, eq=False)
class Scenario:
    topology: NetworkTopology
    gas: GasProperties
    t_end: float
    loads: dict = field(default_factory=dict)
    options: SolverOptions = SolverOptions()
    reference_pressure: Optional[float] = None
    ideal_gas: bool = False
    gravity: float = STANDARD_GRAVITY
    name: str = 'scenario'
    defaults_used: tuple = ()

    def __post_init__(self):
        if not self.t_end > 0:
            raise ScenarioError(f"t_end must be positive, got {self.t_end}")
        kinds = {n.id: n.kind for n in self.topology.nodes}
        for node_id, profile in self.loads.items():
            if node_id not in kinds:
                raise ScenarioError(f"load profile for unknown node {node_id!r}")
            if kinds[node_id] != DEMAND:
                raise ScenarioError(f"supply node {node_id!r} cannot carry a load profile")
            if not profile.covers(0.0, self.t_end):
                raise ScenarioError(f"load profile of node {node_id!r} does not cover [0, {self.t_end}] s")
        if not self.topology.supply_nodes:
            missing = [n.id for n in self.topology.nodes if n.p_initial is None]
            if missing:
                raise TopologyError(f"network without supply nodes needs initial pressures; missing for {missing}")

    @property
    def z_reference(self):
        """Pressure at which Z is frozen: explicit, else the largest supply or initial pressure."""
        if self.reference_pressure is not None:
            return self.reference_pressure
        pressures = [n.p_fixed for n in self.topology.supply_nodes]
        pressures = pressures or [n.p_initial for n in self.topology.nodes if n.p_initial is not None]
        return max(pressures)

    def breakpoints(self):
        points = {t for profile in self.loads.values() for t in profile.times if 0.0 < t < self.t_end}
        return sorted(points)


class SteadyState(NamedTuple):
    state: np.ndarray
    iterations: int
    residual: float


class PreparedModel(NamedTuple):
    gas_state: object
    phs: object
    initial_state: np.ndarray
    steady: Optional[SteadyState]


@dataclass
class Trajectory:
    times: np.ndarray
    node_ids: tuple
    edge_ids: tuple
    supply_ids: tuple
    states: np.ndarray = field(repr=False)
    pressures: np.ndarray = field(repr=False)
    flows: np.ndarray = field(repr=False)
    supply_flows: np.ndarray = field(repr=False)
    injections: np.ndarray = field(repr=False)
    linepack: np.ndarray = field(repr=False)
    max_velocity: np.ndarray = field(repr=False)
    variant: str = PHS_VARIANT
    ledger: Optional[dict] = field(default=None, repr=False)
    stats: dict = field(default_factory=dict)
    velocity_violations: list = field(default_factory=list)
    failure: Optional[str] = None

    @property
    def failed(self):
        return self.failure is not None

    def mass_residual(self):
        """Relative mismatch between linepack change and integrated net injection."""
        if self.ledger is None:
            raise GasNetworkError('trajectory carries no injection ledger')
        change = self.linepack - self.linepack[0]
        return float(np.max(np.abs(change - self.ledger['net_injection'])) / self.linepack[0])

    def to_frame(self):
        """Samples as a DataFrame: t [s], p_<node> [bar], qnm_<edge>, qn_supply_<node> [m³/s]."""
        data = {'t': self.times}
        for i, node_id in enumerate(self.node_ids):
            data[f"p_{node_id}"] = self.pressures[:, i] / BAR
        for j, edge_id in enumerate(self.edge_ids):
            data[f"qnm_{edge_id}"] = self.flows[:, j]
        for k, node_id in enumerate(self.supply_ids):
            data[f"qn_supply_{node_id}"] = self.supply_flows[:, k]
        return pd.DataFrame(data)


def _injections(phs, loads, t):
    return np.array([-loads[n](t) if n in loads else 0.0 for n in phs.demand_ids], dtype=float)


def _scale(phs):
    return np.concatenate([np.full(len(phs.demand_index), BAR), np.ones(phs.n_edges)])


def _fd_jacobian(fun, y, rel_step=1e-7):
    """Forward-difference Jacobian with steps scaled to max(1, |y_j|)."""
    y = np.asarray(y, dtype=float)
    return np.atleast_2d(approx_fprime(y, fun, rel_step * np.maximum(1.0, np.abs(y))))


def _steady_residual(phs, injections, variant):
    """Balance residual in scaled units: node rows in m³/s, edge rows in bar."""
    n_d = len(phs.demand_index)
    scale = _scale(phs)

    def fun(y):
        co = y * scale
        x_dot = network_rhs(phs, co, injections, variant) / phs.q_diagonal
        x_dot[n_d:] /= BAR
        return x_dot

    return fun


def steady_state(phs, injections, variant=PHS_VARIANT, tol=1e-10, max_iter=60, initial=None):
    """Damped Newton iteration on rhs(state) = 0 with a finite-difference Jacobian.

    ``injections`` are the constant demand-node injections (negative loads).
    At least one supply node must anchor the pressure level.
    """
    if not phs.supply_ids:
        raise TopologyError('steady state needs at least one supply node to anchor the pressure level')
    injections = np.asarray(injections, dtype=float)
    n_d = len(phs.demand_index)
    scale = _scale(phs)
    fun = _steady_residual(phs, injections, variant)

    if initial is None:
        b_dem = phs.B_demand.toarray() if hasattr(phs.B_demand, 'toarray') else phs.B_demand
        flows = np.linalg.lstsq(b_dem, -injections, rcond=None)[0]
        p0 = np.full(n_d, np.max(phs.supply_pressure[phs.supply_index]))
        y = np.concatenate([p0, flows]) / scale
    else:
        y = np.asarray(initial, dtype=float) / scale

    f = fun(y)
    residual = float(np.max(np.abs(f)))
    for iteration in range(1, max_iter + 1):
        if residual < tol:
            return SteadyState(state=y * scale, iterations=iteration - 1, residual=residual)
        jac = _fd_jacobian(fun, y)
        condition = float(np.linalg.cond(jac))
        if not np.isfinite(condition) or condition > 1e14:
            raise ConvergenceError('steady-state Jacobian is singular', residual=residual,
                                   iterations=iteration, condition=condition)
        step = np.linalg.solve(jac, -f)
        alpha = 1.0
        while True:
            trial = y + alpha * step
            try:
                f_trial = fun(trial)
                trial_residual = float(np.max(np.abs(f_trial)))
            except ModelValidityError:
                trial_residual = np.inf
            if trial_residual < residual or alpha < 1e-4:
                break
            alpha /= 2.0
        if not np.isfinite(trial_residual):
            raise ConvergenceError('steady-state iteration left the positive-pressure region',
                                   residual=residual, iterations=iteration, condition=condition)
        y, f, residual = trial, f_trial, trial_residual
        logger.debug(f"Newton iteration {iteration}: residual {residual:.3e}, step {alpha:g}")
    if residual < tol:
        return SteadyState(state=y * scale, iterations=max_iter, residual=residual)
    raise ConvergenceError('steady state did not converge', residual=residual, iterations=max_iter)


def prepare_model(scenario):
    """Freeze the gas state, assemble and reduce the network, find the initial state.

    The gravity mean pressures are frozen at the initial state, so that
    state is an equilibrium of both model variants.
    """
    topology = scenario.topology
    opts = scenario.options
    gas_state = freeze_gas_state(scenario.gas, scenario.z_reference, ideal=scenario.ideal_gas)
    phs = assemble_network_phs(topology, gas_state, scenario.gas, scenario.z_reference, gravity=scenario.gravity)
    for node in topology.supply_nodes:
        phs = apply_supply_node(phs, node.id, node.p_fixed)

    steady = None
    if topology.supply_nodes:
        injections = _injections(phs, scenario.loads, 0.0)
        steady = steady_state(phs, injections, variant=LIVE_PM_VARIANT, tol=opts.steady_tol,
                              max_iter=opts.steady_max_iter)
        initial = steady.state
    else:
        p0 = np.array([topology.node(n).p_initial for n in phs.demand_ids], dtype=float)
        initial = np.concatenate([p0, np.zeros(phs.n_edges)])
    phs = phs.with_frozen_mean_pressure(phs.edge_mean_pressure(phs.pressures(initial)))
    return PreparedModel(gas_state=gas_state, phs=phs, initial_state=initial, steady=steady)


def _sample_times(t_end, dt):
    times = np.arange(0.0, t_end, dt)
    return np.append(times, t_end) if times[-1] < t_end else times


def _augmented_rhs(phs, loads, variant, scale, h_scale, m_scale):
    n = phs.n_states
    n_d = len(phs.demand_index)

    def fun(t, y):
        co = y[:n] * scale
        co[:n_d] = np.maximum(co[:n_d], PRESSURE_FLOOR)
        injections = _injections(phs, loads, t)
        rate = network_rhs(phs, co, injections, variant, time=t)
        dissipation, port, disturbance = phs.power_terms(co, injections, variant)
        net = float(np.sum(injections) + np.sum(phs.supply_flows(co)))
        return np.concatenate([rate / scale, [dissipation / h_scale, port / h_scale,
                                              disturbance / h_scale, net / m_scale]])

    return fun


def _pressure_event(n_d):
    def event(t, y):
        return float(np.min(y[:n_d]))
    event.terminal = True
    event.direction = -1
    return event


class TrapezoidalSolution(NamedTuple):
    """Outcome of integrate_trapezoidal, shaped after solve_ivp's result.

    ``status`` is 0 at t_end, 1 when the terminal event fired and -1 when
    the step size underflowed.
    """
    t: np.ndarray
    y: np.ndarray
    status: int
    message: str
    t_event: Optional[float]
    y_event: Optional[np.ndarray]
    stats: dict


def integrate_trapezoidal(fun, t_span, y0, t_eval, rtol, atol, max_step=np.inf, max_newton=8, event=None):
    """Implicit trapezoidal rule with Newton inner solves and step-doubling error control.

    Steps land exactly on the requested sample times. ``event(t, y)`` is a
    terminal event: when it changes sign over an accepted step the crossing
    is located by linear interpolation and the run stops there.
    """
    t, t_end = t_span
    t_eval = list(t_eval)
    y = np.asarray(y0, dtype=float)
    stats = {'nfev': 0, 'njev': 0, 'steps': 0, 'rejected': 0}
    out_t, out_y = [], []
    targets = list(t_eval)
    if targets and targets[0] == t:
        out_t.append(t)
        out_y.append(y.copy())
        targets.pop(0)

    def finish(status, message, t_event=None, y_event=None):
        samples = np.array(out_y).reshape(len(out_y), y.size)
        return TrapezoidalSolution(t=np.array(out_t), y=samples, status=status, message=message,
                                   t_event=t_event, y_event=y_event, stats=stats)

    def counted(tt, yy):
        stats['nfev'] += 1
        return fun(tt, yy)

    def implicit_step(t0, y_start, f_start, h, jac):
        lhs = np.eye(y_start.size) - 0.5 * h * jac
        z = y_start + h * f_start
        for _ in range(max_newton):
            g = z - y_start - 0.5 * h * (f_start + counted(t0 + h, z))
            dz = np.linalg.solve(lhs, -g)
            z = z + dz
            if np.max(np.abs(dz) / (atol + rtol * np.abs(z))) < 1e-3:
                return z
        raise ConvergenceError('trapezoidal Newton iteration did not converge', iterations=max_newton)

    h = min(max_step, (t_end - t) / 100.0 or 1.0)
    f = counted(t, y)
    g_prev = event(t, y) if event else None
    while t < t_end:
        if h < 1e-12 * max(1.0, abs(t)):
            return finish(-1, f"step size underflow at t = {t:.6g} s")
        next_stop = targets[0] if targets else t_end
        landing = h >= next_stop - t
        h_try = min(h, next_stop - t, max_step)
        jac = _fd_jacobian(lambda yy: counted(t, yy), y)
        stats['njev'] += 1
        try:
            full = implicit_step(t, y, f, h_try, jac)
            half = implicit_step(t, y, f, h_try / 2, jac)
            f_half = counted(t + h_try / 2, half)
            double = implicit_step(t + h_try / 2, half, f_half, h_try / 2, jac)
        except (ConvergenceError, ModelValidityError, np.linalg.LinAlgError):
            stats['rejected'] += 1
            h = h_try / 4
            continue
        err = np.max(np.abs(double - full) / 3.0 / (atol + rtol * np.abs(double)))
        if err > 1.0:
            stats['rejected'] += 1
            h = h_try * max(0.2, 0.9 * err ** (-1.0 / 3.0))
            continue
        landing = landing and h_try == next_stop - t
        t_new = next_stop if landing else t + h_try
        y_new = double + (double - full) / 3.0
        stats['steps'] += 1
        if event:
            g_new = event(t_new, y_new)
            if g_prev > 0 >= g_new:
                s = g_prev / (g_prev - g_new)
                return finish(1, 'a termination event occurred', t + s * (t_new - t), y + s * (y_new - y))
            g_prev = g_new
        t, y = t_new, y_new
        f = counted(t, y)
        growth = min(2.0, 0.9 * err ** (-1.0 / 3.0)) if err > 0 else 2.0
        h = h if landing and h > h_try else h_try * growth
        if landing and targets:
            targets.pop(0)
            out_t.append(t)
            out_y.append(y.copy())
    return finish(0, 'the solver reached the end of the interval')


def integrate(phs, scenario, initial_state=None, options=None):
    """Integrate the reduced network from ``initial_state`` over [0, t_end].

    Each interval between load breakpoints is a separate solver call so the
    kinks of the piecewise-linear loads never sit inside a step. A demand
    pressure reaching zero, or a solver breakdown, stops the run; the
    trajectory is then returned up to that point with ``failure`` naming the
    node and time.
    """
    opts = options or scenario.options
    if initial_state is None:
        initial_state = prepare_model(scenario).initial_state
    n_d = len(phs.demand_index)
    scale = _scale(phs)
    x0 = np.asarray(initial_state, dtype=float)
    phs.check_pressures(x0, time=0.0)
    h_scale = float(analysis.hamiltonian(phs, x0)) or 1.0
    m_scale = phs.linepack(phs.pressures(x0))
    fun = _augmented_rhs(phs, scenario.loads, opts.variant, scale, h_scale, m_scale)

    samples = _sample_times(scenario.t_end, opts.sample_dt)
    edges = [0.0] + scenario.breakpoints() + [scenario.t_end]
    y = np.concatenate([x0 / scale, np.zeros(len(LEDGER_NAMES))])
    times, values = [], []
    stats = {'method': opts.method, 'nfev': 0, 'segments': 0}
    failure = None

    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        last = k == len(edges) - 2
        keep = (samples >= a) & ((samples < b) | (last & (samples <= b)))
        t_eval = np.unique(np.concatenate([samples[keep], [b]]))
        event = _pressure_event(n_d)
        if opts.method == RK45:
            sol = solve_ivp(fun, (a, b), y, method='RK45', t_eval=t_eval, rtol=opts.rtol, atol=opts.atol,
                            max_step=opts.max_step, events=event)
            stats['nfev'] += int(sol.nfev)
            seg_t, seg_y = sol.t, sol.y.T
            status, message = sol.status, sol.message
            t_event = float(sol.t_events[0][0]) if status == 1 else None
            y_event = sol.y_events[0][0] if status == 1 else None
        else:
            sol = integrate_trapezoidal(fun, (a, b), y, t_eval, opts.rtol, opts.atol, opts.max_step, event=event)
            for key in ('nfev', 'njev', 'steps', 'rejected'):
                stats[key] = stats.get(key, 0) + sol.stats[key]
            seg_t, seg_y = sol.t, sol.y
            status, message, t_event, y_event = sol.status, sol.message, sol.t_event, sol.y_event
        if status == 1:
            node = _lowest_node(phs, y_event)
            failure = str(ModelValidityError('pressure reached zero', node=node, time=t_event))
        elif status < 0:
            failure = str(ConvergenceError(f"integration failed on [{a:g}, {b:g}] s: {message}"))
        stats['segments'] += 1
        y = seg_y[-1].copy() if len(seg_y) else y
        keep_out = seg_t < b if not last else np.ones(len(seg_t), dtype=bool)
        if failure:
            keep_out = np.ones(len(seg_t), dtype=bool)
        times.extend(seg_t[keep_out])
        values.extend(seg_y[keep_out])
        if failure:
            break

    if failure:
        logger.warning(f"Run stopped early: {failure}")
    return _trajectory(phs, scenario.loads, opts, np.array(times), np.array(values), scale, h_scale, m_scale,
                       stats, failure)


def _lowest_node(phs, y):
    return phs.demand_ids[int(np.argmin(y[:len(phs.demand_index)]))]


def _trajectory(phs, loads, opts, times, values, scale, h_scale, m_scale, stats, failure):
    n = phs.n_states
    if len(values) == 0:
        values = np.zeros((0, n + len(LEDGER_NAMES)))
    states = values[:, :n] * scale
    pressures = np.array([phs.pressures(x) for x in states]).reshape(len(states), phs.n_nodes)
    flows = states[:, len(phs.demand_index):]
    injections = np.array([_injections(phs, loads, t) for t in times]).reshape(len(times), len(phs.demand_index))
    supply_flows = np.array([phs.supply_flows(x) for x in states]).reshape(len(states), len(phs.supply_index))
    linepack = pressures @ phs.capacitance
    ledger = {name: values[:, n + i] * (m_scale if name == 'net_injection' else h_scale)
              for i, name in enumerate(LEDGER_NAMES)}

    max_velocity = np.zeros(len(states))
    violations = []
    if len(states):
        p_mean = _edge_means(phs, pressures)
        velocity = phs.standard_density * phs.speed_of_sound_sq * np.abs(flows) / (p_mean * phs.area)
        max_velocity = velocity.max(axis=1)
        for i, j in zip(*np.nonzero(velocity > opts.velocity_limit)):
            violations.append((float(times[i]), phs.edge_ids[j], float(velocity[i, j])))
        if violations:
            logger.warning(f"{len(violations)} samples exceed the {opts.velocity_limit:g} m/s slow-flow envelope")

    return Trajectory(
        times=times,
        node_ids=phs.node_ids,
        edge_ids=phs.edge_ids,
        supply_ids=tuple(phs.supply_ids),
        states=states,
        pressures=pressures,
        flows=flows,
        supply_flows=supply_flows,
        injections=injections,
        linepack=linepack,
        max_velocity=max_velocity,
        variant=opts.variant,
        ledger=ledger,
        stats=stats,
        velocity_violations=violations,
        failure=failure,
    )


def _edge_means(phs, pressures):
    return np.array([phs.edge_mean_pressure(p) for p in pressures]).reshape(len(pressures), phs.n_edges)


# -- three-node benchmark ------------------------------------------------------

@dataclass(frozen=True)
class ThreeNodeLoads:
    """Synthetic withdrawal profile of the benchmark (not taken from measured data).

    Both demand nodes start at zero, ramp up to their peak, drop to half and
    recover, inside a 24 h window. Peaks keep gas velocities far below 15 m/s.
    """
    peak_node2: float = 30.0
    peak_node3: float = 25.0
    t_end: float = 24 * 3600.0

    def profiles(self):
        hours = np.array([0.0, 1.0, 3.0, 8.0, 9.0, 14.0, 16.0, 24.0]) * 3600.0
        shape = np.array([0.0, 0.0, 1.0, 1.0, 0.5, 0.5, 1.0, 1.0])
        hours = hours * self.t_end / (24 * 3600.0)
        return {
            '2': LoadProfile(times=tuple(hours), values=tuple(self.peak_node2 * shape)),
            '3': LoadProfile(times=tuple(hours), values=tuple(self.peak_node3 * shape)),
        }


def three_node_topology(height_h1, length=BENCHMARK_LENGTH, diameter=0.6, roughness=0.012e-3, efficiency=0.98,
                        supply_pressure=BENCHMARK_SUPPLY_PRESSURE):
    """Triangle network: node 1 supplies at a fixed pressure from elevation h1, nodes 2 and 3 sit at 0 m."""
    nodes = [
        Node(id='1', elevation=float(height_h1), kind=SUPPLY, p_fixed=supply_pressure),
        Node(id='2', elevation=0.0),
        Node(id='3', elevation=0.0),
    ]
    pipes = [
        Pipe(id='12', source='1', target='2', length=length, diameter=diameter, roughness=roughness,
             efficiency=efficiency),
        Pipe(id='13', source='1', target='3', length=length, diameter=diameter, roughness=roughness,
             efficiency=efficiency),
        Pipe(id='23', source='2', target='3', length=length, diameter=diameter, roughness=roughness,
             efficiency=efficiency),
    ]
    return NetworkTopology(nodes, pipes)


def three_node_scenario(height_h1, load_spec=None, options=None):
    load_spec = load_spec or ThreeNodeLoads()
    return Scenario(
        topology=three_node_topology(height_h1),
        gas=GasProperties.natural_gas(),
        t_end=load_spec.t_end,
        loads=load_spec.profiles(),
        options=options or SolverOptions(),
        name=f"three-node h1={height_h1:g} m",
        defaults_used=('pipe lengths', 'load profile'),
    )


@dataclass
class BenchmarkCase:
    height: float
    scenario: Scenario
    trajectories: dict
    energy: dict
    stability: list
    metrics: dict


def compare_variants(reference, other, nominal_pressure):
    """Largest node-pressure and edge-flow deviation between two runs, in % of nominal."""
    if reference.failed or other.failed or reference.times.shape != other.times.shape:
        raise GasNetworkError('cannot compare runs that did not both finish on the same samples')
    dp = np.max(np.abs(other.pressures - reference.pressures))
    nominal_flow = float(np.max(np.abs(reference.flows))) or 1.0
    dq = np.max(np.abs(other.flows - reference.flows))
    return {
        'max_pressure_deviation_pct': float(100.0 * dp / nominal_pressure),
        'max_flow_deviation_pct': float(100.0 * dq / nominal_flow),
    }


def benchmark_three_node(height_h1, load_spec=None, options=None):
    """Run the lumped (live pM) and PHS (frozen pM) variants on the triangle network."""
    base = options or SolverOptions()
    scenario = three_node_scenario(height_h1, load_spec, base)
    model = prepare_model(scenario)
    trajectories, energy = {}, {}
    for variant in (LIVE_PM_VARIANT, PHS_VARIANT):
        opts = dataclasses.replace(base, variant=variant)
        trajectory = integrate(model.phs, scenario, model.initial_state, opts)
        if trajectory.failed:
            raise ModelValidityError(f"benchmark h1={height_h1:g} m ({variant}): {trajectory.failure}")
        trajectories[variant] = trajectory
        energy[variant] = analysis.energy_balance(trajectory, model.phs)

    params = edge_params(scenario.topology, model.gas_state, scenario.gas, scenario.gravity)
    pointwise = analysis.pointwise_eigen_check(model.phs, trajectories[LIVE_PM_VARIANT])
    stability = []
    for edge_id, pipe in params.items():
        report = analysis.check_stability_condition(pipe, edge_id=edge_id)
        report.pointwise_max_real = pointwise[edge_id]
        stability.append(report)

    metrics = {'h1_m': float(height_h1)}
    metrics.update(compare_variants(trajectories[LIVE_PM_VARIANT], trajectories[PHS_VARIANT],
                                    BENCHMARK_SUPPLY_PRESSURE))
    metrics['max_energy_residual'] = max(r.max_residual for r in energy.values())
    metrics['max_mass_residual'] = max(t.mass_residual() for t in trajectories.values())
    metrics['min_stability_margin_m'] = min(r.margin for r in stability)
    metrics['max_velocity_m_s'] = max(float(t.max_velocity.max()) for t in trajectories.values())
    logger.info(f"Benchmark h1={height_h1:g} m: dp={metrics['max_pressure_deviation_pct']:.4f}%, "
                f"dq={metrics['max_flow_deviation_pct']:.4f}%")
    return BenchmarkCase(height=float(height_h1), scenario=scenario, trajectories=trajectories, energy=energy,
                         stability=stability, metrics=metrics)

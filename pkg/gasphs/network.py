"""
Gas network graph, incidence matrix, node capacitances and the assembled
network port-Hamiltonian system with supply-node reduction.

Orientation: the incidence matrix B has +1 at the sink and -1 at the source
of every edge. Flow qnm on an edge is positive from source to sink, so the
node balance reads C_eq,i ṗ_i = qn_i + b_iᵀ qnm and the edges are driven by
-Bᵀ p (source minus sink pressure).
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import networkx as nx
import numpy as np
import scipy.sparse as sps

from gasphs.errors import ModelValidityError, TopologyError
from gasphs.friction import PipeGeometry, pipe_resistance
from gasphs.pipeline import LIVE_PM_VARIANT, PHS_VARIANT, STANDARD_GRAVITY, PipeParams, mean_pressure

logger = logging.getLogger(__name__)

DEMAND = 'demand'
SUPPLY = 'supply'

# below this many states plain numpy arrays beat scipy.sparse
DENSE_STATE_LIMIT = 50


@dataclass(frozen=True)
class Node:
    id: str
    elevation: float = 0.0
    kind: str = DEMAND
    p_fixed: Optional[float] = None
    p_initial: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (DEMAND, SUPPLY):
            raise TopologyError(f"node {self.id!r}: kind must be {DEMAND!r} or {SUPPLY!r}, got {self.kind!r}")
        if self.kind == SUPPLY and not (self.p_fixed is not None and self.p_fixed > 0):
            raise TopologyError(f"supply node {self.id!r} needs a positive fixed pressure")


@dataclass(frozen=True)
class Pipe:
    id: str
    source: str
    target: str
    length: float
    diameter: float
    roughness: float = 0.012e-3
    efficiency: float = 0.98
    segments: int = 1

    def __post_init__(self):
        if self.source == self.target:
            raise TopologyError(f"pipe {self.id!r} is a self-loop on node {self.source!r}")
        if int(self.segments) != self.segments or self.segments < 1:
            raise TopologyError(f"pipe {self.id!r}: segments must be a positive integer, got {self.segments!r}")


@dataclass(frozen=True)
class Edge:
    """One modelled pipe section with its derived inclination."""
    id: str
    source: str
    target: str
    geometry: PipeGeometry
    pipe_id: str


class NetworkTopology:
    """Nodes and pipes of a network, validated and expanded into modelled edges."""

    def __init__(self, nodes, pipes):
        self.pipes = list(pipes)
        declared = list(nodes)
        ids = [n.id for n in declared]
        duplicates = {i for i in ids if ids.count(i) > 1}
        if duplicates:
            raise TopologyError(f"duplicate node ids: {sorted(duplicates)}")
        pipe_ids = [p.id for p in self.pipes]
        duplicates = {i for i in pipe_ids if pipe_ids.count(i) > 1}
        if duplicates:
            raise TopologyError(f"duplicate pipe ids: {sorted(duplicates)}")
        by_id = {n.id: n for n in declared}
        for pipe in self.pipes:
            for end in (pipe.source, pipe.target):
                if end not in by_id:
                    raise TopologyError(f"pipe {pipe.id!r} references unknown node {end!r}")

        self.nodes = list(declared)
        self.edges = []
        for pipe in self.pipes:
            self._expand(pipe, by_id)
        self.graph = self._build_graph()
        self._validate()

    def _expand(self, pipe, by_id):
        n = int(pipe.segments)
        h0 = by_id[pipe.source].elevation
        h1 = by_id[pipe.target].elevation
        chain = [pipe.source]
        for k in range(1, n):
            node = Node(id=f"{pipe.id}.{k}", elevation=h0 + (h1 - h0) * k / n)
            self.nodes.append(node)
            by_id[node.id] = node
            chain.append(node.id)
        chain.append(pipe.target)
        seg_length = pipe.length / n
        for k in range(n):
            a, b = chain[k], chain[k + 1]
            rise = by_id[b].elevation - by_id[a].elevation
            if abs(rise) > seg_length:
                raise TopologyError(f"pipe {pipe.id!r}: elevation change {rise} m exceeds its length")
            geometry = PipeGeometry(
                length=seg_length,
                diameter=pipe.diameter,
                roughness=pipe.roughness,
                efficiency=pipe.efficiency,
                inclination_sin=rise / seg_length,
            )
            edge_id = pipe.id if n == 1 else f"{pipe.id}.{k + 1}"
            self.edges.append(Edge(id=edge_id, source=a, target=b, geometry=geometry, pipe_id=pipe.id))

    def _build_graph(self):
        graph = nx.MultiDiGraph()
        for node in self.nodes:
            graph.add_node(node.id, elevation=node.elevation, kind=node.kind)
        for edge in self.edges:
            graph.add_edge(edge.source, edge.target, key=edge.id, geometry=edge.geometry)
        return graph

    def _validate(self):
        if not self.edges:
            raise TopologyError('network has no pipes')
        isolated = [n for n in self.graph.nodes if self.graph.degree(n) == 0]
        if isolated:
            raise TopologyError(f"isolated nodes: {isolated}")
        if not nx.is_weakly_connected(self.graph):
            parts = [sorted(c) for c in nx.weakly_connected_components(self.graph)]
            raise TopologyError(f"network is disconnected: {parts}")

    @property
    def node_ids(self):
        return [n.id for n in self.nodes]

    @property
    def edge_ids(self):
        return [e.id for e in self.edges]

    def node(self, node_id):
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise TopologyError(f"unknown node {node_id!r}")

    @property
    def supply_nodes(self):
        return [n for n in self.nodes if n.kind == SUPPLY]


@dataclass(frozen=True, eq=False)
class IncidenceMatrix:
    B: sps.csc_matrix
    node_ids: tuple
    edge_ids: tuple

    def toarray(self):
        return self.B.toarray()


def incidence_matrix(topology):
    """Oriented incidence matrix, +1 at the sink and -1 at the source."""
    edgelist = [(e.source, e.target, e.id) for e in topology.edges]
    for u, v, key in edgelist:
        if u not in topology.graph or v not in topology.graph:
            raise TopologyError(f"edge {key!r} has a dangling endpoint")
    b = nx.incidence_matrix(topology.graph, nodelist=topology.node_ids, edgelist=edgelist, oriented=True)
    return IncidenceMatrix(B=sps.csc_matrix(b, dtype=float), node_ids=tuple(topology.node_ids),
                           edge_ids=tuple(topology.edge_ids))


def node_capacitance(topology, node_id, gas_state):
    """C_eq,i = Σ over incident edges of L A / (2 ρn c²)."""
    incident = [e for e in topology.edges if node_id in (e.source, e.target)]
    if not incident:
        raise TopologyError(f"node {node_id!r} has no incident pipe")
    scale = 2.0 * gas_state.standard_density * gas_state.speed_of_sound_sq
    return sum(e.geometry.length * e.geometry.cross_section / scale for e in incident)


@dataclass(frozen=True, eq=False)
class NetworkPhs:
    node_ids: tuple
    edge_ids: tuple
    B: np.ndarray = field(repr=False)
    capacitance: np.ndarray = field(repr=False)
    length: np.ndarray = field(repr=False)
    diameter: np.ndarray = field(repr=False)
    roughness: np.ndarray = field(repr=False)
    efficiency: np.ndarray = field(repr=False)
    height_change: np.ndarray = field(repr=False)
    p_mean_frozen: np.ndarray = field(repr=False)
    supply_pressure: np.ndarray = field(repr=False)
    standard_density: float = 0.0
    speed_of_sound_sq: float = 0.0
    viscosity: float = 0.0
    gravity: float = STANDARD_GRAVITY

    # -- index bookkeeping -------------------------------------------------

    @cached_property
    def supply_mask(self):
        return ~np.isnan(self.supply_pressure)

    @cached_property
    def demand_index(self):
        return np.flatnonzero(~self.supply_mask)

    @cached_property
    def supply_index(self):
        return np.flatnonzero(self.supply_mask)

    @property
    def demand_ids(self):
        return [self.node_ids[i] for i in self.demand_index]

    @property
    def supply_ids(self):
        return [self.node_ids[i] for i in self.supply_index]

    @property
    def n_nodes(self):
        return len(self.node_ids)

    @property
    def n_edges(self):
        return len(self.edge_ids)

    @property
    def n_states(self):
        return len(self.demand_index) + self.n_edges

    @property
    def dense(self):
        return self.n_states < DENSE_STATE_LIMIT

    @cached_property
    def source_index(self):
        b = sps.csc_matrix(self.B)
        return np.array([b[:, j].toarray().ravel().argmin() for j in range(self.n_edges)])

    @cached_property
    def target_index(self):
        b = sps.csc_matrix(self.B)
        return np.array([b[:, j].toarray().ravel().argmax() for j in range(self.n_edges)])

    def _matrix(self, m):
        return m.toarray() if self.dense else sps.csr_matrix(m)

    @cached_property
    def B_demand(self):
        return self._matrix(sps.csr_matrix(self.B)[self.demand_index, :])

    @cached_property
    def B_supply(self):
        return self._matrix(sps.csr_matrix(self.B)[self.supply_index, :])

    # -- structure matrices --------------------------------------------------

    @cached_property
    def area(self):
        return np.pi * self.diameter**2 / 4

    @cached_property
    def inertia(self):
        """ρn L / A per edge."""
        return self.standard_density * self.length / self.area

    @cached_property
    def q_diagonal(self):
        return np.concatenate([1.0 / self.capacitance[self.demand_index], 1.0 / self.inertia])

    @cached_property
    def Q(self):
        return self._matrix(sps.diags(self.q_diagonal))

    @cached_property
    def J(self):
        n_d = len(self.demand_index)
        b = sps.csr_matrix(self.B)[self.demand_index, :]
        j = sps.bmat([[sps.csr_matrix((n_d, n_d)), b], [-b.T, sps.csr_matrix((self.n_edges, self.n_edges))]])
        return self._matrix(j)

    @cached_property
    def G(self):
        n_d = len(self.demand_index)
        return self._matrix(sps.vstack([sps.identity(n_d), sps.csr_matrix((self.n_edges, n_d))]))

    @cached_property
    def E(self):
        n_d = len(self.demand_index)
        return self._matrix(sps.vstack([sps.csr_matrix((n_d, self.n_edges)), -sps.identity(self.n_edges)]))

    @cached_property
    def gravity_factor(self):
        """φ_ij = g L sinθ / c² per edge."""
        return self.gravity * self.height_change / self.speed_of_sound_sq

    @cached_property
    def d_frozen(self):
        return self.gravity_factor * self.p_mean_frozen

    # -- state maps ----------------------------------------------------------

    def split(self, state):
        state = np.asarray(state, dtype=float)
        n_d = len(self.demand_index)
        return state[:n_d], state[n_d:]

    def pressures(self, state):
        """All node pressures, supply nodes filled with their fixed values."""
        p_dem, _ = self.split(state)
        p = self.supply_pressure.copy()
        p[self.demand_index] = p_dem
        return p

    def check_pressures(self, state, time=None):
        p_dem, _ = self.split(state)
        bad = np.flatnonzero(~(p_dem > 0))
        if bad.size:
            node = self.node_ids[self.demand_index[bad[0]]]
            raise ModelValidityError(f"non-positive pressure {p_dem[bad[0]]:.6g} Pa", node=node, time=time)

    def edge_mean_pressure(self, p):
        return mean_pressure(p[self.source_index], p[self.target_index])

    def resistance(self, qnm, p_mean):
        """Diagonal edge entries of R(x)."""
        return pipe_resistance(qnm, p_mean, self.length, self.diameter, self.roughness, self.efficiency,
                               self.standard_density, self.speed_of_sound_sq, self.viscosity)

    def R(self, state):
        self.check_pressures(state)
        p = self.pressures(state)
        _, q = self.split(state)
        r = self.resistance(q, self.edge_mean_pressure(p))
        return self._matrix(sps.diags(np.concatenate([np.zeros(len(self.demand_index)), r])))

    def disturbance(self, p, variant=PHS_VARIANT):
        if variant == PHS_VARIANT:
            return self.d_frozen
        if variant == LIVE_PM_VARIANT:
            return self.gravity_factor * self.edge_mean_pressure(p)
        raise ValueError(f"unknown model variant {variant!r}")

    def energy_variables(self, state):
        return np.asarray(state, dtype=float) / self.q_diagonal

    def supply_flows(self, state):
        """Injection at each supply node recovered from its balance, -b_sᵀ qnm."""
        _, q = self.split(state)
        return -(self.B_supply @ q)

    def linepack(self, p):
        """Σ C_eq,i p_i over all nodes, the stored gas as standard volume [m³]."""
        return float(self.capacitance @ p)

    def power_terms(self, state, injections, variant=PHS_VARIANT):
        """(dissipation ∂HᵀR∂H, port power yᵀu, disturbance power z·d) at one state.

        Supply nodes contribute p_s times their recovered injection to the
        port power.
        """
        p = self.pressures(state)
        _, q = self.split(state)
        r = self.resistance(q, self.edge_mean_pressure(p))
        dissipation = float(np.sum(r * q * q))
        port = float(p[self.demand_index] @ np.asarray(injections, dtype=float)
                     + p[self.supply_index] @ self.supply_flows(state))
        disturbance = float(-(q @ self.disturbance(p, variant)))
        return dissipation, port, disturbance

    def with_frozen_mean_pressure(self, p_mean_frozen):
        p_mean_frozen = np.asarray(p_mean_frozen, dtype=float)
        if np.any(p_mean_frozen <= 0):
            raise ModelValidityError('frozen mean pressures must be positive')
        return dataclasses.replace(self, p_mean_frozen=p_mean_frozen)


def edge_params(topology, gas_state, gas, gravity=STANDARD_GRAVITY):
    """PipeParams for every modelled edge, keyed by edge id."""
    return {e.id: PipeParams(geometry=e.geometry, gas_state=gas_state, gas=gas, gravity=gravity)
            for e in topology.edges}


def assemble_network_phs(topology, gas_state, gas, p_mean_frozen, gravity=STANDARD_GRAVITY):
    """Build the |V| + |E| state network PHS; no node is fixed yet."""
    p_mean_frozen = np.broadcast_to(np.asarray(p_mean_frozen, dtype=float), (len(topology.edges),)).copy()
    if np.any(p_mean_frozen <= 0):
        raise ModelValidityError('frozen mean pressures must be positive')
    inc = incidence_matrix(topology)
    cap = np.array([node_capacitance(topology, n, gas_state) for n in topology.node_ids])
    geoms = [e.geometry for e in topology.edges]
    phs = NetworkPhs(
        node_ids=inc.node_ids,
        edge_ids=inc.edge_ids,
        B=inc.B,
        capacitance=cap,
        length=np.array([g.length for g in geoms]),
        diameter=np.array([g.diameter for g in geoms]),
        roughness=np.array([g.roughness for g in geoms]),
        efficiency=np.array([g.efficiency for g in geoms]),
        height_change=np.array([g.height_change for g in geoms]),
        p_mean_frozen=p_mean_frozen,
        supply_pressure=np.full(len(inc.node_ids), np.nan),
        standard_density=gas_state.standard_density,
        speed_of_sound_sq=gas_state.speed_of_sound_sq,
        viscosity=gas.dynamic_viscosity,
        gravity=gravity,
    )
    logger.debug(f"Assembled network PHS with {phs.n_nodes} nodes and {phs.n_edges} edges")
    return phs


def apply_supply_node(phs, node_id, p_fixed):
    """Fix the pressure of one node: its state and injection input are removed
    and p_fixed acts on the edge dynamics instead."""
    if node_id not in phs.node_ids:
        raise TopologyError(f"unknown node {node_id!r}")
    if not p_fixed > 0:
        raise ModelValidityError(f"supply pressure must be positive, got {p_fixed}", node=node_id)
    supply = phs.supply_pressure.copy()
    supply[phs.node_ids.index(node_id)] = p_fixed
    if not np.isnan(supply).any():
        raise TopologyError('cannot fix the pressure of every node; no dynamics would remain')
    return dataclasses.replace(phs, supply_pressure=supply)


def network_rhs(phs, state, injections, variant=PHS_VARIANT, time=None):
    """Co-state derivative (ṗ_demand, q̇nm) for demand-node injections qn_i."""
    phs.check_pressures(state, time=time)
    co = np.asarray(state, dtype=float)
    p = phs.pressures(co)
    _, q = phs.split(co)
    p_mean = phs.edge_mean_pressure(p)
    r = phs.resistance(q, p_mean)
    n_d = len(phs.demand_index)
    x_dot = phs.J @ co
    x_dot[n_d:] -= r * q
    x_dot[:n_d] += np.asarray(injections, dtype=float)
    x_dot[n_d:] -= phs.B_supply.T @ p[phs.supply_index]
    x_dot[n_d:] -= phs.disturbance(p, variant)
    return phs.q_diagonal * x_dot

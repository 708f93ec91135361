"""
Scenario documents and run manifests.

A scenario is one JSON document. Every dimensional field carries its unit as
a suffix (``length_km``, ``p_fixed_bar``, ``T_c`` ...) and is converted to SI
on load. A run manifest embeds the fully resolved SI scenario, so feeding a
manifest back to ``parse_scenario`` reproduces the run exactly.
"""
import dataclasses
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gasphs import __version__
from gasphs.errors import GasNetworkError, ScenarioError
from gasphs.gas import BAR, CELSIUS_OFFSET, KILOMETRE, GasProperties
from gasphs.network import DEMAND, SUPPLY, NetworkTopology, Node, Pipe
from gasphs.sim import LoadProfile, Scenario, SolverOptions

logger = logging.getLogger(__name__)

HOUR = 3600.0

# unit suffix -> (factor, offset) per physical quantity; '' means the bare key is SI
PRESSURE = {'bar': (BAR, 0.0), 'pa': (1.0, 0.0)}
LENGTH = {'km': (KILOMETRE, 0.0), 'm': (1.0, 0.0)}
SHORT_LENGTH = {'m': (1.0, 0.0), 'mm': (1e-3, 0.0)}
TEMPERATURE = {'k': (1.0, 0.0), 'c': (1.0, CELSIUS_OFFSET)}
DURATION = {'s': (1.0, 0.0), 'min': (60.0, 0.0), 'h': (HOUR, 0.0)}
FLOW = {'m3_s': (1.0, 0.0), 'm3_h': (1.0 / HOUR, 0.0)}
PLAIN = {'': (1.0, 0.0)}
ACCELERATION = {'m_s2': (1.0, 0.0)}
SPEED = {'m_s': (1.0, 0.0)}

GAS_FIELDS = {
    'R': PLAIN, 'mu': PLAIN, 'pc': PRESSURE, 'Tc': TEMPERATURE,
    'pn': PRESSURE, 'Tn': TEMPERATURE, 'T': TEMPERATURE,
}
GAS_NAMES = {
    'R': 'specific_gas_constant', 'mu': 'dynamic_viscosity', 'pc': 'critical_pressure',
    'Tc': 'critical_temperature', 'pn': 'standard_pressure', 'Tn': 'standard_temperature',
    'T': 'operating_temperature',
}
NODE_FIELDS = {'elevation': LENGTH, 'p_fixed': PRESSURE, 'p_initial': PRESSURE}
PIPE_FIELDS = {
    'length': LENGTH, 'diameter': SHORT_LENGTH, 'roughness': SHORT_LENGTH, 'efficiency': PLAIN,
    'segments': PLAIN, 'height_change': LENGTH, 'inclination_sin': PLAIN,
}
SIM_FIELDS = {
    't_end': DURATION, 'rtol': PLAIN, 'atol': PLAIN, 'sample_dt': DURATION, 'max_step': DURATION,
    'z_ref_pressure': PRESSURE, 'gravity': ACCELERATION, 'velocity_limit': SPEED,
}
SIM_PLAIN = ('method', 'model_variant', 'ideal_gas')
PROFILE_FIELDS = {'times': DURATION, 'values': FLOW}


@dataclass
class ScenarioFile:
    """Raw scenario text plus the helpers that anchor diagnostics to its lines."""
    path: str
    text: str
    document: dict = field(default_factory=dict)

    @property
    def digest(self):
        return hashlib.sha256(self.text.encode('utf-8')).hexdigest()

    def line_of(self, *needles):
        """1-based line of the first needle, then of each following needle after it."""
        lines = self.text.splitlines()
        start = 0
        found = None
        for needle in needles:
            pattern = re.compile(re.escape(needle))
            for i in range(start, len(lines)):
                if pattern.search(lines[i]):
                    found = i + 1
                    start = i
                    break
            else:
                return found
        return found

    def error(self, message, where, *needles):
        line = self.line_of(*needles) if needles else None
        return ScenarioError(f"{where}: {message}", path=self.path, line=line)


def _reject_duplicates(pairs):
    keys = [k for k, _ in pairs]
    dupes = sorted({k for k in keys if keys.count(k) > 1})
    if dupes:
        raise ScenarioError(f"duplicate keys {dupes}")
    return dict(pairs)


def read_scenario_file(path):
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e}", path=str(path)) from e
    source = ScenarioFile(path=str(path), text=text)
    try:
        source.document = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"malformed JSON: {e.msg}", path=str(path), line=e.lineno) from e
    except ScenarioError as e:
        raise ScenarioError(str(e), path=str(path)) from e
    if not isinstance(source.document, dict):
        raise ScenarioError('top level must be an object', path=str(path), line=1)
    return source


def _quantity(source, section, path, name, units, anchor=(), required=True, default=None, defaults_used=None):
    """Read ``name`` with exactly one unit suffix from ``section`` and convert to SI."""
    present = []
    for suffix, conversion in units.items():
        key = f"{name}_{suffix}" if suffix else name
        if key in section:
            present.append((key, conversion))
    if len(present) > 1:
        keys = [k for k, _ in present]
        raise source.error(f"{name} given in several units: {keys}", path, *anchor, f'"{keys[1]}"')
    if not present:
        if name in section and '' not in units:
            raise source.error(f"{name} needs a unit suffix, one of {sorted(units)}", path, *anchor, f'"{name}"')
        if required:
            raise source.error(f"missing {name} (units: {sorted(u for u in units if u) or 'SI'})", path, *anchor)
        if defaults_used is not None and default is not None:
            defaults_used.append(f"{path}.{name}")
        return default
    key, (factor, offset) = present[0]
    value = section[key]
    try:
        if isinstance(value, list):
            return [float(v) * factor + offset for v in value]
        if isinstance(value, bool):
            raise TypeError(value)
        return float(value) * factor + offset
    except (TypeError, ValueError):
        raise source.error(f"{key} must be numeric, got {value!r}", path, *anchor, f'"{key}"') from None


def _check_keys(source, section, path, allowed_quantities, allowed_plain, anchor=()):
    if not isinstance(section, dict):
        raise source.error(f"{path} must be an object", path, *anchor)
    for key in section:
        if key in allowed_plain:
            continue
        if not any(key == (f"{name}_{s}" if s else name)
                   for name, units in allowed_quantities.items() for s in units):
            if key in allowed_quantities:
                raise source.error(f"{key} needs a unit suffix", path, *anchor, f'"{key}"')
            raise source.error(f"unknown field {key!r}", path, *anchor, f'"{key}"')


def _parse_gas(source):
    section = source.document.get('gas')
    if section is None:
        raise source.error('missing gas section', 'gas')
    _check_keys(source, section, 'gas', GAS_FIELDS, (), anchor=('"gas"',))
    values = {GAS_NAMES[name]: _quantity(source, section, 'gas', name, units, anchor=('"gas"',))
              for name, units in GAS_FIELDS.items()}
    try:
        return GasProperties(**values)
    except GasNetworkError as e:
        raise source.error(str(e), 'gas', '"gas"') from e


def _parse_profile(source, spec, path, anchor):
    _check_keys(source, spec, path, PROFILE_FIELDS, (), anchor=anchor)
    times = _quantity(source, spec, path, 'times', PROFILE_FIELDS['times'], anchor=anchor)
    values = _quantity(source, spec, path, 'values', PROFILE_FIELDS['values'], anchor=anchor)
    if not isinstance(times, list) or not isinstance(values, list):
        raise source.error('load profile times and values must be lists', path, *anchor)
    try:
        return LoadProfile(times=tuple(times), values=tuple(values))
    except ScenarioError as e:
        raise source.error(str(e), path, *anchor) from e


def _parse_nodes(source):
    entries = source.document.get('nodes')
    if not isinstance(entries, list) or not entries:
        raise source.error('nodes must be a non-empty list', 'nodes', '"nodes"')
    nodes, loads = [], {}
    for i, entry in enumerate(entries):
        path = f"nodes[{i}]"
        node_id = str(entry.get('id', '')) if isinstance(entry, dict) else ''
        anchor = ('"nodes"', f'"{node_id}"') if node_id else ('"nodes"',)
        if not node_id:
            raise source.error('node without id', path, *anchor)
        _check_keys(source, entry, path, NODE_FIELDS, ('id', 'kind', 'load_profile'), anchor=anchor)
        kind = entry.get('kind', DEMAND)
        elevation = _quantity(source, entry, path, 'elevation', LENGTH, anchor=anchor, required=False, default=0.0)
        p_fixed = _quantity(source, entry, path, 'p_fixed', PRESSURE, anchor=anchor, required=kind == SUPPLY)
        p_initial = _quantity(source, entry, path, 'p_initial', PRESSURE, anchor=anchor, required=False)
        try:
            nodes.append(Node(id=node_id, elevation=elevation, kind=kind, p_fixed=p_fixed, p_initial=p_initial))
        except GasNetworkError as e:
            raise source.error(str(e), path, *anchor) from e
        if 'load_profile' in entry:
            if kind != DEMAND:
                raise source.error(f"supply node {node_id!r} cannot carry a load profile", path, *anchor)
            loads[node_id] = _parse_profile(source, entry['load_profile'], f"{path}.load_profile",
                                            anchor + ('"load_profile"',))
    return nodes, loads


def _parse_pipes(source, nodes, defaults_used):
    entries = source.document.get('pipes')
    if not isinstance(entries, list) or not entries:
        raise source.error('pipes must be a non-empty list', 'pipes', '"pipes"')
    elevation = {n.id: n.elevation for n in nodes}
    pipes = []
    for i, entry in enumerate(entries):
        path = f"pipes[{i}]"
        pipe_id = str(entry.get('id', '')) if isinstance(entry, dict) else ''
        anchor = ('"pipes"', f'"{pipe_id}"') if pipe_id else ('"pipes"',)
        if not pipe_id:
            raise source.error('pipe without id', path, *anchor)
        _check_keys(source, entry, path, PIPE_FIELDS, ('id', 'from', 'to'), anchor=anchor)
        if 'from' not in entry or 'to' not in entry:
            raise source.error(f"pipe {pipe_id!r} needs 'from' and 'to'", path, *anchor)
        source_id, target_id = str(entry['from']), str(entry['to'])
        if source_id == target_id:
            raise source.error(f"pipe {pipe_id!r} is a self-loop on node {source_id!r}", path, *anchor)
        for end in (source_id, target_id):
            if end not in elevation:
                raise source.error(f"pipe {pipe_id!r} references unknown node {end!r}", path, *anchor)
        q = dict(source=source, section=entry, path=path, anchor=anchor)
        length = _quantity(name='length', units=LENGTH, **q)
        diameter = _quantity(name='diameter', units=SHORT_LENGTH, **q)
        if not (length > 0 and diameter > 0):
            raise source.error(f"pipe {pipe_id!r} needs positive length and diameter", path, *anchor)
        roughness = _quantity(name='roughness', units=SHORT_LENGTH, required=False, default=0.012e-3,
                              defaults_used=defaults_used, **q)
        efficiency = _quantity(name='efficiency', units=PLAIN, required=False, default=0.98,
                               defaults_used=defaults_used, **q)
        segments = _quantity(name='segments', units=PLAIN, required=False, default=1, **q)
        segments = int(segments) if float(segments).is_integer() else segments
        rise = elevation[target_id] - elevation[source_id]
        declared = _quantity(name='height_change', units=LENGTH, required=False, **q)
        sin_declared = _quantity(name='inclination_sin', units=PLAIN, required=False, **q)
        if sin_declared is not None:
            declared = sin_declared * length
        if declared is not None and not np.isclose(declared, rise, rtol=1e-9, atol=1e-6):
            raise source.error(f"pipe {pipe_id!r}: declared height change {declared:g} m does not match the "
                               f"node elevations ({rise:g} m)", path, *anchor)
        try:
            pipes.append(Pipe(id=pipe_id, source=source_id, target=target_id, length=length, diameter=diameter,
                              roughness=roughness, efficiency=efficiency, segments=segments))
        except GasNetworkError as e:
            raise source.error(str(e), path, *anchor) from e
    return pipes


def _parse_sim(source, defaults, defaults_used):
    section = source.document.get('sim', {})
    anchor = ('"sim"',)
    _check_keys(source, section, 'sim', SIM_FIELDS, SIM_PLAIN, anchor=anchor)
    q = dict(source=source, section=section, path='sim', anchor=anchor, required=False, defaults_used=defaults_used)
    t_end = _quantity(name='t_end', units=DURATION, **{**q, 'required': True})
    options = dict(
        rtol=_quantity(name='rtol', units=PLAIN, default=defaults.rtol, **q),
        atol=_quantity(name='atol', units=PLAIN, default=defaults.atol, **q),
        sample_dt=_quantity(name='sample_dt', units=DURATION, default=defaults.sample_dt, **q),
        max_step=_quantity(name='max_step', units=DURATION, default=defaults.max_step, **q),
        velocity_limit=_quantity(name='velocity_limit', units=SPEED, default=defaults.velocity_limit, **q),
        method=str(section.get('method', defaults.method)).lower(),
        variant=str(section.get('model_variant', defaults.variant)),
    )
    for name in ('method', 'model_variant'):
        if name not in section:
            defaults_used.append(f"sim.{name}")
    try:
        opts = dataclasses.replace(defaults, **options)
    except ScenarioError as e:
        raise source.error(str(e), 'sim', *anchor) from e
    extra = dict(
        t_end=t_end,
        reference_pressure=_quantity(name='z_ref_pressure', units=PRESSURE, **q),
        gravity=_quantity(name='gravity', units=ACCELERATION, default=None, **q),
        ideal_gas=bool(section.get('ideal_gas', False)),
    )
    return opts, extra


def parse_scenario(path, defaults=None):
    """Read and validate a scenario (or a run manifest) into a Scenario with SI units.

    ``defaults`` supplies solver settings the document leaves out.
    """
    source = read_scenario_file(path)
    if 'scenario' in source.document and 'version' in source.document:
        logger.info(f"Reading embedded scenario of run manifest {path}")
        source = ScenarioFile(path=source.path, text=source.text, document=source.document['scenario'])
    defaults = defaults or SolverOptions()
    defaults_used = []
    gas = _parse_gas(source)
    nodes, loads = _parse_nodes(source)
    pipes = _parse_pipes(source, nodes, defaults_used)
    options, extra = _parse_sim(source, defaults, defaults_used)
    try:
        topology = NetworkTopology(nodes, pipes)
    except GasNetworkError as e:
        raise source.error(str(e), 'pipes', '"pipes"') from e
    gravity = extra.pop('gravity')
    used = list(source.document.get('non_authoritative', [])) + defaults_used
    kwargs = dict(topology=topology, gas=gas, loads=loads, options=options,
                  name=str(source.document.get('name', Path(path).stem)),
                  defaults_used=tuple(dict.fromkeys(used)), **extra)
    if gravity is not None:
        kwargs['gravity'] = gravity
    try:
        scenario = Scenario(**kwargs)
    except GasNetworkError as e:
        raise source.error(str(e), 'sim', '"sim"') from e
    logger.info(f"Parsed scenario {scenario.name!r}: {len(topology.nodes)} nodes, {len(topology.edges)} edges")
    return scenario


def scenario_document(scenario):
    """The scenario in SI-suffixed form; parsing it back yields the same Scenario."""
    gas = scenario.gas
    opts = scenario.options
    nodes = []
    declared = {p.source for p in scenario.topology.pipes} | {p.target for p in scenario.topology.pipes}
    for node in scenario.topology.nodes:
        if node.id not in declared:
            continue
        entry = {'id': node.id, 'kind': node.kind, 'elevation_m': node.elevation}
        if node.p_fixed is not None:
            entry['p_fixed_pa'] = node.p_fixed
        if node.p_initial is not None:
            entry['p_initial_pa'] = node.p_initial
        if node.id in scenario.loads:
            profile = scenario.loads[node.id]
            entry['load_profile'] = {'times_s': list(profile.times), 'values_m3_s': list(profile.values)}
        nodes.append(entry)
    pipes = [{
        'id': p.id, 'from': p.source, 'to': p.target, 'length_m': p.length, 'diameter_m': p.diameter,
        'roughness_m': p.roughness, 'efficiency': p.efficiency, 'segments': p.segments,
    } for p in scenario.topology.pipes]
    sim = {
        't_end_s': scenario.t_end, 'rtol': opts.rtol, 'atol': opts.atol, 'method': opts.method,
        'sample_dt_s': opts.sample_dt, 'model_variant': opts.variant, 'gravity_m_s2': scenario.gravity,
        'velocity_limit_m_s': opts.velocity_limit, 'ideal_gas': scenario.ideal_gas,
        'z_ref_pressure_pa': scenario.z_reference,
    }
    if np.isfinite(opts.max_step):
        sim['max_step_s'] = opts.max_step
    return {
        'name': scenario.name,
        'gas': {
            'R': gas.specific_gas_constant, 'mu': gas.dynamic_viscosity,
            'pc_pa': gas.critical_pressure, 'Tc_k': gas.critical_temperature,
            'pn_pa': gas.standard_pressure, 'Tn_k': gas.standard_temperature, 'T_k': gas.operating_temperature,
        },
        'nodes': nodes,
        'pipes': pipes,
        'sim': sim,
        'non_authoritative': list(scenario.defaults_used),
    }


@dataclass
class RunManifest:
    command: str
    scenario: dict
    input_digest: str
    frozen: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    defaults_used: list = field(default_factory=list)
    version: str = __version__

    @classmethod
    def for_run(cls, command, scenario, model, digest):
        gs = model.gas_state
        frozen = {
            'compressibility': gs.compressibility,
            'speed_of_sound_sq_m2_s2': gs.speed_of_sound_sq,
            'standard_density_kg_m3': gs.standard_density,
            'reference_pressure_pa': gs.reference_pressure,
            'p_mean_frozen_pa': dict(zip(model.phs.edge_ids, map(float, model.phs.p_mean_frozen))),
        }
        return cls(command=command, scenario=scenario_document(scenario), input_digest=digest, frozen=frozen,
                   defaults_used=list(scenario.defaults_used))

    def to_dict(self):
        return dataclasses.asdict(self)

    def write(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, default=_json_default), encoding='utf-8')


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serialisable: {type(value).__name__}")

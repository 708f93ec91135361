import json
from pathlib import Path

import numpy as np
import pytest

from app import create_app
from config import TestConfig
from gasphs.friction import PipeGeometry
from gasphs.gas import BAR, GasProperties, freeze_gas_state
from gasphs.network import SUPPLY, NetworkTopology, Node, Pipe
from gasphs.pipeline import PipeParams, build_pipeline_phs
from gasphs.sim import Scenario, SolverOptions

SCENARIO_DIR = Path(__file__).resolve().parent.parent / 'scenarios'


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: end-to-end runs taking more than a few seconds')


@pytest.fixture(scope='module')
def test_app():
    app = create_app(config_class=TestConfig)
    with app.app_context():
        yield app

@pytest.fixture(scope='module')
def cli_runner(test_app):
    return test_app.test_cli_runner()

@pytest.fixture(scope='session')
def gas():
    return GasProperties.natural_gas()

@pytest.fixture(scope='session')
def gas_state(gas):
    return freeze_gas_state(gas, 50 * BAR)

@pytest.fixture(scope='function')
def level_pipe(gas, gas_state):
    geometry = PipeGeometry(length=100e3, diameter=0.6)
    return PipeParams(geometry=geometry, gas_state=gas_state, gas=gas)

@pytest.fixture(scope='function')
def inclined_pipe(gas, gas_state):
    geometry = PipeGeometry(length=80e3, diameter=0.6, inclination_sin=-1000.0 / 80e3)
    return PipeParams(geometry=geometry, gas_state=gas_state, gas=gas)

@pytest.fixture(scope='function')
def inclined_phs(inclined_pipe):
    return build_pipeline_phs(inclined_pipe, p_mean_frozen=49 * BAR)

@pytest.fixture(scope='function')
def rng():
    return np.random.default_rng(20240611)

@pytest.fixture(scope='session')
def three_node_file():
    return SCENARIO_DIR / 'three_node.scn'


def random_pipe_states(rng, n, p_low=20 * BAR, p_high=80 * BAR, q_max=120.0):
    """Admissible (pl, pr, qnm) samples covering laminar and turbulent flow."""
    pl = rng.uniform(p_low, p_high, n)
    pr = rng.uniform(p_low, p_high, n)
    q = rng.uniform(-q_max, q_max, n)
    q[: n // 10] = rng.uniform(-0.02, 0.02, n // 10)
    return np.column_stack([pl, pr, q])


def single_pipe_scenario(load, t_end, length=80e3, diameter=0.6, supply_pressure=50 * BAR, height=0.0,
                         options=None):
    """Supply node 'a' feeding demand node 'b' through one pipe; ``load`` is the withdrawal at 'b'."""
    topology = NetworkTopology(
        [Node(id='a', elevation=height, kind=SUPPLY, p_fixed=supply_pressure), Node(id='b')],
        [Pipe(id='ab', source='a', target='b', length=length, diameter=diameter)],
    )
    return Scenario(topology=topology, gas=GasProperties.natural_gas(), t_end=t_end, loads={'b': load},
                    options=options or SolverOptions())


def triangle_document(h1=0.0, t_end_h=2.0, loads=True, sample_dt_s=600):
    """Three-node scenario document in the file format, small enough for quick runs."""
    def node(node_id, peak):
        entry = {'id': node_id, 'kind': 'demand', 'elevation_m': 0}
        if loads:
            ramp_h, ramp = [0.0, 0.25, 1.0], [0.0, 0.0, peak]
            times = [t for t in ramp_h if t < t_end_h] + [t_end_h]
            values = [float(np.interp(t, ramp_h, ramp)) for t in times]
            entry['load_profile'] = {'times_h': times, 'values_m3_s': values}
        return entry

    def pipe(pipe_id, a, b):
        return {'id': pipe_id, 'from': a, 'to': b, 'length_km': 80, 'diameter_m': 0.6,
                'roughness_mm': 0.012, 'efficiency': 0.98}

    return {
        'name': 'triangle',
        'gas': {'R': 518.28, 'mu': 1e-5, 'pc_bar': 46.5, 'Tc_k': 190.55, 'pn_bar': 1.01325,
                'Tn_k': 273.15, 'T_k': 278.0},
        'nodes': [{'id': '1', 'kind': 'supply', 'elevation_m': h1, 'p_fixed_bar': 50},
                  node('2', 20), node('3', 15)],
        'pipes': [pipe('12', '1', '2'), pipe('13', '1', '3'), pipe('23', '2', '3')],
        'sim': {'t_end_h': t_end_h, 'sample_dt_s': sample_dt_s, 'rtol': 1e-8, 'atol': 1e-8},
    }


def write_document(directory, document, name='scenario.scn'):
    path = Path(directory) / name
    path.write_text(json.dumps(document, indent=2), encoding='utf-8')
    return path

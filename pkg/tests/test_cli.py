import json

import pandas as pd
import pytest

from gasphs.gas import BAR
from tests.conftest import triangle_document, write_document


def invoke(runner, *args):
    return runner.invoke(args=[str(a) for a in args])


def read_json(path):
    return json.loads(path.read_text(encoding='utf-8'))


def collapse_document():
    return {
        'name': 'collapse',
        'gas': triangle_document()['gas'],
        'nodes': [{'id': 'a', 'kind': 'supply', 'p_fixed_bar': 5},
                  {'id': 'b', 'load_profile': {'times_s': [0, 10, 60], 'values_m3_s': [0, 50, 50]}}],
        'pipes': [{'id': 'ab', 'from': 'a', 'to': 'b', 'length_km': 10, 'diameter_m': 0.1}],
        'sim': {'t_end_s': 60, 'sample_dt_s': 1},
    }


def test_check_stability_margins(cli_runner, three_node_file, tmp_path):
    result = invoke(cli_runner, 'check-stability', '--scenario', three_node_file, '--out', tmp_path)
    assert result.exit_code == 0, result.output
    assert '12: ok' in result.output

    reports = {r['edge']: r for r in read_json(tmp_path / 'stability.json')}
    manifest = read_json(tmp_path / 'manifest.json')
    c_sq = manifest['frozen']['speed_of_sound_sq_m2_s2']
    threshold = 6 * c_sq / 9.80665
    assert reports['12']['margin_m'] == pytest.approx(threshold - 1000.0, rel=1e-12)
    assert reports['13']['margin_m'] == pytest.approx(threshold - 1000.0, rel=1e-12)
    assert reports['23']['margin_m'] == pytest.approx(threshold, rel=1e-12)
    assert all(r['ok'] for r in reports.values())
    assert reports['23']['eip_note'].startswith('level pipe')
    assert manifest['command'] == 'check-stability'
    assert 'pipe lengths' in manifest['defaults_used']


def test_check_stability_with_pressure_range(cli_runner, three_node_file, tmp_path):
    result = invoke(cli_runner, 'check-stability', '--scenario', three_node_file, '--out', tmp_path,
                    '--pressure-range', 20, 80)
    assert result.exit_code == 0, result.output
    for report in read_json(tmp_path / 'stability.json'):
        assert report['worst_case_margin_m'] < report['margin_m']


def test_steady_state_of_an_idle_network(cli_runner, tmp_path):
    path = write_document(tmp_path, triangle_document(loads=False))
    result = invoke(cli_runner, 'steady', '--scenario', path, '--out', tmp_path / 'out')
    assert result.exit_code == 0, result.output
    assert 'p_2 = 50.000000 bar' in result.output
    payload = read_json(tmp_path / 'out' / 'steady.json')
    assert payload['pressures_bar'] == pytest.approx({'1': 50.0, '2': 50.0, '3': 50.0})
    assert payload['flows_m3_s'] == pytest.approx({'12': 0.0, '13': 0.0, '23': 0.0}, abs=1e-9)


def test_simulate_writes_results_and_reruns_bit_identically(cli_runner, tmp_path):
    path = write_document(tmp_path, triangle_document(h1=500.0, t_end_h=1.0))
    first, second, replay = tmp_path / 'first', tmp_path / 'second', tmp_path / 'replay'

    result = invoke(cli_runner, 'simulate', '--scenario', path, '--out', first, '--seed', 7)
    assert result.exit_code == 0, result.output
    header = (first / 'trajectory.csv').read_text(encoding='utf-8').splitlines()[0]
    assert header == 't,p_1,p_2,p_3,qnm_12,qnm_13,qnm_23,qn_supply_1'

    frame = pd.read_csv(first / 'trajectory.csv')
    assert list(frame['t']) == [0.0, 600.0, 1200.0, 1800.0, 2400.0, 3000.0, 3600.0]
    assert (frame['p_1'] == 50.0).all()

    energy = read_json(first / 'energy.json')
    assert energy['max_normalized_residual'] < 1e-6
    assert energy['mass_residual'] < 1e-10
    assert energy['dissipation_nonnegative']

    manifest = read_json(first / 'manifest.json')
    assert manifest['results']['seed'] == 7
    assert manifest['results']['failure'] is None
    assert manifest['scenario']['sim']['z_ref_pressure_pa'] == 50 * BAR
    assert len(manifest['input_digest']) == 64

    assert invoke(cli_runner, 'simulate', '--scenario', path, '--out', second, '--seed', 7).exit_code == 0
    assert (first / 'trajectory.csv').read_bytes() == (second / 'trajectory.csv').read_bytes()

    result = invoke(cli_runner, 'simulate', '--scenario', first / 'manifest.json', '--out', replay)
    assert result.exit_code == 0, result.output
    assert (first / 'trajectory.csv').read_bytes() == (replay / 'trajectory.csv').read_bytes()


def test_simulate_model_override_is_recorded(cli_runner, tmp_path):
    path = write_document(tmp_path, triangle_document(h1=500.0, t_end_h=0.5))
    result = invoke(cli_runner, 'simulate', '--scenario', path, '--out', tmp_path / 'out', '--model', 'live_pm',
                    '--sample-dt', 900)
    assert result.exit_code == 0, result.output
    manifest = read_json(tmp_path / 'out' / 'manifest.json')
    assert manifest['scenario']['sim']['model_variant'] == 'live_pm'
    assert manifest['scenario']['sim']['sample_dt_s'] == 900.0


def test_scenario_errors_exit_with_status_one(cli_runner, tmp_path):
    document = triangle_document()
    document['pipes'][2]['to'] = '2'
    path = write_document(tmp_path, document)
    result = invoke(cli_runner, 'simulate', '--scenario', path, '--out', tmp_path / 'out')
    assert result.exit_code == 1
    assert 'self-loop' in result.output


def test_pressure_collapse_exits_with_status_one(cli_runner, tmp_path):
    path = write_document(tmp_path, collapse_document())
    result = invoke(cli_runner, 'simulate', '--scenario', path, '--out', tmp_path / 'out')
    assert result.exit_code == 1
    assert "pressure reached zero (node 'b')" in result.output
    manifest = read_json(tmp_path / 'out' / 'manifest.json')
    assert "pressure reached zero (node 'b')" in manifest['results']['failure']
    frame = pd.read_csv(tmp_path / 'out' / 'trajectory.csv')
    assert list(frame['t'])[:5] == [0.0, 1.0, 2.0, 3.0, 4.0]
    assert (frame['p_b'] > 0).all()


def test_benchmark_on_two_elevations(cli_runner, tmp_path):
    result = invoke(cli_runner, 'benchmark', '--height', 0, '--height', 500, '--hours', 1,
                    '--sample-dt', 900, '--out', tmp_path)
    assert result.exit_code == 0, result.output
    table = pd.read_csv(tmp_path / 'benchmark.csv')
    assert list(table['h1_m']) == [0.0, 500.0]
    assert table.loc[0, 'max_pressure_deviation_pct'] == 0.0
    assert table.loc[1, 'max_pressure_deviation_pct'] > 0.0
    assert (table['max_energy_residual'] < 1e-6).all()
    assert (table['min_stability_margin_m'] > 0).all()

    details = read_json(tmp_path / 'benchmark.json')
    assert details['non_authoritative'] == ['pipe lengths', 'load profile']
    assert [case['h1_m'] for case in details['cases']] == [0.0, 500.0]
    assert set(details['cases'][1]['energy']) == {'phs', 'live_pm'}

import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pandas as pd
from flask import current_app

from gasphs import analysis, sim
from gasphs.errors import ModelValidityError
from gasphs.gas import BAR
from gasphs.network import edge_params
from gasphs.scenario import RunManifest, parse_scenario, read_scenario_file

CSV_FLOAT_FORMAT = '%.17g'


def solver_defaults(config):
    """SolverOptions built from the application config."""
    return sim.SolverOptions(
        method=config['GASPHS_METHOD'],
        rtol=config['GASPHS_RTOL'],
        atol=config['GASPHS_ATOL'],
        sample_dt=config['GASPHS_SAMPLE_DT'],
        steady_tol=config['GASPHS_STEADY_TOL'],
        steady_max_iter=config['GASPHS_STEADY_MAX_ITER'],
        velocity_limit=config['GASPHS_VELOCITY_LIMIT'],
    )


def apply_overrides(scenario, model=None, rtol=None, atol=None, sample_dt=None):
    """Command-line flags win over the scenario file."""
    changes = {k: v for k, v in dict(variant=model, rtol=rtol, atol=atol, sample_dt=sample_dt).items()
               if v is not None}
    if not changes:
        return scenario
    return dataclasses.replace(scenario, options=dataclasses.replace(scenario.options, **changes))


def load_scenario(scenario_path, overrides):
    scenario = parse_scenario(scenario_path, defaults=solver_defaults(current_app.config))
    return apply_overrides(scenario, **overrides), read_scenario_file(scenario_path).digest


def _output_dir(out_dir):
    path = Path(out_dir or current_app.config['GASPHS_OUTPUT_DIR'])
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, default=float), encoding='utf-8')


def _steady_payload(model):
    phs = model.phs
    state = model.initial_state
    p = phs.pressures(state)
    payload = {
        'pressures_bar': {n: float(v / BAR) for n, v in zip(phs.node_ids, p)},
        'flows_m3_s': dict(zip(phs.edge_ids, map(float, phs.split(state)[1]))),
        'supply_flows_m3_s': dict(zip(phs.supply_ids, map(float, phs.supply_flows(state)))),
    }
    if model.steady is not None:
        payload['iterations'] = model.steady.iterations
        payload['residual'] = model.steady.residual
    return payload


def run_simulation(app, scenario_path, out_dir=None, overrides=None, seed=None):
    with app.app_context():
        scenario, digest = load_scenario(scenario_path, overrides or {})
        current_app.logger.info(f"[Simulate] {scenario.name}: {scenario.options.variant} model, "
                                f"{scenario.options.method}, t_end = {scenario.t_end:g} s")
        model = sim.prepare_model(scenario)
        trajectory = sim.integrate(model.phs, scenario, model.initial_state)
        out = _output_dir(out_dir)

        trajectory.to_frame().to_csv(out / 'trajectory.csv', index=False, float_format=CSV_FLOAT_FORMAT)
        manifest = RunManifest.for_run('simulate', scenario, model, digest)
        manifest.results = {'seed': seed, 'solver': trajectory.stats, 'failure': trajectory.failure}

        if len(trajectory.times):
            energy = analysis.energy_balance(trajectory, model.phs)
            report = energy.to_dict()
            report['mass_residual'] = trajectory.mass_residual()
            report['max_velocity_m_s'] = float(trajectory.max_velocity.max())
            report['velocity_violations'] = len(trajectory.velocity_violations)
            report['pointwise_max_real_part'] = analysis.pointwise_eigen_check(model.phs, trajectory)
            _write_json(out / 'energy.json', report)
            manifest.results['max_energy_residual'] = energy.max_residual
            current_app.logger.info(f"[Simulate] Energy residual {energy.max_residual:.3e}, "
                                    f"mass residual {report['mass_residual']:.3e}")
        manifest.write(out / 'manifest.json')

        if trajectory.failed:
            current_app.logger.error(f"[Simulate] Run failed: {trajectory.failure}")
            raise ModelValidityError(trajectory.failure)
        current_app.logger.info(f"[Simulate] Wrote {len(trajectory.times)} samples to {out}")
        return trajectory


def run_steady(app, scenario_path, out_dir=None, overrides=None):
    with app.app_context():
        scenario, digest = load_scenario(scenario_path, overrides or {})
        current_app.logger.info(f"[Steady] Solving the equilibrium of {scenario.name}")
        model = sim.prepare_model(scenario)
        out = _output_dir(out_dir)
        payload = _steady_payload(model)
        _write_json(out / 'steady.json', payload)
        RunManifest.for_run('steady', scenario, model, digest).write(out / 'manifest.json')
        current_app.logger.info(f"[Steady] Converged in {payload.get('iterations', 0)} iterations")
        return payload


def run_stability(app, scenario_path, out_dir=None, pressure_range=None):
    with app.app_context():
        scenario, digest = load_scenario(scenario_path, {})
        model = sim.prepare_model(scenario)
        phs = model.phs
        p = phs.pressures(model.initial_state)
        flows = phs.split(model.initial_state)[1]
        params = edge_params(scenario.topology, model.gas_state, scenario.gas, scenario.gravity)
        reports = []
        for j, (edge_id, pipe) in enumerate(params.items()):
            state = (p[phs.source_index[j]], p[phs.target_index[j]], flows[j])
            report = analysis.check_stability_condition(pipe, state=state, pressure_range=pressure_range,
                                                        edge_id=edge_id)
            if not report.ok:
                current_app.logger.info(f"[Stability] Edge {edge_id} violates the height condition "
                                        f"by {-report.margin:.1f} m")
            reports.append(report.to_dict())
        out = _output_dir(out_dir)
        _write_json(out / 'stability.json', reports)
        RunManifest.for_run('check-stability', scenario, model, digest).write(out / 'manifest.json')
        passing = sum(r["ok"] for r in reports)
        current_app.logger.info(f"[Stability] {passing}/{len(reports)} edges satisfy the condition")
        return reports


def run_benchmark(app, out_dir=None, heights=sim.BENCHMARK_HEIGHTS, overrides=None, hours=24.0, workers=None):
    with app.app_context():
        base = solver_defaults(current_app.config)
        changes = {k: v for k, v in (overrides or {}).items() if v is not None}
        options = dataclasses.replace(base, **changes)
        loads = sim.ThreeNodeLoads(t_end=hours * 3600.0)
        workers = workers or current_app.config['GASPHS_BENCHMARK_WORKERS']
        logger = current_app.logger
        logger.info(f"[Benchmark] {len(heights)} elevation cases on {workers} worker(s)")

        def run_case(height):
            return sim.benchmark_three_node(height, loads, options)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            cases = list(pool.map(run_case, heights))

        table = pd.DataFrame([case.metrics for case in cases])
        out = _output_dir(out_dir)
        table.to_csv(out / 'benchmark.csv', index=False, float_format=CSV_FLOAT_FORMAT)
        _write_json(out / 'benchmark.json', {
            'non_authoritative': list(cases[0].scenario.defaults_used) if cases else [],
            'cases': [{'h1_m': c.height, 'metrics': c.metrics,
                       'energy': {v: r.to_dict() for v, r in c.energy.items()},
                       'stability': [r.to_dict() for r in c.stability]} for c in cases],
        })
        for case in cases:
            logger.info(f"[Benchmark] h1 = {case.height:g} m: "
                        f"pressure deviation {case.metrics['max_pressure_deviation_pct']:.4f}%")
        return table

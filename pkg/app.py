import functools
import logging

import click
from flask import Flask, current_app
from flask.cli import FlaskGroup

import tasks
from config import Config
from gasphs.errors import GasNetworkError
from gasphs.gas import BAR
from gasphs.pipeline import VARIANTS
from gasphs.sim import BENCHMARK_HEIGHTS


def solver_flags(command):
    """--out, --model, --rtol, --atol and --sample-dt shared by the run commands."""
    options = [
        click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None,
                     help='Output directory (default: GASPHS_OUTPUT_DIR).'),
        click.option('--model', type=click.Choice(VARIANTS), default=None,
                     help='phs: frozen gravity mean pressure; live_pm: state dependent.'),
        click.option('--rtol', type=float, default=None),
        click.option('--atol', type=float, default=None),
        click.option('--sample-dt', type=float, default=None, help='Output sampling interval [s].'),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def reports_errors(command):
    """Map library errors to a non-zero exit with the message on standard error."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except GasNetworkError as e:
            current_app.logger.error(f"{type(e).__name__}: {e}")
            raise click.ClickException(str(e)) from e
    return wrapper


def create_app(config_class=Config):
    app = Flask(__name__)
    app.config.from_object(config_class)
    app.logger.setLevel(app.config['GASPHS_LOG_LEVEL'])
    logging.getLogger('gasphs').setLevel(app.config['GASPHS_LOG_LEVEL'])

    @app.cli.command('simulate')
    @click.option('--scenario', 'scenario_path', type=click.Path(exists=True, dir_okay=False), required=True)
    @solver_flags
    @click.option('--seed', type=int, default=None, help='Recorded in the manifest of randomised test scenarios.')
    @reports_errors
    def simulate(scenario_path, out_dir, model, rtol, atol, sample_dt, seed):
        """Integrate a scenario and write trajectory.csv, energy.json and manifest.json."""
        overrides = dict(model=model, rtol=rtol, atol=atol, sample_dt=sample_dt)
        trajectory = tasks.run_simulation(app, scenario_path, out_dir, overrides, seed)
        click.echo(f"{len(trajectory.times)} samples, final time {trajectory.times[-1]:g} s")

    @app.cli.command('steady')
    @click.option('--scenario', 'scenario_path', type=click.Path(exists=True, dir_okay=False), required=True)
    @click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None)
    @click.option('--model', type=click.Choice(VARIANTS), default=None)
    @reports_errors
    def steady(scenario_path, out_dir, model):
        """Solve the equilibrium for the loads at t = 0 and write steady.json."""
        payload = tasks.run_steady(app, scenario_path, out_dir, dict(model=model))
        for node_id, p in payload['pressures_bar'].items():
            click.echo(f"p_{node_id} = {p:.6f} bar")

    @app.cli.command('check-stability')
    @click.option('--scenario', 'scenario_path', type=click.Path(exists=True, dir_okay=False), required=True)
    @click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None)
    @click.option('--pressure-range', nargs=2, type=float, default=None,
                  help='Low and high pressure [bar] for the worst-case speed of sound.')
    @reports_errors
    def check_stability(scenario_path, out_dir, pressure_range):
        """Evaluate the height condition |L sinθ| < 6c²/g for every pipe."""
        pressure_range = tuple(p * BAR for p in pressure_range) if pressure_range else None
        reports = tasks.run_stability(app, scenario_path, out_dir, pressure_range)
        for report in reports:
            status = 'ok' if report['ok'] else 'VIOLATED'
            click.echo(f"{report['edge']}: {status}, margin {report['margin_m'] / 1e3:.3f} km")

    @app.cli.command('benchmark')
    @solver_flags
    @click.option('--height', 'heights', type=float, multiple=True,
                  help='Elevation of the supply node [m]; repeat for several cases.')
    @click.option('--hours', type=float, default=24.0, help='Length of the load window [h].')
    @click.option('--workers', type=int, default=None)
    @reports_errors
    def benchmark(out_dir, model, rtol, atol, sample_dt, heights, hours, workers):
        """Compare the frozen and live mean-pressure models on the three-node network."""
        if model is not None:
            click.echo('--model is ignored: the benchmark always runs both variants', err=True)
        overrides = dict(rtol=rtol, atol=atol, sample_dt=sample_dt)
        table = tasks.run_benchmark(app, out_dir, heights or BENCHMARK_HEIGHTS, overrides, hours, workers)
        click.echo(table.to_string(index=False))

    return app


cli = FlaskGroup(create_app=create_app)

if __name__ == '__main__':
    cli()

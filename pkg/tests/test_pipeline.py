import numpy as np
import pytest

from gasphs.errors import ModelValidityError
from gasphs.gas import BAR
from gasphs.pipeline import (LIVE_PM_VARIANT, PHS_VARIANT, PipelineState, build_pipeline_phs,
                             lumped_mass_rhs, lumped_momentum_rhs, mean_pressure, mean_pressure_cubic,
                             pipeline_ports, split_c_rhs, split_rl_rhs, supplied_power)
from tests.conftest import random_pipe_states


def hamiltonian_rate(phs, state, u, variant):
    co = np.asarray(state, dtype=float)
    return float(phs.energy_variables(co) @ phs.rhs(state, u, variant))


def test_structure_matrices(inclined_phs):
    assert np.array_equal(inclined_phs.J, -inclined_phs.J.T)
    assert np.all(np.diag(inclined_phs.Q) > 0)
    assert np.count_nonzero(inclined_phs.Q - np.diag(np.diag(inclined_phs.Q))) == 0
    assert inclined_phs.d == pytest.approx(inclined_phs.params.gravity_factor * 49 * BAR)


def test_mean_pressure_closed_forms():
    assert mean_pressure(2.0, 1.0) == pytest.approx(14.0 / 9.0)
    assert mean_pressure_cubic(2.0, 1.0) == pytest.approx(14.0 / 9.0)
    assert mean_pressure(40 * BAR, 40 * BAR) == pytest.approx(40 * BAR)
    assert mean_pressure_cubic(40 * BAR, 40 * BAR) == 40 * BAR


def test_mean_pressure_forms_agree(rng):
    for pl, pr, _ in random_pipe_states(rng, 200):
        if abs(pl - pr) > 0.1 * BAR:
            assert mean_pressure(pl, pr) == pytest.approx(mean_pressure_cubic(pl, pr), rel=1e-12)


def test_mean_pressure_lies_between_the_ends(rng):
    states = random_pipe_states(rng, 500)
    pm = mean_pressure(states[:, 0], states[:, 1])
    assert np.all(pm >= np.minimum(states[:, 0], states[:, 1]) - 1e-6)
    assert np.all(pm <= np.maximum(states[:, 0], states[:, 1]) + 1e-6)


def test_mean_pressure_rejects_non_positive_pressure():
    with pytest.raises(ModelValidityError):
        mean_pressure(0.0, 1.0)
    with pytest.raises(ModelValidityError):
        mean_pressure_cubic(1.0, -1.0)


def test_dissipation_matrix_is_positive_semidefinite(inclined_phs, rng):
    for state in random_pipe_states(rng, 10_000):
        r = inclined_phs.R(state)
        assert r[2, 2] >= 0
        assert np.count_nonzero(r) <= 1


def test_monolithic_form_matches_lumped_balances(inclined_phs, rng):
    params = inclined_phs.params
    for pl, pr, qnm in random_pipe_states(rng, 300):
        qnl, qnr = rng.uniform(-50, 50, 2)
        state = PipelineState(pl, pr, qnm)
        rhs = inclined_phs.rhs(state, (qnl, -qnr), LIVE_PM_VARIANT)
        dpl, dpr = lumped_mass_rhs(state, qnl, qnr, params)
        dq = lumped_momentum_rhs(state, params)
        pressure_scale = params.capacitive_weight * 100.0
        assert rhs[0] == pytest.approx(dpl, abs=1e-12 * pressure_scale)
        assert rhs[1] == pytest.approx(dpr, abs=1e-12 * pressure_scale)
        assert rhs[2] == pytest.approx(dq, rel=1e-12, abs=1e-12 * params.inductive_weight * max(pl, pr))


def test_frozen_variant_uses_the_frozen_gravity_pressure(inclined_phs):
    state = PipelineState(50 * BAR, 46 * BAR, 30.0)
    params = inclined_phs.params
    frozen = lumped_momentum_rhs(state, params, p_mean_gravity=inclined_phs.p_mean_frozen)
    assert inclined_phs.rhs(state, (30.0, -30.0), PHS_VARIANT)[2] == pytest.approx(frozen, rel=1e-12)


def test_split_parts_recombine_to_the_monolithic_form(inclined_phs, rng):
    params = inclined_phs.params
    for pl, pr, qnm in random_pipe_states(rng, 300):
        qnl, qnr = rng.uniform(-50, 50, 2)
        rhs = inclined_phs.rhs((pl, pr, qnm), (qnl, -qnr), PHS_VARIANT)
        q_dot = split_rl_rhs(qnm, pl, pr, params, p_mean_gravity=inclined_phs.p_mean_frozen)
        pl_dot = split_c_rhs(pl, qnl, qnm, 'left', params)
        pr_dot = split_c_rhs(pr, qnr, qnm, 'right', params)
        scale = np.abs(rhs).max() + 1.0
        assert np.allclose(rhs, [pl_dot, pr_dot, q_dot], rtol=1e-14, atol=1e-14 * scale)


def test_split_rejects_unknown_side(inclined_pipe):
    with pytest.raises(ValueError):
        split_c_rhs(50 * BAR, 1.0, 1.0, 'middle', inclined_pipe)


@pytest.mark.parametrize('variant', [PHS_VARIANT, LIVE_PM_VARIANT])
def test_power_balance(inclined_phs, rng, variant):
    for pl, pr, qnm in random_pipe_states(rng, 200):
        u = rng.uniform(-50, 50, 2)
        state = (pl, pr, qnm)
        dissipated = inclined_phs.resistance(qnm, mean_pressure(pl, pr)) * qnm**2
        expected = -dissipated + supplied_power(inclined_phs, state, u, variant)
        rate = hamiltonian_rate(inclined_phs, state, u, variant)
        power_scale = max(pl, pr) * (np.abs(u).sum() + abs(qnm) + 1.0)
        assert rate == pytest.approx(expected, rel=1e-9, abs=1e-12 * power_scale)


def test_ports(inclined_phs):
    y, z = pipeline_ports(inclined_phs, (50 * BAR, 45 * BAR, 12.0), (1.0, -1.0))
    assert np.array_equal(y, [50 * BAR, 45 * BAR])
    assert z == -12.0


def test_rhs_rejects_non_positive_pressure(inclined_phs):
    with pytest.raises(ModelValidityError):
        inclined_phs.rhs((0.0, 45 * BAR, 1.0), (0.0, 0.0))


def test_unknown_variant(inclined_phs):
    with pytest.raises(ValueError):
        inclined_phs.disturbance((50 * BAR, 45 * BAR, 1.0), 'isothermal-euler')


def test_frozen_mean_pressure_must_be_positive(inclined_pipe):
    with pytest.raises(ModelValidityError):
        build_pipeline_phs(inclined_pipe, p_mean_frozen=0.0)

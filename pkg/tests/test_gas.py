import math

import numpy as np
import pytest

from gasphs.errors import ModelValidityError
from gasphs.gas import (BAR, FrozenGasState, GasProperties, density, flow_conversions, freeze_gas_state,
                        papay_compressibility, standard_density)


def test_compressibility_is_one_at_zero_pressure(gas):
    assert papay_compressibility(0.0, 278.0, gas) == 1.0


def test_compressibility_at_operating_point(gas):
    assert papay_compressibility(50 * BAR, 278.0, gas) == pytest.approx(0.8804, abs=1e-3)


def test_compressibility_accepts_arrays(gas):
    p = np.array([0.0, 20 * BAR, 50 * BAR])
    z = papay_compressibility(p, 278.0, gas)
    assert z.shape == (3,)
    assert z[0] == 1.0
    assert np.all(np.diff(z) < 0)


def test_compressibility_rejects_negative_pressure(gas):
    with pytest.raises(ModelValidityError):
        papay_compressibility(-1.0, 278.0, gas)


def test_frozen_speed_of_sound_matches_real_gas_law(gas):
    state = freeze_gas_state(gas, 50 * BAR)
    z = papay_compressibility(50 * BAR, gas.operating_temperature, gas)
    assert state.compressibility == z
    assert state.speed_of_sound_sq == pytest.approx(z * gas.specific_gas_constant * gas.operating_temperature,
                                                    rel=1e-15)
    assert state.speed_of_sound == pytest.approx(math.sqrt(state.speed_of_sound_sq))
    assert state.speed_of_sound == pytest.approx(356.2, abs=0.5)


def test_ideal_gas_mode(gas):
    state = freeze_gas_state(gas, 50 * BAR, ideal=True)
    assert state.compressibility == 1.0
    assert state.speed_of_sound_sq == pytest.approx(518.28 * 278.0)


def test_standard_density(gas):
    assert standard_density(gas) == pytest.approx(0.7179, rel=1e-3)


def test_density_follows_frozen_speed_of_sound(gas_state):
    assert density(50 * BAR, gas_state) == pytest.approx(50 * BAR / gas_state.speed_of_sound_sq)


def test_flow_conversions_agree(gas_state):
    rho = density(50 * BAR, gas_state)
    rho_n = gas_state.standard_density
    from_standard = flow_conversions(density=rho, standard_density=rho_n, standard_flow=10.0)
    assert from_standard.mass_flow == pytest.approx(rho_n * 10.0)
    assert from_standard.flow * rho == pytest.approx(from_standard.mass_flow)

    from_mass = flow_conversions(density=rho, standard_density=rho_n, mass_flow=from_standard.mass_flow)
    assert from_mass.standard_flow == pytest.approx(10.0)
    assert from_mass.flow == pytest.approx(from_standard.flow)


def test_flow_conversions_need_exactly_one_flow(gas_state):
    with pytest.raises(ValueError):
        flow_conversions(density=1.0, standard_density=0.7)
    with pytest.raises(ValueError):
        flow_conversions(density=1.0, standard_density=0.7, flow=1.0, mass_flow=1.0)


def test_flow_conversions_reject_non_positive_density():
    with pytest.raises(ModelValidityError):
        flow_conversions(density=0.0, standard_density=0.7, flow=1.0)


def test_gas_properties_validate_temperature():
    with pytest.raises(ModelValidityError, match='operating temperature'):
        GasProperties(518.28, 1e-5, 46.5 * BAR, 190.55, 1.01325 * BAR, 273.15, 500.0)
    with pytest.raises(ModelValidityError):
        GasProperties(518.28, -1e-5, 46.5 * BAR, 190.55, 1.01325 * BAR, 273.15, 278.0)


def test_frozen_state_rejects_implausible_compressibility():
    with pytest.raises(ModelValidityError):
        FrozenGasState(compressibility=1.5, speed_of_sound_sq=1e5, standard_density=0.7, reference_pressure=1e6)

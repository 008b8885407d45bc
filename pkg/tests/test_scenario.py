import math

import pytest
from hypothesis import given, settings, strategies as st

from rsdfrc.scenario import (MOBILITY_PROFILES, ConfigError, LlsConfig, Scenario, SystemConfig,
                             dbm_to_watt, dump_config, jakes_error_var, parse_config, profile,
                             validate, watt_to_dbm)


def test_defaults_validate_and_fill():
    s = validate(Scenario())
    assert s.system.weights == (1.0, 1.0, 1.0, 1.0)
    assert len(s.radar.desired_pattern) == len(s.radar.angle_grid) == 181
    assert s.mobility.csit_error_var is not None
    assert validate(s) == s


def test_errors_are_collected_per_field():
    bad = Scenario(system=SystemConfig(n_tx=0, total_power=-1.0, access_mode="TDMA"))
    with pytest.raises(ConfigError) as exc:
        validate(bad)
    fields = {f for f, _ in exc.value.errors}
    assert {"n_tx", "total_power", "access_mode"} <= fields
    assert "total_power must be positive" in str(exc.value)


def test_power_units():
    s = parse_config("[system]\ntotal_power = 20 dBm\nnoise_power_user = 1 mW\n")
    assert math.isclose(s.system.total_power, 0.1)
    assert math.isclose(s.system.noise_power_user, 1e-3)
    assert math.isclose(watt_to_dbm(dbm_to_watt(17.5)), 17.5)


def test_unknown_key_and_section():
    with pytest.raises(ConfigError):
        parse_config("[system]\nbogus = 1\n")
    with pytest.raises(ConfigError):
        parse_config("[nope]\nx = 1\n")


def test_angle_grid_range_syntax():
    s = parse_config("[radar]\nangle_grid = -60:2:60\n")
    assert s.radar.angle_grid[0] == -60 and s.radar.angle_grid[-1] == 60
    assert len(s.radar.angle_grid) == 61


def test_profile_key_in_config():
    s = parse_config("[mobility]\nprofile = high-mobility\n")
    assert s.mobility.csit_error_var == MOBILITY_PROFILES["high-mobility"].csit_error_var
    with pytest.raises(ValueError):
        profile(Scenario(), "teleporting")


def test_dump_round_trip():
    s = validate(parse_config("[system]\nn_users = 3\nweights = 1, 2, 0.5\n[lls]\nrate_backoff = 0.25\n"))
    assert parse_config(dump_config(s)) == s


def test_jakes_error_formulas():
    assert jakes_error_var(1.0) == 0.0
    assert math.isclose(jakes_error_var(0.6, "variance"), 0.64)
    assert math.isclose(jakes_error_var(0.6, "sqrt"), 0.8)


def test_lls_checks():
    with pytest.raises(ConfigError):
        validate(Scenario(lls=LlsConfig(crc_bits=24)))
    with pytest.raises(ConfigError):
        validate(Scenario(lls=LlsConfig(rate_backoff=-1.0)))


@settings(max_examples=30, deadline=None)
@given(st.floats(-40, 60))
def test_dbm_round_trip(x):
    assert math.isclose(watt_to_dbm(dbm_to_watt(x)), x, abs_tol=1e-9)

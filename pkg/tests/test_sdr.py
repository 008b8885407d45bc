import numpy as np
import pytest
from dataclasses import replace

from rsdfrc import radar
from rsdfrc.sdr import (extract_precoder, sdr_objective, solve_sdr, stack_vector, unstack_vector,
                        unvec_precoder, vec_precoder)
from rsdfrc.scenario import SystemConfig

from conftest import crandn


def _row_project(D, cap):
    return D * (np.sqrt(cap) / np.linalg.norm(D, axis=1))[:, None]


def test_layout_round_trip(rng):
    P = crandn(rng, (4, 3))
    assert np.array_equal(vec_precoder(P)[:4], P[:, 0])
    assert np.array_equal(unvec_precoder(vec_precoder(P), 4), P)
    u = stack_vector(2.5, [0.1, 0.2], P)
    a, c, Q = unstack_vector(u, 4, 2)
    assert a == 2.5 and np.allclose(c, [0.1, 0.2]) and np.array_equal(Q, P)


def test_zero_lambda_is_row_projection(small, rng):
    v, d = crandn(rng, (4, 3)), crandn(rng, (4, 3))
    res = solve_sdr(v, d, 1.0, 0.0, small.radar, small)
    ref = _row_project(v + d, 25.0)
    # the objective is linear on a sphere, so precoder error is the square root of the gap
    gain = lambda P: np.real(np.vdot(vec_precoder(P), vec_precoder(v + d)))
    assert gain(res.P) == pytest.approx(gain(ref), rel=1e-7)
    assert np.allclose(res.P, ref, atol=1e-3 * np.abs(ref).max())


@pytest.mark.parametrize("lam", [1e-4, 1e-2])
def test_compact_and_full_lifts_agree(lam, rng):
    from rsdfrc.scenario import Scenario, validate
    sc = validate(Scenario(system=SystemConfig(n_tx=3, n_users=1, total_power=30.0,
                                                noise_power_user=1.0)))
    v, d = crandn(rng, (3, 2), 3.0), crandn(rng, (3, 2))
    a = solve_sdr(v, d, 1.0, lam, sc.radar, sc, lift="compact")
    b = solve_sdr(v, d, 1.0, lam, sc.radar, sc, lift="full")
    assert a.objective == pytest.approx(b.objective, rel=1e-5, abs=1e-6)
    assert np.allclose(a.P, b.P, atol=1e-3 * np.abs(a.P).max())


@pytest.mark.parametrize("lam", [1e-5, 1e-3, 1e-1])
def test_relaxation_feasibility_and_bound(small, rng, lam):
    v, d = crandn(rng, (4, 3), 5.0), crandn(rng, (4, 3))
    res = solve_sdr(v, d, 1.0, lam, small.radar, small)
    dg = res.diagnostics
    assert dg["schur_eigmin"] >= -1e-7
    assert dg["power_residual"] <= 1e-6
    assert dg["q_eigmin"] >= -1e-7
    # any rank-one feasible point is feasible for the relaxation
    d_hat = vec_precoder(v + d)
    for _ in range(5):
        P = _row_project(crandn(rng, (4, 3)), 25.0)
        B = P @ P.conj().T
        alpha = radar.optimal_scale(P, small.radar)
        assert res.objective <= sdr_objective(alpha, B, vec_precoder(P), d_hat, lam, 1.0,
                                              small.radar) + 1e-5 * abs(res.objective)


def test_matching_improves_with_lambda(small, rng):
    v, d = crandn(rng, (4, 3), 5.0), crandn(rng, (4, 3))
    mses = [solve_sdr(v, d, 1.0, lam, small.radar, small).mse for lam in (1e-6, 1e-3, 1.0)]
    assert mses[0] >= mses[1] >= mses[2]


def test_extract_precoder_vector(small, rng):
    res = solve_sdr(crandn(rng, (4, 3)), crandn(rng, (4, 3)), 1.0, 1e-3, small.radar, small)
    u = extract_precoder(res, 2)
    a, c, P = unstack_vector(u, 4, 2)
    assert a == res.alpha and np.all(c == 0) and np.allclose(P, res.P)


def test_bad_arguments(small, rng):
    v = crandn(rng, (4, 3))
    with pytest.raises(ValueError):
        solve_sdr(v, v, 0.0, 1.0, small.radar, small)
    with pytest.raises(ValueError):
        solve_sdr(v, v, 1.0, -1.0, small.radar, small)
    with pytest.raises(ValueError):
        solve_sdr(v, v, 1.0, 1.0, small.radar, small, lift="dense")

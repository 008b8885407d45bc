import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from rsdfrc.rates import average_rates, noma_order, rsma_sinrs
from rsdfrc.scenario import SystemConfig
from rsdfrc.wmmse import (InfeasibleQos, augmented_wmse, awmse_value, awsr, build_safs,
                          decode_events, equalizers_and_weights, mmse_equalizers, mmse_weights,
                          mode_adapters, mrt_svd_init, optimize_awsr, run_ao, scale_rows,
                          solve_qcqp, stream_mse)

from conftest import crandn
from dataclasses import replace


def _powers(P, h):
    return np.abs(h.conj() @ P) ** 2


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_rate_wmmse_identity_per_stream(seed):
    rng = np.random.default_rng(seed)
    P, h = crandn(rng, (4, 3)), crandn(rng, 4)
    noise = float(rng.uniform(0.1, 3.0))
    gc, gp = mmse_equalizers(P, h, noise, k=0)
    pw = _powers(P, h)
    Tc, Tk = pw.sum() + noise, pw[1:].sum() + noise
    hp = h.conj() @ P
    sc, sp = rsma_sinrs(P, h[:, None], noise)
    for g, T, hps, sinr in ((gc, Tc, hp[0], sc[0]), (gp, Tk, hp[1], sp[0])):
        eps = stream_mse(g, hps, T)
        assert eps == pytest.approx(1.0 / (1.0 + sinr), rel=1e-12)
        xi = augmented_wmse(g, mmse_weights(eps), hps, T)
        assert xi == pytest.approx(1.0 - math.log2(1.0 + sinr), abs=1e-12)


def test_closed_form_equalizer_is_the_minimizer(rng):
    P, h = crandn(rng, (4, 3)), crandn(rng, 4)
    gc, _ = mmse_equalizers(P, h, 1.0)
    T = _powers(P, h).sum() + 1.0
    hp = (h.conj() @ P)[0]
    res = minimize(lambda x: stream_mse(x[0] + 1j * x[1], hp, T), [0.0, 0.0], method="BFGS",
                   options={"gtol": 1e-12})
    assert abs(res.x[0] + 1j * res.x[1] - gc) < 1e-7


def test_weight_minimizer():
    eps = 0.3
    hp = (2.0 - eps) / 2.0                                  # stream_mse(1, hp, 1) == eps
    assert stream_mse(1.0, hp, 1.0) == pytest.approx(eps)
    f = lambda w: augmented_wmse(1.0, w, hp, 1.0)
    w = np.linspace(0.5, 10, 20001)
    assert w[np.argmin(f(w))] == pytest.approx(mmse_weights(eps), abs=1e-3)
    with pytest.raises(ValueError):
        mmse_weights(0.0)


def test_decode_event_counts():
    assert len(decode_events("RSMA", 3)) == 6
    assert len(decode_events("SDMA", 3)) == 3
    noma = decode_events("NOMA", 3, [2, 0, 1])
    assert len(noma) == 6
    # the weakest user decodes only itself, with everyone interfering
    first = [e for e in noma if e.receiver == 2]
    assert len(first) == 1 and set(first[0].present) == {1, 2, 3}
    with pytest.raises(ValueError):
        decode_events("NOMA", 3)
    with pytest.raises(ValueError):
        decode_events("OFDMA", 3)


def test_saa_awmse_equals_one_minus_average_rate(rng):
    P, Hs = crandn(rng, (4, 3), 5.0), crandn(rng, (30, 4, 2))
    shape = mode_adapters("RSMA", 2)
    eqw = equalizers_and_weights(P, Hs, shape.events, 1.0)
    vals = awmse_value(P, build_safs(P, Hs, eqw, shape.events), 1.0)
    rc, rp = average_rates(P, Hs, 1.0)
    assert np.allclose(vals, 1.0 - np.concatenate([rc, rp]), atol=1e-11)


def test_initializer_meets_per_antenna_power(rng):
    H = crandn(rng, (4, 2))
    for mode in ("RSMA", "SDMA", "NOMA"):
        P = mrt_svd_init(H, 40.0, mode)
        assert np.allclose(np.sum(np.abs(P) ** 2, axis=1), 10.0)
        if mode != "RSMA":
            assert np.all(P[:, 0] == 0)
    Z = scale_rows(np.zeros((3, 2)), 6.0)
    assert np.allclose(np.sum(np.abs(Z) ** 2, axis=1), 2.0)


@pytest.mark.parametrize("mode", ["RSMA", "SDMA", "NOMA"])
def test_qcqp_step_keeps_rate_bound(small, rng, mode):
    Hs = crandn(rng, (10, 4, 2))
    order = noma_order(Hs.mean(0)) if mode == "NOMA" else None
    shape = mode_adapters(mode, 2, order)
    P = mrt_svd_init(Hs.mean(0), 100.0, mode)
    eqw = equalizers_and_weights(P, Hs, shape.events, 1.0)
    P_new, extra, qobj = solve_qcqp(build_safs(P, Hs, eqw, shape.events), shape, small)
    assert np.all(np.sum(np.abs(P_new) ** 2, axis=1) <= 25.0 * (1 + 1e-6))
    val, _ = awsr(P_new, Hs, small, shape, extra, order)
    before, _ = awsr(P, Hs, small, shape, None, order)
    # rate >= 1 - xi at any fixed (g, w): the QCQP bound is a lower bound on the AWSR
    if mode != "NOMA":
        assert val >= small.weights.sum() - qobj - 1e-6
    assert val >= before - 1e-6


@pytest.mark.parametrize("mode", ["RSMA", "SDMA", "NOMA"])
def test_ao_trace_is_monotone(small, rng, mode):
    Hs = crandn(rng, (8, 4, 2))
    res = run_ao(small, Hs, mrt_svd_init(Hs.mean(0), 100.0, mode), mode=mode, max_iters=15)
    assert np.all(np.diff(res.awsr_trace) >= -1e-8)
    assert np.all(np.sum(np.abs(res.P) ** 2, axis=1) <= 25.0 * (1 + 1e-6))


def test_ao_is_invariant_to_noise_units(small, rng):
    Hs = crandn(rng, (6, 4, 2))
    a = run_ao(small, Hs, mrt_svd_init(Hs.mean(0), 100.0), max_iters=5)
    s2 = 1e-3
    sc = replace(small, system=replace(small.system, total_power=100.0 * s2, noise_power_user=s2))
    b = run_ao(sc, Hs, mrt_svd_init(Hs.mean(0), 100.0 * s2), max_iters=5)
    assert np.allclose(a.awsr_trace, b.awsr_trace, rtol=1e-6)


def test_unreachable_qos_raises(small, rng):
    Hs = crandn(rng, (6, 4, 2))
    sc = replace(small, system=replace(small.system, qos_rate=40.0))
    with pytest.raises(InfeasibleQos) as info:
        run_ao(sc, Hs, mrt_svd_init(Hs.mean(0), 100.0), max_iters=3)
    assert info.value.users == [0, 1]


def test_rsma_not_below_sdma(small, rng):
    H = crandn(rng, (4, 2))
    Hs = H[None]
    r = optimize_awsr(small, Hs, H, "RSMA", max_iters=30)
    s = optimize_awsr(small, Hs, H, "SDMA", max_iters=30)
    assert r.awsr_trace[-1] >= s.awsr_trace[-1] - 1e-6


def test_saf_special_cases(rng):
    shape = mode_adapters("RSMA", 2)
    P, H = crandn(rng, (4, 3)), crandn(rng, (1, 4, 2))
    eqw = equalizers_and_weights(P, H, shape.events, 1.0)
    safs = build_safs(P, H, eqw, shape.events)
    h0 = H[0, :, 0]
    assert np.allclose(safs.Psi[0], eqw.w[0, 0] * abs(eqw.g[0, 0]) ** 2 * np.outer(h0, h0.conj()))
    Hs = crandn(rng, (7, 4, 2))
    eqw = equalizers_and_weights(P, Hs, shape.events, 1.0)
    zero = type(eqw)(np.zeros_like(eqw.g), np.ones_like(eqw.w), eqw.eps)
    z = build_safs(P, Hs, zero, shape.events)
    assert np.all(z.t == 0) and np.all(z.Psi == 0) and np.all(z.f == 0) and np.all(z.v == 0)
    for Psi in build_safs(P, Hs, eqw, shape.events).Psi:
        assert np.allclose(Psi, Psi.conj().T) and np.linalg.eigvalsh(Psi).min() > -1e-12


def test_single_user_reaches_per_antenna_capacity(small, rng):
    sc = replace(small, system=replace(small.system, n_users=1, qos_rate=0.0, weights=(1.0,)))
    h = crandn(rng, (4, 1))
    # per-antenna power: co-phase every antenna at full power
    cap = math.log2(1.0 + np.sum(np.abs(h)) ** 2 * 100.0 / 4)
    res = optimize_awsr(sc, h[None], h, "SDMA", max_iters=80)
    assert res.awsr_trace[-1] >= 0.98 * cap
    assert res.awsr_trace[-1] <= cap + 1e-6


def test_huge_tolerance_stops_after_one_step(small, rng):
    Hs = crandn(rng, (4, 4, 2))
    res = run_ao(small, Hs, mrt_svd_init(Hs.mean(0), 100.0), max_iters=20, tol=1e9)
    assert res.iters <= 2


def test_mode_special_cases(small, rng):
    Hs = crandn(rng, (5, 4, 2))
    P = mrt_svd_init(Hs.mean(0), 100.0, "SDMA")
    r, _ = awsr(P, Hs, small, mode_adapters("RSMA", 2), np.zeros(2))
    s, _ = awsr(P, Hs, small, mode_adapters("SDMA", 2))
    assert r == pytest.approx(s)
    one = replace(small, system=replace(small.system, n_users=1, weights=(1.0,)))
    h = Hs[:, :, :1]
    P1 = mrt_svd_init(h.mean(0), 100.0, "SDMA")
    a = run_ao(one, h, P1, mode="SDMA", max_iters=6)
    b = run_ao(one, h, P1, mode="NOMA", max_iters=6, order=[0])
    assert np.allclose(a.awsr_trace, b.awsr_trace, rtol=1e-5)


def test_noma_rates_consistent_with_sinr_evaluation(small, rng):
    from rsdfrc.rates import noma_sinrs
    Hs = crandn(rng, (6, 4, 2))
    order = noma_order(Hs.mean(0))
    res = run_ao(small, Hs, mrt_svd_init(Hs.mean(0), 100.0, "NOMA"), mode="NOMA",
                 max_iters=6, order=order)
    G = np.log2(1 + np.nan_to_num(noma_sinrs(res.P, Hs, order, 1.0))).mean(0)
    rates = np.empty(2)
    rates[order[0]] = min(G[0, 0], G[1, 0])
    rates[order[1]] = G[1, 1]
    assert res.awsr_trace[-1] == pytest.approx(small.weights @ rates, rel=1e-9)


def test_qcqp_beats_random_feasible_precoders(small, rng):
    """Sampling oracle: no random feasible precoder has a lower QCQP objective."""
    from rsdfrc.wmmse import awmse_value
    sc = replace(small, system=replace(small.system, qos_rate=0.0))
    Hs = crandn(rng, (2, 4, 2))
    shape = mode_adapters("SDMA", 2)
    P = mrt_svd_init(Hs.mean(0), 100.0, "SDMA")
    eqw = equalizers_and_weights(P, Hs, shape.events, 1.0)
    safs = build_safs(P, Hs, eqw, shape.events)
    _, _, qobj = solve_qcqp(safs, shape, sc)
    for _ in range(2000):
        Q = np.zeros((4, 3), complex)
        Q[:, 1:] = crandn(rng, (4, 2))
        Q *= np.sqrt(25.0 * rng.uniform(0, 1, 4)[:, None]) / np.linalg.norm(Q, axis=1)[:, None]
        assert sc.weights @ awmse_value(Q, safs, 1.0) >= qobj - 1e-7

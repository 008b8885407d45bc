import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsdfrc.lls import (DEFAULT_TABLE, LlsBlockResult, ModCodePair, PolarCode, amc_select,
                        constellation, crc16, demodulate_llr, frozen_mask, modulate, plan_link,
                        polar_transform, segment_lengths, shannon_wsr, simulate_block,
                        weighted_throughput)
from rsdfrc.lls.link import StreamPlan
from rsdfrc.lls.polar import sc_decode

from conftest import crandn


# --------------------------------------------------------------------------- modulation

@pytest.mark.parametrize("qm", [2, 4, 6, 8])
def test_constellation_unit_energy_and_gray(qm):
    pts, labels = constellation(qm)
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0)
    assert len(set(map(tuple, labels))) == 2 ** qm
    # nearest neighbours differ in exactly one bit
    d = np.abs(pts[:, None] - pts[None, :])
    dmin = d[d > 0].min()
    for i, j in zip(*np.nonzero(np.isclose(d, dmin))):
        assert np.sum(labels[i] != labels[j]) == 1


@pytest.mark.parametrize("qm", [2, 4])
def test_modulate_matches_constellation_labels(qm):
    pts, labels = constellation(qm)
    assert np.allclose(modulate(labels.ravel(), qm), pts)
    with pytest.raises(ValueError):
        modulate(np.zeros(qm + 1, np.uint8), qm)


@pytest.mark.parametrize("qm", [2, 4, 6])
def test_llr_brute_force(qm, rng):
    pts, labels = constellation(qm)
    z = crandn(rng, 5) + pts[rng.integers(0, len(pts), 5)]
    nv = 0.3
    llr = demodulate_llr(z, nv, qm).reshape(5, qm)
    for s in range(5):
        like = np.exp(-np.abs(z[s] - pts) ** 2 / nv)
        for b in range(qm):
            ref = math.log(like[labels[:, b] == 0].sum() / like[labels[:, b] == 1].sum())
            assert llr[s, b] == pytest.approx(ref, rel=1e-9, abs=1e-9)


# --------------------------------------------------------------------------- polar

def _boxplus(a, b):
    return 2.0 * np.arctanh(np.clip(np.tanh(a / 2) * np.tanh(b / 2), -1 + 1e-16, 1 - 1e-16))


def _minsum(a, b):
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def _bit_llr(i, L, uhat, f):
    n = len(L)
    if n == 1:
        return L[0]
    h = n // 2
    if i < h:
        return _bit_llr(i, f(L[:h], L[h:]), uhat[:i], f)
    c = polar_transform(np.array(uhat[:h], np.uint8)).astype(float)
    return _bit_llr(i - h, L[h:] + (1 - 2 * c) * L[:h], uhat[h:i], f)


def reference_sc(llr, frozen, f=_boxplus):
    """Textbook bit-by-bit successive cancellation, no node shortcuts."""
    u = []
    for i in range(len(llr)):
        u.append(0 if frozen[i] else int(_bit_llr(i, llr, u, f) < 0))
    return np.array(u, np.uint8)


def test_crc_check_value():
    bits = np.unpackbits(np.frombuffer(b"123456789", np.uint8))
    val = int("".join(map(str, crc16(bits))), 2)
    assert val == 0x31C3


def test_polar_transform_is_involution_and_generator(rng):
    u = rng.integers(0, 2, 8, dtype=np.uint8)
    F = np.array([[1, 0], [1, 1]])
    G = F
    for _ in range(2):
        G = np.kron(G, F)
    assert np.array_equal(polar_transform(u), (u @ G) % 2)
    assert np.array_equal(polar_transform(polar_transform(u)), u)


def test_frozen_set_nesting_and_errors():
    a, b = frozen_mask(64, 20, 1.0), frozen_mask(64, 30, 1.0)
    assert a.sum() == 44 and np.all(b <= a)
    assert not frozen_mask(8, 8, 0.0).any()
    with pytest.raises(ValueError):
        frozen_mask(8, 0, 0.0)
    with pytest.raises(ValueError):
        PolarCode(256, 16, 0.0)       # nothing beyond the CRC
    with pytest.raises(ValueError):
        PolarCode(100, 50, 0.0)


def test_noiseless_round_trip(rng):
    code = PolarCode(256, 128, 2.0)
    for _ in range(100):
        payload = rng.integers(0, 2, code.payload_bits, dtype=np.uint8)
        x = code.encode(payload)
        out, ok = code.decode(20.0 * (1.0 - 2.0 * x))
        assert ok and np.array_equal(out, payload)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([8, 16, 32, 64]))
def test_fast_sc_equals_textbook_min_sum(seed, n):
    rng = np.random.default_rng(seed)
    frozen = frozen_mask(n, int(rng.integers(1, n + 1)), float(rng.uniform(-2, 6)))
    llr = rng.normal(1.0, 2.0, n)
    assert np.array_equal(sc_decode(llr, frozen), reference_sc(llr, frozen, _minsum))


def test_bler_matches_independent_sc_reference():
    rng = np.random.default_rng(11)
    code = PolarCode(256, 128, 3.0)
    es_n0 = 10 ** (3.0 / 10)
    nv = 1.0 / es_n0
    fast = ref = 0
    blocks = 300
    for _ in range(blocks):
        payload = rng.integers(0, 2, code.payload_bits, dtype=np.uint8)
        s = modulate(code.encode(payload), 2)
        llr = demodulate_llr(s + crandn(rng, s.size, nv), nv, 2)
        out, _ = code.decode(llr)
        fast += not np.array_equal(out, payload)
        u = reference_sc(llr, code.frozen)
        ref += not np.array_equal(u[~code.frozen][:code.payload_bits], payload)
    assert ref > 0 and fast > 0
    assert 1 / 3 <= fast / ref <= 3


# --------------------------------------------------------------------------- AMC and planning

def test_amc_ladder():
    assert [round(m.spectral_efficiency, 2) for m in DEFAULT_TABLE] == \
        [0.5, 1.0, 1.5, 2.0, 3.0, 3.0, 4.0, 4.5, 5.0, 6.0, 6.67]
    assert amc_select(0.0) is None and amc_select(0.49) is None
    assert amc_select(2.1) == ModCodePair("16QAM", Fraction(1, 2))
    assert amc_select(3.0).modulation == "16QAM"
    assert amc_select(100.0) == ModCodePair("256QAM", Fraction(5, 6))
    with pytest.raises(ValueError):
        amc_select(-1.0)


def test_segmentation():
    assert segment_lengths(1536) == [1024, 512]
    assert segment_lengths(512) == [512]
    assert sum(segment_lengths(1000)) == 1000
    sp = StreamPlan.build(1, ModCodePair("64QAM", Fraction(3, 4)), 256, 10.0)
    assert [c.n for c in sp.codes] == [1024, 512]
    assert sp.info_bits == 1152 == sum(c.k for c in sp.codes)


def _setup(rng, n=4, k=2, power=100.0):
    H = crandn(rng, (n, k))
    P = np.zeros((n, k + 1), complex)
    P[:, 0] = np.sqrt(power / 4) * H.sum(1) / np.linalg.norm(H.sum(1))
    P[:, 1:] = np.sqrt(power / 4) * H / np.linalg.norm(H, axis=0)
    return P, H


def test_sdma_plan_skips_common(rng):
    P, H = _setup(rng)
    P[:, 0] = 0
    plan = plan_link(P, H, 1.0, "RSMA")
    assert 0 not in plan.streams
    res = simulate_block(P, H, 1.0, plan, rng)
    assert all(col != 0 for _, col in res.stream_ok)


@pytest.mark.parametrize("mode", ["RSMA", "SDMA", "NOMA"])
def test_noiseless_limit_decodes_everything(mode, rng):
    P, H = _setup(rng)
    if mode != "RSMA":
        P[:, 0] = 0
    plan = plan_link(P, H, 1.0, mode, backoff=1.0)
    res = simulate_block(P, H, 1e-9, plan, rng)
    assert plan.streams and all(res.stream_ok.values())
    expected = np.zeros(2)
    for col, sp in plan.streams.items():
        if col == 0:
            expected += plan.common_shares * sp.info_bits
        else:
            expected[col - 1 if mode != "NOMA" else col - 1] += sp.info_bits
    assert np.allclose(res.delivered, expected)
    # accounting identity: perfect blocks give the assigned spectral efficiency
    thr = weighted_throughput([res, res], [1.0, 1.0])
    assert thr == pytest.approx(expected.sum() / plan.symbols)
    assert thr <= shannon_wsr(plan, [1.0, 1.0])


def test_common_failure_blocks_private(rng):
    P, H = _setup(rng)
    plan = plan_link(P, H, 1.0, "RSMA")
    # overload the common stream so it cannot decode
    sp = StreamPlan.build(0, ModCodePair("256QAM", Fraction(5, 6)), plan.symbols, 20.0)
    plan.streams[0] = sp
    plan.common_shares = np.array([0.5, 0.5])
    res = simulate_block(P, H, 1.0, plan, rng)
    for k in range(2):
        if not res.stream_ok[(k, 0)] and (k, k + 1) in res.stream_ok:
            assert not res.stream_ok[(k, k + 1)]
            assert res.delivered[k] == 0


def test_throughput_edges(rng):
    dead = LlsBlockResult({}, np.zeros(2), 256)
    assert weighted_throughput([dead] * 3, [1.0, 2.0]) == 0.0
    with pytest.raises(ValueError):
        weighted_throughput([], [1.0])


def test_throughput_below_shannon_over_blocks(rng):
    P, H = _setup(rng, power=30.0)
    plan = plan_link(P, H, 1.0, "RSMA")
    blocks = [simulate_block(P, H, 1.0, plan, rng) for _ in range(5)]
    assert weighted_throughput(blocks, [1.0, 1.0]) <= shannon_wsr(plan, [1.0, 1.0])


def test_bler_falls_with_snr():
    rng = np.random.default_rng(3)
    code = PolarCode(256, 128, 2.0)
    bler = []
    for snr_db in (-1.0, 1.0, 3.0, 5.0):
        nv = 10 ** (-snr_db / 10)
        err = 0
        for _ in range(200):
            payload = rng.integers(0, 2, code.payload_bits, dtype=np.uint8)
            s = modulate(code.encode(payload), 2)
            _, ok = code.decode(demodulate_llr(s + crandn(rng, s.size, nv), nv, 2))
            err += not ok
        bler.append(err / 200)
    assert all(a >= b for a, b in zip(bler, bler[1:])) and bler[0] > bler[-1]

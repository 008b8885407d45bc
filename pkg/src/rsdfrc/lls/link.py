"""Block-level simulation of the RSMA / SDMA / NOMA transceivers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..channel import crandn
from ..rates import noma_order, noma_sinrs, rsma_sinrs
from .amc import DEFAULT_TABLE, ModCodePair, amc_select
from .modulation import demodulate_llr, modulate
from .polar import CRC_BITS, PolarCode

__all__ = [
    "StreamPlan",
    "LinkPlan",
    "LlsBlockResult",
    "segment_lengths",
    "plan_link",
    "simulate_block",
    "weighted_throughput",
    "shannon_wsr",
]

DEFAULT_BLOCK_SYMBOLS = 256


def segment_lengths(coded_bits: int) -> list:
    """Split a coded-bit budget into power-of-two codeword lengths, largest first."""
    out = []
    b = 1 << max(coded_bits.bit_length() - 1, 0)
    rem = coded_bits
    while rem and b:
        if rem >= b:
            out.append(b)
            rem -= b
        b >>= 1
    return out


@dataclass
class StreamPlan:
    """One transmitted stream: precoder column, modcode and its codewords."""

    column: int
    modcode: ModCodePair
    codes: list              # PolarCode per segment
    info_bits: int           # delivered bits (CRC included) when decoded

    @classmethod
    def build(cls, column: int, modcode: ModCodePair, symbols: int, design_snr_db: float,
              crc_bits: int = CRC_BITS) -> Optional["StreamPlan"]:
        total = symbols * modcode.bits_per_symbol
        segs = segment_lengths(total)
        k_total = math.floor(modcode.code_rate * total)
        ks = [math.floor(modcode.code_rate * n) for n in segs[:-1]]
        ks.append(k_total - sum(ks))
        if min(ks) <= crc_bits:
            return None
        codes = [PolarCode(n, k, design_snr_db) for n, k in zip(segs, ks)]
        return cls(column, modcode, codes, k_total)


@dataclass
class LinkPlan:
    mode: str
    streams: dict            # precoder column -> StreamPlan (absent: not transmitted)
    common_shares: np.ndarray
    rates: dict              # column -> Shannon rate used for AMC
    order: Optional[np.ndarray] = None
    symbols: int = DEFAULT_BLOCK_SYMBOLS


@dataclass
class LlsBlockResult:
    stream_ok: dict          # (user, column) -> decoded-ok at that user
    delivered: np.ndarray    # D_{s,k}, info bits per user
    symbols: int = DEFAULT_BLOCK_SYMBOLS
    ewsr: float = 0.0        # Shannon weighted sum-rate of the same precoder on this channel
    extra: dict = field(default_factory=dict)


def _clamp_db(sinr, lo, hi):
    return float(np.clip(10.0 * np.log10(max(float(sinr), 1e-30)), lo, hi))


def plan_link(P: np.ndarray, H: np.ndarray, noise: float, mode: str, splits=None,
              order=None, table: Sequence[ModCodePair] = DEFAULT_TABLE,
              symbols: int = DEFAULT_BLOCK_SYMBOLS, design_snr_range=(-2.0, 20.0),
              backoff: float = 0.0) -> LinkPlan:
    """Choose modcodes from the true-channel Shannon rates of every stream.

    The common stream rate is the weakest user's common rate; the common
    bits are shared in proportion to ``splits`` (equal shares when absent).
    ``backoff`` (bps/Hz) is subtracted from every rate before the table lookup.
    """

    def pick(rate, table):
        return amc_select(max(rate - backoff, 0.0), table)

    K = H.shape[1]
    lo, hi = design_snr_range
    streams, rates = {}, {}
    shares = np.zeros(K)
    if mode == "NOMA":
        order = noma_order(H) if order is None else np.asarray(order, dtype=int)
        G = noma_sinrs(P, H, order, noise)
        for i in range(K):
            sinr = float(np.nanmin(G[i:, i]))
            col = 1 + int(order[i])
            rates[col] = float(np.log2(1.0 + sinr))
            mc = pick(rates[col], table)
            if mc is not None:
                sp = StreamPlan.build(col, mc, symbols, _clamp_db(sinr, lo, hi))
                if sp is not None:
                    streams[col] = sp
    else:
        gc, gp = rsma_sinrs(P, H, noise)
        for k in range(K):
            rates[k + 1] = float(np.log2(1.0 + gp[k]))
            mc = pick(rates[k + 1], table)
            if mc is not None:
                sp = StreamPlan.build(k + 1, mc, symbols, _clamp_db(gp[k], lo, hi))
                if sp is not None:
                    streams[k + 1] = sp
        if mode == "RSMA" and np.linalg.norm(P[:, 0]) > 0:
            sinr = float(gc.min())
            rates[0] = float(np.log2(1.0 + sinr))
            mc = pick(rates[0], table)
            if mc is not None:
                sp = StreamPlan.build(0, mc, symbols, _clamp_db(sinr, lo, hi))
                if sp is not None:
                    streams[0] = sp
                    w = np.ones(K) if splits is None else np.clip(np.asarray(splits, float), 0, None)
                    shares = w / w.sum() if w.sum() > 0 else np.ones(K) / K
    return LinkPlan(mode, streams, shares, rates, order, symbols)


def shannon_wsr(plan: LinkPlan, weights) -> float:
    """Weighted Shannon rate of the planned precoder on the same channel."""
    mu = np.asarray(weights, float)
    K = len(mu)
    per = np.array([plan.rates.get(k + 1, 0.0) for k in range(K)])
    if plan.mode == "RSMA" and 0 in plan.rates:
        per = per + plan.common_shares * plan.rates[0]
    return float(mu @ per)


def _encode_stream(sp: StreamPlan, rng) -> tuple:
    payloads = [rng.integers(0, 2, c.payload_bits, dtype=np.uint8) for c in sp.codes]
    coded = np.concatenate([c.encode(p) for c, p in zip(sp.codes, payloads)])
    return payloads, modulate(coded, sp.modcode.bits_per_symbol)


def _decode_stream(sp: StreamPlan, z, noise_var):
    """Decode every codeword; returns ``(ok, remodulated symbols)``."""
    llr = demodulate_llr(z, noise_var, sp.modcode.bits_per_symbol)
    pos, ok, coded = 0, True, []
    for c in sp.codes:
        payload, good = c.decode(llr[pos:pos + c.n])
        ok &= good
        coded.append(c.encode(payload))
        pos += c.n
    return ok, modulate(np.concatenate(coded), sp.modcode.bits_per_symbol)


def simulate_block(P: np.ndarray, H: np.ndarray, noise: float, plan: LinkPlan,
                   rng: np.random.Generator) -> LlsBlockResult:
    """Transmit one block and run the SIC receivers of every user."""
    K = H.shape[1]
    S = plan.symbols
    tx = {}
    for col, sp in plan.streams.items():
        tx[col] = _encode_stream(sp, rng)[1]
    x = np.zeros((P.shape[0], S), dtype=complex)
    for col, s in tx.items():
        x += np.outer(P[:, col], s)
    y = H.conj().T @ x + crandn(rng, (K, S), noise)
    hp = H.conj().T @ P                                # (K, K+1) effective gains
    delivered = np.zeros(K)
    ok_map = {}

    def stage(k, col, remaining, yk):
        """Decode ``col`` at user ``k`` with ``remaining`` columns still present."""
        sp = plan.streams[col]
        interf = sum(abs(hp[k, j]) ** 2 for j in remaining if j != col and j in tx)
        g = hp[k, col]
        nv = (interf + noise) / max(abs(g) ** 2, 1e-300)
        ok, remod = _decode_stream(sp, yk / g, nv)
        ok_map[(k, col)] = ok
        return ok, yk - g * remod

    for k in range(K):
        yk = y[k].copy()
        if plan.mode == "NOMA":
            order = [int(o) for o in plan.order]
            pos = order.index(k)
            alive = True
            for ipos in range(pos + 1):
                col = 1 + order[ipos]
                if col not in plan.streams:
                    continue
                remaining = [1 + order[j] for j in range(ipos, K)]
                if not alive:
                    ok_map[(k, col)] = False
                    continue
                ok, yk = stage(k, col, remaining, yk)
                if ipos < pos and not ok:
                    alive = False
                if ipos == pos and ok:
                    delivered[k] += plan.streams[col].info_bits
            continue
        private_alive = True
        if 0 in plan.streams:
            ok, yk = stage(k, 0, [0] + list(range(1, K + 1)), yk)
            if ok:
                delivered[k] += plan.common_shares[k] * plan.streams[0].info_bits
            else:
                private_alive = False
        col = k + 1
        if col in plan.streams:
            if private_alive:
                ok, _ = stage(k, col, list(range(1, K + 1)), yk)
                if ok:
                    delivered[k] += plan.streams[col].info_bits
            else:
                ok_map[(k, col)] = False
    return LlsBlockResult(ok_map, delivered, S)


def weighted_throughput(blocks: Sequence[LlsBlockResult], weights) -> float:
    """sum_l sum_k mu_k D_k^(l) / sum_l S^(l) in bits per channel use."""
    if not blocks:
        raise ValueError("no blocks to average")
    mu = np.asarray(weights, float)
    num = sum(float(mu @ b.delivered) for b in blocks)
    return num / sum(b.symbols for b in blocks)

"""Polar codes: Bhattacharyya construction, encoding and fast SC decoding."""

from __future__ import annotations

import binascii
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "CRC_BITS",
    "crc16",
    "bhattacharyya_log",
    "frozen_mask",
    "polar_transform",
    "PolarCode",
    "polar_encode",
    "polar_decode",
    "sc_decode",
]

CRC_BITS = 16


def crc16(bits: np.ndarray) -> np.ndarray:
    """CRC-16/CCITT (XMODEM) of a bit string, MSB first, as 16 bits."""
    bits = np.asarray(bits, dtype=np.uint8)
    pad = (-bits.size) % 8
    data = np.packbits(np.concatenate([np.zeros(pad, np.uint8), bits])).tobytes()
    crc = binascii.crc_hqx(data, 0)
    return ((crc >> np.arange(15, -1, -1)) & 1).astype(np.uint8)


def bhattacharyya_log(n: int, design_snr_db: float) -> np.ndarray:
    """Log Bhattacharyya parameters of the ``n`` synthetic channels (natural order)."""
    if n < 1 or n & (n - 1):
        raise ValueError("block length must be a power of two")
    z = np.array([-(10.0 ** (design_snr_db / 10.0))])      # log z of the BPSK-AWGN channel
    while z.size < n:
        # each channel splits into a worse (2z - z^2) and a better (z^2) one
        worse = z + np.log(2.0 - np.exp(z))
        z = np.stack([worse, 2.0 * z], axis=1).ravel()
    return z


@lru_cache(maxsize=256)
def _frozen(n: int, k: int, snr_key: float) -> bytes:
    z = bhattacharyya_log(n, snr_key)
    order = np.argsort(z, kind="stable")     # most reliable first
    mask = np.ones(n, dtype=bool)
    mask[order[:k]] = False
    return mask.tobytes()


def frozen_mask(n: int, k: int, design_snr_db: float) -> np.ndarray:
    """Boolean mask of frozen positions (True = frozen) keeping the ``k`` best channels.

    The design SNR is quantized to 0.1 dB so constructions can be cached.
    """
    if not 0 < k <= n:
        raise ValueError("need 0 < k <= n")
    return np.frombuffer(_frozen(n, k, round(float(design_snr_db), 1)), dtype=bool).copy()


def polar_transform(u: np.ndarray) -> np.ndarray:
    """x = u F^{(x)m} with F = [[1, 0], [1, 1]] (no bit reversal); an involution."""
    x = np.array(u, dtype=np.uint8)
    n = x.size
    h = 1
    while h < n:
        v = x.reshape(-1, 2, h)
        v[:, 0, :] ^= v[:, 1, :]
        h *= 2
    return x


def _f(a, b):
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def sc_decode(llr: np.ndarray, frozen: np.ndarray) -> np.ndarray:
    """Successive-cancellation decoding (min-sum) with rate-0 and rate-1 node shortcuts."""
    u, _ = _sc(np.asarray(llr, dtype=float), np.asarray(frozen, dtype=bool))
    return u


def _sc(llr, frozen):
    n = llr.size
    if frozen.all():
        z = np.zeros(n, dtype=np.uint8)
        return z, z
    if not frozen.any():
        x = (llr < 0).astype(np.uint8)
        return polar_transform(x), x
    if n == 1:
        x = np.array([0 if frozen[0] else int(llr[0] < 0)], dtype=np.uint8)
        return x, x
    h = n // 2
    a, b = llr[:h], llr[h:]
    u1, x1 = _sc(_f(a, b), frozen[:h])
    u2, x2 = _sc(b + (1.0 - 2.0 * x1) * a, frozen[h:])
    return np.concatenate([u1, u2]), np.concatenate([x1 ^ x2, x2])


@dataclass(frozen=True)
class PolarCode:
    n: int
    k: int                   # information bits including the CRC
    design_snr_db: float

    def __post_init__(self):
        if self.n < 1 or self.n & (self.n - 1):
            raise ValueError("block length must be a power of two")
        if self.k <= CRC_BITS:
            raise ValueError("code carries no payload beyond the CRC")
        if self.k > self.n:
            raise ValueError("rate above one")

    @property
    def frozen(self) -> np.ndarray:
        return frozen_mask(self.n, self.k, self.design_snr_db)

    @property
    def payload_bits(self) -> int:
        return self.k - CRC_BITS

    def encode(self, payload: np.ndarray) -> np.ndarray:
        payload = np.asarray(payload, dtype=np.uint8)
        if payload.size != self.payload_bits:
            raise ValueError(f"expected {self.payload_bits} payload bits, got {payload.size}")
        u = np.zeros(self.n, dtype=np.uint8)
        u[~self.frozen] = np.concatenate([payload, crc16(payload)])
        return polar_transform(u)

    def decode(self, llr: np.ndarray):
        """Returns ``(payload, ok)`` with ``ok`` from the CRC check."""
        llr = np.asarray(llr, dtype=float)
        if llr.size != self.n:
            raise ValueError(f"expected {self.n} LLRs, got {llr.size}")
        u = sc_decode(llr, self.frozen)
        info = u[~self.frozen]
        payload, crc = info[:-CRC_BITS], info[-CRC_BITS:]
        return payload, bool(np.array_equal(crc16(payload), crc))


def _code(block_bits, code_rate, design_snr_db):
    k = int(round(code_rate * block_bits))
    return PolarCode(block_bits, k, design_snr_db)


def polar_encode(info_bits, block_bits: int, code_rate: float, design_snr_db: float = 0.0):
    """Encode ``rate * block_bits - 16`` payload bits (CRC-16 appended inside)."""
    return _code(block_bits, code_rate, design_snr_db).encode(info_bits)


def polar_decode(llrs, block_bits: int, code_rate: float, design_snr_db: float = 0.0):
    return _code(block_bits, code_rate, design_snr_db).decode(llrs)

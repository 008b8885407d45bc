"""Channel realizations, CSIT estimates under channel aging, SAA sample sets."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import j0

from .scenario import SPEED_OF_LIGHT, Scenario

__all__ = [
    "ChannelSample",
    "SaaSampleSet",
    "crandn",
    "jakes_corr",
    "draw_aged_channel",
    "draw_saa_set",
    "realization_rng",
    "dump_channels",
    "load_channels",
]


def crandn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex normal samples with total variance ``var``."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def jakes_corr(v: float, f_c: float, T: float) -> float:
    """Jakes time correlation J0(2 pi f_D T) with f_D = v f_c / c."""
    f_d = v * f_c / SPEED_OF_LIGHT
    return float(j0(2.0 * np.pi * f_d * T))


def realization_rng(master_seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for one Monte-Carlo realization.

    Seeding from ``(master_seed, index, stream)`` keeps results independent
    of worker scheduling and of how realizations are sharded.
    """
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index), int(stream)]))


@dataclass
class ChannelSample:
    h_true: np.ndarray      # N x K, column k is user k
    h_est: np.ndarray       # N x K
    corr_coeff: float
    err_var: float


@dataclass
class SaaSampleSet:
    realizations: np.ndarray   # M x N x K
    h_est: np.ndarray
    seed: Optional[int] = None

    def __len__(self) -> int:
        return self.realizations.shape[0]


def draw_aged_channel(scenario: Scenario, rng: np.random.Generator,
                      prev: Optional[np.ndarray] = None) -> ChannelSample:
    """Draw a true channel and its CSIT estimate.

    Without ``prev`` the split ``H = H_est + H_err`` is sampled directly with
    ``H_est ~ CN(0, 1 - err_var)`` and ``H_err ~ CN(0, err_var)``.  With
    ``prev`` the channel evolves as a first-order Gauss-Markov process and the
    transmitter only knows the previous sample.
    """
    n, k = scenario.system.n_tx, scenario.system.n_users
    err_var = float(scenario.error_var)
    rho = float(scenario.time_corr)
    if prev is None:
        h_est = crandn(rng, (n, k), 1.0 - err_var)
        h_true = h_est + crandn(rng, (n, k), err_var)
        return ChannelSample(h_true, h_est, rho, err_var)
    prev = np.asarray(prev)
    innovation = crandn(rng, prev.shape, 1.0)
    h_true = rho * prev + np.sqrt(max(1.0 - rho * rho, 0.0)) * innovation
    return ChannelSample(h_true, prev.copy(), rho, err_var)


def draw_saa_set(sample: ChannelSample, m_saa: int, rng: np.random.Generator,
                 seed: Optional[int] = None) -> SaaSampleSet:
    """``m_saa`` conditional realizations ``H_est + H_err^(m)`` sharing one estimate."""
    if m_saa < 1:
        raise ValueError("m_saa must be >= 1")
    h_est = sample.h_est
    errs = crandn(rng, (m_saa,) + h_est.shape, sample.err_var)
    return SaaSampleSet(h_est[None, :, :] + errs, h_est.copy(), seed)


# Binary layout: magic, N, K, M, seed (int64), then the estimate followed by the
# M realizations, each N x K row-major as interleaved re/im float64 pairs.
_MAGIC = b"RSCH0001"


def dump_channels(path, saa: SaaSampleSet) -> None:
    m, n, k = saa.realizations.shape
    seed = -1 if saa.seed is None else int(saa.seed)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<qqqq", n, k, m, seed))
        mats = np.concatenate([saa.h_est[None], saa.realizations])
        inter = np.empty((m + 1, n, k, 2))
        inter[..., 0] = mats.real
        inter[..., 1] = mats.imag
        fh.write(inter.astype("<f8").tobytes(order="C"))


def load_channels(path) -> SaaSampleSet:
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise ValueError(f"{path}: not a channel dump")
    n, k, m, seed = struct.unpack("<qqqq", data[8:40])
    arr = np.frombuffer(data[40:], dtype="<f8").reshape(m + 1, n, k, 2)
    mats = arr[..., 0] + 1j * arr[..., 1]
    return SaaSampleSet(mats[1:], mats[0], None if seed < 0 else seed)

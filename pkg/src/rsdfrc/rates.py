"""SINR and rate evaluation for RSMA, SDMA and NOMA precoders.

Precoders are always N x (K+1) with column 0 the common-stream precoder;
SDMA and NOMA leave it at zero.  Channel arrays are N x K (one column per
user) or stacked M x N x K for SAA sample sets.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "RateReport",
    "rsma_sinrs",
    "noma_order",
    "noma_sinrs",
    "rates_from_sinrs",
    "average_rates",
    "noma_average_rates",
    "split_common",
    "rate_report",
    "wsr",
]


def _gains(P: np.ndarray, H: np.ndarray) -> np.ndarray:
    """|h_k^H p_j|^2 with shape (..., K, K+1)."""
    return np.abs(np.swapaxes(H.conj(), -1, -2) @ P) ** 2


def rsma_sinrs(P: np.ndarray, H: np.ndarray, noise: float):
    """Common and private SINRs of every user.

    ``H`` may be a single N-vector (one user, whose private precoder is
    column ``1``), an N x K matrix, or an M x N x K stack.
    """
    P = np.asarray(P)
    H = np.asarray(H)
    if H.ndim == 1:
        H = H[:, None]
    g = _gains(P, H)
    k = H.shape[-1]
    priv = g[..., 1:]
    own = np.diagonal(priv, axis1=-2, axis2=-1)
    all_priv = priv.sum(axis=-1)
    gamma_c = g[..., 0] / (all_priv + noise)
    gamma_p = own / (all_priv - own + noise)
    return gamma_c, gamma_p


def rates_from_sinrs(gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SINR must be nonnegative")
    return np.log2(1.0 + gamma)


def noma_order(h_est: np.ndarray) -> np.ndarray:
    """SIC decoding order: user indices from weakest to strongest estimated gain.

    The strongest user decodes (and cancels) every other stream before its
    own; ties are broken by user index.
    """
    gains = np.sum(np.abs(h_est) ** 2, axis=0)
    return np.array(sorted(range(len(gains)), key=lambda k: (gains[k], -k)), dtype=int)


def noma_sinrs(P: np.ndarray, H: np.ndarray, order: Sequence[int], noise: float) -> np.ndarray:
    """SINRs ``G[..., k, i]`` of stream ``order[i]`` decoded at user ``order[k]``.

    Entries with ``i > k`` are NaN (never decoded).  ``P`` may be N x K
    (private columns only) or N x (K+1).
    """
    P = np.asarray(P)
    H = np.asarray(H)
    if H.ndim == 1:
        H = H[:, None]
    K = H.shape[-1]
    Pp = P[:, 1:] if P.shape[1] == K + 1 else P
    order = np.asarray(order)
    if sorted(order.tolist()) != list(range(K)):
        raise ValueError("order must be a permutation of the users")
    g = _gains(Pp, H)                              # (..., user, stream)
    g = g[..., order, :][..., :, order]            # reindex by decoding position
    # interference from streams decoded later: sum_{j > i}
    tail = np.flip(np.cumsum(np.flip(g, -1), -1), -1)
    later = tail - g
    out = g / (later + noise)
    mask = np.tril(np.ones((K, K), dtype=bool))
    return np.where(mask, out, np.nan)


@dataclass
class RateReport:
    common_rate_per_user: list
    common_rate: float
    private_rates: list
    common_splits: list
    total_per_user: list
    wsr: float
    mode: str = "RSMA"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RateReport":
        return cls(**json.loads(text))


def average_rates(P: np.ndarray, saa, noise: float, with_stderr: bool = False):
    """SAA-averaged common and private rates (per user).

    ``saa`` is an :class:`~rsdfrc.channel.SaaSampleSet` or an M x N x K array.
    """
    Hs = getattr(saa, "realizations", saa)
    Hs = np.asarray(Hs)
    if Hs.ndim == 2:
        Hs = Hs[None]
    gc, gp = rsma_sinrs(P, Hs, noise)
    rc, rp = np.log2(1.0 + gc), np.log2(1.0 + gp)
    if not with_stderr:
        return rc.mean(axis=0), rp.mean(axis=0)
    m = Hs.shape[0]
    se = lambda x: x.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.zeros(x.shape[1:])
    return rc.mean(axis=0), rp.mean(axis=0), se(rc), se(rp)


def noma_average_rates(P: np.ndarray, saa, order: Sequence[int], noise: float) -> np.ndarray:
    """Per-user NOMA stream rates: SAA-average per decoder, then min over decoders."""
    Hs = np.asarray(getattr(saa, "realizations", saa))
    if Hs.ndim == 2:
        Hs = Hs[None]
    G = noma_sinrs(P, Hs, order, noise)
    R = np.log2(1.0 + np.nan_to_num(G, nan=0.0)).mean(axis=0)
    K = R.shape[-1]
    stream = np.array([R[i:, i].min() for i in range(K)])
    out = np.empty(K)
    out[np.asarray(order)] = stream
    return out


def split_common(common_rate: float, proportions: Optional[Sequence[float]], k: int) -> np.ndarray:
    """Divide the common rate among users in the given proportions (equal if none)."""
    if common_rate <= 0:
        return np.zeros(k)
    p = np.ones(k) if proportions is None else np.clip(np.asarray(proportions, float), 0, None)
    if p.sum() <= 0:
        p = np.ones(k)
    return common_rate * p / p.sum()


def rate_report(P: np.ndarray, channels, noise: float, mode: str = "RSMA",
                weights=None, splits=None, order=None) -> RateReport:
    """Exact rate report for one channel matrix or an SAA set (rates averaged).

    ``splits`` gives proportions of the common rate per user; the common
    rate itself is the minimum of the (averaged) per-user common rates.
    """
    Hs = np.asarray(getattr(channels, "realizations", channels))
    if Hs.ndim == 2:
        Hs = Hs[None]
    K = Hs.shape[-1]
    mu = np.ones(K) if weights is None else np.asarray(weights, float)
    if mode == "NOMA":
        if order is None:
            order = noma_order(getattr(channels, "h_est", Hs.mean(axis=0)))
        priv = noma_average_rates(P, Hs, order, noise)
        rc_user = np.zeros(K)
        rc = 0.0
    else:
        rc_user, priv = average_rates(P, Hs, noise)
        if mode == "SDMA":
            rc_user = np.zeros(K)
        rc = float(rc_user.min()) if mode == "RSMA" else 0.0
    c = split_common(rc, splits, K)
    total = c + priv
    return RateReport(
        common_rate_per_user=[float(x) for x in rc_user],
        common_rate=float(rc),
        private_rates=[float(x) for x in priv],
        common_splits=[float(x) for x in c],
        total_per_user=[float(x) for x in total],
        wsr=float(mu @ total),
        mode=mode,
    )


def wsr(report: RateReport, weights) -> float:
    mu = np.asarray(weights, float)
    return float(mu @ (np.asarray(report.common_splits) + np.asarray(report.private_rates)))

"""SAA AR-WMMSE alternating optimization for the average weighted sum-rate.

Every access mode is described by a list of *decoding events*: a receiver
user, the precoder column it decodes, and the set of columns still present
(undecoded) at that moment.  MMSE equalizers, weights and their sample
averages are computed per event; the precoder update is a convex QCQP.

The augmented weighted MSE of an event is::

    xi(g, w) = (w * eps(g) - 1) / ln 2 - log2(w) + 1

which is minimized by the MMSE equalizer and ``w = 1 / eps`` and then equals
``1 - R`` with ``R`` in bits per channel use.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import conic
from .rates import average_rates, noma_average_rates, noma_order
from .scenario import Scenario

__all__ = [
    "InfeasibleQos",
    "DecodeEvent",
    "EqualizerWeights",
    "SafBundle",
    "Penalty",
    "AoResult",
    "decode_events",
    "mode_adapters",
    "mmse_equalizers",
    "mmse_weights",
    "stream_mse",
    "augmented_wmse",
    "equalizers_and_weights",
    "build_safs",
    "awmse_value",
    "solve_qcqp",
    "run_ao",
    "mrt_svd_init",
    "scale_rows",
    "awsr",
    "optimize_awsr",
]

log = logging.getLogger(__name__)
LN2 = np.log(2.0)


class InfeasibleQos(RuntimeError):
    """The QoS rate targets cannot be met; ``users`` lists the offending users."""

    def __init__(self, users, message="QoS rate constraints are infeasible"):
        self.users = list(users)
        super().__init__(f"{message} (users {self.users})")


@dataclass(frozen=True)
class DecodeEvent:
    receiver: int            # user index
    stream: int              # precoder column being decoded
    present: tuple           # precoder columns contributing received power
    group: int               # rate variable the event bounds (-1: private objective)


def decode_events(mode: str, n_users: int, order: Optional[Sequence[int]] = None) -> list:
    """Decoding events for ``mode``; NOMA needs the SIC ``order`` (weakest first)."""
    K = n_users
    priv = tuple(range(1, K + 1))
    if mode == "RSMA":
        common = [DecodeEvent(k, 0, (0,) + priv, 0) for k in range(K)]
        return common + [DecodeEvent(k, k + 1, priv, -1) for k in range(K)]
    if mode == "SDMA":
        return [DecodeEvent(k, k + 1, priv, -1) for k in range(K)]
    if mode == "NOMA":
        if order is None:
            raise ValueError("NOMA needs a decoding order")
        order = [int(x) for x in order]
        ev = []
        for kpos in range(K):
            for ipos in range(kpos + 1):
                present = tuple(1 + order[j] for j in range(ipos, K))
                ev.append(DecodeEvent(order[kpos], 1 + order[ipos], present, order[ipos]))
        return ev
    raise ValueError(f"unknown access mode {mode!r}")


@dataclass(frozen=True)
class ModeShape:
    mode: str
    columns: tuple           # precoder columns that are optimization variables
    n_extra: int             # rate variables (common splits or NOMA stream rates)
    events: tuple


def mode_adapters(mode: str, n_users: int, order=None) -> ModeShape:
    """Subproblem shape for an access mode."""
    K = n_users
    ev = tuple(decode_events(mode, K, order))
    if mode == "RSMA":
        return ModeShape(mode, tuple(range(K + 1)), K, ev)
    if mode == "SDMA":
        return ModeShape(mode, tuple(range(1, K + 1)), 0, ev)
    return ModeShape(mode, tuple(range(1, K + 1)), K, ev)


# --------------------------------------------------------------------------- closed forms

def mmse_equalizers(P: np.ndarray, h: np.ndarray, noise: float, k: int = 0):
    """Common and private MMSE equalizers of user ``k`` for channel vector ``h``."""
    hp = h.conj() @ P
    gains = np.abs(hp) ** 2
    T_c = gains.sum() + noise
    T_k = T_c - gains[0]
    return np.conj(hp[0]) / T_c, np.conj(hp[k + 1]) / T_k


def mmse_weights(eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0) or np.any(eps > 1 + 1e-12):
        raise ValueError("MMSE must lie in (0, 1]")
    return 1.0 / eps


def stream_mse(g, hp_s, total_power):
    """eps = |g|^2 T - 2 Re{g h^H p_s} + 1."""
    return np.abs(g) ** 2 * total_power - 2.0 * np.real(g * hp_s) + 1.0


def augmented_wmse(g, w, hp_s, total_power):
    eps = stream_mse(g, hp_s, total_power)
    return (w * eps - 1.0) / LN2 - np.log2(w) + 1.0


@dataclass
class EqualizerWeights:
    g: np.ndarray            # (M, n_events) complex
    w: np.ndarray            # (M, n_events)
    eps: np.ndarray          # (M, n_events) MMSE values


def _event_terms(P, Hs, events, noise):
    """Per realization and event: h^H p_s and total received power T."""
    G = np.swapaxes(Hs.conj(), -1, -2) @ P        # (M, K, K+1) = h_k^H p_j
    rx = np.array([e.receiver for e in events])
    st = np.array([e.stream for e in events])
    hp = G[:, rx, st]
    mask = np.zeros((len(events), P.shape[1]))
    for i, e in enumerate(events):
        mask[i, list(e.present)] = 1.0
    pw = np.abs(G[:, rx, :]) ** 2                 # (M, n_events, K+1)
    T = np.einsum("mej,ej->me", pw, mask) + noise
    return hp, T


def equalizers_and_weights(P, Hs, events, noise) -> EqualizerWeights:
    hp, T = _event_terms(P, Hs, events, noise)
    g = np.conj(hp) / T
    eps = 1.0 - np.abs(hp) ** 2 / T
    eps = np.clip(eps, 1e-300, 1.0)
    return EqualizerWeights(g, 1.0 / eps, eps)


@dataclass
class SafBundle:
    t: np.ndarray            # (n_events,)
    Psi: np.ndarray          # (n_events, N, N) Hermitian PSD
    f: np.ndarray            # (n_events, N)
    w: np.ndarray            # (n_events,)
    v: np.ndarray            # (n_events,)
    events: tuple = ()


def build_safs(P, saa, eqw: EqualizerWeights, events) -> SafBundle:
    """Sample averages of t = w|g|^2, Psi = t h h^H, f = w h g^*, w and log2 w."""
    Hs = np.asarray(getattr(saa, "realizations", saa))
    rx = np.array([e.receiver for e in events])
    h = np.transpose(Hs[:, :, rx], (0, 2, 1))      # (M, n_events, N)
    t = eqw.w * np.abs(eqw.g) ** 2
    Psi = np.einsum("me,mei,mej->eij", t, h, h.conj()) / Hs.shape[0]
    f = np.einsum("me,mei->ei", eqw.w * np.conj(eqw.g), h) / Hs.shape[0]
    return SafBundle(t.mean(0), Psi, f, eqw.w.mean(0), np.log2(eqw.w).mean(0), tuple(events))


def awmse_value(P, safs: SafBundle, noise) -> np.ndarray:
    """Sample-average augmented WMSE of each event evaluated at ``P``."""
    out = np.empty(len(safs.events))
    for i, e in enumerate(safs.events):
        cols = list(e.present)
        quad = np.real(np.einsum("aj,ab,bj->", P[:, cols].conj(), safs.Psi[i], P[:, cols]))
        lin = np.real(safs.f[i].conj() @ P[:, e.stream])
        out[i] = (quad + noise * safs.t[i] - 2.0 * lin + safs.w[i]) / LN2 - safs.v[i] + 1.0 - 1.0 / LN2
    return out


# --------------------------------------------------------------------------- QCQP

@dataclass
class Penalty:
    """ADMM proximal term (rho / 2) ||vec(P) - center||^2."""

    center: np.ndarray       # N x (K+1)
    rho: float

    def value(self, P) -> float:
        return 0.5 * self.rho * float(np.sum(np.abs(P - self.center) ** 2))


@dataclass
class _Layout:
    n: int
    columns: tuple
    n_extra: int

    @property
    def n_p(self):
        return self.n * len(self.columns)

    @property
    def size(self):
        return 2 * self.n_p + self.n_extra

    def col_slices(self, col):
        j = self.columns.index(col)
        re = np.arange(j * self.n, (j + 1) * self.n)
        return re, re + self.n_p

    def extra(self, i):
        return 2 * self.n_p + i

    def unpack(self, x, K):
        P = np.zeros((self.n, K + 1), dtype=complex)
        for j, col in enumerate(self.columns):
            re, im = self.col_slices(col)
            P[:, col] = x[re] + 1j * x[im]
        return P, x[2 * self.n_p:]


def _event_quadratic(lay: _Layout, e: DecodeEvent, safs: SafBundle, i: int):
    """Factor rows, linear term and constant of ln2-scaled AWMSE for one event."""
    Psi = 0.5 * (safs.Psi[i] + safs.Psi[i].conj().T)
    wv, V = np.linalg.eigh(Psi)
    keep = wv > 1e-13 * max(1.0, wv.max(initial=0.0))
    L = V[:, keep] * np.sqrt(wv[keep])         # Psi = L L^H
    A = L.conj().T                              # rows act on p
    Ar, Ai = A.real, A.imag
    rows = []
    for col in e.present:
        if col not in lay.columns:
            continue
        re, im = lay.col_slices(col)
        block = np.zeros((2 * A.shape[0], lay.size))
        block[:A.shape[0], re] = Ar
        block[:A.shape[0], im] = -Ai
        block[A.shape[0]:, re] = Ai
        block[A.shape[0]:, im] = Ar
        rows.append(block)
    F = np.vstack(rows) if rows else np.zeros((0, lay.size))
    lin = np.zeros(lay.size)
    if e.stream in lay.columns:
        re, im = lay.col_slices(e.stream)
        lin[re] = -2.0 * safs.f[i].real
        lin[im] = -2.0 * safs.f[i].imag
    return F, lin


def solve_qcqp(safs: SafBundle, shape: ModeShape, scenario: Scenario,
               penalty: Optional[Penalty] = None, tol: Optional[float] = None):
    """Precoder update with fixed equalizers and weights.

    Returns ``(P, extra, objective)``; ``extra`` holds the negated common-rate
    portions (RSMA) or the stream rates (NOMA).
    """
    sysc = scenario.system
    N, K = sysc.n_tx, sysc.n_users
    noise = sysc.noise_power_user
    mu = scenario.weights
    rth = sysc.qos_rate
    lay = _Layout(N, shape.columns, shape.n_extra)
    prob = conic.ConicProblem(lay.size)
    Pobj = np.zeros((lay.size, lay.size))
    q = np.zeros(lay.size)
    c0 = 0.0

    def event_const(i):
        return (noise * safs.t[i] + safs.w[i]) / LN2 - safs.v[i] + 1.0 - 1.0 / LN2

    terms = [_event_quadratic(lay, e, safs, i) for i, e in enumerate(shape.events)]
    # ln2-scaled quadratic: xi = (||F x||^2 + lin x) / ln2 + const
    for i, e in enumerate(shape.events):
        F, lin = terms[i]
        if shape.mode in ("RSMA", "SDMA") and e.group == -1:
            k = e.receiver
            Pobj += 2.0 * mu[k] / LN2 * (F.T @ F)
            q += mu[k] / LN2 * lin
            c0 += mu[k] * event_const(i)
    if shape.mode == "RSMA":
        for k in range(K):
            q[lay.extra(k)] += mu[k]
    elif shape.mode == "NOMA":
        for k in range(K):
            q[lay.extra(k)] -= mu[k]
    if penalty is not None and penalty.rho > 0:
        rho = penalty.rho
        for col in lay.columns:
            re, im = lay.col_slices(col)
            Pobj[re, re] += rho
            Pobj[im, im] += rho
            q[re] -= rho * penalty.center[:, col].real
            q[im] -= rho * penalty.center[:, col].imag
        c0 += 0.5 * rho * float(np.sum(np.abs(penalty.center) ** 2))
    prob.set_objective(Pobj, q, c0, check=False)

    s = np.sqrt(LN2)
    for i, e in enumerate(shape.events):
        F, lin = terms[i]
        a = lin / LN2
        b = event_const(i)
        if shape.mode == "RSMA" and e.group == 0:
            # xi_c - 1 - sum_k X_k <= 0
            for k in range(K):
                a = a.copy()
                a[lay.extra(k)] -= 1.0
            prob.add_quadratic(factor=F / s, a=a, b=b - 1.0)
        elif shape.mode == "NOMA":
            a = a.copy()
            a[lay.extra(e.group)] += 1.0
            prob.add_quadratic(factor=F / s, a=a, b=b - 1.0)
        elif e.group == -1 and rth > 0:
            # QoS: X_k + xi_k - 1 + Rth <= 0  (SDMA has no X)
            a = a.copy()
            if shape.mode == "RSMA":
                a[lay.extra(e.receiver)] += 1.0
            prob.add_quadratic(factor=F / s, a=a, b=b - 1.0 + rth)
    if shape.n_extra:
        idx = [lay.extra(k) for k in range(shape.n_extra)]
        A = np.zeros((shape.n_extra, lay.size))
        A[np.arange(shape.n_extra), idx] = 1.0
        if shape.mode == "RSMA":
            prob.add_le(A, np.zeros(shape.n_extra))           # X <= 0
        else:
            prob.add_le(-A, np.zeros(shape.n_extra))          # r >= 0
            if rth > 0:
                prob.add_le(-A, -rth * np.ones(shape.n_extra))
    cap = sysc.total_power / N
    for i in range(N):
        F = np.zeros((2 * len(lay.columns), lay.size))
        for j, col in enumerate(lay.columns):
            re, im = lay.col_slices(col)
            F[2 * j, re[i]] = 1.0
            F[2 * j + 1, im[i]] = 1.0
        prob.add_quadratic(factor=F, b=-cap)

    tol = scenario.solver.conic_tol if tol is None else tol
    sol = conic.solve(prob, tol=tol, feas_tol=scenario.solver.feas_tol * max(1.0, cap))
    if sol.status == conic.Status.INFEASIBLE:
        raise InfeasibleQos([])
    if not sol.ok:
        raise RuntimeError(f"QCQP solve failed: {sol.status.value} ({sol.message})")
    P, extra = lay.unpack(sol.primal, K)
    return P, extra, sol.objective_value


# --------------------------------------------------------------------------- helpers

def scale_rows(P: np.ndarray, total_power: float) -> np.ndarray:
    """Rescale every antenna row to power ``total_power / N`` (zero rows get equal split)."""
    N = P.shape[0]
    out = P.astype(complex).copy()
    target = np.sqrt(total_power / N)
    norms = np.linalg.norm(out, axis=1)
    for i in range(N):
        if norms[i] > 1e-15:
            out[i] *= target / norms[i]
        else:
            out[i] = target / np.sqrt(out.shape[1])
    return out


def mrt_svd_init(h_est: np.ndarray, total_power: float, mode: str = "RSMA",
                 split: float = 0.5) -> np.ndarray:
    """MRT private precoders plus a dominant-singular-vector common precoder."""
    N, K = h_est.shape
    t = split if mode == "RSMA" else 1.0
    P = np.zeros((N, K + 1), dtype=complex)
    qp = total_power * t / K
    norms = np.linalg.norm(h_est, axis=0)
    P[:, 1:] = np.sqrt(qp) * h_est / np.where(norms > 0, norms, 1.0)
    if mode == "RSMA":
        U, _, _ = np.linalg.svd(h_est)
        P[:, 0] = np.sqrt(total_power * (1.0 - t)) * U[:, 0]
    if mode != "RSMA":
        keep = P[:, 1:]
        keep = scale_rows(keep, total_power)
        P[:, 1:] = keep
        return P
    return scale_rows(P, total_power)


def awsr(P, saa, scenario: Scenario, shape: ModeShape, extra=None, order=None) -> tuple:
    """AWSR of ``P`` with the given rate variables; returns ``(awsr, common_splits)``.

    For RSMA the splits are ``-extra`` clipped to be nonnegative and jointly
    decodable; without ``extra`` the common rate goes to the largest weight.
    """
    mu = scenario.weights
    noise = scenario.system.noise_power_user
    K = scenario.system.n_users
    if shape.mode == "NOMA":
        r = noma_average_rates(P, saa, order, noise)
        return float(mu @ r), np.zeros(K)
    rc, rp = average_rates(P, saa, noise)
    if shape.mode == "SDMA":
        return float(mu @ rp), np.zeros(K)
    cap = float(rc.min())
    if extra is None:
        c = np.zeros(K)
        c[int(np.argmax(mu))] = cap
    else:
        c = np.clip(-np.asarray(extra, float), 0.0, None)
        tot = c.sum()
        if tot > cap > 0:
            c *= cap / tot
        elif cap <= 0:
            c[:] = 0.0
    return float(mu @ (c + rp)), c


@dataclass
class AoResult:
    P: np.ndarray
    extra: np.ndarray
    common_splits: np.ndarray
    awsr_trace: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)
    penalty_trace: list = field(default_factory=list)
    iters: int = 0
    converged: bool = False
    order: Optional[np.ndarray] = None


def _violating_users(P, saa, scenario, shape, order):
    noise = scenario.system.noise_power_user
    K = scenario.system.n_users
    if shape.mode == "NOMA":
        tot = noma_average_rates(P, saa, order, noise)
    else:
        rc, rp = average_rates(P, saa, noise)
        tot = rp + (rc.min() if shape.mode == "RSMA" else 0.0)
    return [k for k in range(K) if tot[k] < scenario.system.qos_rate]


def run_ao(scenario: Scenario, saa, P_init: np.ndarray, penalty: Optional[Penalty] = None,
           mode: Optional[str] = None, max_iters: Optional[int] = None, tol: Optional[float] = None,
           order=None) -> AoResult:
    """SAA AR-WMMSE alternating optimization from ``P_init``.

    Stops when the change of AWSR minus the proximal penalty is at most
    ``tol``.  A QCQP step that (through solver round-off) would lower that
    objective is rejected and ends the loop.
    """
    sysc = scenario.system
    mode = mode or sysc.access_mode
    K = sysc.n_users
    if mode == "NOMA" and order is None:
        h_est = getattr(saa, "h_est", None)
        order = noma_order(np.asarray(saa).mean(0) if h_est is None else h_est)
    shape = mode_adapters(mode, K, order)
    max_iters = scenario.solver.max_ao_iters if max_iters is None else max_iters
    tol = scenario.solver.ao_tol if tol is None else tol
    Hs = np.asarray(getattr(saa, "realizations", saa))
    # work in noise-normalized units: rates are unchanged by scaling P and
    # the noise together, and the conic solver sees O(1) data
    s2 = sysc.noise_power_user
    scale = np.sqrt(s2)
    scenario = replace(scenario, system=replace(sysc, total_power=sysc.total_power / s2,
                                                noise_power_user=1.0))
    if penalty is not None:
        penalty = Penalty(penalty.center / scale, penalty.rho * s2)
    noise = 1.0

    P = np.asarray(P_init, dtype=complex).copy() / scale
    if mode != "RSMA":
        P[:, 0] = 0.0
    res = AoResult(P, np.zeros(shape.n_extra), np.zeros(K), order=order)
    prev_obj = None
    for n in range(1, max_iters + 1):
        eqw = equalizers_and_weights(P, Hs, shape.events, noise)
        safs = build_safs(P, Hs, eqw, shape.events)
        try:
            P_new, extra, qobj = solve_qcqp(safs, shape, scenario, penalty)
        except InfeasibleQos:
            raise InfeasibleQos(_violating_users(P, Hs, scenario, shape, order)) from None
        val, splits = awsr(P_new, Hs, scenario, shape, extra, order)
        pen = penalty.value(P_new) if penalty is not None else 0.0
        obj = val - pen
        if prev_obj is not None and obj < prev_obj:
            log.debug("AO step rejected at iteration %d (%.3e below incumbent)", n, prev_obj - obj)
            res.converged = True
            break
        P = P_new
        res.P, res.extra, res.common_splits = P, extra, splits
        res.awsr_trace.append(val)
        res.penalty_trace.append(pen)
        res.objective_trace.append(qobj)
        res.iters = n
        if prev_obj is not None and abs(obj - prev_obj) <= tol:
            res.converged = True
            break
        prev_obj = obj
    res.P = res.P * scale
    return res


def optimize_awsr(scenario: Scenario, saa, h_est: np.ndarray, mode: Optional[str] = None,
                  max_iters: Optional[int] = None) -> AoResult:
    """Communication-only AWSR maximization.

    RSMA contains SDMA as the special case ``p_c = 0``, so RSMA is also
    started from the optimized SDMA precoder and the better of the two
    starts is kept.  Since the AO never decreases the AWSR, the result is at
    least as good as the SDMA optimum.
    """
    mode = mode or scenario.system.access_mode
    pt = scenario.system.total_power
    first = run_ao(scenario, saa, mrt_svd_init(h_est, pt, mode), mode=mode, max_iters=max_iters)
    if mode != "RSMA":
        return first
    sdma = run_ao(scenario, saa, mrt_svd_init(h_est, pt, "SDMA"), mode="SDMA", max_iters=max_iters)
    second = run_ao(scenario, saa, sdma.P, mode="RSMA", max_iters=max_iters)
    return max((first, second), key=lambda r: r.awsr_trace[-1] if r.awsr_trace else -np.inf)

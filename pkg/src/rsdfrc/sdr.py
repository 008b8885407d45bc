"""Beampattern-matching u-update through a semidefinite relaxation.

The relaxed problem is::

    min  lam * sum_m (alpha Pd(theta_m) - a_m^H B a_m)^2
         + rho/2 (tr Q - 2 Re{p^H d_hat} - 1)
    s.t. Q = [[R, p], [p^H, 1]] >= 0,  diag(B) = Pt / N,  alpha >= 1e-6

with ``B = sum_k D_k R D_k^H`` the transmit covariance.  Two liftings are
available.  ``"full"`` keeps the whole ``Q``.  ``"compact"`` only keeps
``[[B, P], [P^H, I]] >= 0`` (that is ``B >= P P^H``), which has the same
optimal value and optimal ``(alpha, p, B)``: any feasible ``B`` and ``P``
extend to a full ``R`` by putting ``B - P P^H`` in the first diagonal block.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import conic
from .radar import steering_matrix
from .scenario import Scenario

__all__ = [
    "SdrFailure",
    "SdrVariables",
    "SdrResult",
    "solve_sdr",
    "extract_precoder",
    "vec_precoder",
    "unvec_precoder",
    "stack_vector",
    "unstack_vector",
    "sdr_objective",
    "ALPHA_MIN",
]

ALPHA_MIN = 1e-6


class SdrFailure(RuntimeError):
    """The conic solver failed on the SDR; ``dump`` holds the problem text."""

    def __init__(self, message, dump=""):
        super().__init__(message)
        self.dump = dump


# --------------------------------------------------------------------------- layout helpers

def vec_precoder(P: np.ndarray) -> np.ndarray:
    """Column-stacked vec(P) = [p_c; p_1; ...; p_K]."""
    return np.asarray(P).reshape(-1, order="F")


def unvec_precoder(p: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(p).reshape(n, -1, order="F")


def stack_vector(alpha: float, common: np.ndarray, P: np.ndarray) -> np.ndarray:
    """ADMM vector [alpha; common-rate slots; vec(P)]."""
    return np.concatenate([[alpha], np.asarray(common, dtype=complex), vec_precoder(P)])


def unstack_vector(u: np.ndarray, n: int, k: int):
    u = np.asarray(u)
    return u[0].real, u[1:k + 1].real, unvec_precoder(u[k + 1:], n)


# --------------------------------------------------------------------------- results

@dataclass
class SdrVariables:
    alpha: float
    p: np.ndarray            # N(K+1) complex, column-stacked
    R: np.ndarray            # N(K+1) x N(K+1) Hermitian

    @property
    def Q(self) -> np.ndarray:
        n = len(self.p)
        Q = np.empty((n + 1, n + 1), dtype=complex)
        Q[:n, :n] = self.R
        Q[:n, n] = self.p
        Q[n, :n] = self.p.conj()
        Q[n, n] = 1.0
        return Q

    def covariance(self, n: int) -> np.ndarray:
        """B = sum_k D_k R D_k^H."""
        blocks = len(self.p) // n
        return sum(self.R[j * n:(j + 1) * n, j * n:(j + 1) * n] for j in range(blocks))


@dataclass
class SdrResult:
    variables: SdrVariables
    P: np.ndarray            # N x (K+1) precoder read from p
    objective: float
    mse: float
    lift: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        return self.variables.alpha


def sdr_objective(alpha, B, p, d_hat, lam, rho, spec, spacing=0.5) -> float:
    """Objective of the relaxed problem at a point (``tr Q = tr B + 1``)."""
    A = steering_matrix(spec.grid, B.shape[0], spacing)
    gains = np.real(np.einsum("im,ij,jm->m", A.conj(), B, A))
    mse = float(np.sum((alpha * spec.pattern - gains) ** 2))
    prox = 0.5 * rho * (np.real(np.trace(B)) - 2.0 * np.real(np.vdot(p, d_hat)))
    return lam * mse + prox


# --------------------------------------------------------------------------- Hermitian parameterization

class _HermParams:
    """Real coordinates of an m x m Hermitian matrix: diagonal, then Re and Im of the upper part."""

    def __init__(self, m: int, offset: int):
        self.m = m
        self.offset = offset
        iu, ju = np.triu_indices(m, 1)
        self.iu, self.ju = iu, ju
        self.n_off = len(iu)
        self.size = m + 2 * self.n_off
        self._pos = {(int(i), int(j)): t for t, (i, j) in enumerate(zip(iu, ju))}

    def diag(self, i):
        return self.offset + i

    def re(self, i, j):
        if i == j:
            return self.diag(i)
        a, b = min(i, j), max(i, j)
        return self.offset + self.m + self._pos[(a, b)]

    def im(self, i, j):
        """Index and sign of Im Z[i, j] (None on the diagonal)."""
        if i == j:
            return None, 0.0
        if i < j:
            return self.offset + self.m + self.n_off + self._pos[(i, j)], 1.0
        return self.offset + self.m + self.n_off + self._pos[(j, i)], -1.0

    def unpack(self, x):
        Z = np.zeros((self.m, self.m), dtype=complex)
        o = self.offset
        Z[np.arange(self.m), np.arange(self.m)] = x[o:o + self.m]
        vals = x[o + self.m:o + self.m + self.n_off] + 1j * x[o + self.m + self.n_off:o + self.size]
        Z[self.iu, self.ju] = vals
        Z[self.ju, self.iu] = vals.conj()
        return Z

    def psd_map(self, n_vars: int) -> sp.csr_matrix:
        """Sparse G with svec([[Re Z, -Im Z], [Im Z, Re Z]]) = G x."""
        m = self.m
        rows, cols, vals = [], [], []
        sq2 = np.sqrt(2.0)
        for r, (i, j) in enumerate(conic.svec_indices(2 * m)):
            f = 1.0 if i == j else sq2
            bi, bj = i // m, j // m
            a, b = i % m, j % m
            if bi == bj:
                rows.append(r)
                cols.append(self.re(a, b))
                vals.append(f)
            else:
                idx, sgn = self.im(a, b)
                if idx is None:
                    continue
                # upper-right block holds -Im, lower-left holds +Im
                s = -sgn if (bi == 0 and bj == 1) else sgn
                rows.append(r)
                cols.append(idx)
                vals.append(f * s)
        dim = len(conic.svec_indices(2 * m))
        return sp.csr_matrix((vals, (rows, cols)), shape=(dim, n_vars))


# --------------------------------------------------------------------------- solve

def _precoder_coords(hp: _HermParams, lift: str, n: int, k1: int):
    """For every entry of vec(P): (row, col) of Z holding it (row < col)."""
    coords = []
    for j in range(k1):
        for i in range(n):
            if lift == "compact":
                coords.append((i, n + j))
            else:
                coords.append((j * n + i, n * k1))
    return coords


def _covariance_coords(lift: str, n: int, k1: int):
    """Z positions summed into B[a, b]: list of blocks (offsets)."""
    return [0] if lift == "compact" else [j * n for j in range(k1)]


def _schur_shrink(B: np.ndarray, P: np.ndarray, iters: int = 60) -> float:
    """Largest s in [0, 1] with B - s^2 P P^H >= 0 (up to round-off).

    Interior-point solutions satisfy the Schur inequality only to solver
    accuracy; shrinking the precoder by a factor within that accuracy
    restores it exactly without touching the power constraint on ``B``.
    """
    B = 0.5 * (B + B.conj().T)
    PP = P @ P.conj().T
    floor = -1e-12 * max(1.0, float(np.abs(np.diag(B)).max()))

    def ok(s):
        return np.linalg.eigvalsh(B - s * s * PP).min() >= floor

    if ok(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def solve_sdr(v_next: np.ndarray, d_t: np.ndarray, rho: float, lam: float,
              radar_spec, scenario: Scenario, lift: Optional[str] = None,
              tol: Optional[float] = None) -> SdrResult:
    """Solve the relaxed beampattern subproblem.

    ``v_next`` and ``d_t`` are N x (K+1) precoder-shaped arrays (the consensus
    part of the ADMM vectors); the proximal target is ``d_hat = v_next + d_t``.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    sysc = scenario.system
    n = sysc.n_tx
    v_next = np.asarray(v_next, dtype=complex)
    k1 = v_next.shape[1]
    lift = lift or scenario.solver.sdr_lift
    if lift not in ("compact", "full"):
        raise ValueError(f"unknown SDR lift {lift!r}")
    d_hat = vec_precoder(v_next + np.asarray(d_t, dtype=complex))
    cap = sysc.total_power / n
    grid = radar_spec.grid
    pd = radar_spec.pattern
    n_grid = len(grid)
    A = steering_matrix(grid, n, sysc.spacing)

    m = n + k1 if lift == "compact" else n * k1 + 1
    hp = _HermParams(m, offset=1)
    e0 = 1 + hp.size
    n_vars = e0 + n_grid
    prob = conic.ConicProblem(n_vars)
    blocks = _covariance_coords(lift, n, k1)

    # objective: lam ||e||^2 + rho/2 tr B - rho Re{p^H d_hat}
    Pobj = sp.diags(np.r_[np.zeros(e0), 2.0 * lam * np.ones(n_grid)])
    q = np.zeros(n_vars)
    for o in blocks:
        for i in range(n):
            q[hp.diag(o + i)] += 0.5 * rho
    for t, (r, c) in enumerate(_precoder_coords(hp, lift, n, k1)):
        q[hp.re(r, c)] -= rho * d_hat[t].real
        idx, sgn = hp.im(r, c)
        q[idx] -= rho * sgn * d_hat[t].imag
    prob.set_objective(Pobj, q, -0.5 * rho, check=False)

    # residuals e_m - alpha Pd_m + a_m^H B a_m = 0
    L = sp.lil_matrix((n_grid, n_vars))
    for mth in range(n_grid):
        a = A[:, mth]
        L[mth, e0 + mth] = 1.0
        L[mth, 0] = -pd[mth]
        for o in blocks:
            for i in range(n):
                L[mth, hp.diag(o + i)] += 1.0
            for i in range(n):
                for j in range(i + 1, n):
                    w = np.conj(a[i]) * a[j]
                    L[mth, hp.re(o + i, o + j)] += 2.0 * w.real
                    idx, sgn = hp.im(o + i, o + j)
                    L[mth, idx] += -2.0 * w.imag * sgn
    prob.add_eq(L.tocsr(), np.zeros(n_grid))

    # per-antenna power and the fixed identity / corner entries
    rows, rhs = [], []
    for i in range(n):
        row = np.zeros(n_vars)
        for o in blocks:
            row[hp.diag(o + i)] = 1.0
        rows.append(row)
        rhs.append(cap)
    if lift == "compact":
        for a_ in range(n, m):
            row = np.zeros(n_vars)
            row[hp.diag(a_)] = 1.0
            rows.append(row)
            rhs.append(1.0)
            for b_ in range(a_ + 1, m):
                for idx in (hp.re(a_, b_), hp.im(a_, b_)[0]):
                    row = np.zeros(n_vars)
                    row[idx] = 1.0
                    rows.append(row)
                    rhs.append(0.0)
    else:
        row = np.zeros(n_vars)
        row[hp.diag(m - 1)] = 1.0
        rows.append(row)
        rhs.append(1.0)
    prob.add_eq(sp.csr_matrix(np.array(rows)), np.array(rhs))
    prob.add_le(sp.csr_matrix(([-1.0], ([0], [0])), shape=(1, n_vars)), [-ALPHA_MIN])
    prob.add_psd(hp.psd_map(n_vars), np.zeros(len(conic.svec_indices(2 * m))), 2 * m)

    t0 = time.perf_counter()
    tol = scenario.solver.conic_tol if tol is None else tol
    sol = conic.solve(prob, tol=tol, feas_tol=scenario.solver.feas_tol * max(1.0, cap))
    elapsed = time.perf_counter() - t0
    if not sol.ok:
        raise SdrFailure(f"SDR solve failed: {sol.status.value} ({sol.message})", prob.dump())

    x = sol.primal
    Z = hp.unpack(x)
    coords = _precoder_coords(hp, lift, n, k1)
    p = np.array([Z[r, c] for r, c in coords])
    if lift == "compact":
        B = Z[:n, :n]
        shrink = _schur_shrink(B, unvec_precoder(p, n))
        p = shrink * p
        P = unvec_precoder(p, n)
        R = np.outer(p, p.conj())
        R[:n, :n] += B - P @ P.conj().T
    else:
        R = Z[:-1, :-1]
        shrink = _schur_shrink(R, p[:, None])
        p = shrink * p
        P = unvec_precoder(p, n)
        B = sum(R[o:o + n, o:o + n] for o in blocks)
    alpha = max(float(x[0]), ALPHA_MIN)
    if lam == 0:
        # alpha does not enter the objective; report the least-squares scale
        gains = np.real(np.einsum("im,ij,jm->m", A.conj(), B, A))
        alpha = max(float(pd @ gains) / float(pd @ pd), ALPHA_MIN) if pd @ pd > 0 else 1.0
    vars_ = SdrVariables(alpha, p, 0.5 * (R + R.conj().T))
    gains = np.real(np.einsum("im,ij,jm->m", A.conj(), B, A))
    mse = float(np.sum((alpha * pd - gains) ** 2))
    Qm = vars_.Q
    sv = np.linalg.svd(Qm, compute_uv=False)
    schur = vars_.R - np.outer(p, p.conj())
    diag = {
        "status": sol.status.value,
        "solve_time": elapsed,
        "iterations": sol.iterations,
        "schur_gap": float(np.linalg.norm(schur)),
        "schur_eigmin": float(np.linalg.eigvalsh(schur).min()),
        "q_eigmin": float(np.linalg.eigvalsh(Qm).min()),
        "rank_ratio": float(sv[1] / sv[0]) if len(sv) > 1 and sv[0] > 0 else 0.0,
        "shrink": float(shrink),
        "power_residual": float(np.max(np.abs(np.real(np.diag(B)) - cap))),
        "max_violation": sol.max_violation,
    }
    obj = sdr_objective(alpha, B, p, d_hat, lam, rho, radar_spec, sysc.spacing)
    return SdrResult(vars_, P, obj, mse, lift, diag)


def extract_precoder(result: SdrResult, common_slots: int) -> np.ndarray:
    """ADMM u vector [alpha; zeros for the common-rate slots; p_u]."""
    return np.concatenate([[result.alpha], np.zeros(common_slots, dtype=complex), result.variables.p])

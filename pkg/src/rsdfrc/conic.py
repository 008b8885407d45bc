"""Small conic solver layer for the two problem shapes the optimizer emits.

Problems are stated over a real decision vector ``x``::

    minimize    0.5 x^T P x + q^T x + c0
    subject to  x^T F_i^T F_i x + a_i^T x + b_i <= 0      (convex quadratic)
                A_eq x == b_eq
                A_le x <= b_le
                h_j + G_j x  in  S_+  (svec, one block per entry)

Complex variables are lifted to ``(Re z, Im z)`` by the caller; see
:func:`hermitian_to_real` and :func:`complex_linear_to_real`.

The interior-point work is delegated to Clarabel.  Every returned solution
is re-checked here against the original constraints, so ``max_violation``
never relies on the solver's own report.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

import clarabel

__all__ = [
    "Status",
    "ConicProblem",
    "ConicSolution",
    "solve",
    "svec_indices",
    "svec",
    "smat",
    "hermitian_to_real",
    "complex_linear_to_real",
]

_SQRT2 = np.sqrt(2.0)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"
    NUMERICAL_FAILURE = "NumericalFailure"


def svec_indices(n: int) -> list[tuple[int, int]]:
    """Upper-triangle, column-major ordering used for PSD blocks."""
    return [(i, j) for j in range(n) for i in range(j + 1)]


def svec(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    return np.array([M[i, j] * (1.0 if i == j else _SQRT2) for i, j in svec_indices(n)])


def smat(v: np.ndarray, n: int) -> np.ndarray:
    M = np.zeros((n, n))
    for val, (i, j) in zip(v, svec_indices(n)):
        if i == j:
            M[i, i] = val
        else:
            M[i, j] = M[j, i] = val / _SQRT2
    return M


def hermitian_to_real(H: np.ndarray) -> np.ndarray:
    """Real symmetric S with z^H H z == x^T S x for x = [Re z; Im z]."""
    Hr, Hi = H.real, H.imag
    S = np.block([[Hr, -Hi], [Hi, Hr]])
    return 0.5 * (S + S.T)


def complex_linear_to_real(f: np.ndarray) -> np.ndarray:
    """Real vector a with Re{f^H z} == a^T [Re z; Im z]."""
    return np.concatenate([f.real, f.imag])


@dataclass
class _Quad:
    factor: np.ndarray
    lin: np.ndarray
    const: float


@dataclass
class _Psd:
    size: int
    G: sp.csr_matrix
    h: np.ndarray


@dataclass
class ConicProblem:
    """Convex QCQP / single-or-few-block SDP in a real variable vector."""

    n: int
    P: sp.spmatrix = None
    q: np.ndarray = None
    c0: float = 0.0
    quad: list = field(default_factory=list)
    eq: list = field(default_factory=list)
    le: list = field(default_factory=list)
    psd: list = field(default_factory=list)

    def __post_init__(self):
        if self.P is None:
            self.P = sp.csc_matrix((self.n, self.n))
        else:
            self.P = sp.csc_matrix(self.P)
        if self.q is None:
            self.q = np.zeros(self.n)
        self.q = np.asarray(self.q, dtype=float)

    def set_objective(self, P=None, q=None, c0: float = 0.0, check: bool = True):
        if P is not None:
            P = sp.csc_matrix(P)
            P = 0.5 * (P + P.T)
            if check and self.n <= 1500:
                eigmin = np.linalg.eigvalsh(P.toarray()).min() if self.n else 0.0
                if eigmin < -1e-9 * max(1.0, abs(P).max()):
                    raise ValueError(f"objective matrix is not PSD (eigmin={eigmin:.3e})")
            self.P = P
        if q is not None:
            self.q = np.asarray(q, dtype=float)
        self.c0 = float(c0)

    def add_quadratic(self, Q=None, a=None, b: float = 0.0, factor=None):
        """Add ``x^T Q x + a^T x + b <= 0``; give ``Q`` (PSD) or ``factor`` F with Q = F^T F."""
        if factor is None:
            Q = np.asarray(Q, dtype=float)
            Q = 0.5 * (Q + Q.T)
            w, V = np.linalg.eigh(Q)
            if w.min() < -1e-9 * max(1.0, np.abs(w).max()):
                raise ValueError(f"quadratic constraint is not convex (eigmin={w.min():.3e})")
            keep = w > 1e-14 * max(1.0, np.abs(w).max())
            factor = (V[:, keep] * np.sqrt(w[keep])).T
        factor = np.atleast_2d(np.asarray(factor, dtype=float))
        if factor.shape[1] != self.n:
            raise ValueError("factor has wrong column count")
        a = np.zeros(self.n) if a is None else np.asarray(a, dtype=float)
        self.quad.append(_Quad(factor, a, float(b)))

    def add_eq(self, A, b):
        A = sp.csr_matrix(np.atleast_2d(A) if not sp.issparse(A) else A)
        self.eq.append((A, np.atleast_1d(np.asarray(b, dtype=float))))

    def add_le(self, A, b):
        A = sp.csr_matrix(np.atleast_2d(A) if not sp.issparse(A) else A)
        self.le.append((A, np.atleast_1d(np.asarray(b, dtype=float))))

    def add_psd(self, G, h, size: int):
        """Add ``smat(h + G x) >= 0`` for a ``size`` x ``size`` symmetric block."""
        m = size * (size + 1) // 2
        G = sp.csr_matrix(G)
        if G.shape != (m, self.n) or len(h) != m:
            raise ValueError("psd block has inconsistent svec dimensions")
        self.psd.append(_Psd(size, G, np.asarray(h, dtype=float)))

    # ------------------------------------------------------------------ checks
    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ (self.P @ x) + self.q @ x + self.c0)

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint violation of ``x`` (0 when feasible)."""
        v = 0.0
        for qc in self.quad:
            Fx = qc.factor @ x
            v = max(v, Fx @ Fx + qc.lin @ x + qc.const)
        for A, b in self.eq:
            if len(b):
                v = max(v, np.abs(A @ x - b).max())
        for A, b in self.le:
            if len(b):
                v = max(v, (A @ x - b).max())
        for blk in self.psd:
            M = smat(blk.h + blk.G @ x, blk.size)
            v = max(v, -np.linalg.eigvalsh(M).min())
        return float(max(v, 0.0))

    def dump(self) -> str:
        """Self-describing text dump for cross-solver debugging."""
        lines = [f"variables {self.n}", f"objective_const {self.c0!r}"]
        P = sp.coo_matrix(self.P)
        lines.append(f"P nnz {P.nnz}")
        lines += [f"  {i} {j} {v!r}" for i, j, v in zip(P.row, P.col, P.data)]
        lines.append("q " + " ".join(repr(float(v)) for v in self.q))
        for k, qc in enumerate(self.quad):
            lines.append(f"quad {k} rank {qc.factor.shape[0]} const {qc.const!r}")
            lines.append("  lin " + " ".join(repr(float(v)) for v in qc.lin))
            for row in qc.factor:
                lines.append("  F " + " ".join(repr(float(v)) for v in row))
        for tag, blocks in (("eq", self.eq), ("le", self.le)):
            for A, b in blocks:
                A = sp.coo_matrix(A)
                lines.append(f"{tag} rows {A.shape[0]} nnz {A.nnz}")
                lines += [f"  {i} {j} {v!r}" for i, j, v in zip(A.row, A.col, A.data)]
                lines.append("  rhs " + " ".join(repr(float(v)) for v in b))
        for blk in self.psd:
            G = sp.coo_matrix(blk.G)
            lines.append(f"psd size {blk.size} nnz {G.nnz}")
            lines += [f"  {i} {j} {v!r}" for i, j, v in zip(G.row, G.col, G.data)]
            lines.append("  h " + " ".join(repr(float(v)) for v in blk.h))
        return "\n".join(lines) + "\n"


@dataclass
class ConicSolution:
    primal: np.ndarray
    objective_value: float
    status: Status
    max_violation: float
    iterations: int = 0
    solve_time: float = 0.0
    certificate: Optional[np.ndarray] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == Status.OPTIMAL


def _assemble(prob: ConicProblem):
    rows, rhs, cones = [], [], []
    eq_A = [A for A, b in prob.eq if A.shape[0]]
    if eq_A:
        rows.append(sp.vstack(eq_A))
        rhs.append(np.concatenate([b for A, b in prob.eq if A.shape[0]]))
        cones.append(clarabel.ZeroConeT(rows[-1].shape[0]))
    le_A = [A for A, b in prob.le if A.shape[0]]
    if le_A:
        rows.append(sp.vstack(le_A))
        rhs.append(np.concatenate([b for A, b in prob.le if A.shape[0]]))
        cones.append(clarabel.NonnegativeConeT(rows[-1].shape[0]))
    for qc in prob.quad:
        # ||F x||^2 <= -w with w = a^T x + b  <=>  ||(F x, (1+w)/2)|| <= (1-w)/2
        a = qc.lin
        block = sp.vstack([
            sp.csr_matrix(0.5 * a[None, :]),
            sp.csr_matrix(-qc.factor),
            sp.csr_matrix(-0.5 * a[None, :]),
        ])
        rows.append(block)
        rhs.append(np.concatenate([[0.5 * (1.0 - qc.const)],
                                   np.zeros(qc.factor.shape[0]),
                                   [0.5 * (1.0 + qc.const)]]))
        cones.append(clarabel.SecondOrderConeT(qc.factor.shape[0] + 2))
    for blk in prob.psd:
        rows.append(-blk.G)
        rhs.append(blk.h)
        cones.append(clarabel.PSDTriangleConeT(blk.size))
    if rows:
        A = sp.csc_matrix(sp.vstack(rows))
        b = np.concatenate(rhs)
    else:
        A = sp.csc_matrix((0, prob.n))
        b = np.zeros(0)
    return A, b, cones


def _run(P, q, A, b, cones, tol, max_iter):
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = int(max_iter)
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_ktratio = 1e-7
    return clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()


def solve(prob: ConicProblem, tol: float = 1e-8, max_iter: int = 200,
          feas_tol: float = 1e-6) -> ConicSolution:
    """Solve ``prob``; the result is re-verified against the original constraints.

    When the interior-point method stalls on numerics at ``tol`` it is rerun
    at looser tolerances (two decades at a time, down to 1e-5); a retry is
    only accepted if the re-verified violation stays within ``feas_tol``.
    """
    A, b, cones = _assemble(prob)
    P = sp.triu(sp.csc_matrix(prob.P), format="csc")
    ladder = [tol] + [t for t in (tol * 1e2, tol * 1e4) if t <= 1e-5 and t > tol]
    out = None
    for attempt in ladder:
        out = _solve_once(prob, P, A, b, cones, attempt, max_iter, feas_tol)
        if out.status in (Status.OPTIMAL, Status.INFEASIBLE):
            break
    return out


def _solve_once(prob, P, A, b, cones, tol, max_iter, feas_tol) -> ConicSolution:
    res = _run(P, prob.q, A, b, cones, tol, max_iter)
    name = str(res.status)
    x = np.asarray(res.x, dtype=float)
    if name in ("Solved", "AlmostSolved"):
        status = Status.OPTIMAL
    elif name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        status = Status.INFEASIBLE
    elif name == "MaxIterations":
        status = Status.MAX_ITER
    else:
        status = Status.NUMERICAL_FAILURE
    viol = prob.violation(x) if np.all(np.isfinite(x)) else np.inf
    if status == Status.OPTIMAL and viol > feas_tol:
        status = Status.NUMERICAL_FAILURE
    cert = np.asarray(res.z, dtype=float) if status == Status.INFEASIBLE else None
    obj = prob.objective(x) if np.all(np.isfinite(x)) else np.nan
    return ConicSolution(
        primal=x,
        objective_value=obj,
        status=status,
        max_violation=viol,
        iterations=int(res.iterations),
        solve_time=float(res.solve_time),
        certificate=cert,
        message=f"{name} (tol {tol:g})",
    )

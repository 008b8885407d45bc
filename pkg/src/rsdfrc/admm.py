"""ADMM driver coupling the communication (v) and radar (u) subproblems.

Both sides share the precoder entries ``vec(P)``; ``d`` is the scaled dual.
All internal work happens in noise-normalized units (noise power 1, total
power ``Pt / noise``), which is the scale at which the trade-off weight
``lambda`` is meant to be read.  Reported beampattern errors use the same
units; the returned precoder is in the caller's units.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import radar
from .channel import crandn
from .rates import noma_order
from .scenario import Scenario
from .sdr import solve_sdr, stack_vector
from .wmmse import Penalty, awsr, mode_adapters, mrt_svd_init, run_ao, scale_rows

__all__ = ["AdmmState", "OptimizationResult", "residuals", "run_admm", "normalized"]

log = logging.getLogger(__name__)


def normalized(scenario: Scenario) -> Scenario:
    """Same scenario with unit user noise and power rescaled accordingly."""
    s = scenario.system
    return replace(scenario, system=replace(s, total_power=s.total_power / s.noise_power_user,
                                            noise_power_user=1.0))


@dataclass
class AdmmState:
    v: np.ndarray            # [alpha; common slots; vec(P)] of the communication side
    u: np.ndarray            # same layout, radar side
    d: np.ndarray            # scaled dual, length N(K+1)
    r: float = np.inf
    q: float = np.inf
    iter: int = 0


@dataclass
class OptimizationResult:
    P_final: np.ndarray
    common_splits: np.ndarray
    alpha_final: float
    converged: bool
    iters: int
    awsr: float = 0.0
    rmse: float = 0.0
    mode: str = "RSMA"
    order: Optional[np.ndarray] = None
    traces: dict = field(default_factory=dict)


def residuals(v_p: np.ndarray, u_p: np.ndarray, u_prev: np.ndarray):
    """Primal residual ||v - u|| and dual residual ||u - u_prev|| (precoder entries)."""
    r = float(np.linalg.norm(np.ravel(v_p) - np.ravel(u_p)))
    q = float(np.linalg.norm(np.ravel(u_p) - np.ravel(u_prev)))
    return r, q


def _embed(Pcols: np.ndarray, cols: tuple, k1: int) -> np.ndarray:
    P = np.zeros((Pcols.shape[0], k1), dtype=complex)
    P[:, list(cols)] = Pcols
    return P


def run_admm(scenario: Scenario, h_est: np.ndarray, saa, radar_spec=None,
             rng: Optional[np.random.Generator] = None, mode: Optional[str] = None,
             max_iters: Optional[int] = None, P_init: Optional[np.ndarray] = None) -> OptimizationResult:
    """Alternate AO (communication) and SDR (radar) updates until both residuals
    drop below ``admm_tol``.

    Non-convergent runs return the iterate with the best trade-off objective
    ``lambda * MSE - AWSR`` and ``converged=False``.
    """
    sysc = scenario.system
    sol = scenario.solver
    mode = mode or sysc.access_mode
    spec = radar_spec or scenario.radar
    rng = rng if rng is not None else np.random.default_rng(sol.rng_seed)
    max_iters = sol.max_admm_iters if max_iters is None else max_iters
    N, K = sysc.n_tx, sysc.n_users
    k1 = K + 1
    lam, rho, nu = sysc.lambda_reg, sol.admm_penalty, sol.admm_tol
    noise = sysc.noise_power_user
    scale = np.sqrt(noise)
    sc = normalized(scenario)
    pt = sc.system.total_power
    Hs = np.asarray(getattr(saa, "realizations", saa))
    order = noma_order(h_est) if mode == "NOMA" else None
    shape = mode_adapters(mode, K, order)
    cols = shape.columns

    # precoder entries only in the active columns take part in the consensus
    P0 = mrt_svd_init(h_est, pt, mode) if P_init is None else np.asarray(P_init) / scale
    d = crandn(rng, (N, len(cols)), 1.0)
    v_P = P0.copy()
    u_P = scale_rows(P0[:, list(cols)], pt)
    alpha = radar.optimal_scale(_embed(u_P, cols, k1), spec, sysc.spacing)
    extra = np.zeros(shape.n_extra)

    tr = {k: [] for k in ("r", "q", "awsr", "mse", "rmse", "objective", "ao_iters",
                          "schur_eigmin", "power_residual", "rank_ratio")}
    best = None
    converged = False
    t = 0
    for t in range(1, max_iters + 1):
        center = _embed(u_P - d, cols, k1)
        ao = run_ao(sc, Hs, v_P, penalty=Penalty(center, rho) if rho > 0 else None, mode=mode,
                    max_iters=sol.max_ao_iters if t == 1 else sol.inner_ao_iters, order=order)
        v_P, extra = ao.P, ao.extra
        v_cols = v_P[:, list(cols)]

        res = solve_sdr(v_cols, d, rho, lam, spec, sc)
        u_prev = u_P
        u_P, alpha = res.P, res.alpha
        d = d + v_cols - u_P
        r, q = residuals(v_cols, u_P, u_prev)

        P_feas = _embed(scale_rows(u_P, pt), cols, k1)
        rate, splits = awsr(P_feas, Hs, sc, shape, extra, order)
        a_opt = radar.optimal_scale(P_feas, spec, sysc.spacing)
        mse = radar.beampattern_mse(P_feas, a_opt, spec, sysc.spacing)
        obj = lam * mse - rate
        for key, val in (("r", r), ("q", q), ("awsr", rate), ("mse", mse),
                         ("rmse", float(np.sqrt(mse))), ("objective", obj), ("ao_iters", ao.iters),
                         ("schur_eigmin", res.diagnostics["schur_eigmin"]),
                         ("power_residual", res.diagnostics["power_residual"]),
                         ("rank_ratio", res.diagnostics["rank_ratio"])):
            tr[key].append(val)
        if best is None or obj < best[0]:
            best = (obj, P_feas, splits, a_opt, rate, mse)
        log.debug("admm %d: r=%.3e q=%.3e awsr=%.4f mse=%.4e", t, r, q, rate, mse)
        if r <= nu and q <= nu:
            converged = True
            best = (obj, P_feas, splits, a_opt, rate, mse)
            break

    _, P_fin, splits, a_fin, rate, mse = best
    state = AdmmState(stack_vector(alpha, -extra[:K] if mode == "RSMA" else np.zeros(K), v_P),
                      stack_vector(alpha, np.zeros(K), _embed(u_P, cols, k1)),
                      d.reshape(-1, order="F"), tr["r"][-1], tr["q"][-1], t)
    tr["state"] = state
    return OptimizationResult(P_fin * scale, splits, a_fin, converged, t, rate, float(np.sqrt(mse)),
                              mode, order, tr)

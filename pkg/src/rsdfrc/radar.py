"""Radar-side metrics: steering vectors, beampatterns, MSE, RMI and CRB."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Callable

import numpy as np

from .scenario import SPEED_OF_LIGHT, RadarSpec

__all__ = [
    "SingularFisher",
    "steering_vector",
    "steering_matrix",
    "transmit_beampattern",
    "beampattern_mse",
    "optimal_scale",
    "beampattern_rmse",
    "radar_mutual_information",
    "friis_gain",
    "target_gain",
    "fisher_matrix",
    "crb_total",
    "desired_pattern",
    "PATTERN_PROFILES",
    "write_beampattern_csv",
]


class SingularFisher(ArithmeticError):
    """The Fisher information is singular: the target is unidentifiable."""


def steering_vector(theta: float, n: int, spacing: float = 0.5) -> np.ndarray:
    if abs(theta) > 90:
        raise ValueError("steering angle must lie in [-90, 90] degrees")
    phase = 2.0 * np.pi * spacing * np.sin(np.deg2rad(theta))
    return np.exp(1j * phase * np.arange(n))


def steering_matrix(angles, n: int, spacing: float = 0.5) -> np.ndarray:
    """N x M matrix whose columns are steering vectors for ``angles`` (degrees)."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    phase = 2.0 * np.pi * spacing * np.sin(np.deg2rad(angles))
    return np.exp(1j * np.outer(np.arange(n), phase))


def transmit_beampattern(P: np.ndarray, spec: RadarSpec, spacing: float = 0.5,
                         angles=None) -> np.ndarray:
    """Gains a^H(theta) P P^H a(theta) on the radar grid (or on ``angles``)."""
    P = np.atleast_2d(P)
    grid = spec.grid if angles is None else np.atleast_1d(angles)
    A = steering_matrix(grid, P.shape[0], spacing)
    proj = A.conj().T @ P
    return np.sum(np.abs(proj) ** 2, axis=1)


def beampattern_mse(P: np.ndarray, alpha: float, spec: RadarSpec, spacing: float = 0.5) -> float:
    if alpha <= 0:
        raise ValueError("beampattern scale must be positive")
    gains = transmit_beampattern(P, spec, spacing)
    return float(np.sum((alpha * spec.pattern - gains) ** 2))


def optimal_scale(P: np.ndarray, spec: RadarSpec, spacing: float = 0.5,
                  floor: float = 1e-6) -> float:
    """Least-squares scale of the desired pattern for precoder ``P``."""
    pd = spec.pattern
    gains = transmit_beampattern(P, spec, spacing)
    denom = float(pd @ pd)
    if denom == 0:
        return 1.0
    return max(float(pd @ gains) / denom, floor)


def beampattern_rmse(P: np.ndarray, spec: RadarSpec, spacing: float = 0.5) -> float:
    """Root of the MSE at the best pattern scale."""
    return float(np.sqrt(beampattern_mse(P, optimal_scale(P, spec, spacing), spec, spacing)))


def friis_gain(target_range: float, f_c: float, two_way: bool = False) -> float:
    """Free-space power gain (c / (4 pi R f_c))^2, squared again for two-way."""
    if target_range <= 0:
        raise ValueError("range must be positive")
    g = (SPEED_OF_LIGHT / (4.0 * np.pi * target_range * f_c)) ** 2
    return g * g if two_way else g


def target_gain(spec: RadarSpec) -> complex:
    """Complex reflection/path coefficient h0 of the target."""
    amp = np.sqrt(friis_gain(spec.target_range, spec.carrier_freq, spec.two_way_pathloss))
    return complex(amp * np.exp(1j * spec.target_phase))


def _gain_at_target(P, spec, spacing):
    return float(transmit_beampattern(P, spec, spacing, angles=[spec.target_angle])[0])


def radar_mutual_information(P: np.ndarray, spec: RadarSpec, spacing: float = 0.5, *,
                             method: str = "scalar") -> float:
    """Radar mutual information in bits.

    ``method="det"`` evaluates the log-determinant with the full N x N sensing
    channel; ``"scalar"`` uses the rank-one reduction.
    """
    n = np.atleast_2d(P).shape[0]
    h0 = target_gain(spec)
    if method == "scalar":
        pt0 = _gain_at_target(P, spec, spacing)
        return float(np.log2(1.0 + abs(h0) ** 2 * n * pt0 / spec.rx_noise_power))
    if method == "det":
        a = steering_vector(spec.target_angle, n, spacing)
        tau0 = 2.0 * spec.target_range / SPEED_OF_LIGHT
        ph = np.exp(-2j * np.pi * spec.carrier_freq * (tau0 - spec.target_speed / SPEED_OF_LIGHT))
        Hr = h0 * ph * np.outer(a, a.conj())
        M = np.eye(n) + Hr.conj().T @ P @ P.conj().T @ Hr / spec.rx_noise_power
        sign, logdet = np.linalg.slogdet(M)
        return float(logdet / np.log(2.0))
    raise ValueError(f"unknown RMI method {method!r}")


def fisher_matrix(P: np.ndarray, spec: RadarSpec, spacing: float = 0.5) -> np.ndarray:
    """4 x 4 real Fisher matrix for [Re h0, Im h0, tau0, v0].

    Every block is the scalar ``a_r^H a_r * P_t(theta0)`` times the factors
    of the delay/Doppler phase derivatives.
    """
    n = np.atleast_2d(P).shape[0]
    c = SPEED_OF_LIGHT
    h0 = target_gain(spec)
    b = 2.0 * np.pi * spec.carrier_freq * h0
    F1 = complex(n * _gain_at_target(P, spec, spacing))
    F2 = -1j * b * F1
    F3 = 1j * (b / c) * F1
    F4 = -(b ** 2) * F1
    F5 = (b ** 2) / c * F1
    F6 = -((b / c) ** 2) * F1
    F = np.array([
        [F1.real, -F1.imag, F2.real, F3.real],
        [F1.imag, F1.real, F2.imag, F3.imag],
        [F2.real, F2.imag, F4.real, F5.real],
        [F3.real, F3.imag, F5.real, F6.real],
    ])
    return 2.0 / np.sqrt(spec.rx_noise_power) * F


def crb_total(P: np.ndarray, spec: RadarSpec, spacing: float = 0.5,
              cond_limit: float = 1e12) -> float:
    """Frobenius norm of the (pseudo-)inverse Fisher matrix.

    Delay and velocity enter the echo only through ``tau0 - v0 / c``, so the
    Fisher matrix always has the null direction ``[0, 0, 1, c]``.  The bound is
    computed on the orthogonal complement of that direction, which is the
    Moore-Penrose inverse of the 4 x 4 matrix.  Raises :class:`SingularFisher`
    when the remaining 3 x 3 block is itself singular (no power towards the
    target, or a vanishing target gain).
    """
    F = fisher_matrix(P, spec, spacing)
    c = SPEED_OF_LIGHT
    w = np.array([0.0, 0.0, c, -1.0]) / np.hypot(c, 1.0)
    Q = np.column_stack([[1.0, 0, 0, 0], [0, 1.0, 0, 0], w])
    A = Q.T @ F @ Q
    d = np.abs(np.diag(A))
    if not np.all(np.isfinite(A)) or np.any(d == 0):
        raise SingularFisher("Fisher matrix has a zero diagonal entry")
    s = 1.0 / np.sqrt(d)
    As = A * np.outer(s, s)
    if np.linalg.cond(As) > cond_limit:
        raise SingularFisher(f"Fisher matrix condition number exceeds {cond_limit:g}")
    inv = np.outer(s, s) * np.linalg.inv(As)
    return float(np.linalg.norm(inv, "fro"))


def _rect(spec: RadarSpec) -> np.ndarray:
    return (np.abs(spec.grid - spec.target_angle) <= spec.beam_halfwidth + 1e-9).astype(float)


def _cos(spec: RadarSpec) -> np.ndarray:
    x = (spec.grid - spec.target_angle) / spec.beam_halfwidth
    return np.where(np.abs(x) <= 1.0, np.cos(0.5 * np.pi * x) ** 2, 0.0)


PATTERN_PROFILES: dict[str, Callable[[RadarSpec], np.ndarray]] = {"rect": _rect, "cos": _cos}


def desired_pattern(spec: RadarSpec) -> np.ndarray:
    if spec.beam_halfwidth <= 0:
        raise ValueError("beam_halfwidth must be positive")
    return PATTERN_PROFILES[spec.pattern_profile](spec)


def write_beampattern_csv(path, P: np.ndarray, spec: RadarSpec, spacing: float = 0.5) -> Path:
    gains = transmit_beampattern(P, spec, spacing)
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["angle_deg", "gain_linear"])
        for a, g in zip(spec.grid, gains):
            wr.writerow([f"{a:.6g}", f"{g:.12e}"])
    return path

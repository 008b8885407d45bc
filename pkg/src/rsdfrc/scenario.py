"""Experiment configuration: typed sections, validation and INI parsing.

Powers are accepted in dBm or watts at parse time and always stored as
linear watts.  ``validate`` never mutates its input; it returns a new frozen
:class:`Scenario` with derived fields (CSIT error variance, desired radar
pattern, user weights) filled in, and is idempotent.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import j0

__all__ = [
    "ACCESS_MODES",
    "MOBILITY_PROFILES",
    "SPEED_OF_LIGHT",
    "ConfigError",
    "SystemConfig",
    "MobilityConfig",
    "SolverConfig",
    "RadarSpec",
    "LlsConfig",
    "Scenario",
    "validate",
    "dbm_to_watt",
    "watt_to_dbm",
    "jakes_error_var",
    "profile",
    "load_config",
    "parse_config",
    "dump_config",
]

SPEED_OF_LIGHT = 3e8
ACCESS_MODES = ("RSMA", "SDMA", "NOMA")


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt) + 30.0


def jakes_error_var(corr: float, formula: str = "variance") -> float:
    """CSIT error variance implied by the Jakes time correlation ``corr``.

    ``"variance"`` gives ``1 - corr**2`` (the estimate has variance
    ``corr**2``); ``"sqrt"`` gives ``sqrt(1 - corr**2)``.  Neither reproduces
    both shipped mobility presets for one carrier, which is why profiles set
    the error variance directly.
    """
    c2 = min(float(corr) ** 2, 1.0)
    if formula == "variance":
        return 1.0 - c2
    if formula == "sqrt":
        return math.sqrt(1.0 - c2)
    raise ValueError(f"unknown Jakes error formula {formula!r}")


class ConfigError(ValueError):
    """Raised with one entry per violated field."""

    def __init__(self, errors: Sequence[tuple[str, str]]):
        self.errors = list(errors)
        super().__init__("; ".join(msg for _, msg in self.errors))


@dataclass(frozen=True)
class SystemConfig:
    n_tx: int = 8
    n_users: int = 4
    spacing: float = 0.5
    total_power: float = 0.1          # W (20 dBm)
    noise_power_user: float = 1e-3    # W (0 dBm)
    qos_rate: float = 0.1             # bps/Hz per user
    weights: Optional[tuple] = None   # filled with ones by validate
    lambda_reg: float = 1e-3
    access_mode: str = "RSMA"


@dataclass(frozen=True)
class MobilityConfig:
    sample_interval: float = 0.01     # s
    user_speed: float = 30 / 3.6      # m/s
    carrier_freq: float = 2e9         # Hz
    csit_error_var: Optional[float] = None
    error_formula: str = "variance"


@dataclass(frozen=True)
class SolverConfig:
    admm_penalty: float = 1.0
    admm_tol: float = 1e-4
    ao_tol: float = 1e-4
    max_admm_iters: int = 300
    max_ao_iters: int = 200
    saa_samples: int = 100
    rng_seed: int = 0
    conic_tol: float = 1e-8
    feas_tol: float = 1e-6
    # AO sweeps inside each ADMM v-update after the first one (warm started)
    inner_ao_iters: int = 5
    sdr_lift: str = "compact"


@dataclass(frozen=True)
class RadarSpec:
    angle_grid: tuple = tuple(float(a) for a in range(-90, 91))
    target_angle: float = 0.0
    desired_pattern: Optional[tuple] = None
    target_range: float = 50.0         # m
    target_speed: float = 3.0          # m/s
    carrier_freq: float = 2e9          # Hz
    rx_noise_power: float = 1e-18      # W (-150 dBm)
    beam_halfwidth: float = 8.0        # deg
    pattern_profile: str = "rect"
    two_way_pathloss: bool = False
    target_phase: float = 0.0          # rad, phase of the reflection coefficient

    @property
    def grid(self) -> np.ndarray:
        return np.asarray(self.angle_grid, dtype=float)

    @property
    def pattern(self) -> np.ndarray:
        if self.desired_pattern is None:
            from .radar import desired_pattern
            return desired_pattern(self)
        return np.asarray(self.desired_pattern, dtype=float)


@dataclass(frozen=True)
class LlsConfig:
    block_symbols: int = 256
    blocks_per_realization: int = 1
    design_snr_min_db: float = -2.0
    design_snr_max_db: float = 20.0
    crc_bits: int = 16
    rate_backoff: float = 0.0         # bps/Hz subtracted before the AMC lookup


@dataclass(frozen=True)
class Scenario:
    system: SystemConfig = field(default_factory=SystemConfig)
    mobility: MobilityConfig = field(default_factory=MobilityConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    radar: RadarSpec = field(default_factory=RadarSpec)
    lls: LlsConfig = field(default_factory=LlsConfig)

    @property
    def weights(self) -> np.ndarray:
        w = self.system.weights
        return np.ones(self.system.n_users) if w is None else np.asarray(w, dtype=float)

    @property
    def error_var(self) -> float:
        m = self.mobility
        if m.csit_error_var is not None:
            return float(m.csit_error_var)
        from .channel import jakes_corr
        rho = jakes_corr(m.user_speed, m.carrier_freq, m.sample_interval)
        return jakes_error_var(rho, m.error_formula)

    @property
    def time_corr(self) -> float:
        from .channel import jakes_corr
        m = self.mobility
        return jakes_corr(m.user_speed, m.carrier_freq, m.sample_interval)

    def with_mode(self, mode: str) -> "Scenario":
        return replace(self, system=replace(self.system, access_mode=mode))

    def with_lambda(self, lam: float) -> "Scenario":
        return replace(self, system=replace(self.system, lambda_reg=float(lam)))

    def with_error_var(self, var: Optional[float]) -> "Scenario":
        return replace(self, mobility=replace(self.mobility, csit_error_var=var))


MOBILITY_PROFILES = {
    "perfect": MobilityConfig(user_speed=0.0, csit_error_var=0.0),
    "low-mobility": MobilityConfig(user_speed=3 / 3.6, csit_error_var=0.417),
    "high-mobility": MobilityConfig(user_speed=30 / 3.6, csit_error_var=0.984),
}


def profile(scenario: Scenario, name: str) -> Scenario:
    """Return ``scenario`` with the named mobility preset applied."""
    try:
        mob = MOBILITY_PROFILES[name]
    except KeyError:
        raise ConfigError([("mobility", f"unknown mobility profile {name!r}")]) from None
    return replace(scenario, mobility=replace(scenario.mobility, user_speed=mob.user_speed,
                                              csit_error_var=mob.csit_error_var))


def _check(errors, cond, name, msg):
    if not cond:
        errors.append((name, msg))


def _finite(x) -> bool:
    try:
        return math.isfinite(float(x))
    except (TypeError, ValueError):
        return False


def validate(scenario: Scenario) -> Scenario:
    """Check every invariant; return a scenario with derived fields populated.

    Raises :class:`ConfigError` carrying one ``(field, message)`` per
    violation.
    """
    errors: list[tuple[str, str]] = []
    s, m, v, r, l = (scenario.system, scenario.mobility, scenario.solver,
                     scenario.radar, scenario.lls)

    _check(errors, isinstance(s.n_tx, int) and s.n_tx >= 1, "n_tx", "n_tx must be an integer >= 1")
    _check(errors, isinstance(s.n_users, int) and s.n_users >= 1, "n_users",
           "n_users must be an integer >= 1")
    _check(errors, _finite(s.spacing) and s.spacing > 0, "spacing", "spacing must be positive")
    _check(errors, _finite(s.total_power) and s.total_power > 0, "total_power",
           "total_power must be positive")
    _check(errors, _finite(s.noise_power_user) and s.noise_power_user > 0, "noise_power_user",
           "noise_power_user must be positive")
    _check(errors, _finite(s.qos_rate) and s.qos_rate >= 0, "qos_rate",
           "qos_rate must be nonnegative")
    _check(errors, _finite(s.lambda_reg) and s.lambda_reg >= 0, "lambda_reg",
           "lambda_reg must be nonnegative")
    _check(errors, s.access_mode in ACCESS_MODES, "access_mode",
           f"access_mode must be one of {', '.join(ACCESS_MODES)}")
    weights = s.weights
    if weights is not None:
        w = tuple(float(x) for x in weights)
        ok = all(_finite(x) and x > 0 for x in w)
        if isinstance(s.n_users, int):
            ok = ok and len(w) == s.n_users
        _check(errors, ok, "weights", "weights must be positive, one per user")
        weights = w
    elif isinstance(s.n_users, int) and s.n_users >= 1:
        weights = (1.0,) * s.n_users

    if m.csit_error_var is not None:
        _check(errors, _finite(m.csit_error_var) and 0 <= m.csit_error_var < 1,
               "csit_error_var", "csit_error_var must lie in [0, 1)")
    else:
        _check(errors, _finite(m.sample_interval) and m.sample_interval > 0, "sample_interval",
               "sample_interval must be positive")
        _check(errors, _finite(m.user_speed) and m.user_speed > 0, "user_speed",
               "user_speed must be positive")
        _check(errors, _finite(m.carrier_freq) and m.carrier_freq > 0, "carrier_freq",
               "carrier_freq must be positive")
    _check(errors, m.error_formula in ("variance", "sqrt"), "error_formula",
           "error_formula must be 'variance' or 'sqrt'")

    _check(errors, _finite(v.admm_penalty) and v.admm_penalty > 0, "admm_penalty",
           "admm_penalty must be positive")
    _check(errors, _finite(v.admm_tol) and v.admm_tol > 0, "admm_tol", "admm_tol must be positive")
    _check(errors, _finite(v.ao_tol) and v.ao_tol > 0, "ao_tol", "ao_tol must be positive")
    _check(errors, isinstance(v.max_admm_iters, int) and v.max_admm_iters >= 1, "max_admm_iters",
           "max_admm_iters must be an integer >= 1")
    _check(errors, isinstance(v.max_ao_iters, int) and v.max_ao_iters >= 1, "max_ao_iters",
           "max_ao_iters must be an integer >= 1")
    _check(errors, isinstance(v.inner_ao_iters, int) and v.inner_ao_iters >= 1, "inner_ao_iters",
           "inner_ao_iters must be an integer >= 1")
    _check(errors, isinstance(v.saa_samples, int) and v.saa_samples >= 1, "saa_samples",
           "saa_samples must be an integer >= 1")
    _check(errors, v.sdr_lift in ("full", "compact"), "sdr_lift",
           "sdr_lift must be 'full' or 'compact'")

    grid = np.asarray(r.angle_grid, dtype=float)
    grid_ok = (grid.ndim == 1 and grid.size >= 1 and np.all(np.isfinite(grid))
               and np.all(np.abs(grid) <= 90) and np.all(np.diff(grid) > 0))
    _check(errors, grid_ok, "angle_grid", "angle_grid must be strictly increasing within [-90, 90]")
    if grid_ok:
        _check(errors, bool(np.any(np.isclose(grid, r.target_angle, atol=1e-9))), "target_angle",
               "target_angle must be a grid point")
    _check(errors, _finite(r.beam_halfwidth) and r.beam_halfwidth > 0, "beam_halfwidth",
           "beam_halfwidth must be positive")
    _check(errors, _finite(r.target_range) and r.target_range > 0, "target_range",
           "target_range must be positive")
    _check(errors, _finite(r.carrier_freq) and r.carrier_freq > 0, "carrier_freq",
           "radar carrier_freq must be positive")
    _check(errors, _finite(r.rx_noise_power) and r.rx_noise_power > 0, "rx_noise_power",
           "rx_noise_power must be positive")
    _check(errors, r.pattern_profile in ("rect", "cos"), "pattern_profile",
           "pattern_profile must be 'rect' or 'cos'")
    pattern = r.desired_pattern
    if pattern is not None:
        pat = np.asarray(pattern, dtype=float)
        _check(errors, pat.shape == grid.shape and np.all(pat >= 0), "desired_pattern",
               "desired_pattern must be nonnegative with one entry per grid point")
        pattern = tuple(float(x) for x in pat)

    _check(errors, isinstance(l.block_symbols, int) and l.block_symbols >= 1, "block_symbols",
           "block_symbols must be an integer >= 1")
    _check(errors, isinstance(l.blocks_per_realization, int) and l.blocks_per_realization >= 1,
           "blocks_per_realization", "blocks_per_realization must be an integer >= 1")
    _check(errors, l.design_snr_min_db <= l.design_snr_max_db, "design_snr_min_db",
           "design_snr_min_db must not exceed design_snr_max_db")
    _check(errors, l.crc_bits == 16, "crc_bits", "only a 16-bit CRC is supported")
    _check(errors, _finite(l.rate_backoff) and l.rate_backoff >= 0, "rate_backoff",
           "rate_backoff must be nonnegative")

    if errors:
        raise ConfigError(errors)

    radar = replace(r, angle_grid=tuple(float(x) for x in grid))
    if pattern is None:
        from .radar import desired_pattern
        pattern = tuple(float(x) for x in desired_pattern(radar))
    radar = replace(radar, desired_pattern=pattern)
    mobility = m
    if m.csit_error_var is None:
        mobility = replace(m, csit_error_var=float(scenario.error_var))
    return Scenario(
        system=replace(s, weights=weights),
        mobility=mobility,
        solver=v,
        radar=radar,
        lls=l,
    )


# --------------------------------------------------------------------------- parsing

_SECTIONS = {
    "system": SystemConfig,
    "mobility": MobilityConfig,
    "solver": SolverConfig,
    "radar": RadarSpec,
    "lls": LlsConfig,
}
_POWER_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*(dbm|mw|w)?\s*$", re.IGNORECASE)
_POWER_FIELDS = {"total_power", "noise_power_user", "rx_noise_power"}


def _parse_power(text: str) -> float:
    m = _POWER_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse power {text!r}")
    val, unit = float(m.group(1)), (m.group(2) or "w").lower()
    if unit == "dbm":
        return dbm_to_watt(val)
    if unit == "mw":
        return val * 1e-3
    return val


def _parse_value(name: str, text: str, default):
    text = text.strip()
    if name in _POWER_FIELDS:
        return _parse_power(text)
    if name in ("weights", "angle_grid", "desired_pattern"):
        if text.lower() in ("none", ""):
            return None
        if name == "angle_grid" and ":" in text:
            lo, step, hi = (float(x) for x in text.split(":"))
            n = int(round((hi - lo) / step)) + 1
            return tuple(float(lo + i * step) for i in range(n))
        return tuple(float(x) for x in re.split(r"[,\s]+", text) if x)
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float) or default is None:
        if text.lower() in ("none", ""):
            return None
        return float(text)
    return text


def parse_config(text: str, base: Optional[Scenario] = None) -> Scenario:
    """Parse INI text with [system] [mobility] [solver] [radar] [lls] sections."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    cp.read_string(text)
    base = base or Scenario()
    errors = []
    parts = {}
    for section, cls in _SECTIONS.items():
        current = getattr(base, section)
        updates = {}
        if cp.has_section(section):
            names = {f.name: f for f in dataclasses.fields(cls)}
            for key, raw in cp.items(section):
                if key == "profile" and section == "mobility":
                    continue
                if key not in names:
                    errors.append((key, f"unknown key {key!r} in [{section}]"))
                    continue
                try:
                    updates[key] = _parse_value(key, raw, getattr(current, key))
                except ValueError as exc:
                    errors.append((key, f"{key}: {exc}"))
        parts[section] = replace(current, **updates)
    if errors:
        raise ConfigError(errors)
    scen = Scenario(**parts)
    for section in cp.sections():
        if section not in _SECTIONS and section != "harness":
            raise ConfigError([(section, f"unknown section [{section}]")])
    if cp.has_option("mobility", "profile"):
        scen = profile(scen, cp.get("mobility", "profile").strip())
    return scen


def load_config(path) -> Scenario:
    return parse_config(Path(path).read_text())


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(x)) for x in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(scenario: Scenario) -> str:
    """INI text that :func:`parse_config` reads back to an equal scenario."""
    lines = []
    for section in _SECTIONS:
        lines.append(f"[{section}]")
        part = getattr(scenario, section)
        for f in dataclasses.fields(part):
            lines.append(f"{f.name} = {_format_value(getattr(part, f.name))}")
        lines.append("")
    return "\n".join(lines)

"""Precoder optimization for RSMA-based dual-functional radar-communication transmitters."""

__version__ = "0.1.0"

from .scenario import (ACCESS_MODES, MOBILITY_PROFILES, ConfigError, LlsConfig, MobilityConfig,
                       RadarSpec, Scenario, SolverConfig, SystemConfig, dump_config, load_config,
                       parse_config, profile, validate)
from .channel import SaaSampleSet, draw_aged_channel, draw_saa_set, realization_rng
from .rates import average_rates, rate_report
from .radar import beampattern_rmse, crb_total, radar_mutual_information, transmit_beampattern
from .wmmse import InfeasibleQos, run_ao
from .sdr import solve_sdr
from .admm import OptimizationResult, run_admm

__all__ = [
    "__version__",
    "ACCESS_MODES", "MOBILITY_PROFILES", "ConfigError", "LlsConfig", "MobilityConfig", "RadarSpec",
    "Scenario", "SolverConfig", "SystemConfig", "dump_config", "load_config", "parse_config",
    "profile", "validate",
    "SaaSampleSet", "draw_aged_channel", "draw_saa_set", "realization_rng",
    "average_rates", "rate_report",
    "beampattern_rmse", "crb_total", "radar_mutual_information", "transmit_beampattern",
    "InfeasibleQos", "run_ao", "solve_sdr", "OptimizationResult", "run_admm",
]

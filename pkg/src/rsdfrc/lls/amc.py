"""Adaptive modulation and coding ladder."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .modulation import BITS_PER_SYMBOL

__all__ = ["ModCodePair", "DEFAULT_TABLE", "amc_select", "parse_table"]


@dataclass(frozen=True)
class ModCodePair:
    modulation: str
    code_rate: Fraction

    def __post_init__(self):
        if self.modulation not in BITS_PER_SYMBOL:
            raise ValueError(f"unknown modulation {self.modulation!r}")
        if not 0 < self.code_rate < 1:
            raise ValueError("code rate must lie in (0, 1)")

    @property
    def bits_per_symbol(self) -> int:
        return BITS_PER_SYMBOL[self.modulation]

    @property
    def spectral_efficiency(self) -> float:
        return float(self.bits_per_symbol * self.code_rate)

    def __str__(self) -> str:
        return f"{self.modulation} {self.code_rate}"


def parse_table(entries: Sequence[str]) -> tuple:
    """Parse entries like ``"16QAM 3/4"``."""
    out = []
    for e in entries:
        mod, rate = e.split()
        out.append(ModCodePair(mod, Fraction(rate)))
    return tuple(sorted(out, key=lambda m: (m.spectral_efficiency, m.bits_per_symbol)))


DEFAULT_TABLE = parse_table([
    "QPSK 1/4", "QPSK 1/2", "QPSK 3/4",
    "16QAM 1/2", "16QAM 3/4",
    "64QAM 1/2", "64QAM 2/3", "64QAM 3/4", "64QAM 5/6",
    "256QAM 3/4", "256QAM 5/6",
])


def amc_select(rate: float, table: Sequence[ModCodePair] = DEFAULT_TABLE) -> Optional[ModCodePair]:
    """Highest spectral efficiency not above ``rate``; ``None`` means no transmission.

    Ties in spectral efficiency go to the lower-order modulation (the stronger code).
    """
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    best = None
    for m in table:
        if m.spectral_efficiency <= rate:
            if best is None or m.spectral_efficiency > best.spectral_efficiency + 1e-12:
                best = m
    return best

"""Link-level simulation: QAM, polar coding, AMC and SIC receivers."""

from .amc import DEFAULT_TABLE, ModCodePair, amc_select, parse_table
from .link import (LinkPlan, LlsBlockResult, StreamPlan, plan_link, segment_lengths,
                   shannon_wsr, simulate_block, weighted_throughput)
from .modulation import BITS_PER_SYMBOL, constellation, demodulate_llr, modulate
from .polar import CRC_BITS, PolarCode, crc16, frozen_mask, polar_decode, polar_encode, polar_transform

__all__ = [
    "DEFAULT_TABLE", "ModCodePair", "amc_select", "parse_table",
    "LinkPlan", "LlsBlockResult", "StreamPlan", "plan_link", "segment_lengths",
    "shannon_wsr", "simulate_block", "weighted_throughput",
    "BITS_PER_SYMBOL", "constellation", "demodulate_llr", "modulate",
    "CRC_BITS", "PolarCode", "crc16", "frozen_mask", "polar_decode", "polar_encode", "polar_transform",
]

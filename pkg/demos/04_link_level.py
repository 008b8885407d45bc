"""From Shannon rates to delivered bits.

First a polar-code waterfall on AWGN, then a link-level run of optimized
precoders where each stream picks a modulation and code rate from its
true-channel rate, with and without a rate back-off margin.

    python demos/04_link_level.py
"""

from dataclasses import replace
from pathlib import Path

import numpy as np

from rsdfrc import harness
from rsdfrc.channel import crandn
from rsdfrc.lls import PolarCode, demodulate_llr, modulate
from rsdfrc.scenario import parse_config, validate

rng = np.random.default_rng(5)
code = PolarCode(256, 128, 2.0)
print("polar (256, 128) with CRC-16, QPSK, successive cancellation")
for snr_db in (0, 1, 2, 3, 4, 5):
    nv = 10 ** (-snr_db / 10)
    err = 0
    for _ in range(300):
        payload = rng.integers(0, 2, code.payload_bits, dtype=np.uint8)
        s = modulate(code.encode(payload), 2)
        _, ok = code.decode(demodulate_llr(s + crandn(rng, s.size, nv), nv, 2))
        err += not ok
    print(f"  Es/N0 {snr_db:+d} dB   BLER {err / 300:.3f}")

base = validate(parse_config((Path(__file__).parent / "desk.ini").read_text()))
for backoff in (0.0, 1.0):
    sc = replace(base, lls=replace(base.lls, rate_backoff=backoff))
    points, _ = harness.run_lls(sc, (1e-9,), ("RSMA", "SDMA", "NOMA"), ("low-mobility",),
                                realizations=2, blocks=2, seed=6)
    print(f"\nrate back-off {backoff} bps/Hz")
    for p in points:
        print(f"  {p.mode:5s} throughput {p.weighted_throughput:6.3f}   Shannon {p.ewsr:6.3f} "
              f"bits/channel use")

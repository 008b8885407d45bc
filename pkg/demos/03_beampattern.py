"""Transmit beampattern of the optimized precoder for a weak and a strong radar weight.

Prints a coarse text plot of the gain over angle together with the desired
pattern, so the effect of lambda is visible without plotting libraries.

    python demos/03_beampattern.py
"""

from dataclasses import replace
from pathlib import Path

import numpy as np

from rsdfrc import radar
from rsdfrc.admm import run_admm
from rsdfrc.channel import draw_aged_channel, draw_saa_set
from rsdfrc.scenario import parse_config, validate

base = validate(parse_config((Path(__file__).parent / "desk.ini").read_text()))
rng = np.random.default_rng(3)
sample = draw_aged_channel(base, rng)
saa = draw_saa_set(sample, base.solver.saa_samples, rng)
spec = base.radar
angles = np.arange(-90, 91, 10)
idx = np.searchsorted(spec.grid, angles)

for lam in (1e-9, 1e-1):
    sc = replace(base, system=replace(base.system, lambda_reg=lam))
    res = run_admm(sc, sample.h_est, saa, rng=np.random.default_rng(4))
    gains = radar.transmit_beampattern(res.P_final, spec, sc.system.spacing)
    alpha = radar.optimal_scale(res.P_final, spec, sc.system.spacing)
    print(f"\nlambda = {lam:g}: AWSR {res.awsr:.3f} bps/Hz, RMSE {res.rmse:.3f} (noise units)")
    top = gains.max()
    for a, i in zip(angles, idx):
        bar = "#" * int(round(40 * gains[i] / top))
        want = "*" if spec.pattern[i] > 0 else " "
        print(f"{a:+4d} {want} {bar}")
    print(f"target at {spec.target_angle:+.0f} deg, '*' marks the desired main lobe; "
          f"scale alpha = {alpha:.3g}")

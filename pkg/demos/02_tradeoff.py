"""Communication / sensing trade-off as the weight lambda grows.

Runs the ADMM optimizer over a few lambdas for every access mode on the
same channel draws and prints the expected weighted sum-rate next to the
beampattern RMSE and the two radar metrics.  Larger lambda buys a better
beampattern at the cost of rate.

    python demos/02_tradeoff.py
"""

from pathlib import Path

from rsdfrc import harness
from rsdfrc.scenario import parse_config, validate

scenario = validate(parse_config((Path(__file__).parent / "desk.ini").read_text()))
lambdas = (1e-9, 1e-3, 1e-1)
points, _ = harness.run_tradeoff(scenario, lambdas, ("RSMA", "SDMA", "NOMA"), ("low-mobility",),
                                 realizations=3, seed=11)

print(f"{'mode':6s} {'lambda':>8s} {'EWSR':>7s} {'RMSE':>8s} {'RMI':>8s} {'CRB':>10s}")
for p in points:
    print(f"{p.mode:6s} {p.lam:8.0e} {p.ewsr:7.3f} {p.rmse:8.3f} {p.rmi:8.3f} {p.crb:10.3e}")

"""Command-line entry point: ``python -m rsdfrc <command>``.

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, radar
from .scenario import ConfigError, Scenario, dump_config, parse_config, validate

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _split(text):
    return tuple(x for x in text.replace(",", " ").split() if x)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rsdfrc", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, sweep=True):
        p.add_argument("--config", type=Path, help="INI configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides [solver] rng_seed)")
        p.add_argument("--out-dir", type=Path, default=Path("results"))
        if sweep:
            p.add_argument("--realizations", type=int)
            p.add_argument("--modes", type=_split, help="comma list of RSMA,SDMA,NOMA")
            p.add_argument("--profiles", type=_split, help="comma list of mobility profiles")
            p.add_argument("--lambdas", type=lambda s: tuple(float(x) for x in _split(s)))
            p.add_argument("--workers", type=int)

    p = sub.add_parser("tradeoff", help="EWSR / beampattern-RMSE trade-off sweep")
    common(p)
    p = sub.add_parser("lls", help="weighted throughput from link-level simulation")
    common(p)
    p.add_argument("--blocks", type=int, help="blocks per realization")
    p = sub.add_parser("beampattern", help="dump the mean transmit beampattern of one point")
    common(p, sweep=False)
    p.add_argument("--realizations", type=int)
    p.add_argument("--mode", default="RSMA")
    p.add_argument("--profile", default="low-mobility")
    p.add_argument("--lambda", dest="lam", type=float, default=1e-3)
    p = sub.add_parser("validate-config", help="check a configuration and print it resolved")
    p.add_argument("--config", type=Path, required=True)
    return ap


def _load(args):
    text = args.config.read_text() if getattr(args, "config", None) else ""
    scen = validate(parse_config(text) if text else Scenario())
    opts = harness.harness_options(text)
    for name in ("realizations", "modes", "profiles", "lambdas", "workers", "blocks"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(opts, name, val)
    seed = args.seed if getattr(args, "seed", None) is not None else scen.solver.rng_seed
    return scen, opts, seed


def _finish(points, records, scen, seed, command, opts, out_dir, name) -> int:
    manifest = harness.RunManifest.create(scen, seed, command, vars(opts).copy()).finish(records)
    paths = harness.emit(points, out_dir, name, manifest=manifest, records=records)
    for p in paths:
        print(p)
    failed = [r for r in records if r.status == "failed"]
    if failed:
        print(f"{len(failed)} realization(s) hit solver failures; see {name}_manifest.json",
              file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate-config":
            scen = validate(parse_config(args.config.read_text()))
            harness.harness_options(args.config.read_text())
            print(dump_config(scen), end="")
            return EXIT_OK
        scen, opts, seed = _load(args)
    except ConfigError as exc:
        for field, msg in exc.errors:
            print(f"config error [{field}]: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "tradeoff":
            points, records = harness.run_tradeoff(scen, opts.lambdas, opts.modes, opts.profiles,
                                                   opts.realizations, seed, opts.workers)
            return _finish(points, records, scen, seed, "tradeoff", opts, args.out_dir, "tradeoff")
        if args.command == "lls":
            points, records = harness.run_lls(scen, opts.lambdas, opts.modes, opts.profiles,
                                              opts.realizations, opts.blocks, seed, opts.workers)
            return _finish(points, records, scen, seed, "lls", opts, args.out_dir, "lls")
        if args.command == "beampattern":
            return _beampattern(args, scen, opts, seed)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def _beampattern(args, scen, opts, seed) -> int:
    gains, n_ok = None, 0
    for idx in range(opts.realizations):
        rec, P = harness.solve_realization(scen, args.lam, args.mode, args.profile, idx, seed,
                                           keep_precoder=True)
        if rec.status == "failed":
            print(f"realization {idx}: {rec.message}", file=sys.stderr)
            return EXIT_SOLVER
        if P is None:
            continue
        g = radar.transmit_beampattern(P, scen.radar, scen.system.spacing)
        gains = g if gains is None else gains + g
        n_ok += 1
    if not n_ok:
        print("no feasible realization for this point", file=sys.stderr)
        return EXIT_SOLVER
    args.out_dir.mkdir(parents=True, exist_ok=True)
    path = args.out_dir / f"beampattern_{args.mode}_{args.profile}_{args.lam:g}.csv"
    lines = ["angle_deg,gain_linear"]
    lines += [f"{a!r},{float(g)!r}" for a, g in zip(scen.radar.grid.tolist(), gains / n_ok)]
    path.write_text("\n".join(lines) + "\n")
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

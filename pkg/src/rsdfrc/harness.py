"""Monte-Carlo sweeps over trade-off weight, access mode and mobility profile.

Every realization draws its channel, SAA set, ADMM dual start and LLS blocks
from generators seeded by ``(master_seed, realization_index, stream)``.  The
same index therefore sees the same channel for every lambda, mode and shard,
and results do not depend on how work is split across processes.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, radar
from .admm import run_admm
from .channel import draw_aged_channel, draw_saa_set, realization_rng
from .lls import plan_link, shannon_wsr, simulate_block
from .rates import rate_report
from .scenario import ACCESS_MODES, MOBILITY_PROFILES, Scenario, dump_config, profile, watt_to_dbm
from .wmmse import InfeasibleQos

__all__ = [
    "DEFAULT_LAMBDAS",
    "RealizationRecord",
    "TradeoffPoint",
    "LlsPoint",
    "RunManifest",
    "HarnessOptions",
    "harness_options",
    "solve_realization",
    "run_records",
    "aggregate_tradeoff",
    "run_tradeoff",
    "run_lls",
    "emit",
    "read_points_csv",
    "write_points_csv",
]

DEFAULT_LAMBDAS = (1e-9, 1e-7, 1e-5, 1e-3, 1e-2, 1e-1)
STREAM_CHANNEL, STREAM_SAA, STREAM_ADMM, STREAM_LLS = 0, 1, 2, 3


@dataclass
class HarnessOptions:
    realizations: int = 20
    lambdas: tuple = DEFAULT_LAMBDAS
    modes: tuple = ACCESS_MODES
    profiles: tuple = ("low-mobility", "high-mobility")
    blocks: int = 1
    workers: int = 1


def harness_options(text: str = "", base: Optional[HarnessOptions] = None) -> HarnessOptions:
    """Read the optional ``[harness]`` section of a config file."""
    opts = base or HarnessOptions()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(text)
    if not cp.has_section("harness"):
        return opts
    h = cp["harness"]
    split = lambda s: tuple(x for x in s.replace(",", " ").split() if x)
    return HarnessOptions(
        realizations=h.getint("realizations", opts.realizations),
        lambdas=tuple(float(x) for x in split(h["lambdas"])) if "lambdas" in h else opts.lambdas,
        modes=split(h["modes"]) if "modes" in h else opts.modes,
        profiles=split(h["profiles"]) if "profiles" in h else opts.profiles,
        blocks=h.getint("blocks", opts.blocks),
        workers=h.getint("workers", opts.workers),
    )


# --------------------------------------------------------------------------- per realization

@dataclass
class RealizationRecord:
    index: int
    lam: float
    mode: str
    profile: str
    status: str = "ok"                 # ok | infeasible | failed
    message: str = ""
    awsr: float = float("nan")         # SAA average weighted sum-rate
    wsr_true: float = float("nan")     # WSR on the true channel
    mse: float = float("nan")          # noise-normalized beampattern MSE
    rmi: float = float("nan")
    crb: float = float("nan")
    column_power: tuple = ()           # W per precoder column
    converged: bool = False
    throughput_bits: float = 0.0       # weighted delivered bits (LLS)
    symbols: int = 0
    blocks: int = 0
    shannon_wsr: float = float("nan")  # mean over LLS blocks


def _setup(scenario: Scenario, lam: float, mode: str, prof: str, index: int, seed: int):
    sc = profile(scenario, prof).with_lambda(lam).with_mode(mode)
    sample = draw_aged_channel(sc, realization_rng(seed, index, STREAM_CHANNEL))
    saa = draw_saa_set(sample, sc.solver.saa_samples, realization_rng(seed, index, STREAM_SAA))
    return sc, sample, saa


def solve_realization(scenario: Scenario, lam: float, mode: str, prof: str, index: int,
                      seed: int, blocks: int = 0, keep_precoder: bool = False):
    """Optimize one realization and evaluate every metric.

    With ``blocks > 0`` the precoder also goes through the link-level
    simulator.  Returns the record (and the precoder when requested).
    """
    rec = RealizationRecord(index, lam, mode, prof)
    P = None
    try:
        sc, sample, saa = _setup(scenario, lam, mode, prof, index, seed)
        res = run_admm(sc, sample.h_est, saa, rng=realization_rng(seed, index, STREAM_ADMM))
        P = res.P_final
        sysc = sc.system
        rec.awsr = res.awsr
        rec.mse = res.rmse ** 2
        rec.converged = res.converged
        rec.wsr_true = rate_report(P, sample.h_true, sysc.noise_power_user, mode, sc.weights,
                                   res.common_splits, res.order).wsr
        rec.rmi = radar.radar_mutual_information(P, sc.radar, sysc.spacing)
        try:
            rec.crb = radar.crb_total(P, sc.radar, sysc.spacing)
        except radar.SingularFisher:
            rec.crb = float("inf")
        rec.column_power = tuple(float(x) for x in np.sum(np.abs(P) ** 2, axis=0))
        if blocks:
            lls = sc.lls
            plan = plan_link(P, sample.h_true, sysc.noise_power_user, mode, res.common_splits,
                             res.order, symbols=lls.block_symbols,
                             design_snr_range=(lls.design_snr_min_db, lls.design_snr_max_db),
                             backoff=lls.rate_backoff)
            rng = realization_rng(seed, index, STREAM_LLS)
            out = [simulate_block(P, sample.h_true, sysc.noise_power_user, plan, rng)
                   for _ in range(blocks)]
            rec.throughput_bits = float(sum(sc.weights @ b.delivered for b in out))
            rec.symbols = int(sum(b.symbols for b in out))
            rec.blocks = len(out)
            rec.shannon_wsr = shannon_wsr(plan, sc.weights)
    except InfeasibleQos as exc:
        rec.status, rec.message = "infeasible", str(exc)
    except Exception as exc:   # solver failures are recorded, not fatal to the sweep
        rec.status, rec.message = "failed", f"{type(exc).__name__}: {exc}"
    return (rec, P) if keep_precoder else rec


def _task(args):
    return solve_realization(*args)


def run_records(scenario: Scenario, tasks: Sequence[tuple], seed: int, blocks: int = 0,
                workers: int = 1) -> list:
    """Solve ``(lam, mode, profile, index)`` tasks; output order follows ``tasks``."""
    jobs = [(scenario, lam, mode, prof, idx, seed, blocks) for lam, mode, prof, idx in tasks]
    if workers <= 1:
        return [_task(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_task, jobs, chunksize=1))


# --------------------------------------------------------------------------- aggregation

def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


@dataclass
class TradeoffPoint:
    lam: float
    mode: str
    mobility_profile: str
    ewsr: float
    rmse: float
    rmi: float
    crb: float
    power_dbm: tuple
    n_converged: int
    n_total: int
    n_infeasible: int = 0
    n_failed: int = 0
    wsr_true: float = float("nan")

    def row(self) -> dict:
        out = {"lambda": self.lam, "mode": self.mode, "mobility_profile": self.mobility_profile,
               "ewsr": self.ewsr, "wsr_true": self.wsr_true, "rmse": self.rmse, "rmi": self.rmi,
               "crb": self.crb}
        for j, p in enumerate(self.power_dbm):
            out["power_c_dbm" if j == 0 else f"power_{j}_dbm"] = p
        out.update(n_converged=self.n_converged, n_total=self.n_total,
                   n_infeasible=self.n_infeasible, n_failed=self.n_failed)
        return out


@dataclass
class LlsPoint:
    lam: float
    mode: str
    mobility_profile: str
    weighted_throughput: float
    rmse: float
    ewsr: float              # Shannon WSR of the same precoders on the simulated channels
    awsr: float              # SAA average weighted sum-rate from the optimizer
    n_blocks: int
    n_total: int
    n_infeasible: int = 0
    n_failed: int = 0

    def row(self) -> dict:
        return {"lambda": self.lam, "mode": self.mode, "mobility_profile": self.mobility_profile,
                "weighted_throughput": self.weighted_throughput, "rmse": self.rmse,
                "ewsr": self.ewsr, "awsr": self.awsr, "n_blocks": self.n_blocks,
                "n_total": self.n_total, "n_infeasible": self.n_infeasible, "n_failed": self.n_failed}


def _mean(vals) -> float:
    vals = list(vals)
    return math.fsum(vals) / len(vals) if vals else float("nan")


def aggregate_tradeoff(records: Sequence[RealizationRecord]) -> TradeoffPoint:
    """Aggregate the records of one (lambda, mode, profile) point, in index order."""
    records = sorted(records, key=lambda r: r.index)
    ok = [r for r in records if r.status == "ok"]
    first = records[0]
    if ok:
        k1 = len(ok[0].column_power)
        power = tuple(watt_to_dbm(_mean(r.column_power[j] for r in ok)) if
                      _mean(r.column_power[j] for r in ok) > 0 else float("-inf")
                      for j in range(k1))
    else:
        power = ()
    return TradeoffPoint(
        lam=first.lam, mode=first.mode, mobility_profile=first.profile,
        ewsr=_mean(r.awsr for r in ok),
        rmse=math.sqrt(_mean(r.mse for r in ok)) if ok else float("nan"),
        rmi=_mean(r.rmi for r in ok),
        crb=_mean(r.crb for r in ok),
        power_dbm=power,
        n_converged=sum(r.converged for r in ok),
        n_total=len(records),
        n_infeasible=sum(r.status == "infeasible" for r in records),
        n_failed=sum(r.status == "failed" for r in records),
        wsr_true=_mean(r.wsr_true for r in ok),
    )


def aggregate_lls(records: Sequence[RealizationRecord]) -> LlsPoint:
    records = sorted(records, key=lambda r: r.index)
    ok = [r for r in records if r.status == "ok"]
    first = records[0]
    sym = sum(r.symbols for r in ok)
    return LlsPoint(
        lam=first.lam, mode=first.mode, mobility_profile=first.profile,
        weighted_throughput=math.fsum(r.throughput_bits for r in ok) / sym if sym else float("nan"),
        rmse=math.sqrt(_mean(r.mse for r in ok)) if ok else float("nan"),
        ewsr=_mean(r.shannon_wsr for r in ok),
        awsr=_mean(r.awsr for r in ok),
        n_blocks=sum(r.blocks for r in ok),
        n_total=len(records),
        n_infeasible=sum(r.status == "infeasible" for r in records),
        n_failed=sum(r.status == "failed" for r in records),
    )


def _grid(lambdas, modes, profiles):
    for prof in profiles:
        if prof not in MOBILITY_PROFILES:
            raise ValueError(f"unknown mobility profile {prof!r}")
    for mode in modes:
        if mode not in ACCESS_MODES:
            raise ValueError(f"unknown access mode {mode!r}")
    return [(lam, mode, prof) for prof in profiles for mode in modes for lam in lambdas]


def run_tradeoff(scenario: Scenario, lambdas=DEFAULT_LAMBDAS, modes=ACCESS_MODES,
                 profiles=("low-mobility", "high-mobility"), realizations: int = 20,
                 seed: Optional[int] = None, workers: int = 1, indices=None):
    """Sweep the grid; returns ``(points, records)``.

    ``indices`` selects a shard of realization indices (default ``range(realizations)``).
    """
    seed = scenario.solver.rng_seed if seed is None else seed
    indices = list(range(realizations)) if indices is None else list(indices)
    grid = _grid(lambdas, modes, profiles)
    tasks = [(lam, mode, prof, i) for lam, mode, prof in grid for i in indices]
    records = run_records(scenario, tasks, seed, 0, workers)
    points = []
    for lam, mode, prof in grid:
        sel = [r for r in records if (r.lam, r.mode, r.profile) == (lam, mode, prof)]
        points.append(aggregate_tradeoff(sel))
    return points, records


def run_lls(scenario: Scenario, lambdas=DEFAULT_LAMBDAS, modes=ACCESS_MODES,
            profiles=("low-mobility", "high-mobility"), realizations: int = 20,
            blocks: int = 1, seed: Optional[int] = None, workers: int = 1, indices=None):
    """Optimize each realization and run ``blocks`` link-level blocks on it."""
    if blocks < 1:
        raise ValueError("blocks must be >= 1")
    seed = scenario.solver.rng_seed if seed is None else seed
    indices = list(range(realizations)) if indices is None else list(indices)
    grid = _grid(lambdas, modes, profiles)
    tasks = [(lam, mode, prof, i) for lam, mode, prof in grid for i in indices]
    records = run_records(scenario, tasks, seed, blocks, workers)
    points = []
    for lam, mode, prof in grid:
        sel = [r for r in records if (r.lam, r.mode, r.profile) == (lam, mode, prof)]
        points.append(aggregate_lls(sel))
    return points, records


# --------------------------------------------------------------------------- persistence

@dataclass
class RunManifest:
    config: str
    seed: int
    command: str
    options: dict
    version: str = __version__
    started: str = ""
    finished: str = ""
    failures: list = field(default_factory=list)

    @classmethod
    def create(cls, scenario: Scenario, seed: int, command: str, options: dict) -> "RunManifest":
        return cls(dump_config(scenario), int(seed), command, options,
                   started=time.strftime("%Y-%m-%dT%H:%M:%S%z"))

    def finish(self, records=()) -> "RunManifest":
        self.finished = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        self.failures = [
            {"lambda": r.lam, "mode": r.mode, "profile": r.profile, "index": r.index,
             "status": r.status, "message": r.message}
            for r in records if r.status != "ok"
        ]
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def write_points_csv(rows: Sequence[dict]) -> str:
    """CSV text with a header taken from the first row (all rows share it)."""
    buf = io.StringIO()
    header = list(rows[0].keys())
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        if list(r.keys()) != header:
            raise ValueError("rows do not share one schema")
        wr.writerow([_fmt(r[h]) for h in header])
    return buf.getvalue()


def _parse_cell(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def read_points_csv(path_or_text) -> list:
    """Rows of a points CSV with numbers converted back to int/float."""
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    rd = csv.DictReader(io.StringIO(text))
    return [{k: _parse_cell(v) for k, v in row.items()} for row in rd]


def emit(points: Sequence, out_dir, name: str = "tradeoff", formats=("csv", "json", "curves"),
         manifest: Optional[RunManifest] = None, records: Optional[Sequence] = None) -> list:
    """Write CSV, JSON and per-curve two-column files; returns the written paths."""
    if not points:
        raise ValueError("nothing to emit")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    rows = [p.row() for p in points]
    written = []

    def put(path: Path, text: str):
        try:
            path.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        written.append(path)

    if "csv" in formats:
        put(out / f"{name}.csv", write_points_csv(rows))
    if "json" in formats:
        doc = {"points": rows}
        if records is not None:
            doc["records"] = [asdict(r) for r in records]
        put(out / f"{name}.json", json.dumps(doc, indent=2, sort_keys=True, default=str))
    if "curves" in formats:
        y = "weighted_throughput" if "weighted_throughput" in rows[0] else "ewsr"
        curves = {}
        for r in rows:
            curves.setdefault((r["mode"], r["mobility_profile"]), []).append(r)
        for (mode, prof), rs in curves.items():
            rs = sorted(rs, key=lambda r: r["lambda"])
            lines = [f"# rmse {y}  (lambda ascending)"]
            lines += [f"{_fmt(r['rmse'])} {_fmt(r[y])}" for r in rs]
            put(out / f"{name}_{mode}_{prof}.dat", "\n".join(lines) + "\n")
    if manifest is not None:
        put(out / f"{name}_manifest.json", manifest.to_json())
    return written

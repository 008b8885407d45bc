import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from rsdfrc import cli, harness
from rsdfrc.harness import (RealizationRecord, RunManifest, aggregate_tradeoff, emit,
                            harness_options, read_points_csv, run_lls, run_tradeoff)
from rsdfrc.scenario import dump_config


@pytest.fixture
def tiny(small):
    return replace(small, solver=replace(small.solver, saa_samples=4, max_admm_iters=3,
                                         max_ao_iters=5, inner_ao_iters=2))


def test_emit_rejects_empty(tmp_path):
    with pytest.raises(ValueError, match="nothing to emit"):
        emit([], tmp_path)


def test_aggregation_counts_and_order():
    recs = [RealizationRecord(i, 1e-3, "RSMA", "low-mobility", awsr=float(i), mse=4.0,
                              rmi=1.0, crb=2.0, column_power=(0.1, 0.2, 0.3), converged=i == 0)
            for i in (2, 0, 1)]
    recs.append(RealizationRecord(3, 1e-3, "RSMA", "low-mobility", status="infeasible"))
    pt = aggregate_tradeoff(recs)
    assert pt.ewsr == 1.0 and pt.rmse == 2.0 and pt.n_total == 4 and pt.n_infeasible == 1
    assert pt.n_converged == 1
    assert pt.power_dbm[0] == pytest.approx(20.0)


def test_sweep_outputs_and_round_trip(tiny, tmp_path):
    points, records = run_tradeoff(tiny, (1e-9, 1e-1), ("RSMA",), ("low-mobility",), 2, seed=3)
    assert len(points) == 2 and len(records) == 4
    man = RunManifest.create(tiny, 3, "tradeoff", {}).finish(records)
    paths = emit(points, tmp_path, manifest=man, records=records)
    names = {p.name for p in paths}
    assert {"tradeoff.csv", "tradeoff.json", "tradeoff_manifest.json"} <= names
    assert "tradeoff_RSMA_low-mobility.dat" in names
    csv_text = (tmp_path / "tradeoff.csv").read_text()
    header = csv_text.splitlines()[0].split(",")
    assert header[:8] == ["lambda", "mode", "mobility_profile", "ewsr", "wsr_true", "rmse",
                          "rmi", "crb"]
    assert header[-4:] == ["n_converged", "n_total", "n_infeasible", "n_failed"]
    rows = read_points_csv(tmp_path / "tradeoff.csv")
    assert rows == [p.row() for p in points]
    assert harness.write_points_csv(rows) == csv_text
    doc = json.loads((tmp_path / "tradeoff.json").read_text())
    assert len(doc["points"]) == 2 and len(doc["records"]) == 4
    assert json.loads((tmp_path / "tradeoff_manifest.json").read_text())["seed"] == 3


def test_shards_match_full_run(tiny):
    full, _ = run_tradeoff(tiny, (1e-3,), ("SDMA",), ("high-mobility",), 3, seed=5)
    _, a = run_tradeoff(tiny, (1e-3,), ("SDMA",), ("high-mobility",), 3, seed=5, indices=[2])
    _, b = run_tradeoff(tiny, (1e-3,), ("SDMA",), ("high-mobility",), 3, seed=5, indices=[0, 1])
    merged = aggregate_tradeoff(a + b)
    assert merged.row() == full[0].row()


def test_unknown_grid_entries(tiny):
    with pytest.raises(ValueError):
        run_tradeoff(tiny, (1e-3,), ("TDMA",), ("low-mobility",), 1)
    with pytest.raises(ValueError):
        run_lls(tiny, (1e-3,), ("RSMA",), ("low-mobility",), 1, blocks=0)


def test_lls_sweep_bounded_by_shannon(tiny):
    points, records = run_lls(tiny, (1e-9,), ("RSMA", "NOMA"), ("low-mobility",), 2, blocks=2,
                              seed=4)
    for p in points:
        assert p.n_blocks == 4 or p.n_infeasible or p.n_failed
        assert p.weighted_throughput <= p.ewsr + 1e-12


def test_harness_section_parsing():
    opts = harness_options("[harness]\nrealizations = 3\nlambdas = 1e-3, 1e-1\nmodes = RSMA\n")
    assert opts.realizations == 3 and opts.lambdas == (1e-3, 1e-1) and opts.modes == ("RSMA",)
    assert harness_options("").realizations == 20


def _ini(tmp_path, tiny, extra=""):
    path = tmp_path / "run.ini"
    path.write_text(dump_config(tiny) + "\n[harness]\nrealizations = 1\nlambdas = 1e-3\n"
                    "modes = SDMA\nprofiles = low-mobility\nblocks = 1\n" + extra)
    return path


def test_cli_exit_codes(tiny, tmp_path, capsys):
    cfg = _ini(tmp_path, tiny)
    assert cli.main(["validate-config", "--config", str(cfg)]) == 0
    bad = tmp_path / "bad.ini"
    bad.write_text("[system]\nn_tx = -2\n")
    assert cli.main(["validate-config", "--config", str(bad)]) == 2
    assert cli.main(["tradeoff", "--config", str(bad)]) == 2
    assert cli.main(["tradeoff", "--config", str(cfg), "--modes", "TDMA",
                     "--out-dir", str(tmp_path / "x")]) == 2
    out = tmp_path / "out"
    assert cli.main(["tradeoff", "--config", str(cfg), "--out-dir", str(out)]) == 0
    assert (out / "tradeoff.csv").exists()
    assert cli.main(["lls", "--config", str(cfg), "--out-dir", str(out)]) == 0
    assert (out / "lls.csv").exists()
    assert cli.main(["beampattern", "--config", str(cfg), "--realizations", "1",
                     "--mode", "SDMA", "--out-dir", str(out)]) == 0
    bp = list(out.glob("beampattern_*.csv"))
    assert len(bp) == 1 and len(bp[0].read_text().splitlines()) == 182


def test_cli_is_byte_deterministic(tiny, tmp_path):
    cfg = _ini(tmp_path, tiny)
    for d in ("a", "b"):
        assert cli.main(["tradeoff", "--config", str(cfg), "--seed", "9",
                         "--out-dir", str(tmp_path / d)]) == 0
    assert (tmp_path / "a/tradeoff.csv").read_bytes() == (tmp_path / "b/tradeoff.csv").read_bytes()

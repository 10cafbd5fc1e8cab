"""End-to-end command line round trip on a temporary directory."""

import json
import os

import numpy as np
import pytest

from granres import GranularModel
from granres.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """synth then fit, shared by the downstream command tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = {"n_claims": 600, "start": "2017-01-01", "end": "2019-12-31"}
    (root / "synth.json").write_text(json.dumps(cfg))
    rc = main(
        ["synth", "--config", str(root / "synth.json"), "--seed", "1",
         "--out", str(root / "s")]
    )
    assert rc == 0
    rc = main(
        ["fit", "--input", str(root / "s" / "portfolio.csv"), "--out", str(root / "f")]
    )
    assert rc == 0
    (root / "res.json").write_text(
        json.dumps({"model": str(root / "f" / "model.json"), "cutoff": "2019-12-31"})
    )
    return root


def _reserve(workdir, out, workers):
    return main(
        ["reserve", "--config", str(workdir / "res.json"),
         "--input", str(workdir / "s" / "portfolio.csv"),
         "--valuation-date", "2019-12-31", "--horizon", "one-year",
         "--scenarios", "50", "--seed", "9", "--workers", str(workers),
         "--out", str(workdir / out)]
    )


def test_synth_writes_portfolio_and_truth(workdir):
    csv_path = workdir / "s" / "portfolio.csv"
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "claim_id,claim_type,accident_date,reporting_date,payment_date,amount"
    assert len(rows) > 600
    truth = json.loads((workdir / "s" / "truth.json").read_text())
    assert truth["seed"] == 1
    model = GranularModel.from_dict(truth["model"])
    assert set(model.types) == {"bodily_injury", "material_damage"}


def test_fit_writes_model_and_report(workdir):
    model = GranularModel.load(workdir / "f" / "model.json")
    assert set(model.types) == {"bodily_injury", "material_damage"}
    report = json.loads((workdir / "f" / "fit_report.json").read_text())
    assert set(report["types"]) == {"bodily_injury", "material_damage"}
    assert "hac" in report


def test_reserve_outputs(workdir):
    assert _reserve(workdir, "r1", workers=1) == 0
    summary = json.loads((workdir / "r1" / "summary.json").read_text())
    assert summary["window"]["a"] == "2019-12-31"
    assert summary["window"]["b"] == "2020-12-30"
    assert summary["window"]["b_day"] - summary["window"]["a_day"] == 365
    assert summary["n_scenarios"] == 50 and summary["seed"] == 9
    assert summary["total"]["q0.995"] >= summary["total"]["q0.5"]
    lines = (workdir / "r1" / "scenarios.csv").read_text().splitlines()
    assert lines[0] == "scenario,total,rbns,ibnr,bodily_injury,material_damage"
    assert len(lines) == 51
    totals = np.array([float(l.split(",")[1]) for l in lines[1:]])
    assert abs(totals.mean() - summary["total"]["mean"]) < 0.01
    cash = (workdir / "r1" / "cashflow.csv").read_text().splitlines()
    assert cash[0] == "period,expected_paid"
    assert len(cash) == 1 + len(summary["expected_cash_flow"])


def test_reserve_reproducible_across_workers(workdir):
    assert _reserve(workdir, "r1", workers=1) == 0
    assert _reserve(workdir, "r2", workers=2) == 0
    for name in ("summary.json", "scenarios.csv", "cashflow.csv"):
        assert (workdir / "r1" / name).read_bytes() == (workdir / "r2" / name).read_bytes()


def test_reserve_can_fit_inline(workdir, tmp_path):
    cfg = {
        "cutoff": "2019-12-31",
        "recipe": {"copula_family": "independence", "hac_outer": None},
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    rc = main(
        ["reserve", "--config", str(tmp_path / "cfg.json"),
         "--input", str(workdir / "s" / "portfolio.csv"),
         "--valuation-date", "2019-12-31", "--scenarios", "20", "--seed", "2",
         "--workers", "1", "--out", str(tmp_path)]
    )
    assert rc == 0
    assert (tmp_path / "fit_report.json").exists()
    assert (tmp_path / "summary.json").exists()


def test_triangle_outputs(workdir, capsys):
    rc = main(
        ["triangle", "--input", str(workdir / "s" / "portfolio.csv"),
         "--out", str(workdir / "t")]
    )
    assert rc == 0
    lines = (workdir / "t" / "triangle.csv").read_text().splitlines()
    assert lines[0] == "origin,dev_0,dev_1,dev_2"
    assert len(lines) == 4
    assert lines[3].startswith("2019,") and lines[3].endswith(",,")
    cl = json.loads((workdir / "t" / "chain_ladder.json").read_text())
    assert set(cl) == {"factors", "ultimate_by_origin", "reserve_by_origin", "total_reserve"}
    assert cl["total_reserve"] > 0
    assert "chain-ladder reserve:" in capsys.readouterr().out


def test_backtest_outputs(workdir, capsys):
    cfg = {
        "cutoff": "2019-12-31",
        "recipe": {"copula_family": "independence", "hac_outer": None},
    }
    (workdir / "bt.json").write_text(json.dumps(cfg))
    rc = main(
        ["backtest", "--config", str(workdir / "bt.json"),
         "--input", str(workdir / "s" / "portfolio.csv"),
         "--valuation-date", "2018-12-31", "--horizon", "2019-12-31",
         "--scenarios", "30", "--seed", "4", "--workers", "1",
         "--out", str(workdir / "b")]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "seed: 4" in out and "quantile of actual:" in out
    bt = json.loads((workdir / "b" / "backtest.json").read_text())
    assert bt["window"] == {"a": "2018-12-31", "b": "2019-12-31", "a_day": 6939, "b_day": 7304}
    assert bt["actual_paid"] > 0
    assert 0.0 <= bt["quantile_of_actual"] <= 1.0
    assert set(bt["coverage"]) == {"0.5", "0.75", "0.95", "0.995"}
    assert bt["predicted"]["n_scenarios"] == 30


def test_seed_is_echoed(workdir, tmp_path, capsys):
    cfg = {"n_claims": 80, "start": "2018-01-01", "end": "2018-12-31"}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    rc = main(["synth", "--config", str(tmp_path / "cfg.json"), "--seed", "3",
               "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "seed: 3" in out and "claims:" in out


def test_config_errors_exit_2(workdir, tmp_path, capsys):
    port = str(workdir / "s" / "portfolio.csv")

    assert main(["fit", "--input", str(tmp_path / "missing.csv"),
                 "--out", str(tmp_path)]) == 2
    assert "config error: input file not found" in capsys.readouterr().err

    (tmp_path / "bad.json").write_text("{nope")
    assert main(["fit", "--config", str(tmp_path / "bad.json"), "--input", port,
                 "--out", str(tmp_path)]) == 2
    assert "not valid JSON" in capsys.readouterr().err

    (tmp_path / "list.json").write_text("[1, 2]")
    assert main(["synth", "--config", str(tmp_path / "list.json"),
                 "--out", str(tmp_path)]) == 2
    assert "must hold a JSON object" in capsys.readouterr().err

    assert main(["reserve", "--config", str(workdir / "res.json"), "--input", port,
                 "--valuation-date", "2019-12-31", "--horizon", "someday",
                 "--scenarios", "5", "--out", str(tmp_path)]) == 2
    assert "horizon must be one-year, ultimate, or an ISO date" in capsys.readouterr().err

    assert main(["reserve", "--config", str(workdir / "res.json"), "--input", port,
                 "--valuation-date", "2019-12-31", "--scenarios", "0",
                 "--out", str(tmp_path)]) == 2
    assert "scenarios must be at least 1" in capsys.readouterr().err

    assert main(["fit", "--out", str(tmp_path)]) == 2
    assert "missing input portfolio CSV" in capsys.readouterr().err


def test_model_errors_exit_1(workdir, tmp_path, capsys):
    rc = main(["reserve", "--config", str(workdir / "res.json"),
               "--input", str(workdir / "s" / "portfolio.csv"),
               "--valuation-date", "2025-01-01", "--scenarios", "5",
               "--out", str(tmp_path)])
    assert rc == 1
    assert "model error: valuation date is past the data cutoff" in capsys.readouterr().err

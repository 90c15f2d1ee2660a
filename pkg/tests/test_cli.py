import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from searchmarket.cli import main
from searchmarket.constructions import random_market, revenue_example_markets
from searchmarket.model import dump_spec

GOLDEN = Path(__file__).parent / "golden"
HEADERS = json.loads((GOLDEN / "csv_headers.json").read_text())


def header(path):
    with open(path) as fh:
        return next(csv.reader(fh))


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).iterdir())}


@pytest.fixture
def base_spec():
    return str(GOLDEN / "inform_bad_base.json")


def test_simulate_writes_summary(tmp_path, base_spec):
    out = tmp_path / "sim"
    assert main(["--config", base_spec, "--replicas", "10", "--seed", "1", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == HEADERS["schema_version"]
    assert len(summary["replicas"]) == 10
    for row in summary["replicas"]:
        assert set(row["learned"]) | set(row["lost"]) == {0}
    assert header(out / "rounds.csv") == HEADERS["rounds.csv"]
    assert (out / "utility_series.png").stat().st_size > 0


def test_rounds_match_golden(tmp_path, base_spec):
    out = tmp_path / "g"
    main(["--config", base_spec, "--seed", "7", "--replicas", "3", "--horizon", "30", "--out", str(out), "--no-figures"])
    assert (out / "rounds.csv").read_bytes() == (GOLDEN / "rounds_seed7.csv").read_bytes()


def test_same_seed_same_bytes(tmp_path, base_spec):
    args = ["--config", base_spec, "--replicas", "4", "--seed", "3", "--horizon", "60"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")


def test_couple_cost_only(tmp_path):
    spec = random_market(np.random.default_rng(2), horizon=150)
    dump_spec(spec, tmp_path / "a.json")
    dump_spec(spec.with_(search_cost=spec.search_cost / 3), tmp_path / "b.json")
    out = tmp_path / "c"
    code = main(["--kind", "couple", "--config", str(tmp_path / "a.json"), "--config", str(tmp_path / "b.json"),
                 "--replicas", "20", "--settle", "--out", str(out)])
    assert code == 0
    assert header(out / "couple.csv") == HEADERS["couple.csv"]
    assert all(r["contained"] == "true" for r in rows(out / "couple.csv"))


def test_experiment_config_file(tmp_path):
    spec = random_market(np.random.default_rng(2), horizon=100)
    dump_spec(spec, tmp_path / "a.json")
    dump_spec(spec.with_(search_cost=spec.search_cost / 2), tmp_path / "b.json")
    cfg = {"kind": "couple", "specs": ["a.json", "b.json"], "replicas": 5, "seed": 4, "settle": True}
    (tmp_path / "exp.json").write_text(json.dumps(cfg))
    out = tmp_path / "o"
    assert main(["--config", str(tmp_path / "exp.json"), "--out", str(out), "--no-figures"]) == 0
    assert len(rows(out / "couple.csv")) == 5


def test_lost_prob(tmp_path, base_spec):
    out = tmp_path / "l"
    assert main(["--kind", "lost-prob", "--config", base_spec, "--replicas", "50", "--out", str(out)]) == 0
    assert header(out / "lost.csv") == HEADERS["lost.csv"]
    summary = json.loads((out / "summary.json").read_text())
    est = summary["lost_probability"][0]
    assert 0 <= est["estimate"] <= 1 and est["std_error"] >= 0


def test_equilibrium(tmp_path):
    _, free = revenue_example_markets(2)
    dump_spec(free, tmp_path / "free.json")
    out = tmp_path / "e"
    assert main(["--kind", "equilibrium", "--config", str(tmp_path / "free.json"), "--out", str(out)]) == 0
    eq = json.loads((out / "equilibrium.json").read_text())
    assert eq["per_business_revenue"] == pytest.approx(0.25)
    assert eq["floor_price"] == pytest.approx(0.5)
    cdf = rows(out / "cdf.csv")
    assert header(out / "cdf.csv") == HEADERS["cdf.csv"]
    assert len(cdf) == 1000
    assert float(cdf[-1]["cdf"]) == 1.0


def test_reproduce(tmp_path):
    out = tmp_path / "r"
    assert main(["--reproduce", "weitzman-oracle", "--out", str(out)]) == 0
    assert header(out / "report.csv") == HEADERS["report.csv"]
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["figures"] == ["weitzman_oracle.png"]


def test_env_default_out_dir(tmp_path, base_spec, monkeypatch):
    monkeypatch.setenv("SEARCHMARKET_OUT", str(tmp_path / "env"))
    assert main(["--config", base_spec, "--horizon", "10", "--no-figures"]) == 0
    assert (tmp_path / "env" / "summary.json").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["--reproduce", "no-such-thing"],
        ["--config", "/nonexistent/spec.json"],
        ["--kind", "simulate"],
        ["--kind", "couple", "--config", str(GOLDEN / "inform_bad_base.json")],
        ["--config", str(GOLDEN / "inform_bad_base.json"), "--replicas", "0"],
    ],
)
def test_bad_input_exit_code(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert set(err) == {"error", "message"}


def test_invalid_spec_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"businesses": [{"fit_prob": 1.0, "quality": 0.5}],
                               "priors": [{"type": "beta_pair", "a": 1, "b": 1, "a_quality": 1, "b_quality": 1}],
                               "value_dist": {"type": "point_mass", "value": 1.0}, "search_cost": 0.1}))
    assert main(["--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "InvalidFitProb"


def test_reproduce_failure_exit_code(monkeypatch, tmp_path):
    from searchmarket import reproduce as rp

    def failing(seed=0, out_dir=None, **_):
        rep = rp.Report("weitzman-oracle", {})
        rep.add("forced", 1.0, "== 0", False)
        return rep

    monkeypatch.setitem(rp.REPRODUCTIONS, "weitzman-oracle", failing)
    assert main(["--reproduce", "weitzman-oracle", "--out", str(tmp_path)]) == 2


def test_console_script_entry(tmp_path, base_spec):
    res = subprocess.run(
        [sys.executable, "-m", "searchmarket.cli", "--config", base_spec, "--horizon", "5", "--no-figures",
         "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert res.returncode == 0, res.stderr

"""Random problem generation, serialization, configuration and the CLI surface."""
import json

import numpy as np
import pytest

from nlgauge import cli
from nlgauge.experiments import ConfigError, RunConfig, run_experiment
from nlgauge.grid import Field, OdForm, make_grid
from nlgauge.hodge import SolverError, hodge_decompose
from nlgauge.io import (field_from_csv, field_to_csv, from_container, gauge_result_to_dict,
                        hodge_parts_to_dict, jsonable, matrix_to_csv, odform_to_csv, to_container)
from nlgauge.norms import norm_odform_lp
from nlgauge.problems import random_antisymmetric_omega, rng_for, test_panel


def test_omega_antisymmetric_and_normalized():
    g = make_grid(1.0, 24)
    om = random_antisymmetric_omega(g, 11, 3, 0.07, smoothness=4)
    assert om.antisymmetry_defect() == 0.0
    assert abs(norm_odform_lp(om, 2) - 0.07) <= 1e-12 * 0.07


def test_omega_deterministic():
    g = make_grid(1.0, 24)
    a = random_antisymmetric_omega(g, 2 ** 63 + 5, 2, 0.1)
    b = random_antisymmetric_omega(g, 2 ** 63 + 5, 2, 0.1)
    assert a.kernel.tobytes() == b.kernel.tobytes()
    c = random_antisymmetric_omega(g, 2 ** 63 + 6, 2, 0.1)
    assert a.kernel.tobytes() != c.kernel.tobytes()


def test_bad_seed():
    with pytest.raises(ValueError):
        rng_for(-1)
    with pytest.raises(ValueError):
        random_antisymmetric_omega(make_grid(1.0, 4), 0, 2, 0.0)


def test_panel_size_and_reproducible():
    g = make_grid(1.0, 16)
    p1, p2 = test_panel(g, 3, (2,)), test_panel(g, 3, (2,))
    assert len(p1) == 16
    assert all(np.array_equal(a.values, b.values) for a, b in zip(p1, p2))


def test_field_csv_round_trip(tmp_path, rng):
    g = make_grid(1.0, 6)
    for shape in ((6,), (6, 2), (6, 2, 2)):
        u = Field(g, rng.standard_normal(shape))
        back = field_from_csv(field_to_csv(u, tmp_path / "u.csv"), g)
        assert np.array_equal(back.values, u.values)


def test_odform_csv_layout(tmp_path, rng):
    g = make_grid(1.0, 4)
    F = OdForm(g, rng.standard_normal((4, 4, 2)))
    lines = odform_to_csv(F, tmp_path / "F.csv").read_text().splitlines()
    assert lines[0] == "i,j,x_i,x_j,c0,c1"
    assert len(lines) == 1 + 12
    i, j, _, _, c0, c1 = lines[5].split(",")
    assert float(c1) == F.kernel[int(i), int(j), 1]


def test_matrix_csv(tmp_path):
    path = matrix_to_csv(np.array([[1.0, 0.0], [0.0, 2.5]]), tmp_path / "m.csv")
    assert path.read_text().splitlines() == ["row,col,value", "0,0,1", "1,1,2.5"]


def test_json_container_round_trip(rng):
    g = make_grid(2.0, 5, "periodic_torus", 2)
    F = OdForm(g, rng.standard_normal((5, 5, 2, 2)))
    back = from_container(json.loads(json.dumps(to_container(F))))
    assert np.array_equal(back.kernel, F.kernel)
    assert back.grid.to_dict() == g.to_dict()


def test_hodge_and_gauge_serialization(rng):
    g = make_grid(1.0, 8)
    d = hodge_parts_to_dict(hodge_decompose(OdForm(g, rng.standard_normal((8, 8))), 0.5))
    json.dumps(jsonable(d))
    from nlgauge.gauge import build_gauge

    res = build_gauge(random_antisymmetric_omega(g, 0, 2, 0.05))
    out = json.loads(json.dumps(jsonable(gauge_result_to_dict(res))))
    assert out["converged"] is True and out["A"]["kind"] == "field"


def test_config_round_trip(tmp_path):
    cfg = RunConfig(experiment="gauge", seed=2 ** 64 - 1, omega_norm=0.03, gauge={"fp_tol": 1e-10})
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = RunConfig.from_file(path)
    assert back.canonical() == cfg.canonical()


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="unknown"):
        RunConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match="points"):
        RunConfig.from_dict({"points": "many"})
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "seed": 1,\n  "points": ,\n}')
    with pytest.raises(ConfigError, match=r"bad.json:3:"):
        RunConfig.from_file(bad)
    with pytest.raises(ConfigError, match="gauge"):
        RunConfig.from_dict({"gauge": {"fp_tol": -1.0}})


def test_cli_pass_and_outputs(tmp_path, capsys):
    code = cli.main(["cutoff", "--out", str(tmp_path), "--format", "csv", "--set", "refinement=800"])
    assert code == 0
    assert (tmp_path / "cutoff.csv").read_text().startswith("k,rho,R,seminorm")
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["passed"] and rep["config"]["refinement"] == 800
    assert "PASS" in capsys.readouterr().out


def test_cli_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 5, "points": 8, "instances": 6}))
    args = cli._parser().parse_args(["ops-check", "--config", str(cfg), "--seed", "9"])
    c = cli.build_config(args)
    assert c.seed == 9 and c.points == 8 and c.experiment == "ops-check"


def test_cli_usage_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert cli.main(["gauge", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert cli.main(["gauge", "--set", "nope=1", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["not-a-selector"])
    assert exc.value.code == 2


def test_cli_solver_failure(tmp_path, monkeypatch):
    def boom(cfg, out):
        raise SolverError("stalled", 1e-3, 5)

    from nlgauge import experiments

    monkeypatch.setitem(experiments.PIPELINES, "hodge", boom)
    assert cli.main(["hodge", "--out", str(tmp_path)]) == 3


def test_cli_acceptance_failure(tmp_path):
    # a divergent gauge run reports failure through the exit status
    code = cli.main(["gauge", "--out", str(tmp_path), "--set", "omega_norm=20.0"])
    assert code == 1
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["metrics"]["diverged"] is True
    assert len(rep["metrics"]["contraction_sizes"]) > 1


def test_report_numerics_repeatable(tmp_path):
    cfg = RunConfig(experiment="localize", out=str(tmp_path), points=24)
    a = run_experiment(cfg, write=False)
    b = run_experiment(cfg, write=False)
    assert json.dumps(jsonable(a.numerics())) == json.dumps(jsonable(b.numerics()))

import csv
import io
import json
import math

import numpy as np
import pytest
from click.testing import CliRunner
from hypothesis import given
from hypothesis import strategies as st

from pwdi.cli import EXIT_CONFIG, main
from pwdi.experiments import (
    ConfigError,
    ExperimentConfig,
    IncidentSpec,
    TargetSpec,
    config_from_provenance,
    eoc,
    eoc_fit,
    rows_to_csv,
    run_convergence,
    run_interp_check,
    run_nearfield,
    run_solve,
)


def _table(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------
def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.eta == cfg.k == 1.0
    assert cfg.interpolant == "algebraic"
    assert cfg.near_half_side == 1.0
    assert ExperimentConfig(method="bem", resolutions=[2]).interpolant == "analytic"
    assert ExperimentConfig(k=3.0).eta == 3.0
    assert ExperimentConfig(k=3.0, eta=-1.0).eta == -1.0


@pytest.mark.parametrize(
    "kw",
    [
        dict(method="fmm"),
        dict(equation="bx"),
        dict(geometry="torus"),
        dict(k=0.0),
        dict(k=float("nan")),
        dict(eta=0.0),
        dict(M=-1),
        dict(M=4),
        dict(M=2, interpolant="analytic"),
        dict(equation="bm-direct", M=1),
        dict(method="bem", M=2, resolutions=[2]),
        dict(method="bem", equation="bm-direct", resolutions=[2]),
        dict(method="bem", geometry="bean", resolutions=[2]),
        dict(method="multiscatter", geometry="composite", resolutions=[0.5]),
        dict(resolutions=[1]),
        dict(resolutions=[8.0]),
        dict(resolutions=[True]),
        dict(geometry_params={"radius": 1.0, "spin": 2}),
        dict(tol=0.0),
        dict(n_anchors=0),
        dict(schema_version=99),
        dict(incident={"kind": "planewave"}),
        dict(incident={"kind": "planewave", "direction": [1, 1, 0]}),
        dict(incident={"kind": "sources"}),
        dict(incident={"kind": "interior-sources", "sources": [[0, 0, 0]]}),
        dict(targets={"kind": "line"}),
    ],
)
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        if "incident" in kw or "targets" in kw:
            ExperimentConfig.from_dict(kw)
        else:
            ExperimentConfig(**kw)


def test_bem_equation_alias():
    assert ExperimentConfig(method="bem", equation="bm", resolutions=[2]).equation == "bm-regularized"


def test_from_json_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json('{"wavenumber": 2}')


def test_json_round_trip():
    cfg = ExperimentConfig(
        method="nystrom", geometry="ellipsoid", geometry_params={"a": 1.2}, k=2.0, M=2,
        incident={"kind": "planewave", "direction": [0.0, 0.6, 0.8]}, resolutions=[6, 8],
        targets={"kind": "points", "points": [[2, 0, 0]]},
    )
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg
    assert back.geometry_params == {"a": 1.2, "b": 0.8, "c": 0.6}


def test_with_overrides_resets_derived_fields():
    cfg = ExperimentConfig(k=2.0)
    assert cfg.with_overrides(k=3.0).eta == 3.0
    assert cfg.with_overrides(eta=0.5).eta == 0.5
    bem = cfg.with_overrides(method="bem", M=1, resolutions=[2])
    assert bem.interpolant == "analytic"
    hemi = bem.with_overrides(geometry="hemisphere", resolutions=[0.5])
    assert hemi.geometry_params["radius"] == 1.5 and hemi.near_half_side is None
    assert cfg.with_overrides() is cfg


def test_incident_spec():
    pw = IncidentSpec("planewave", [0, 0, 1])
    assert not pw.exact
    assert np.allclose(pw.field(2.0).value(np.array([[0, 0, np.pi / 2]])), -1)
    src = IncidentSpec()
    assert src.exact and len(src.sources) == 2


def test_target_spec():
    t = TargetSpec(kind="plane", n=[3, 5], extent=[1.0, 2.0])
    X = t.build()
    assert X.shape == (15, 3)
    assert np.allclose(X[:, 1], 0)
    assert TargetSpec(kind="cube", n=[5, 5], half_side=2.0).build().shape == (150, 3)
    assert TargetSpec(kind="points").build().shape == (0, 3)


# --------------------------------------------------------------------------
# orders of convergence
# --------------------------------------------------------------------------
@given(st.floats(0.5, 6.0), st.floats(1e-3, 10.0))
def test_eoc_recovers_power_law(p, c):
    h = [0.4, 0.2, 0.1, 0.05]
    err = [c * x**p for x in h]
    got = eoc(h, err)
    assert got[0] is None
    assert all(math.isclose(g, p, rel_tol=1e-9) for g in got[1:])
    assert math.isclose(eoc_fit(h, err), p, rel_tol=1e-9)


def test_eoc_missing_values():
    assert eoc([0.5], [1e-2]) == [None]
    assert eoc([0.5, 0.25, 0.125], [1e-2, None, 1e-4]) == [None, None, None]
    assert eoc([0.5, 0.5], [1e-2, 1e-3]) == [None, None]
    assert eoc([0.5, 0.25], [0.0, 1e-3]) == [None, None]


# --------------------------------------------------------------------------
# runners
# --------------------------------------------------------------------------
SMALL = dict(resolutions=[4, 6], M=1)


def test_convergence_csv_reproducible():
    cfg = ExperimentConfig(**SMALL)
    a = rows_to_csv(cfg, run_convergence(cfg))
    b = rows_to_csv(cfg, run_convergence(cfg))
    assert a == b
    rows = _table(a)
    assert [r["resolution"] for r in rows] == ["4", "6"]
    assert rows[0]["eoc_far"] == "" and rows[1]["eoc_far"] != ""
    assert float(rows[1]["far_error"]) < float(rows[0]["far_error"])
    assert "wall_time" not in rows[0]
    assert config_from_provenance(a) == cfg


def test_single_resolution_has_no_order():
    cfg = ExperimentConfig(resolutions=[4])
    rows = run_convergence(cfg)
    assert rows[0].eoc_far is None and rows[0].far_error is not None


def test_planewave_uses_last_resolution_as_reference():
    cfg = ExperimentConfig(resolutions=[4, 6, 8], incident={"kind": "planewave", "direction": [0, 0, 1]})
    rows = run_convergence(cfg)
    assert rows[-1].far_error is None
    assert rows[0].far_error > rows[1].far_error > 0


def test_timings_column():
    cfg = ExperimentConfig(resolutions=[4], timings=True)
    rows = _table(rows_to_csv(cfg, run_convergence(cfg)))
    assert float(rows[0]["wall_time"]) > 0


def test_failing_resolution_is_reported(tmp_path):
    bad = tmp_path / "open.off"
    bad.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
    cfg = ExperimentConfig(method="bem", geometry="mesh", resolutions=[str(bad)])
    rows = run_convergence(cfg)
    assert rows[0].status.startswith("MeshError")
    assert rows[0].far_error is None


def test_run_solve_report():
    rep = run_solve(ExperimentConfig(resolutions=[4, 6]))
    assert rep["result"]["resolution"] == 6
    assert rep["result"]["status"] == "ok"
    assert rep["result"]["far_error"] < 0.05
    assert "wall_time" not in rep["result"]
    assert config_from_provenance(json.dumps(rep)).resolutions == [4, 6]


def test_nearfield_empty_targets_skips_solve():
    cfg = ExperimentConfig(targets={"kind": "points", "points": []})
    text = run_nearfield(cfg)
    assert text.startswith("# provenance:")
    assert _table(text) == []


def test_nearfield_rows():
    cfg = ExperimentConfig(resolutions=[6], targets={"kind": "points", "points": [[1.5, 0, 0], [0, 2, 0]]})
    rows = _table(run_nearfield(cfg))
    tgt = [r for r in rows if r["role"] == "target"]
    ext = [r for r in rows if r["role"] == "extinction"]
    assert len(tgt) == 2 and len(ext) > 0
    for r in tgt:
        us = complex(float(r["us_re"]), float(r["us_im"]))
        ex = complex(float(r["exact_re"]), float(r["exact_im"]))
        assert abs(us - ex) < 0.02 * abs(ex)
    assert max(abs(float(r["us_re"])) + abs(float(r["us_im"])) for r in ext) < 0.05


def test_interp_check_runner():
    cfg = ExperimentConfig(M=2, n_anchors=6)
    text, summary = run_interp_check(cfg)
    rows = _table(text)
    assert len(rows) == 6
    assert {"rho_order3", "rhon_order3", "contact_slope"} <= set(rows[0])
    assert summary["max_residual"] < 1e-9
    assert summary["min_contact_slope"] > 2.5
    with pytest.raises(ConfigError):
        run_interp_check(ExperimentConfig(method="bem", resolutions=[2]))


# --------------------------------------------------------------------------
# command line
# --------------------------------------------------------------------------
def _invoke(*args):
    return CliRunner().invoke(main, list(args))


def test_cli_convergence_to_file(tmp_path):
    out = tmp_path / "c.csv"
    r = _invoke("convergence", "--resolutions", "4,6", "--output-csv", str(out))
    assert r.exit_code == 0, r.stderr
    first = out.read_bytes()
    _invoke("convergence", "--resolutions", "4,6", "--output-csv", str(out))
    assert out.read_bytes() == first
    assert len(_table(out.read_text())) == 2


def test_cli_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"resolutions": [4], "k": 2.0}))
    r = _invoke("solve", "--config", str(cfg), "--eta", "1.5")
    assert r.exit_code == 0, r.stderr
    rep = json.loads(r.stdout)
    assert rep["provenance"]["config"]["k"] == 2.0
    assert rep["provenance"]["config"]["eta"] == 1.5


@pytest.mark.parametrize(
    "args",
    [
        ["solve", "--method", "bem", "-M", "2", "--resolutions", "2"],
        ["solve", "--equation", "bm-direct", "-M", "1"],
        ["solve", "--direction", "1,2"],
        ["solve", "--incident", "planewave", "--direction", "1,1,0"],
        ["nearfield", "--targets", "{oops"],
        ["convergence", "--resolutions", "4,x"],
    ],
)
def test_cli_config_errors(args):
    r = _invoke(*args)
    assert r.exit_code == EXIT_CONFIG
    err = json.loads(r.stderr.strip().splitlines()[-1])
    assert err["exit_code"] == EXIT_CONFIG and err["message"]


def test_cli_bad_config_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{]")
    r = _invoke("solve", "--config", str(p))
    assert r.exit_code == EXIT_CONFIG
    assert json.loads(r.stderr)["error"] == "ConfigError"


def test_cli_interp_check(tmp_path):
    js = tmp_path / "s.json"
    r = _invoke("interp-check", "-M", "1", "--n-anchors", "4", "--geometry", "bean", "--output-json", str(js))
    assert r.exit_code == 0, r.stderr
    assert len(_table(r.stdout)) == 4
    summary = json.loads(js.read_text())["summary"]
    assert summary["max_residual"] < 1e-9


def test_cli_nearfield_plane():
    r = _invoke("nearfield", "--resolutions", "4", "--targets", '{"kind": "plane", "n": [2, 2], "origin": [0, 3, 0]}')
    assert r.exit_code == 0, r.stderr
    rows = _table(r.stdout)
    assert sum(row["role"] == "target" for row in rows) == 4

import json

import pytest
import yaml
from click.testing import CliRunner

from vpbirman.cli import RunConfig, cli, load_config

SMALL = {
    "model": {"kind": "polytrope", "k": 1.0, "kappa": 1.0},
    "grid": {"n_beta": 8, "n_e": 8, "n_r": 24, "k_max": 8},
    "spectrum": {"n_lambda": 6, "m": 2},
    "flow": {"budget": 400},
}


@pytest.fixture()
def config(tmp_path, monkeypatch):
    monkeypatch.delenv("VPBIRMAN_CACHE", raising=False)
    data = dict(SMALL, output_dir=str(tmp_path / "out"), cache_dir=str(tmp_path / "cache"))
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def invoke(*args, env=None):
    return CliRunner().invoke(cli, list(args), env=env, catch_exceptions=False)


def test_steady_state_and_cache(config, tmp_path, caplog):
    res = invoke("steady-state", str(config))
    assert res.exit_code == 0, res.output
    summary = json.loads(res.output)
    assert all(summary["invariants"].values())
    first = (tmp_path / "out" / "steady_state.json").read_bytes()
    assert list((tmp_path / "cache").iterdir())
    with caplog.at_level("INFO", logger="vpbirman"):
        res = invoke("-v", "steady-state", str(config))
    assert res.exit_code == 0
    assert any("cache hit" in r.getMessage() for r in caplog.records)
    assert (tmp_path / "out" / "steady_state.json").read_bytes() == first


def test_cache_env_var(config, tmp_path):
    env_cache = tmp_path / "env_cache"
    res = invoke("steady-state", str(config), env={"VPBIRMAN_CACHE": str(env_cache)})
    assert res.exit_code == 0
    assert list(env_cache.iterdir())


def test_k_out_of_range_exit_2(config):
    res = invoke("steady-state", str(config), "--set", "model.k=3.6")
    assert res.exit_code == 2
    assert "7/2" in res.output


def test_bad_config_exit_2(config, tmp_path):
    assert invoke("orbits", str(config), "--set", "grid.n_r=2").exit_code == 2
    assert invoke("orbits", str(config), "--set", "nonsense=1").exit_code == 2
    assert invoke("orbits", str(config), "--set", "model.kind=plummer").exit_code == 2
    assert invoke("orbits", str(config), "--set", "grid.bogus=3").exit_code == 2


def test_steady_state_requires_polytrope(config):
    res = invoke("steady-state", str(config), "--set", "model.kind=kepler")
    assert res.exit_code == 2


def test_orbits_and_bands(config, tmp_path):
    res = invoke("orbits", str(config))
    assert res.exit_code == 0
    payload = json.loads(res.output)
    assert 0 < payload["delta1"] <= payload["Delta1"]
    out = tmp_path / "out"
    assert (out / "orbit_table.csv").exists() and (out / "emin_curve.csv").exists()
    res = invoke("bands", str(config))
    bands = json.loads(res.output)
    assert bands["bands"][0] == pytest.approx([payload["delta1"] ** 2, payload["Delta1"] ** 2])
    if payload["Delta1"] >= 2 * payload["delta1"]:
        assert bands["lambda_c"] == pytest.approx(payload["delta1"] ** 2)


def test_kepler_orbits(config):
    res = invoke("orbits", str(config), "--set", "model={kind: kepler, e0: -0.5}")
    assert res.exit_code == 0
    assert json.loads(res.output)["delta1"] == pytest.approx(1.0, rel=1e-8)


def test_report_and_determinism(config, tmp_path):
    res = invoke("report", str(config))
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    for key in ("delta1", "Delta1", "bands", "lambda_c", "mu1_at_0", "mu1_at_0_err", "mu_star_est",
                "galerkin_min", "lambda_star_flow", "agreement_flags"):
        assert key in report
    assert all(v == "ok" for v in report["status"].values())
    first = (tmp_path / "out" / "report.json").read_bytes()
    assert invoke("report", str(config)).exit_code == 0
    assert (tmp_path / "out" / "report.json").read_bytes() == first


def test_mu_curve_outputs(config, tmp_path):
    res = invoke("mu-curve", str(config))
    assert res.exit_code == 0
    rows = (tmp_path / "out" / "mu_curve.csv").read_text().splitlines()
    assert rows[0].startswith("lambda") and len(rows) == 1 + SMALL["spectrum"]["n_lambda"]


def test_load_config_overrides(config):
    cfg = load_config(str(config), ["grid.k_max=12", "spectrum.top=0.5"])
    assert cfg.grid.k_max == 12 and cfg.spectrum.top == 0.5
    assert RunConfig.from_mapping(None).grid.k_max == 32


def test_version():
    res = invoke("--version")
    assert res.exit_code == 0 and "version" in res.output

import csv
import io
import json

import pytest

from subcir import cli, config, model
from subcir.cir import Boundary, classify_boundary
from subcir.errors import ConfigError


@pytest.fixture
def shipped_cfg(tmp_path):
    path = tmp_path / "shipped.json"
    path.write_text(config.shipped_config_text())
    return path


def write_cfg(tmp_path, data, name="c.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def minimal(sub=None):
    return {"model": {"kappa": 1.0, "theta": 0.1, "sigma": 0.25,
                      "subordinator": sub or {"gamma": 0.0, "C": 0.5, "alpha": 0.5, "eta": 1.0}}}


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_shipped_config_is_valid(shipped_cfg):
    rc = config.load_config(shipped_cfg, env={})
    m = rc.model()
    assert classify_boundary(m.cir) is Boundary.ENTRANCE
    assert (m.sub.family.C, m.sub.family.alpha, m.sub.family.eta, m.sub.gamma_drift) == (0.5, 0.5, 1.0, 0.0)


def test_all_problems_reported_at_once():
    bad = minimal({"C": 1.0, "alpha": 1.5, "eta": 1.0})
    bad["mc"] = {"n_paths": -1}
    bad["extra"] = True
    with pytest.raises(ConfigError) as ei:
        config.parse_config(json.dumps(bad), env={})
    ptrs = {p for p, _ in ei.value.problems}
    assert {"", "/mc/n_paths", "/model/subordinator/alpha"} <= ptrs


def test_malformed_and_empty(tmp_path):
    with pytest.raises(ConfigError):
        config.parse_config("{", env={})
    with pytest.raises(ConfigError) as ei:
        config.parse_config("{}", env={})
    assert "model" in str(ei.value)
    with pytest.raises(ConfigError):
        config.load_config(tmp_path / "missing.json", env={})


def test_semantic_checks():
    with pytest.raises(ConfigError):
        config.parse_config(json.dumps(minimal({"gamma": 0.0})), env={})
    cfg = minimal()
    cfg["mc"] = {"business_times": [0.0, 1.0, 0.5]}
    with pytest.raises(ConfigError) as ei:
        config.parse_config(json.dumps(cfg), env={})
    assert ei.value.problems[0][0] == "/mc/business_times"


def test_seed_env_override():
    rc = config.parse_config(json.dumps(minimal()), env={config.SEED_ENV: "77"})
    assert rc.path_config().seed == 77
    with pytest.raises(ConfigError):
        config.parse_config(json.dumps(minimal()), env={config.SEED_ENV: "abc"})


def test_spectrum_first_row(shipped_cfg, capsys):
    code, out, err = run(["spectrum", "--config", str(shipped_cfg)], capsys)
    assert code == 0
    r = rows(out)
    assert r[0] == ["beta", "n", "lambda", "phi_lambda", "norm"]
    assert r[1][:2] == ["1", "1"]
    assert abs(float(r[1][3]) - 0.084) < 5e-4
    assert json.loads(err.splitlines()[-1])["event"] == "done"


def test_survival_trivial_matches_affine(tmp_path, capsys):
    from subcir.cir import CirParams, charfun_affine
    cfg = minimal({"gamma": 1.0})
    cfg["survival"] = {"x": 0.1, "horizons": [0.5, 2.0]}
    code, out, _ = run(["survival", "--config", str(write_cfg(tmp_path, cfg))], capsys)
    assert code == 0
    r = rows(out)
    assert r[0] == ["T", "Q"]
    p = CirParams(1.0, 0.1, 0.25)
    for T, Q in r[1:]:
        assert abs(float(Q) - charfun_affine(p, float(T), 1.0, 0.0, 0.1)) < 1e-8


def test_spreads_has_s_inf_row(shipped_cfg, capsys):
    code, out, _ = run(["spreads", "--config", str(shipped_cfg)], capsys)
    r = rows(out)
    assert code == 0 and r[0] == ["T", "S"] and r[-1][0] == "S_inf"


def test_json_format(shipped_cfg, capsys):
    code, out, _ = run(["survival", "--config", str(shipped_cfg), "--format", "json"], capsys)
    data = json.loads(out)
    assert code == 0 and set(data[0]) == {"T", "Q"}


def test_intensity_and_levy(tmp_path, capsys):
    cfg = minimal()
    cfg["intensity"] = {"x": [0.0, 0.1]}
    cfg["levy"] = {"x": [0.1], "y": [0.05, 0.1, 0.2]}
    path = write_cfg(tmp_path, cfg)
    code, out, _ = run(["intensity", "--config", str(path)], capsys)
    assert code == 0 and rows(out)[0] == ["x", "k_phi"]
    code, out, _ = run(["levy", "--config", str(path)], capsys)
    r = rows(out)
    assert r[0] == ["x", "y", "pi0_phi"]
    # y = x is skipped
    assert [row[1] for row in r[1:]] == ["0.05", "0.2"]
    m = config.parse_config(json.dumps(cfg), env={}).model()
    assert float(r[1][2]) == pytest.approx(model.levy_density_state(m, 0, 0.1, -0.05), rel=1e-12)


def test_price_command(shipped_cfg, capsys):
    code, out, _ = run(["price", "--config", str(shipped_cfg)], capsys)
    r = rows(out)
    assert code == 0 and r[0] == ["id", "t", "T", "x", "d", "price"] and len(r) == 4


def test_simulate_byte_identical(tmp_path, capsys):
    cfg = minimal()
    cfg["mc"] = {"n_paths": 5, "seed": 3, "business_times": {"start": 0, "stop": 1, "num": 11}}
    path = write_cfg(tmp_path, cfg)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["simulate", "--config", str(path), "--out", str(a)]) == 0
    assert cli.main(["simulate", "--config", str(path), "--out", str(b), "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    r = rows(a.read_text())
    assert r[0] == ["path_id", "t", "T_t", "X_phi", "D_phi", "k_phi_of_X"]
    assert len(r) == 1 + 5 * 11


def test_config_error_exit_code(tmp_path, capsys):
    bad = minimal({"C": 1.0, "alpha": 1.5, "eta": 1.0})
    code, _, err = run(["survival", "--config", str(write_cfg(tmp_path, bad))], capsys)
    assert code == 2
    diag = json.loads(err.splitlines()[0])
    assert diag["pointer"] == "/model/subordinator/alpha" and diag["level"] == "error"


def test_unsupported_sampler_is_config_error(tmp_path, capsys):
    cfg = minimal({"C": 0.5, "alpha": 0.3, "eta": 1.0})
    cfg["mc"] = {"n_paths": 2}
    code, _, _ = run(["simulate", "--config", str(write_cfg(tmp_path, cfg))], capsys)
    assert code == 2


def test_nonconvergence_exit_code(tmp_path, capsys):
    cfg = minimal()
    cfg["numerics"] = {"n_max": 8, "tol": 1e-16}
    cfg["survival"] = {"x": 0.1, "horizons": [0.001]}
    code, _, err = run(["survival", "--config", str(write_cfg(tmp_path, cfg))], capsys)
    assert code == 3
    assert json.loads(err.splitlines()[0])["kind"] == "convergence"


def test_validate_report_small(tmp_path, capsys, monkeypatch):
    cfg = minimal()
    cfg["validate"] = {"n_paths": 2000, "sampler_draws": 20000}
    code, out, _ = run(["validate", "--config", str(write_cfg(tmp_path, cfg))], capsys)
    report = json.loads(out)
    assert out == json.dumps(report, sort_keys=True, indent=2) + "\n"
    assert len(report["checks"]) == 10
    assert code == (0 if report["passed"] else 1)

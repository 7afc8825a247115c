import json
import math

import pytest

from bellcv.cli import main
from bellcv.config import ConfigError, load_config

SMALL = {"state": {"type": "bell_bv", "sigma_plus_mm": 0.1, "sigma_minus_mm": 0.03}}
RATIO10 = {
    "state": {"type": "bell_bv", "sigma_plus_mm": 0.3, "sigma_minus_mm": 0.03},
    "optimize": {"seed_axis": [-150, 150, 30], "bounds": [[-200, 200]] * 4, "seed_count": 1, "max_evals": 400},
}


def _write(tmp_path, name, cfg):
    path = tmp_path / name
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    return str(path)


def _rows(path):
    lines = [l for l in open(path) if not l.startswith("#")]
    cols = lines[0].strip().split(",")
    return cols, [dict(zip(cols, map(float, l.split(",")))) for l in lines[1:]]


def test_validate_small_config(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["validate", "--config", _write(tmp_path, "c.json", SMALL), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["passed"] and not report["failures"]
    assert "FAIL" not in capsys.readouterr().out


def test_validate_default_config(capsys):
    assert main(["validate"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) >= 10 and all(l.startswith("PASS") for l in lines)


def test_validate_truncation_failure(tmp_path, capsys):
    cfg = {"state": {"type": "bell_bv", "sigma_plus_mm": 1.0, "sigma_minus_mm": 0.01}, "truncation": 16}
    out = tmp_path / "report.json"
    assert main(["validate", "--config", _write(tmp_path, "c.json", cfg), "--out", str(out)]) == 3
    report = json.loads(out.read_text())
    assert report["failures"] == ["tail_certificate"]
    assert report["required_truncation"] > 16
    assert "FAIL tail_certificate" in capsys.readouterr().out


@pytest.mark.parametrize("text", ['{"state":', '{"state": {"type": "bell_bv"}}', '{"state": 3}',
                                  '{"state": {"type": "bell_bv", "sigma_plus_mm": 0.01, "sigma_minus_mm": 1}}',
                                  '{"state": {"type": "bell_bv", "sigma_plus_mm": 1, "sigma_minus_mm": 0.1},'
                                  ' "truncation": 8}',
                                  '{"state": {"type": "bell_bv", "sigma_plus_mm": 1, "sigma_minus_mm": 0.1},'
                                  ' "wavelength_nm": -1}'])
def test_config_errors_exit_2(tmp_path, text, capsys):
    assert main(["validate", "--config", _write(tmp_path, "c.json", text)]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "nope.json")]) == 2


def test_bad_grid_flag(tmp_path):
    assert main(["wigner", "--grid", "1:0:1"]) == 2


def test_load_config_defaults():
    cfg = load_config(SMALL)
    assert cfg.optics.wavelength_nm == 650.0
    assert cfg.truncation is None
    with pytest.raises(ConfigError):
        load_config({"state": {"type": "poly_gaussian", "sigma_plus_mm": 1, "sigma_minus_mm": 0.1}}).state_spec


def test_wigner_parts(tmp_path):
    minus = tmp_path / "m.csv"
    assert main(["wigner", "--part", "minus", "--out", str(minus)]) == 0
    cols, rows = _rows(minus)
    assert cols == ["x", "k", "W"]
    assert min(r["W"] for r in rows) < 0
    header = [l for l in open(minus) if l.startswith("#")]
    assert any("sigma_minus_mm: 0.01" in l for l in header)
    assert any(l.startswith("# config: {") for l in header)

    plus = tmp_path / "p.csv"
    assert main(["wigner", "--part", "plus", "--out", str(plus)]) == 0
    assert min(r["W"] for r in _rows(plus)[1]) >= 0

    prod = tmp_path / "x.csv"
    assert main(["wigner", "--part", "product", "--grid=-0.01:0.01:0.01", "--grid=-1:1:1", "--out", str(prod)]) == 0
    origin = [r for r in _rows(prod)[1] if r["x"] == 0 and r["k"] == 0]
    assert origin[0]["W"] == pytest.approx(1 / math.pi**2, rel=1e-14)


def test_output_is_deterministic(tmp_path):
    cfg = _write(tmp_path, "c.json", SMALL)
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        assert main(["chsh-scan", "--config", cfg, "--grid=-30:30:15", "--grid=-30:30:15",
                     "--no-timestamp", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    stamped = tmp_path / "c.csv"
    main(["chsh-scan", "--config", cfg, "--grid=-30:30:15", "--grid=-30:30:15", "--out", str(stamped)])
    assert b"# timestamp:" in stamped.read_bytes() and b"# timestamp:" not in outs[0]


def test_double_gaussian_scan_never_violates(tmp_path):
    cfg = {"state": {"type": "double_gaussian", "sigma_plus_mm": 0.1, "sigma_minus_mm": 0.03}}
    out = tmp_path / "s.csv"
    for mode in ("symmetric_pair", "full_4tuple"):
        assert main(["chsh-scan", "--config", _write(tmp_path, "c.json", cfg), "--mode", mode,
                     "--grid=-40:40:10", "--grid=-40:40:10", "--out", str(out)]) == 0
        assert max(r["s_max"] for r in _rows(out)[1]) <= 2


def test_opt_then_misalign_consistency(tmp_path):
    cfg = _write(tmp_path, "c.json", RATIO10)
    opt_path = tmp_path / "opt.json"
    assert main(["chsh-opt", "--config", cfg, "--no-timestamp", "--out", str(opt_path)]) == 0
    opt = json.loads(opt_path.read_text())
    for key in ("settings", "s_max", "branch", "err_bound", "converged", "trace"):
        assert key in opt
    assert opt["s_max"] > 2
    assert opt["trace"]["evaluations"] > 0
    st = opt["settings"]
    base = ",".join(repr(st[k]) for k in ("za_mm", "za_prime_mm", "zb_mm", "zb_prime_mm"))
    mis = tmp_path / "mis.csv"
    assert main(["misalign", "--config", cfg, f"--base={base}", "--out", str(mis)]) == 0
    cols, rows = _rows(mis)
    assert cols == ["dxp_mm", "dxm_mm", "s_max", "s_minus_2"]
    centre = [r for r in rows if r["dxp_mm"] == 0 and r["dxm_mm"] == 0]
    assert centre[0]["s_max"] == opt["s_max"]


def test_opt_budget_flagged_not_failed(tmp_path):
    cfg = dict(RATIO10, optimize={"seeds": [[90, -30, 90, -30]], "bounds": [[-200, 200]] * 4, "max_evals": 10})
    out = tmp_path / "o.json"
    assert main(["chsh-opt", "--config", _write(tmp_path, "c.json", cfg), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["converged"] is False


def test_misalign_requires_base():
    assert main(["misalign", "--base", "1,2,3"]) == 2

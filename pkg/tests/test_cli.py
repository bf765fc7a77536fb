import csv
import io
import os
import textwrap

import numpy as np
import pytest
import yaml

from nlharnack import cli
from nlharnack.errors import ConfigError
from nlharnack.scenario import CHECKS, build_scenario, load_config, validate_config, with_overrides

BASE = {
    "scenario_id": "affine",
    "kernel": {"shape": "box"},
    "domain": {"dim": 1, "boxes": [[0.0, 1.0]], "h": 1 / 512},
    "fields": {"g": "expr:affine(0.2, 0.1)", "b": "a", "beta": 0.3},
    "verify": {"checks": ["harnack_ratio", "boundary_harnack"], "omega": [[0.3, 0.7]], "eta": 0.1},
}


def write_cfg(tmp_path, cfg, name="s.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def run(tmp_path, command, cfg, *extra):
    return cli.main([command, write_cfg(tmp_path, cfg), "--out", str(tmp_path / "out"), *extra])


# -- configuration --------------------------------------------------------------------------------

def test_unknown_key_rejected():
    cfg = {**BASE, "kernel": {"shape": "box", "colour": 1}}
    with pytest.raises(ConfigError, match="colour"):
        validate_config(cfg)


def test_missing_field_file_rejected(tmp_path):
    cfg = {**BASE, "fields": {**BASE["fields"], "g": "file:nope.txt"}}
    with pytest.raises(ConfigError, match="missing file"):
        validate_config(cfg, str(tmp_path))


def test_field_file_roundtrip(tmp_path):
    n = 64
    x = (np.arange(n) + 0.5) / n
    (tmp_path / "g.txt").write_text("".join(f"{float(v)!r}\n" for v in 0.2 + 0.1 * x))
    cfg = {**BASE, "domain": {**BASE["domain"], "h": 1 / n}, "fields": {**BASE["fields"], "g": "file:g.txt"}}
    sc = build_scenario(validate_config(cfg, str(tmp_path)), str(tmp_path))
    np.testing.assert_allclose(sc.fields.g, 0.2 + 0.1 * x, rtol=1e-15)


def test_declared_constants_may_not_exceed_computed():
    cfg = {**BASE, "kernel": {"shape": "box", "m0": 0.9}}
    with pytest.raises(ConfigError, match="m0"):
        build_scenario(cfg)
    weaker = {**BASE, "kernel": {"shape": "box", "m0": 0.4}}
    build_scenario(weaker)


def test_overrides_do_not_mutate():
    cfg = with_overrides(BASE, h=0.01, eta=0.2)
    assert cfg["domain"]["h"] == 0.01 and cfg["verify"]["eta"] == 0.2
    assert BASE["domain"]["h"] == 1 / 512
    with pytest.raises(ConfigError):
        with_overrides(BASE, colour=1)


def test_load_config_bad_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("kernel: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(str(p))


# -- exit codes -----------------------------------------------------------------------------------

def test_validate_exit_zero(tmp_path):
    cfg = {**BASE, "fields": {"g": "const:0.3", "b": "const:1", "beta": 0.3}}
    assert run(tmp_path, "validate", cfg) == 0
    rows = read_csv(tmp_path / "out" / "affine_validate.csv")
    assert all(r["pass"] == "true" for r in rows)


def test_validate_failure_exit_one(tmp_path):
    cfg = {**BASE, "kernel": {"shape": "two_spike", "spike_half_width": 0.1},
           "domain": {"dim": 1, "boxes": [[0.0, 12.566370614359172]], "h": 12.566370614359172 / 512,
                      "periodic": True},
           "fields": {"g": "const:1", "b": "const:1", "beta": 1.0}}
    assert run(tmp_path, "validate", cfg) == 1


def test_config_errors_exit_two(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text(": : :\n")
    assert cli.main(["verify", str(p)]) == 2
    assert run(tmp_path, "verify", {**BASE, "extra": 1}) == 2
    assert cli.main(["verify", str(tmp_path / "absent.yaml")]) == 2


def test_precondition_exit_three(tmp_path, capsys):
    # g vanishes at the first node, so the global estimate's hypothesis fails
    cfg = {**BASE, "fields": {"g": "file:g.txt", "b": "const:1", "beta": 0.3},
           "verify": {"checks": ["boundary_harnack"], "field": "u.txt"}}
    (tmp_path / "g.txt").write_text("0.0\n" + "0.3\n" * 511)
    (tmp_path / "u.txt").write_text("1.0\n" * 512)
    assert run(tmp_path, "verify", cfg) == 3
    assert "precondition" in capsys.readouterr().err
    rows = read_csv(tmp_path / "out" / "affine_verify.csv")
    assert rows[0]["pass"] == "error"


def test_solve_then_verify(tmp_path):
    assert run(tmp_path, "solve", BASE) == 0
    phi = np.loadtxt(tmp_path / "out" / "affine_phi.txt")
    assert phi.shape == (512,) and phi.max() == 1.0
    summary = {r["quantity"]: r["value"] for r in read_csv(tmp_path / "out" / "affine_solve.csv")}
    assert abs(float(summary["lambda"]) - 1) <= 1e-10
    cfg = {**BASE, "verify": {**BASE["verify"], "field": str(tmp_path / "out" / "affine_phi.txt")}}
    assert run(tmp_path, "verify", cfg) == 0
    rows = read_csv(tmp_path / "out" / "affine_verify.csv")
    assert list(rows[0].keys()) == list(cli.VERIFY_HEADER)
    assert [r["check_name"] for r in rows] == ["harnack_ratio", "boundary_harnack"]
    assert all(r["pass"] == "true" for r in rows)


def test_verify_all_checks_inline(tmp_path):
    cfg = {**BASE, "verify": {"checks": list(CHECKS), "omega": [[0.3, 0.7]], "eta": 0.1}}
    assert run(tmp_path, "verify", cfg, "--threads", "3") == 0
    rows = read_csv(tmp_path / "out" / "affine_verify.csv")
    verdict = {r["check_name"]: r["pass"] for r in rows}
    assert verdict["supermedian_ratio"] == "inapplicable"
    assert all(v == "true" for k, v in verdict.items() if k != "supermedian_ratio")


def test_verify_failing_bound_exit_one(tmp_path):
    cfg = {**BASE, "verify": {"checks": ["boundary_harnack"], "bound": 1.2}}
    assert run(tmp_path, "verify", cfg) == 1


def test_stdout_flag(tmp_path, capsys):
    run(tmp_path, "solve", BASE, "--stdout")
    out, err = capsys.readouterr()
    assert out.startswith("quantity,value\n")
    assert "lambda" in err
    run(tmp_path, "solve", BASE)
    assert capsys.readouterr().out == ""


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("NLHARNACK_THREADS", "4")
    assert cli._threads(None) == 4
    assert cli._threads(2) == 2
    monkeypatch.delenv("NLHARNACK_THREADS")
    assert cli._threads(None) == 1


def test_counterexample_command(tmp_path):
    cfg = {**BASE, "counterexample": {"half_widths": [0.1, 0.05, 0.025], "n_nodes": 1024}}
    assert run(tmp_path, "counterexample", cfg) == 0
    rows = read_csv(tmp_path / "out" / "affine_counterexample.csv")
    ratios = [float(r["ratio"]) for r in rows]
    assert ratios == sorted(ratios) and len(set(ratios)) == 3


def test_sweep_long_format(tmp_path):
    cfg = {**BASE, "domain": {**BASE["domain"], "h": 1 / 256},
           "verify": {"checks": ["harnack_ratio"], "omega": [[0.3, 0.7]]},
           "sweep": {"grid": {"eta": [0.1, 0.15], "h": [1 / 512, 1 / 1024]}}}
    assert run(tmp_path, "sweep", cfg, "--threads", "2") == 0
    rows = read_csv(tmp_path / "out" / "affine_sweep.csv")
    assert set(rows[0]) == {"scenario_id", "point", "eta", "h", "quantity", "value"}
    assert {r["point"] for r in rows} == {"0", "1", "2", "3"}
    for k in range(4):
        assert (tmp_path / "out" / f"affine_sweep_point{k}.csv").exists()
    lam = [float(r["value"]) for r in rows if r["quantity"] == "lambda"]
    assert all(abs(v - 1) <= 1e-10 for v in lam)


def test_exhaustion_solve(tmp_path):
    cfg = {**BASE, "domain": {"dim": 1, "boxes": [[-1.0, 1.0]], "h": 1 / 64},
           "fields": {"g": "expr:cosine(0.6, 0.2)", "b": "a", "beta": 0.8},
           "solver": {"exhaustion_boxes": [[[-1.0, 1.0]], [[-2.0, 2.0]], [[-4.0, 4.0]]],
                      "anchor": [0.5], "eta1": 0.1}}
    assert run(tmp_path, "solve", cfg) == 0
    rows = read_csv(tmp_path / "out" / "affine_exhaustion.csv")
    assert [r["stage"] for r in rows] == ["0", "1", "2"]
    for k in range(3):
        assert (tmp_path / "out" / f"affine_phi_stage{k}.txt").exists()


def test_mollified_solve_and_plot_tables(tmp_path):
    cfg = {**BASE, "domain": {**BASE["domain"], "h": 1 / 128},
           "solver": {"mollifier_widths": [0.2, 0.1]},
           "output": {"emit_fields": True, "emit_plot_tables": True}}
    assert run(tmp_path, "solve", cfg) == 0
    table = np.loadtxt(tmp_path / "out" / "affine_phi_plot.txt")
    assert table.shape == (128, 2)
    rows = read_csv(tmp_path / "out" / "affine_mollifier.csv")
    assert len(rows) == 2

import json

import pytest

from tadpole import cli
from tadpole.errors import NewtonDiverged


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def read_summary(out):
    with open(out / "summary.json") as fh:
        return json.load(fh)


def test_counts_example(tmp_path):
    code, out = run(tmp_path, "counts", "--p", "1", "--branch", "vanishing_tail:1:+",
                    "--omega", "-1")
    assert code == 0
    s = read_summary(out)
    assert s["schema"] == 1
    assert s["L_minus"] == {"n_neg": 1, "n_zero": 1}
    assert s["L_plus"] == {"n_neg": 2, "n_zero": 0}
    assert (out / "spectra.csv").exists()


def test_figure_one_writes_two_csvs(tmp_path):
    code, out = run(tmp_path, "figures", "--which", "1", "--p", "1")
    assert code == 0
    csvs = sorted(p.name for p in out.glob("*.csv"))
    assert csvs == ["figure1_vanishing_tail_n1.csv", "figure1_vanishing_tail_n2.csv"]
    lines = (out / csvs[0]).read_text().splitlines()
    assert lines[0].startswith("# tadpole figures")
    assert "config_hash=" in lines[1] and lines[2].startswith("# grid L=")
    assert lines[3] == "branch,omega,x,value,segment"
    rows = [l.split(",") for l in lines[4:]]
    assert {r[4] for r in rows} == {"ring", "tail"}
    assert all(r[1] == "-1" for r in rows)


def test_primary_at_bifurcation_exits_partial(tmp_path, capsys):
    code, out = run(tmp_path, "solve", "--branch", "primary", "--omega", "-0.0001")
    assert code == 2
    s = read_summary(out)
    assert s["status"] == "partial"
    assert s["errors"][0]["error"] == "BranchCollapsed"
    assert "primary" in capsys.readouterr().err


def test_outputs_are_byte_identical(tmp_path):
    args = ["sweep", "--branch", "higher:1:+", "--branch", "vanishing_tail:1:-",
            "--omega-range=-0.5:-1.5:5"]
    c1, a = run(tmp_path, *args, "--workers", "1", name="a")
    c2, b = run(tmp_path, *args, "--workers", "3", name="b")
    assert c1 == c2 == 0
    for name in ("profiles.csv", "spectra.csv", "stability.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_sweep_summary_contents(tmp_path):
    code, out = run(tmp_path, "sweep", "--branch", "higher:1:+", "--omega-range=-0.5:-1:3")
    assert code == 0
    s = read_summary(out)
    sample = s["branches"][0]["samples"][-1]
    assert sample["L_plus"] == {"n_neg": 3, "n_zero": 0}
    assert sample["stability"]["verdict"] == "unstable_real"
    assert sample["wave"]["b"] is not None
    assert sample["wave"]["iterations"] >= 1
    assert sorted(s["artifacts"]) == ["profiles.csv", "spectra.csv", "stability.csv"]


def test_sweep_stall_is_partial(tmp_path, monkeypatch):
    import tadpole.stationary as st_mod
    real = st_mod.newton_solve

    def failing(seed, omega, *a, **k):
        if omega < -0.8:
            raise NewtonDiverged("injected", 1.0, 0)
        return real(seed, omega, *a, **k)

    monkeypatch.setattr(st_mod, "newton_solve", failing)
    code, out = run(tmp_path, "sweep", "--branch", "higher:1:+", "--omega-range=-0.5:-1:6")
    assert code == 2
    s = read_summary(out)
    assert len(s["branches"][0]["samples"]) == 4
    assert s["errors"][0]["error"] == "ContinuationStalled"


def test_env_overrides_out(tmp_path, monkeypatch):
    target = tmp_path / "env"
    monkeypatch.setenv("TADPOLE_OUT", str(target))
    code, _ = run(tmp_path, "evans", "--p", "1", name="ignored")
    assert code == 0
    assert (target / "summary.json").exists() and not (tmp_path / "ignored").exists()
    roots = read_summary(target)["evans"]["roots"]
    assert roots["plus"]["Lambda0"] == pytest.approx(-3.0, abs=1e-9)
    assert roots["plus"]["finite_difference_check"] == pytest.approx(-3.0, abs=1e-3)


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p": 1, "branches": [{"kind": "vanishing_tail", "n": 2,
                                                      "sign": "+"}],
                               "omega": -0.5, "tolerances": {"newton_tol": 1e-11}}))
    code, out = run(tmp_path, "counts", "--config", str(cfg), "--omega", "-1")
    assert code == 0
    s = read_summary(out)
    assert s["config"]["omega"] == -1 and s["config"]["newton_tol"] == 1e-11
    assert s["L_plus"] == {"n_neg": 4, "n_zero": 0}


def test_config_errors_name_the_line(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "p": 1,\n  "n_ring": 100,\n  "colour": "red"\n}\n')
    code, _ = run(tmp_path, "counts", "--config", str(cfg))
    assert code == 1
    assert f"{cfg}:4: colour: unknown key" in capsys.readouterr().err
    cfg.write_text('{\n  "p": 1,\n  "omega": \n}\n')
    assert run(tmp_path, "counts", "--config", str(cfg))[0] == 1
    assert f"{cfg}:4:1: invalid JSON" in capsys.readouterr().err


@pytest.mark.parametrize("args, message", [
    (["counts", "--branch", "higher:1:+", "--omega", "0.5"], "needs omega < 0"),
    (["counts", "--branch", "vanishing_tail:1:+", "--omega", "2"], "needs omega <"),
    (["counts", "--branch", "higher:1:+", "--omega", "-1", "--zero-tol", "-1"],
     "zero_tol must be positive"),
    (["counts", "--branch", "bogus:1:+", "--omega", "-1"], "--branch"),
    (["sweep", "--branch", "primary", "--omega", "-1"], "omega-range"),
    (["figures", "--which", "9"], "unknown figure"),
])
def test_validation_errors_exit_one(tmp_path, capsys, args, message):
    code, _ = run(tmp_path, *args)
    assert code == 1
    assert message in capsys.readouterr().err


def test_config_hash_ignores_output_location(tmp_path):
    a = cli.RunConfig(out="x", workers=1)
    b = cli.RunConfig(out="y", workers=8)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != cli.RunConfig(p=2.0).config_hash()

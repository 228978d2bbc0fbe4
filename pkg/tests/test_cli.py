import json
import math

import pytest

from attenuspec.cli import ConfigError, load_config, main

SMALL = {"discretization": {"n_boundary": 64, "h": 0.45}, "geometry": {"R": 1.0, "eps": 0.2}}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write_config(path, model, **extra):
    cfg = {"model": model, **SMALL, **extra}
    path.write_text(json.dumps(cfg))
    return path


def test_speed_infinite(capsys):
    code, out, _ = run(capsys, "model", "speed", "--model", "thermo_viscous", "--tau", 1)
    assert code == 0 and out.strip() == "infinite"


def test_speed_nsw(capsys):
    code, out, _ = run(capsys, "model", "speed", "--model", "nsw", "--c0", 1, "--tau", 2, "--tau-tilde", 1)
    assert code == 0 and float(out) == pytest.approx(math.sqrt(2), abs=1e-4)


def test_model_eval(capsys):
    code, out, _ = run(capsys, "model", "eval", "--model", "linear", "--c", 2, "--omega", 3)
    assert code == 0
    w, re_, im_ = map(float, out.split())
    assert (w, re_, im_) == (3.0, 1.5, 0.0)


def test_classify_json(capsys):
    code, out, _ = run(capsys, "model", "classify", "--model", "thermo_viscous", "--tau", 1)
    res = json.loads(out)
    assert code == 0 and res["class"] == "strong" and res["beta"] == 0.5


def test_range_writes_csv(capsys, tmp_path):
    out_csv = tmp_path / "r.csv"
    code, out, _ = run(capsys, "model", "range", "--model", "power_law", "--alpha", 1, "--gamma", 0.5,
                       "--n", 20, "--out", out_csv)
    assert code == 0 and "0 flagged" in out
    assert len(out_csv.read_text().splitlines()) == 401
    assert (tmp_path / "r.manifest.json").exists()


def test_kernel_commands(capsys, tmp_path):
    code, out, _ = run(capsys, "kernel", "eval", "--model", "linear", "--c", 1, "--omega", 1, "--x", "1,0,0")
    assert code == 0
    assert math.hypot(*map(float, out.split())) == pytest.approx(1 / (4 * math.pi * math.sqrt(2 * math.pi)))
    code, _, err = run(capsys, "kernel", "deriv", "--model", "linear", "--c", 1, "--omega", 1, "--x", "1,0,0",
                       "--v", "1,1,0", "--j", 1)
    assert code == 1 and "unit vector" in err
    code, _, _ = run(capsys, "kernel", "freqint", "--model", "thermo_viscous", "--tau", 1, "--out", tmp_path / "q.csv")
    assert code == 0 and len((tmp_path / "q.csv").read_text().splitlines()) == 12


def test_empty_config(capsys, tmp_path):
    (tmp_path / "empty.json").write_text("{}")
    code, _, err = run(capsys, "spectrum", "--config", tmp_path / "empty.json")
    assert code == 1
    assert "model: required block missing" in err and "geometry: required block missing" in err


def test_config_problem_listing():
    with pytest.raises(ConfigError) as exc:
        load_config({"model": {"model": "power_law", "alpha": -1}, "geometry": {"R": 1, "eps": 0.2, "bogus": 1},
                     "extra": 1})
    assert len(exc.value.problems) == 3


def test_config_defaults_resolved():
    cfg = load_config({"model": {"model": "nsw", "c0": 1, "tau": 2, "tau_tilde": 1}, "geometry": {"R": 1}})
    assert cfg.geometry["eps"] == 0.2
    assert cfg.discretization == {"n_boundary": 512, "h": 0.125}


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    code, _, err = run(capsys, "model", "speed", "--model", "power_law", "--alpha", -2)
    assert code == 1 and "error" in err


def test_spectrum_fit_pipeline(capsys, tmp_path):
    cfg = write_config(tmp_path / "weak.json", {"model": "linear", "c": 1})
    code, _, _ = run(capsys, "spectrum", "--config", cfg, "--out", tmp_path / "spec.csv")
    assert code == 0
    manifest = json.loads((tmp_path / "spec.manifest.json").read_text())
    assert manifest["settings"]["discretization"] == {"n_boundary": 64, "h": 0.45}
    assert manifest["settings"]["neg_tol"] == 1e-6
    assert "omega_band" in manifest["results"]
    code, out, _ = run(capsys, "fit", "--in", tmp_path / "spec.csv", "--law", "power", "--range", "2:14")
    assert code == 0
    fit = json.loads(out)
    assert fit["law"] == "power" and fit["rate"] > 0 and fit["floor"] == 1e-14


def test_assemble_then_spectrum(capsys, tmp_path):
    cfg = write_config(tmp_path / "tv.json", {"model": "thermo_viscous", "tau": 1})
    code, _, _ = run(capsys, "assemble", "--config", cfg, "--out", tmp_path / "g.bin")
    assert code == 0 and (tmp_path / "g_summary.csv").exists()
    code, _, _ = run(capsys, "spectrum", "--in", tmp_path / "g.bin", "--out", tmp_path / "a.csv")
    assert code == 0
    code, _, _ = run(capsys, "spectrum", "--config", cfg, "--out", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_fit_requires_s(capsys, tmp_path):
    (tmp_path / "s.csv").write_text("n,lambda\n" + "".join(f"{n},{n ** -1.0}\n" for n in range(1, 60)))
    code, _, err = run(capsys, "fit", "--in", tmp_path / "s.csv", "--law", "stretched")
    assert code == 1 and "--s" in err
    code, out, _ = run(capsys, "fit", "--in", tmp_path / "s.csv", "--law", "stretched", "--s", 0.1667)
    assert code == 0 and json.loads(out)["s"] == 0.1667


def test_compare(capsys, tmp_path):
    (tmp_path / "w.csv").write_text("n,lambda\n" + "".join(f"{n},{n ** -0.7}\n" for n in range(1, 40)))
    (tmp_path / "s.csv").write_text("n,lambda\n" + "".join(f"{n},{math.exp(-n)}\n" for n in range(1, 40)))
    code, out, _ = run(capsys, "compare", "--weak", tmp_path / "w.csv", "--strong", tmp_path / "s.csv")
    assert code == 0 and json.loads(out)["crossover"] == 1


def test_bounds_verify(capsys, tmp_path):
    code, out, _ = run(capsys, "bounds", "verify", "--kernel", "gaussian", "--r", "1..10", "--out", tmp_path / "b.csv")
    assert code == 0 and "10/10" in out
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "r,tail_sum,bound,ok" and all(line.endswith("true") for line in lines[1:])


def test_simulate(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--model", "power_law", "--alpha", 1, "--gamma", 0.5, "--source", "point",
                       "--detector", "0,0,1", "--out", tmp_path / "t.csv")
    rep = json.loads(out)
    assert code == 0 and rep["front_ok"] and rep["causality_fraction"] <= 1e-3
    code, out, _ = run(capsys, "simulate", "--model", "thermo_viscous", "--tau", 1, "--source", "point",
                       "--out", tmp_path / "tv.csv")
    assert code == 0 and "notice" in json.loads(out)


def test_reproducible_csv(capsys, tmp_path):
    for tag in ("a", "b"):
        run(capsys, "simulate", "--model", "nsw", "--c0", 1, "--tau", 2, "--tau-tilde", 1, "--source", "ball:0.1",
            "--out", tmp_path / f"{tag}.csv")
        run(capsys, "bounds", "verify", "--r", "1..4", "--out", tmp_path / f"{tag}_b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a_b.csv").read_bytes() == (tmp_path / "b_b.csv").read_bytes()


def test_threads_env(capsys, monkeypatch):
    monkeypatch.setenv("ATTENUSPEC_THREADS", "x")
    code, _, err = run(capsys, "model", "speed", "--model", "linear", "--c", 1)
    assert code == 1 and "ATTENUSPEC_THREADS" in err
    monkeypatch.setenv("ATTENUSPEC_THREADS", "1")
    assert run(capsys, "model", "speed", "--model", "linear", "--c", 1)[0] == 0


def test_exit_two_on_invariant(capsys, tmp_path):
    (tmp_path / "bad.csv").write_text("n,lambda\n1,1.0\n2,-0.5\n")
    code, _, err = run(capsys, "compare", "--weak", tmp_path / "bad.csv", "--strong", tmp_path / "bad.csv")
    assert code == 2 and "invariant" in err

import csv
import json
import math

import numpy as np
import pytest

from sbpcouple.cli import main
from sbpcouple.config import load_preset


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def small_cfg(**over):
    cfg = {
        "m": 9,
        "blocks": [{"id": "fd", "type": "fd", "rect": [-2, 0, -1, 1]},
                   {"id": "fe", "type": "fe", "rect": [0, 2, -1, 1]}],
        "flux": {"name": "linear", "a": [1, 0]},
        "eps": 0.01,
        "stepper": {"t_end": 0.05},
    }
    cfg.update(over)
    return cfg


def read_snapshot(path):
    return np.loadtxt(path, delimiter=",", skiprows=1)


def test_verify_all_pass(tmp_path, capsys):
    assert main(["verify", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out
    for key in ("Q+Q^T", "A >= 0", "boundary weighting identity", "norm-compatibility", "PSD"):
        assert key in out
    rows = list(csv.DictReader(open(tmp_path / "verify.csv")))
    assert rows and all(r["passed"] == "1" for r in rows)


def test_verify_inject_fault(capsys):
    assert main(["verify", "--scope", "interp", "--inject-fault"]) == 3
    out = capsys.readouterr().out
    assert "FAIL  interp    matching FD2-FE: norm-compatibility residual" in out
    assert "operators" not in out.split("checks passed")[0].split()[1:2]


def test_verify_scope(capsys):
    assert main(["verify", "--scope", "operators"]) == 0
    out = capsys.readouterr().out
    assert "interp" not in out and "sat " not in out


def test_run_zero_initial_data(tmp_path, capsys):
    cfg = small_cfg(initial="zero")
    assert main(["run", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 0
    for bid in ("fd", "fe"):
        snap = read_snapshot(tmp_path / "o" / f"snapshot_{bid}.csv")
        assert np.all(snap[:, 2] == 0)
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["blocks"] == ["fd", "fe"] and man["t_final"] == 0.05
    assert set(man["files"]) == {"snapshot_fd.csv", "snapshot_fe.csv", "energy.csv"}


def test_run_outputs_reproducible(tmp_path):
    cfg = write_cfg(tmp_path, small_cfg(solution={"kind": "gaussian_inviscid"}))
    for d in ("a", "b"):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / d)]) == 0
    for name in ("snapshot_fd.csv", "snapshot_fe.csv", "energy.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_transported_gaussian(tmp_path, capsys):
    cfg = load_preset("fig2_linear")
    cfg["m"] = 21
    assert main(["run", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    snaps = np.vstack([read_snapshot(tmp_path / f"snapshot_{b['id']}.csv") for b in cfg["blocks"]])
    peak = snaps[np.argmax(snaps[:, 2])]
    # started at x = -1, moved one unit to the right
    assert abs(peak[0]) <= 0.1 + 1e-12 and abs(peak[1]) <= 1e-12
    assert peak[2] == pytest.approx(1.0, abs=0.1)
    man = json.loads((tmp_path / "manifest.json").read_text())
    # well below the solution norm sqrt(pi/2) * r2 ~ 0.25 on this coarse grid
    assert man["errors"]["total"] < 0.125
    assert man["max_relative_energy_increase"] <= 1e-8


def test_run_table5_coarsest(tmp_path, capsys):
    cfg = load_preset("table5")
    cfg["m"] = 21
    cfg.pop("ladder")
    assert main(["run", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    total = json.loads((tmp_path / "manifest.json").read_text())["errors"]["total"]
    assert total == pytest.approx(4.73e-2, rel=0.3)


@pytest.mark.parametrize("preset,verdict", [("fig4a", "STABLE"), ("fig4b", "UNSTABLE"),
                                            ("single_fd", "STABLE")])
def test_spectrum_verdicts(tmp_path, capsys, preset, verdict):
    assert main(["spectrum", "--preset", preset, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith(verdict + ":")
    summary = json.loads((tmp_path / "spectrum_summary.json").read_text())
    assert summary["verdict"] == verdict
    rows = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert rows[0] == "re,im" and len(rows) == summary["dof"] + 1


def test_spectrum_rejects_burgers(tmp_path, capsys):
    assert main(["spectrum", "--preset", "table5", "--out", str(tmp_path)]) == 1
    assert "/flux/name" in capsys.readouterr().err


def test_converge_zero_time(tmp_path, capsys):
    cfg = small_cfg(solution={"kind": "gaussian_inviscid"}, stepper={"t_end": 0.0}, ladder=[5, 9])
    assert main(["converge", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "convergence.csv")))
    assert [int(r["m"]) for r in rows] == [5, 9]
    assert all(float(r["l2e_total"]) == 0.0 for r in rows)
    assert all(r["Q"] == "" for r in rows)
    assert "nan" in capsys.readouterr().out


def test_converge_needs_ladder(tmp_path, capsys):
    cfg = small_cfg(solution={"kind": "gaussian_inviscid"})
    assert main(["converge", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 1
    assert "/ladder" in capsys.readouterr().err


def test_config_error_exit(tmp_path, capsys):
    cfg = small_cfg()
    cfg["blocks"][0]["type"] = "spectral"
    assert main(["run", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "/blocks/0/type" in err
    assert not (tmp_path / "manifest.json").exists()


def test_config_or_preset_required(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path)]) == 1
    assert main(["run", "--preset", "fig4a", "--config", "x.json", "--out", str(tmp_path)]) == 1


def test_blow_up_exit_code(tmp_path, capsys):
    cfg = small_cfg(initial="zero", sat="fig4d", eps=0.0, stepper={"t_end": 50.0, "dt": 0.05})
    cfg["zero_boundary_data"] = True
    code = main(["run", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)])
    assert code == 0   # zero data never grows
    cfg["initial"] = "exact"
    cfg["solution"] = {"kind": "gaussian_inviscid", "params": {"x0": -0.1, "r2": 0.5}}
    code = main(["run", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)])
    assert code == 2
    assert "numerical failure" in capsys.readouterr().err

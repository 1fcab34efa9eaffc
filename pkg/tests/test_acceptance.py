"""End-to-end acceptance studies. Each test records one PASS/FAIL line
that is printed in the terminal summary."""
import time

import numpy as np
import pytest

from sbpcouple.analysis import assemble_global_operator, spectrum, symmetric_part_check
from sbpcouple.cli import converge_rows
from sbpcouple.config import build_problem, build_stepper, load_preset, validate_config, with_resolution
from sbpcouple.time_integration import integrate
from sbpcouple.verification import interface_conservation_defect, run_checks, _small_problem


def _checks_line(scope):
    t0 = time.perf_counter()
    checks = run_checks((scope,))
    elapsed = time.perf_counter() - t0
    failed = [c.name for c in checks if not c.passed]
    return checks, failed, elapsed


def _ladder(name):
    cfg = validate_config(load_preset(name))
    rows = converge_rows(cfg)
    return rows, [r.Q for r in rows[1:]]


def _fmt(vals, spec="{:.2f}"):
    return "(" + ", ".join(spec.format(v) for v in vals) + ")"


def test_operator_identities(acceptance):
    checks, failed, elapsed = _checks_line("operators")
    ok = not failed and elapsed < 1.0
    worst = max(c.value for c in checks if c.kind == "le")
    acceptance.record("1 operator identities", ok, f"{len(checks)} checks, worst residual {worst:.1e}", elapsed)
    assert not failed, failed
    assert elapsed < 1.0


def test_interpolation_properties(acceptance):
    checks, failed, elapsed = _checks_line("interp")
    ok = not failed and elapsed < 1.0
    acceptance.record("2 interpolation properties", ok, f"{len(checks)} checks", elapsed)
    assert not failed, failed
    assert elapsed < 1.0


@pytest.mark.slow
def test_eigenvalue_audit(acceptance):
    t0 = time.perf_counter()
    verdicts = {}
    for name in ("fig4a", "fig4b", "fig4c", "fig4d"):
        problem = build_problem(validate_config(load_preset(name)))
        assert problem.N <= 3000
        rep = spectrum(assemble_global_operator(problem), 1e-8)
        verdicts[name] = rep
    elapsed = time.perf_counter() - t0
    stable = [verdicts[n].spectral_abscissa <= verdicts[n].threshold for n in ("fig4a", "fig4c")]
    unstable = [verdicts[n].positive_count() >= 1 for n in ("fig4b", "fig4d")]
    ok = all(stable) and all(unstable) and elapsed <= 120
    detail = " ".join(f"{n}:{r.verdict}({r.spectral_abscissa:.1e})" for n, r in verdicts.items())
    acceptance.record("3 eigenvalue audit", ok, detail, elapsed)
    assert all(stable) and all(unstable), detail
    assert elapsed <= 120


@pytest.mark.slow
def test_burgers_matching_convergence(acceptance):
    t0 = time.perf_counter()
    rows2, q2 = _ladder("table5")
    rows4, q4 = _ladder("table5_order4")
    elapsed = time.perf_counter() - t0
    err_ref = (4.73e-2, 2.23e-2, 1.29e-2, 8.42e-3)
    errs = [r.l2e_total for r in rows2]
    ok_q2 = all(abs(q - t) <= 0.15 for q, t in zip(q2, (1.85, 1.90, 1.91)))
    ok_q4 = all(abs(q - t) <= 0.15 for q, t in zip(q4, (1.89, 1.89, 1.93)))
    ok_e = all(abs(e - r) <= 0.3 * r for e, r in zip(errs, err_ref))
    ok = ok_q2 and ok_q4 and ok_e and elapsed <= 300
    detail = f"Q2 {_fmt(q2)} Q4 {_fmt(q4)} e2 {_fmt(errs, '{:.2e}')}"
    acceptance.record("4 Burgers matching convergence", ok, detail, elapsed)
    assert len(rows2) == len(rows4) == 4
    assert ok_q2 and ok_q4 and ok_e, detail
    assert elapsed <= 300


@pytest.mark.slow
def test_burgers_nonconformal_convergence(acceptance):
    t0 = time.perf_counter()
    rows, q = _ladder("table6")
    elapsed = time.perf_counter() - t0
    ok_q = [r.m for r in rows] == [11, 21, 31] and all(
        abs(a - t) <= 0.2 for a, t in zip(q, (2.08, 2.06)))
    ok = ok_q and elapsed <= 180
    acceptance.record("5 Burgers 2:1 convergence", ok, f"Q {_fmt(q)}", elapsed)
    assert ok_q, q
    assert elapsed <= 180


@pytest.mark.slow
def test_superconvergence(acceptance):
    t0 = time.perf_counter()
    _, q_fwd = _ladder("superconv")
    _, q_rev = _ladder("superconv_reverse")
    elapsed = time.perf_counter() - t0
    ok_q = min(q_fwd + q_rev) >= 3.0
    ok = ok_q and elapsed <= 300
    acceptance.record("6 superconvergence", ok, f"FD->FE Q {_fmt(q_fwd)} FE->FD Q {_fmt(q_rev)}", elapsed)
    assert ok_q, (q_fwd, q_rev)
    assert elapsed <= 300


@pytest.mark.slow
def test_energy_monotonicity(acceptance):
    t0 = time.perf_counter()
    worst = 0.0
    for order in (2, 4):
        cfg = load_preset("fig2_linear")
        cfg["zero_boundary_data"] = True
        cfg["blocks"][0]["order"] = order
        cfg = validate_config(with_resolution(cfg, 31))
        problem = build_problem(cfg)
        result = integrate(problem, build_stepper(cfg, problem), log_energy=True)
        e = np.array([row[2] for row in result.energy_log])
        worst = max(worst, float(np.max(np.diff(e)) / e[0]))
    sym = []
    for name in ("fig4a", "fig4c", "single_fd"):
        sym.append(symmetric_part_check(build_problem(validate_config(load_preset(name)))))
    sym.append(symmetric_part_check(build_problem(validate_config(with_resolution(
        load_preset("fig2_linear"), 15)))))
    elapsed = time.perf_counter() - t0
    ok_sym = all(r.passed for r in sym)
    ok = worst <= 1e-8 and ok_sym and elapsed <= 60
    detail = (f"max relative energy increase {worst:.1e}, "
              f"max sym-part eigenvalue {max(r.max_eigenvalue for r in sym):.1e}")
    acceptance.record("7 energy monotonicity", ok, detail, elapsed)
    assert worst <= 1e-8
    assert ok_sym
    assert elapsed <= 60


def test_interface_conservation(acceptance):
    t0 = time.perf_counter()
    problem = _small_problem(0.0)
    defect = max(interface_conservation_defect(problem, seed) for seed in range(5))
    elapsed = time.perf_counter() - t0
    ok = defect <= 1e-10 and elapsed < 1.0
    acceptance.record("8 interface conservation", ok, f"relative defect {defect:.1e}", elapsed)
    assert defect <= 1e-10
    assert elapsed < 1.0


@pytest.mark.slow
def test_two_by_two_multiblock(acceptance):
    t0 = time.perf_counter()
    rows, q = _ladder("twobytwo")
    cfg = load_preset("twobytwo")
    cfg["zero_boundary_data"] = True
    cfg = validate_config(with_resolution(cfg, rows[0].m))
    problem = build_problem(cfg)
    result = integrate(problem, build_stepper(cfg, problem), log_energy=True)
    e = np.array([row[2] for row in result.energy_log])
    growth = float(np.max(np.diff(e)) / e[0])
    elapsed = time.perf_counter() - t0
    ok = [r.m for r in rows] == [41, 51, 61] and min(q) >= 2.0 and growth <= 1e-8
    acceptance.record("2x2 multiblock substitute", ok,
                      f"Q {_fmt(q)}, max relative energy increase {growth:.1e}", elapsed)
    assert min(q) >= 2.0, q
    assert growth <= 1e-8

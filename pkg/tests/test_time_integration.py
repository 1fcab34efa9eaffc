import math

import numpy as np
import pytest
from scipy.linalg import expm

from sbpcouple.fe_p1 import assemble_fe_block, generate_regular_mesh
from sbpcouple.multiblock import MultiblockProblem
from sbpcouple.problems import AnalyticSolution, linear_flux
from sbpcouple.sat_coupling import PRESETS
from sbpcouple.sbp_fd import assemble_fd_block
from sbpcouple.time_integration import NumericalFailure, TimeStepper, integrate, rk4_step, step


def test_zero_rhs_keeps_state():
    y = np.array([1.0, -2.0, 3.5])
    assert np.array_equal(step(lambda v: np.zeros_like(v), y, 0.1), y)


def test_scalar_local_error_order():
    lam = -1.3
    errs = [abs(step(lambda v: lam * v, np.array([1.0]), dt)[0] - math.exp(lam * dt))
            for dt in (0.2, 0.1, 0.05)]
    for a, b in zip(errs, errs[1:]):
        assert 28 <= a / b <= 36


def test_linear_system_global_order():
    rng = np.random.default_rng(7)
    G = rng.standard_normal((10, 10))
    F = G - G.T - 2.0 * np.eye(10) + 0.3 * rng.standard_normal((10, 10))
    assert np.linalg.eigvals(F).real.max() < 0
    y0 = rng.standard_normal(10)
    exact = expm(F) @ y0
    errs = []
    for n in (40, 80, 160):
        y = y0.copy()
        for k in range(n):
            y = rk4_step(lambda t, v: F @ v, k / n, y, 1.0 / n)
        errs.append(np.abs(y - exact).max())
    for a, b in zip(errs, errs[1:]):
        assert 14 <= a / b <= 18


def test_non_finite_state():
    with pytest.raises(NumericalFailure):
        step(lambda v: v * np.inf, np.ones(2), 0.1)


def test_schedule_hits_end():
    st = TimeStepper(t_end=1.0, t_start=0.25)
    sched = st.schedule(0.1)
    assert len(sched) == 8 and sum(sched) == pytest.approx(0.75, abs=1e-15)
    assert TimeStepper(t_end=0.0).schedule(0.1) == []
    with pytest.raises(ValueError):
        TimeStepper(t_end=1.0, dt=-1.0)
    with pytest.raises(ValueError):
        TimeStepper(t_end=0.0, t_start=1.0)


def _two_block(m=11, eps=0.0, solution=None):
    fd = assemble_fd_block((-2.0, 0.0, -1.0, 1.0), m, m, 2, eps)
    fe = assemble_fe_block(generate_regular_mesh((0.0, 2.0, -1.0, 1.0), m, m), eps)
    return MultiblockProblem([fd, fe], linear_flux((1.0, 0.0)), PRESETS["stable"],
                             solution=solution, zero_boundary_data=True)


def test_step_size_rule():
    prob = _two_block(11)
    assert TimeStepper(1.0).step_size(prob) == pytest.approx(0.1 * 0.1 ** 2)
    assert TimeStepper(1.0, dt=0.3).step_size(prob) == 0.3


def test_zero_data_stays_zero():
    prob = _two_block(9, eps=0.01)
    res = integrate(prob, TimeStepper(0.1), y0=np.zeros(prob.N))
    assert np.all(res.state == 0) and all(e[2] == 0 for e in res.energy_log)


def test_energy_non_increasing_inviscid():
    sol = AnalyticSolution("gaussian_inviscid", {"x0": -1.0, "a": (1.0, 0.0)})
    prob = _two_block(11, solution=sol)
    res = integrate(prob, TimeStepper(0.5, dt=0.01))
    en = [e[2] for e in res.energy_log]
    assert all(b <= a * (1 + 1e-8) for a, b in zip(en, en[1:]))
    assert res.t == 0.5 and res.steps == 50


def test_energy_csv(tmp_path):
    prob = _two_block(7, eps=0.01)
    res = integrate(prob, TimeStepper(0.02, dt=0.01), y0=np.ones(prob.N))
    res.energy_csv(tmp_path / "e.csv", ["a", "b"])
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "step,t,energy_total,energy_block_a,energy_block_b"
    assert len(lines) == 4


class _Exploding:
    def exact_state(self, t):
        return np.ones(3)

    def rhs_function(self):
        return lambda t, w: 50.0 * w

    def h_max(self):
        return [1.0]

    def block_energies(self, w):
        return [float(w @ w)]


def test_blow_up_detected():
    with pytest.raises(NumericalFailure) as exc:
        integrate(_Exploding(), TimeStepper(10.0, dt=0.1), log_energy=False)
    assert exc.value.step is not None and exc.value.step <= 100

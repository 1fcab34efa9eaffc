import math

import numpy as np
import pytest
import scipy.sparse as sp

from sbpcouple.analysis import (ConvergenceRow, assemble_global_operator, convergence_rate,
                                convergence_rates, l2_error, spectrum, symmetric_part_check,
                                write_convergence_csv)
from sbpcouple.fe_p1 import assemble_fe_block, generate_regular_mesh
from sbpcouple.multiblock import MultiblockProblem
from sbpcouple.problems import burgers_flux, linear_flux
from sbpcouple.sat_coupling import PRESETS
from sbpcouple.sbp_fd import assemble_fd_block


def _blocks(m=9, eps=0.0):
    fd = assemble_fd_block((-2.0, 0.0, -1.0, 1.0), m, m, 2, eps)
    fe = assemble_fe_block(generate_regular_mesh((0.0, 2.0, -1.0, 1.0), m, m), eps)
    return fd, fe


def test_decoupled_operator_structure():
    fd, fe = _blocks()
    a = (1.0, 0.0)
    prob = MultiblockProblem([fd, fe], linear_flux(a), interfaces=[], zero_boundary_data=True)
    F = assemble_global_operator(prob)
    n = fd.N
    assert np.abs(F[:n, n:]).max() == 0 and np.abs(F[n:, :n]).max() == 0
    # interior FD rows are plain -D_x
    X, Y = fd.mesh_points()
    interior = np.nonzero((X > -2) & (X < 0) & (Y > -1) & (Y < 1))[0]
    Dx = fd.Dx.toarray()
    assert np.abs(F[interior][:, :n] + Dx[interior]).max() <= 1e-12
    # FE rows away from the boundary are -M^{-1} C
    C = fe.convection(linear_flux(a), np.zeros(fe.N)).toarray()
    sides = np.unique(np.concatenate([s.nodes for s in fe.sides.values()]))
    K = prob.linear_operator().toarray()[n:, n:]
    inner = np.setdiff1d(np.arange(fe.N), sides)
    assert np.abs(K[inner] + C[inner]).max() <= 1e-12


def test_operator_matches_rhs():
    fd, fe = _blocks(eps=0.02)
    prob = MultiblockProblem([fd, fe], linear_flux((1.0, 0.5)), PRESETS["stable"], zero_boundary_data=True)
    F = assemble_global_operator(prob)
    w = np.ones(prob.N)
    assert np.abs(F @ w - prob.rhs(0.0, w)).max() <= 1e-13 * max(1.0, np.abs(F).sum(1).max())
    w = np.random.default_rng(0).standard_normal(prob.N)
    assert np.allclose(prob.rhs_function()(0.0, w), prob.rhs(0.0, w), rtol=0, atol=1e-10)


def test_nonlinear_operator_rejected():
    fd, fe = _blocks()
    prob = MultiblockProblem([fd, fe], burgers_flux((1.0, 1.0)), zero_boundary_data=True)
    with pytest.raises(TypeError, match="linearise"):
        assemble_global_operator(prob)


def test_spectrum_trivial():
    rep = spectrum(np.zeros((3, 3)))
    assert np.all(rep.eigenvalues == 0) and rep.stable
    rep = spectrum(sp.diags([-1.0, -2.0]))
    assert sorted(rep.eigenvalues.real) == [-2.0, -1.0]
    assert rep.verdict == "STABLE" and rep.positive_count() == 0
    bad = spectrum(np.array([[np.nan]]))
    assert bad.verdict == "FAILED" and bad.error
    with pytest.raises(ValueError):
        spectrum(np.zeros((2, 3)))


def test_unstable_without_coupling():
    fd, fe = _blocks(m=11, eps=0.01)
    prob = MultiblockProblem([fd, fe], linear_flux((1.0, 0.0)), PRESETS["fig4b"], zero_boundary_data=True)
    assert symmetric_part_check(prob).max_eigenvalue > 0
    stable = MultiblockProblem([fd, fe], linear_flux((1.0, 0.0)), PRESETS["stable"], zero_boundary_data=True)
    assert symmetric_part_check(stable).passed
    rep = spectrum(assemble_global_operator(stable))
    assert rep.stable


def test_l2_error():
    w = np.array([0.5, 1.0, 0.5])
    per, tot = l2_error([np.ones(3)], [np.ones(3)], [w])
    assert per == [0.0] and tot == 0.0
    fd, _ = _blocks()
    c = 0.3
    per, _ = l2_error([np.full(fd.N, c)], [np.zeros(fd.N)], [fd.weights])
    assert per[0] == pytest.approx(c * math.sqrt(4.0), abs=1e-12)
    M = sp.identity(2)
    assert l2_error([np.array([3.0, 4.0])], [np.zeros(2)], [M])[1] == pytest.approx(5.0)


def test_convergence_rates(tmp_path):
    assert convergence_rate(4.0, 1.0, 0.2, 0.1) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        convergence_rate(1.0, 1.0, 0.1, 0.1)
    assert math.isnan(convergence_rate(0.0, 0.0, 0.2, 0.1))
    rows = [ConvergenceRow(m, 0.1, e, 0.0, h=1 / (m - 1)) for m, e in ((11, 4e-2), (21, 1e-2))]
    assert convergence_rates(rows)[1] == pytest.approx(2.0)
    write_convergence_csv(rows, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "m,r_max,l2e_fd,l2e_fe,l2e_total,Q"
    assert lines[1].endswith(",") and lines[2].endswith(",2")
    with pytest.raises(ValueError):
        convergence_rates(rows[:1])


def test_fig4d_parameters_break_energy_estimate_with_diffusion():
    fd, fe = _blocks(m=11, eps=0.01)
    prob = MultiblockProblem([fd, fe], linear_flux((1.0, 0.0)), PRESETS["fig4d"], zero_boundary_data=True)
    assert symmetric_part_check(prob).max_eigenvalue > 0

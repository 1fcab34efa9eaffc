"""Invariant suite behind the ``verify`` subcommand."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .analysis import symmetric_part_check
from .fe_p1 import assemble_fe_block, generate_regular_mesh
from .interp import (InterpolationPair, build_fd_pair, build_glue_2to1, build_matching_fd_fe,
                     sylvester_minima)
from .multiblock import MultiblockProblem
from .problems import linear_flux
from .sat_coupling import sat_preset, validate_params
from .sbp_fd import assemble_fd_block, build_sbp_1d

SCOPES = ("operators", "interp", "sat")


@dataclass
class Check:
    scope: str
    name: str
    value: float
    limit: float
    kind: str = "le"       # "le": value <= limit, "ge": value >= limit

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.value):
            return False
        return self.value <= self.limit if self.kind == "le" else self.value >= self.limit


def _boundary_identity(order: int, n: int = 21) -> float:
    ops = build_sbp_1d(order, n, 1.0 / (n - 1))
    Q = ops.Q.toarray()
    ref = np.zeros((n, n))
    ref[0, 0], ref[-1, -1] = -1.0, 1.0
    return float(np.abs(Q + Q.T - ref).max())


def _d1_exactness(order: int, n: int = 21) -> float:
    x = np.linspace(0.0, 1.0, n)
    ops = build_sbp_1d(order, n, x[1] - x[0])
    p = order // 2
    return float(max(np.abs(ops.D1 @ x ** d - d * x ** max(d - 1, 0)).max() for d in range(p + 1)))


def _stiffness_min_eig(order: int, variable: bool, n: int = 21) -> float:
    x = np.linspace(0.0, 1.0, n)
    ops = build_sbp_1d(order, n, x[1] - x[0])
    b = 1.0 + 0.5 * np.sin(3 * x) if variable else np.ones(n)
    A = ops.second_derivative(b)[1]
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    return float(np.linalg.eigvalsh(0.5 * (A + A.T)).min() / max(1.0, np.abs(A).max()))


def _edge_quadrature_weighted(mesh, side: str, phi) -> sp.csr_matrix:
    """``int phi phi_j phi_i ds`` on one side with ``phi`` averaged per
    edge pair, assembled edge by edge."""
    n = mesh.n_dof
    rows, cols, vals = [], [], []
    for e, tag in zip(mesh.bedges, mesh.btags):
        if tag != side:
            continue
        a, b = int(e[0]), int(e[1])
        length = float(np.linalg.norm(mesh.nodes[a] - mesh.nodes[b]))
        for i, j, w in ((a, a, 2), (b, b, 2), (a, b, 1), (b, a, 1)):
            rows.append(i)
            cols.append(j)
            vals.append(0.5 * (phi[i] + phi[j]) * length * w / 6.0)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _operator_checks(seed: int) -> list:
    out = []
    for order in (2, 4):
        out.append(Check("operators", f"FD{order} Q+Q^T boundary identity", _boundary_identity(order), 1e-13))
        out.append(Check("operators", f"FD{order} D1 exact to closure degree", _d1_exactness(order), 1e-10))
        for var in (False, True):
            label = "variable" if var else "constant"
            out.append(Check("operators", f"FD{order} A >= 0 ({label} eps)",
                             _stiffness_min_eig(order, var), -1e-12, "ge"))
    mesh = generate_regular_mesh((0.0, 2.0, -1.0, 1.0), 9, 9)
    fe = assemble_fe_block(mesh, 0.05)
    out.append(Check("operators", "FE M SPD (min eigenvalue)",
                     float(np.linalg.eigvalsh(fe.M.toarray()).min()), 0.0, "ge"))
    A = fe.A.toarray()
    out.append(Check("operators", "FE A >= 0", float(np.linalg.eigvalsh(A).min()) / np.abs(A).max(),
                     -1e-12, "ge"))
    a = (1.0, 0.5)
    C = fe.convection(linear_flux(a), np.zeros(fe.N)).toarray()
    R = sum(s.weighted(a[0] * s.normal[0] + a[1] * s.normal[1]).toarray() for s in fe.sides.values())
    out.append(Check("operators", "FE C + C^T = R_M(a.n)", float(np.abs(C + C.T - R).max()), 1e-12))
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal(fe.N)
    lem = max(float(np.abs(s.weighted(phi) - _edge_quadrature_weighted(mesh, k, phi)).max())
              for k, s in fe.sides.items())
    out.append(Check("operators", "FE boundary weighting identity (random phi)", lem, 1e-14))
    return out


def _pairs(nc: int = 11):
    y = np.linspace(-1.0, 1.0, nc)
    yf = np.linspace(-1.0, 1.0, 2 * nc - 1)
    from .interp import _p1_interface_mass
    out = []
    for order in (2, 4):
        H = sp.diags(build_sbp_1d(order, nc, y[1] - y[0]).weights)
        Hf = sp.diags(build_sbp_1d(order, 2 * nc - 1, yf[1] - yf[0]).weights)
        out.append((f"matching FD{order}-FE", build_matching_fd_fe(_p1_interface_mass(y), H), y, y, order))
        out.append((f"2:1 glue FD{order}-FE", build_glue_2to1(H, _p1_interface_mass(yf), order), y, yf, order))
        if order == 2:
            out.append((f"2:1 FD{order}-FD{order}", build_fd_pair(H, Hf), y, yf, order))
    return out


def _interp_checks(inject_fault: bool) -> list:
    out = []
    for label, pair, yL, yR, order in _pairs():
        if inject_fault and label.startswith("matching FD2"):
            R2L = pair.I_R2L.tolil()
            R2L[3, 4] += 1e-3
            pair = InterpolationPair(pair.I_L2R, R2L.tocsr(), pair.norm_L, pair.norm_R, label)
        scale = max(pair.norm_L.diagonal().max(), pair.norm_R.diagonal().max())
        out.append(Check("interp", f"{label}: norm-compatibility residual", pair.sbp_residual() / scale, 1e-12))
        ones = max(np.abs(pair.I_L2R @ np.ones(len(yL)) - 1).max(),
                   np.abs(pair.I_R2L @ np.ones(len(yR)) - 1).max())
        out.append(Check("interp", f"{label}: constants preserved", float(ones), 1e-13))
        if order == 2 and "FE" in label:
            lin = float(np.abs(pair.I_L2R @ yL - yR).max())
            out.append(Check("interp", f"{label}: FD->FE exact for linears", lin, 1e-10))
        syl = min(sylvester_minima(pair)) / scale
        out.append(Check("interp", f"{label}: characteristic matrices PSD", syl, -1e-10, "ge"))
    # corner and interior rows of the matching second-order FE->FD operator
    pair = _pairs()[0][1]
    R2L = pair.I_R2L.toarray()
    dev = max(abs(R2L[0, 0] - 2 / 3), abs(R2L[0, 1] - 1 / 3),
              float(np.abs(R2L[5, 4:7] - [1 / 6, 2 / 3, 1 / 6]).max()))
    out.append(Check("interp", "matching FD2-FE: FE->FD corner/interior rows", dev, 1e-14))
    return out


def _small_problem(eps: float, m: int = 9, preset: str = "stable") -> MultiblockProblem:
    fd = assemble_fd_block((-2.0, 0.0, -1.0, 1.0), m, m, 2, eps)
    fe = assemble_fe_block(generate_regular_mesh((0.0, 2.0, -1.0, 1.0), m, m), eps)
    return MultiblockProblem([fd, fe], linear_flux((1.0, 0.5)), sat_preset(preset), zero_boundary_data=True)


def interface_conservation_defect(problem: MultiblockProblem, seed: int = 0) -> float:
    """``|1^T K w| / 1^T |K| |w|`` for a random state vanishing on the
    outer boundary, so only interface terms can contribute."""
    K = problem.linear_operator()
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(problem.N)
    for f in problem.faces:
        b = problem.blocks[f.block]
        w[problem.offsets[f.block] + np.asarray(b.side_indices(f.side))] = 0.0
    r = float(np.ones(problem.N) @ (K @ w))
    return abs(r) / float(np.ones(problem.N) @ (abs(K) @ np.abs(w)))


def _sat_checks(seed: int) -> list:
    out = []
    rep = validate_params(sat_preset("stable"))
    out.append(Check("sat", "stable preset satisfies penalty relations", float(len(rep.violations)), 0.0))
    en = symmetric_part_check(_small_problem(0.01))
    out.append(Check("sat", "energy: max eig of K + K^T (eps=0.01)",
                     en.max_eigenvalue / max(1.0, en.scale), 1e-10))
    out.append(Check("sat", "interface conservation (eps=0, random state)",
                     interface_conservation_defect(_small_problem(0.0), seed), 1e-10))
    return out


def run_checks(scopes=SCOPES, inject_fault: bool = False, seed: int = 0) -> list:
    unknown = set(scopes) - set(SCOPES)
    if unknown:
        raise ValueError(f"unknown scopes {sorted(unknown)}")
    checks = []
    if "operators" in scopes:
        checks += _operator_checks(seed)
    if "interp" in scopes:
        checks += _interp_checks(inject_fault)
    if "sat" in scopes:
        checks += _sat_checks(seed)
    return checks


def format_report(checks) -> str:
    width = max(len(c.name) for c in checks)
    lines = []
    for c in checks:
        op = "<=" if c.kind == "le" else ">="
        status = "PASS" if c.passed else "FAIL"
        lines.append(f"{status}  {c.scope:<9} {c.name:<{width}}  {c.value: .3e} {op} {c.limit:.1e}")
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return "\n".join(lines)


def write_report_csv(checks, path) -> None:
    with open(path, "w") as fh:
        fh.write("scope,name,value,limit,kind,passed\n")
        for c in checks:
            fh.write(f"{c.scope},\"{c.name}\",{c.value:.17g},{c.limit:.3g},{c.kind},{int(c.passed)}\n")

"""Spectral audits, discrete errors and convergence rates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


def assemble_global_operator(problem) -> np.ndarray:
    """Dense ``F`` with ``dw/dt = F w`` for zero boundary data."""
    if not problem.is_linear:
        raise TypeError("the flux is nonlinear; linearise it before assembling an operator")
    K = problem.linear_operator()
    F = np.empty((problem.N, problem.N))
    for k, b in enumerate(problem.blocks):
        sl = slice(problem.offsets[k], problem.offsets[k + 1])
        rows = K[sl].toarray()
        if b.kind == "fd":
            F[sl] = rows / b.weights[:, None]
        else:
            F[sl] = b.solve_mass(rows)
    return F


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    spectral_abscissa: float
    norm_scale: float
    tol: float
    error: str | None = None

    @property
    def threshold(self) -> float:
        return self.tol * max(1.0, self.norm_scale)

    @property
    def stable(self) -> bool:
        return self.error is None and self.spectral_abscissa <= self.threshold

    @property
    def verdict(self) -> str:
        if self.error is not None:
            return "FAILED"
        return "STABLE" if self.stable else "UNSTABLE"

    def positive_count(self) -> int:
        return int(np.sum(self.eigenvalues.real > self.threshold))

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("re,im\n")
            for z in self.eigenvalues:
                fh.write(f"{z.real:.17g},{z.imag:.17g}\n")


def spectrum(F, tol: float = 1e-8) -> SpectrumReport:
    F = np.asarray(F.toarray() if sp.issparse(F) else F, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError("operator must be square")
    scale = float(np.abs(F).sum(axis=1).max()) if F.size else 0.0
    if not np.all(np.isfinite(F)):
        return SpectrumReport(np.zeros(0, complex), math.nan, scale, tol, "operator is not finite")
    try:
        ev = np.linalg.eigvals(F)
    except np.linalg.LinAlgError as exc:
        return SpectrumReport(np.zeros(0, complex), math.nan, scale, tol, str(exc))
    order = np.lexsort((ev.imag, ev.real))
    ev = ev[order]
    absc = float(ev.real.max()) if ev.size else 0.0
    return SpectrumReport(ev, absc, scale, tol)


@dataclass
class EnergyReport:
    max_eigenvalue: float
    scale: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_eigenvalue <= self.tol * max(1.0, self.scale)


def symmetric_part_check(problem, tol: float = 1e-8) -> EnergyReport:
    """Largest eigenvalue of ``B F + F^T B = K + K^T``."""
    K = problem.linear_operator().toarray()
    S = K + K.T
    lam = float(np.linalg.eigvalsh(S).max())
    return EnergyReport(lam, float(np.abs(K).sum(axis=1).max()), tol)


def l2_error(state_parts, exact_parts, norms):
    """``sqrt(e^T B e)`` per block and their sum."""
    per = []
    for u, ue, B in zip(state_parts, exact_parts, norms):
        e = np.asarray(u, dtype=float) - np.asarray(ue, dtype=float)
        if sp.issparse(B) or np.ndim(B) == 2:
            val = float(e @ (B @ e))
        else:
            val = float(e @ (np.asarray(B) * e))
        per.append(math.sqrt(max(val, 0.0)))
    return per, float(sum(per))


def problem_errors(problem, state, t: float):
    """Per-block errors against the problem's analytic solution."""
    exact = problem.split(problem.exact_state(t))
    norms = [b.weights if b.kind == "fd" else b.M for b in problem.blocks]
    return l2_error(problem.split(state), exact, norms)


@dataclass
class ConvergenceRow:
    m: int
    r_max: float
    l2e_fd: float
    l2e_fe: float
    per_block: list = field(default_factory=list)
    h: float | None = None
    Q: float | None = None

    @property
    def l2e_total(self) -> float:
        return self.l2e_fd + self.l2e_fe


def convergence_rate(e1: float, e2: float, h1: float, h2: float) -> float:
    if h1 == h2:
        raise ValueError("convergence rate needs two different grid sizes")
    if e2 == 0.0 or e1 == 0.0:
        return math.nan
    return math.log(e1 / e2) / math.log(h1 / h2)


def convergence_rates(rows) -> list:
    """Fill ``Q`` on every row after the first from total errors."""
    if len(rows) < 2:
        raise ValueError("need at least two rows")
    rows[0].Q = None
    for a, b in zip(rows, rows[1:]):
        b.Q = convergence_rate(a.l2e_total, b.l2e_total, a.h, b.h)
    return [r.Q for r in rows]


def write_convergence_csv(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write("m,r_max,l2e_fd,l2e_fe,l2e_total,Q\n")
        for r in rows:
            q = "" if r.Q is None or (isinstance(r.Q, float) and math.isnan(r.Q)) else f"{r.Q:.6g}"
            fh.write(f"{r.m},{r.r_max:.6g},{r.l2e_fd:.6e},{r.l2e_fe:.6e},{r.l2e_total:.6e},{q}\n")

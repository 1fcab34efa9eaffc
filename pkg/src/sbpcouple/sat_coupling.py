"""Weak boundary and interface penalties.

All functions return *weighted* residuals, i.e. contributions to
``B du/dt`` with ``B`` the block norm (``H`` for finite differences, ``M``
for finite elements). The public ``*_sat`` wrappers apply the inverse norm.

Interface penalties are written in a form that is independent of the
discretisation on either side. Each side supplies

- ``E``: trace operator onto the interface nodes,
- ``B``: interface norm (FD: 1D norm, FE: interface mass),
- ``J = B G`` with ``G`` the eps-weighted derivative along the interface
  normal axis.

The block whose outward normal points in the positive axis direction is the
"left" block of the interface.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np
import scipy.sparse as sp

from .interp import InterpolationPair
from .sbp_fd import FdBlock, OUTWARD_NORMAL

SIDES = ("N", "E", "S", "W")
AXIS = {"W": 0, "E": 0, "S": 1, "N": 1}
OPPOSITE = {"W": "E", "E": "W", "S": "N", "N": "S"}


@dataclass(frozen=True)
class SatParams:
    tau: tuple = (1.0, 1.0, 1.0, 1.0)      # N, E, S, W
    alpha_L: float = 0.5
    alpha_R: float = -0.5
    beta_L: float = 0.5
    beta_R: float = -0.5
    delta_L: float = -0.5
    delta_R: float = 0.5
    sigma_L: float = -0.5
    sigma_R: float = 0.5

    def tau_for(self, side: str) -> float:
        return float(self.tau[SIDES.index(side)])

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "SatParams":
        known = {f.name for f in fields(cls)}
        bad = set(d) - known
        if bad:
            raise ValueError(f"unknown SAT parameters: {sorted(bad)}")
        d = dict(d)
        if "tau" in d:
            tau = d["tau"]
            d["tau"] = tuple(float(t) for t in (tau if np.ndim(tau) else [tau] * 4))
            if len(d["tau"]) != 4:
                raise ValueError("tau needs 4 entries (N, E, S, W)")
        return cls(**d)


def _fig4(alpha_L, alpha_R, delta_L, delta_R, sigma_L, sigma_R) -> SatParams:
    return SatParams(alpha_L=alpha_L, alpha_R=alpha_R, beta_L=alpha_L, beta_R=alpha_R,
                     delta_L=delta_L, delta_R=delta_R, sigma_L=sigma_L, sigma_R=sigma_R)


PRESETS = {
    "stable": SatParams(),
    "one_sided": SatParams(delta_L=-1.0, delta_R=0.0, sigma_L=0.0, sigma_R=1.0),
    "fig4a": _fig4(0.5, -0.5, -1.0, 0.0, 0.0, 1.0),
    "fig4b": _fig4(0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    "fig4c": _fig4(0.5, -0.5, -0.5, 0.5, -0.5, 0.5),
    "fig4d": _fig4(-0.05, -0.05, 0.1, 0.0, 0.0, 0.1),
}


def sat_preset(name: str) -> SatParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown SAT preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass
class ParamReport:
    passed: bool
    violations: list = field(default_factory=list)


def validate_params(params: SatParams, scope: str = "all", tol: float = 1e-12) -> ParamReport:
    """Check the stability relations on the penalty parameters.

    ``scope`` is ``"outer"`` (boundary penalties), ``"interface"`` or
    ``"all"``.
    """
    if scope not in ("outer", "interface", "all"):
        raise ValueError(f"unknown relation scope {scope!r}")
    p = params
    checks = []
    if scope in ("outer", "all"):
        for s, t in zip(SIDES, p.tau):
            checks.append((f"tau_{s} = 1", t - 1.0))
    if scope in ("interface", "all"):
        checks += [
            ("alpha_L = 1/2", p.alpha_L - 0.5),
            ("beta_L = 1/2", p.beta_L - 0.5),
            ("alpha_R = -1/2", p.alpha_R + 0.5),
            ("beta_R = -1/2", p.beta_R + 0.5),
            ("delta_L = -sigma_R", p.delta_L + p.sigma_R),
            ("sigma_L = -delta_R", p.sigma_L + p.delta_R),
            ("delta_L + sigma_L = -1", p.delta_L + p.sigma_L + 1.0),
        ]
    bad = [name for name, r in checks if abs(r) > tol]
    return ParamReport(not bad, bad)


def _mul(w, x):
    """Diagonal scaling ``diag(w) x`` for scalar or vector ``w`` and vector
    or sparse ``x``."""
    if np.isscalar(w) or np.ndim(w) == 0:
        return float(w) * x
    if sp.issparse(x):
        return sp.diags(w) @ x
    x = np.asarray(x)
    return w[:, None] * x if x.ndim == 2 else w * x


def _abs_mul(w, x):
    return _mul(np.abs(w), x)


@dataclass
class InterfaceSide:
    """One block's view of an interface."""

    block: object
    side: str
    E: sp.csr_matrix
    B: sp.csr_matrix
    J: sp.csr_matrix
    coords: np.ndarray

    @property
    def kind(self) -> str:
        return self.block.kind

    @property
    def is_left(self) -> bool:
        return self.side in ("E", "N")

    @property
    def axis(self) -> int:
        return AXIS[self.side]

    @property
    def size(self) -> int:
        return self.E.shape[0]


def interface_side(block, side: str) -> InterfaceSide:
    if block.kind == "fd":
        E = block.trace(side)
        B = sp.csr_matrix(block.side_norm(side))
        eps_I = block.eps[block.side_indices(side)]
        J = sp.csr_matrix(B @ sp.diags(eps_I) @ block.axis_derivative_trace(side))
        coords = block.side_coordinates(side)
    else:
        bs = block.sides[side]
        n_s = OUTWARD_NORMAL[side][AXIS[side]]
        E = bs.L
        B = bs.M_I
        J = sp.csr_matrix(n_s * (bs.L @ bs.R_C))
        coords = bs.coords
    return InterfaceSide(block, side, E, B, J, np.asarray(coords, dtype=float))


@dataclass
class InterfaceDescriptor:
    left_block: int
    left_side: str
    right_block: int
    right_side: str
    pair: InterpolationPair               # I_L2R maps left trace to right trace
    eps_left: np.ndarray = None
    eps_right: np.ndarray = None

    def check(self, left: InterfaceSide, right: InterfaceSide) -> None:
        if left.side not in ("E", "N") or right.side != OPPOSITE[left.side]:
            raise ValueError(f"interface sides {left.side}/{right.side} are not a left/right pair")
        if self.pair.I_L2R.shape != (right.size, left.size):
            raise ValueError(f"pair shape {self.pair.I_L2R.shape} does not match "
                             f"interface sizes {right.size}x{left.size}")
        a, b = left.coords, right.coords
        if abs(a[0] - b[0]) > 1e-9 or abs(a[-1] - b[-1]) > 1e-9:
            raise ValueError("interface sides do not cover the same segment")


def _side_residual(own: InterfaceSide, other: InterfaceSide, own2other, other2own,
                   flux, params: SatParams, u, v):
    """Weighted penalty on ``own`` coupling it to ``other``."""
    if own.is_left:
        a_, b_, d_, s_ = params.alpha_L, params.beta_L, params.delta_L, params.sigma_L
    else:
        a_, b_, d_, s_ = params.alpha_R, params.beta_R, params.delta_R, params.sigma_R
    ax = own.axis
    al = flux.alpha[ax]
    ui = own.E @ u
    vi = other.E @ v
    T = own2other.T                      # I_own2other^T, maps other-norm data back
    out = 0.0
    if a_:
        phi_u = al * flux.f(ui, ax)
        phi_v = al * flux.f(vi, ax)
        out = out + a_ * (own.B @ phi_u - T @ (other.B @ phi_v))
    if b_:
        psi = (1.0 - al) * flux.fprime(ui, ax)
        out = out + b_ * _mul(psi, own.B @ ui - T @ (other.B @ vi))
    if d_:
        out = out + d_ * (own.J @ u - T @ (other.J @ v))
    res = own.E.T @ out if not np.isscalar(out) else None
    if s_:
        term = s_ * (own.J.T @ (ui - other2own @ vi))
        res = term if res is None else res + term
    if res is None:
        res = 0.0 * (own.E.T @ ui)
    return res


def interface_residuals(left: InterfaceSide, right: InterfaceSide, pair: InterpolationPair,
                        flux, params: SatParams, u, v):
    """Weighted interface penalties ``(res_left, res_right)`` for states
    ``u`` (left block) and ``v`` (right block)."""
    r_L = _side_residual(left, right, pair.I_L2R, pair.I_R2L, flux, params, u, v)
    r_R = _side_residual(right, left, pair.I_R2L, pair.I_L2R, flux, params, v, u)
    return r_L, r_R


def _apply_inverse_norm(block, r):
    if block.kind == "fd":
        return _mul(1.0 / block.weights, r)
    return block.solve_mass(r.toarray() if sp.issparse(r) else r)


def fdfd_interface_sat(left: FdBlock, right: FdBlock, desc: InterfaceDescriptor, flux,
                       params: SatParams, u, v):
    """Interface penalties between two FD blocks, as time derivatives."""
    sl = interface_side(left, desc.left_side)
    sr = interface_side(right, desc.right_side)
    desc.check(sl, sr)
    r_L, r_R = interface_residuals(sl, sr, desc.pair, flux, params, u, v)
    return _apply_inverse_norm(left, r_L), _apply_inverse_norm(right, r_R)


def fdfe_interface_sat(left, right, desc: InterfaceDescriptor, flux, params: SatParams, u, v,
                       tol: float = 1e-12):
    """Interface penalties between an FD block and an FE block (either
    order), as time derivatives. The FE part is obtained by a mass solve."""
    if desc.pair.sbp_residual() > tol:
        raise ValueError(f"interpolation pair is not norm compatible "
                         f"(residual {desc.pair.sbp_residual():.3e})")
    sl = interface_side(left, desc.left_side)
    sr = interface_side(right, desc.right_side)
    desc.check(sl, sr)
    r_L, r_R = interface_residuals(sl, sr, desc.pair, flux, params, u, v)
    return _apply_inverse_norm(left, r_L), _apply_inverse_norm(right, r_R)


def fd_outer_residual(block: FdBlock, side: str, flux, u, g=None, tau: float = 1.0):
    """Weighted boundary penalty ``tau E^T (B (c(u) - g) - n J u)`` where
    ``c`` is the inflow part of the normal flux."""
    s = interface_side(block, side)
    normal = OUTWARD_NORMAL[side]
    n_s = normal[AXIS[side]]
    us = s.E @ u
    val = s.B @ flux.characteristic_flux(us, normal) - n_s * (s.J @ u)
    if g is not None:
        val = val - s.B @ np.asarray(g, dtype=float)
    return tau * (s.E.T @ val)


def fd_outer_sat(block: FdBlock, flux, u, g_b=None, params: SatParams = SatParams(),
                 sides=SIDES):
    """Sum of the boundary penalties on ``sides`` as a time derivative.
    ``g_b`` maps a side label to its data vector (missing: zero data)."""
    r = 0.0
    for side in sides:
        g = None if g_b is None else g_b.get(side)
        r = r + fd_outer_residual(block, side, flux, u, g, params.tau_for(side))
    return _apply_inverse_norm(block, r)


def fe_outer_residual(block, side: str, flux, v, g=None):
    """Weighted weak boundary condition on an FE side:
    ``R_w v - R g`` with ``R_w v = (R(w' v) + w' (R v))/2``,
    ``w' = w - |w|`` and ``w`` the advective boundary weight."""
    bs = block.sides[side]
    normal = OUTWARD_NORMAL[side]
    idx = bs.nodes
    if flux.is_linear:
        w = flux.upwind_weight(None, normal)
        res = (w - abs(w)) * (bs.R @ v)
    else:
        vb = np.zeros(block.N)
        vb[idx] = np.asarray(v)[idx]
        w = flux.upwind_weight(vb, normal) * np.ones(block.N)
        wp = w - np.abs(w)
        res = 0.5 * (bs.R @ (wp * v) + wp * (bs.R @ v))
    if g is not None:
        gb = np.zeros(block.N)
        gb[idx] = g
        res = res - bs.R @ gb
    return res


def fe_interface_flux(block, side: str, v):
    """Boundary flux ``R_C v`` of the diffusion operator on an interface
    side, so the FE operator matches the FD second derivative convention."""
    return block.sides[side].R_C @ v


def replace_params(params: SatParams, **kw) -> SatParams:
    return replace(params, **kw)

"""Fluxes with skew-symmetric splitting weights and reference solutions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class FluxSpec:
    """Flux ``f = (f_1, f_2)`` with splitting weights ``alpha``.

    The divergence is discretised as
    ``alpha_d d(f_d)/dx_d + (1 - alpha_d) f_d'(u) du/dx_d``.
    """

    label = "flux"
    is_linear = False

    def __init__(self, a, alpha):
        self.a = (float(a[0]), float(a[1]))
        self.alpha = (float(alpha[0]), float(alpha[1]))

    def f(self, u, d):
        raise NotImplementedError

    def fprime(self, u, d):
        raise NotImplementedError

    def shape(self, u):
        """Scalar profile ``g`` with ``f_d = a_d g``."""
        raise NotImplementedError

    def shape_prime(self, u):
        raise NotImplementedError

    def splitting_residual(self, u, d):
        u = np.asarray(u, dtype=float)
        return self.alpha[d] * self.f(u, d) - (1.0 - self.alpha[d]) * u * self.fprime(u, d)

    def upwind_weight(self, u, normal):
        """``sum_d (1 - alpha_d) n_d f_d'(u)``, the weight of the advective
        boundary terms."""
        return sum((1.0 - self.alpha[d]) * normal[d] * self.fprime(u, d) for d in range(2))

    def characteristic_flux(self, u, normal):
        """Inflow part of the normal flux used in the boundary condition.

        ``(s1 - sign(u)|s1|)/2 + (s2 - sign(u)|s2|)/2`` with
        ``s1 = sum alpha_d n_d f_d`` and ``s2 = sum (1-alpha_d) n_d u f_d'``.
        """
        u = np.asarray(u, dtype=float)
        s1 = sum(self.alpha[d] * normal[d] * self.f(u, d) for d in range(2))
        s2 = sum((1.0 - self.alpha[d]) * normal[d] * u * self.fprime(u, d) for d in range(2))
        sg = np.sign(u)
        return 0.5 * (s1 - sg * np.abs(s1)) + 0.5 * (s2 - sg * np.abs(s2))

    def __repr__(self):
        return f"{type(self).__name__}(a={self.a})"


class LinearFlux(FluxSpec):
    """``f = a u``. Every method is linear in ``u`` and also accepts sparse
    matrices, which is how the semi-discrete operator is assembled."""

    label = "linear"
    is_linear = True

    def __init__(self, a):
        super().__init__(a, (0.5, 0.5))

    def f(self, u, d):
        return self.a[d] * u

    def fprime(self, u, d):
        return self.a[d]

    def shape(self, u):
        return u

    def shape_prime(self, u):
        return 1.0

    def upwind_weight(self, u, normal):
        w = sum((1.0 - self.alpha[d]) * normal[d] * self.a[d] for d in range(2))
        return w if np.ndim(w) else float(w)

    def characteristic_flux(self, u, normal):
        c1 = sum(self.alpha[d] * normal[d] * self.a[d] for d in range(2))
        c2 = sum((1.0 - self.alpha[d]) * normal[d] * self.a[d] for d in range(2))
        return (0.5 * (c1 - np.abs(c1)) + 0.5 * (c2 - np.abs(c2))) * u


class BurgersFlux(FluxSpec):
    """``f = a u^2 / 2``."""

    label = "burgers"

    def __init__(self, a):
        super().__init__(a, (2.0 / 3.0, 2.0 / 3.0))

    def f(self, u, d):
        return 0.5 * self.a[d] * u * u

    def fprime(self, u, d):
        return self.a[d] * u

    def shape(self, u):
        return 0.5 * u * u

    def shape_prime(self, u):
        return u


def linear_flux(a) -> LinearFlux:
    return LinearFlux(a)


def burgers_flux(a) -> BurgersFlux:
    return BurgersFlux(a)


FLUXES = {"linear": linear_flux, "burgers": burgers_flux}


def make_flux(name: str, a) -> FluxSpec:
    try:
        return FLUXES[name](a)
    except KeyError:
        raise ValueError(f"unknown flux {name!r}; choose from {sorted(FLUXES)}") from None


@dataclass
class AnalyticSolution:
    """Reference solution selected by ``kind``.

    gaussian_inviscid: ``r1 exp(-|x - x0 - a t|^2 / r2^2)``
    gaussian_viscous:  ``r / (4 pi tau eps) exp(-|x - x0 - a t|^2 / (4 eps tau))``,
    ``tau = t - t0``
    burgers_tanh:      ``c/|a|^2 - b tanh(b (a.(x - x0) - c t) / (2 eps))``
    zero:              identically zero
    """

    kind: str
    params: dict = field(default_factory=dict)

    KINDS = ("gaussian_inviscid", "gaussian_viscous", "burgers_tanh", "zero")
    DEFAULTS = {
        "gaussian_inviscid": {"r1": 1.0, "r2": 0.2, "x0": -1.0, "y0": 0.0, "a": (1.0, 0.0)},
        "gaussian_viscous": {"r": 0.005, "t0": -1.0, "eps": 0.01, "x0": -1.0, "y0": 0.0,
                             "a": (1.0, 0.0)},
        "burgers_tanh": {"b": 1.0, "c": 2.0, "eps": 0.1, "x0": -1.0, "y0": -1.0,
                         "a": (1.0, 1.0)},
        "zero": {},
    }

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown solution kind {self.kind!r}")
        merged = dict(self.DEFAULTS[self.kind])
        merged.update(self.params)
        self.params = merged
        if self.kind == "burgers_tanh" and not merged["eps"] > 0:
            raise ValueError("burgers_tanh needs eps > 0")

    def _shift(self, x, y, t):
        p = self.params
        a = p["a"]
        return np.asarray(x) - p["x0"] - a[0] * t, np.asarray(y) - p["y0"] - a[1] * t

    def _tanh_arg(self, x, y, t):
        p = self.params
        a = p["a"]
        s = a[0] * (np.asarray(x) - p["x0"]) + a[1] * (np.asarray(y) - p["y0"]) - p["c"] * t
        return p["b"] * s / (2.0 * p["eps"])

    def value(self, x, y, t):
        p = self.params
        if self.kind == "zero":
            return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        if self.kind == "gaussian_inviscid":
            dx, dy = self._shift(x, y, t)
            return p["r1"] * np.exp(-(dx * dx + dy * dy) / p["r2"] ** 2)
        if self.kind == "gaussian_viscous":
            tau = t - p["t0"]
            if tau <= 0:
                raise ValueError("gaussian_viscous is singular for t <= t0")
            dx, dy = self._shift(x, y, t)
            return p["r"] / (4 * np.pi * tau * p["eps"]) * np.exp(-(dx * dx + dy * dy) / (4 * p["eps"] * tau))
        a = p["a"]
        z = np.clip(self._tanh_arg(x, y, t), -50.0, 50.0)
        return p["c"] / (a[0] ** 2 + a[1] ** 2) - p["b"] * np.tanh(z)

    def gradient(self, x, y, t):
        p = self.params
        if self.kind == "zero":
            z = self.value(x, y, t)
            return z, z
        u = self.value(x, y, t)
        if self.kind == "gaussian_inviscid":
            dx, dy = self._shift(x, y, t)
            k = -2.0 / p["r2"] ** 2
            return k * dx * u, k * dy * u
        if self.kind == "gaussian_viscous":
            dx, dy = self._shift(x, y, t)
            k = -1.0 / (2 * p["eps"] * (t - p["t0"]))
            return k * dx * u, k * dy * u
        a = p["a"]
        th = np.tanh(np.clip(self._tanh_arg(x, y, t), -50.0, 50.0))
        k = -p["b"] * (1.0 - th * th) * p["b"] / (2.0 * p["eps"])
        return k * a[0], k * a[1]


def eval_solution(solution: AnalyticSolution, x, y, t):
    return solution.value(x, y, t)


def boundary_data(solution: AnalyticSolution, flux: FluxSpec, eps, side_normal, x, y, t):
    """Data ``g`` such that the exact solution satisfies the boundary
    condition ``inflow_flux(u) - eps n.grad(u) = g``."""
    u = solution.value(x, y, t)
    ux, uy = solution.gradient(x, y, t)
    dn = side_normal[0] * ux + side_normal[1] * uy
    return flux.characteristic_flux(u, side_normal) - np.asarray(eps) * dn

"""Classical fourth-order Runge-Kutta time stepping."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class NumericalFailure(RuntimeError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


def rk4_step(rhs, t: float, y, dt: float):
    """One classical RK4 step for ``y' = rhs(t, y)``."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k1)
    k3 = rhs(t + 0.5 * dt, y + (0.5 * dt) * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(rhs, state, dt: float):
    """One RK4 step for an autonomous ``y' = rhs(y)``."""
    y = rk4_step(lambda _t, v: rhs(v), 0.0, np.asarray(state, dtype=float), dt)
    if not np.all(np.isfinite(y)):
        raise NumericalFailure("non-finite state after step")
    return y


@dataclass
class TimeStepper:
    t_end: float
    beta: float = 0.1
    dt: float | None = None
    t_start: float = 0.0
    method: str = "rk4"

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.t_end < self.t_start:
            raise ValueError("t_end is before t_start")

    def step_size(self, problem) -> float:
        """``min over blocks of beta * h_max^2`` unless overridden."""
        if self.dt is not None:
            return float(self.dt)
        return float(min(self.beta * h * h for h in problem.h_max()))

    def schedule(self, dt: float):
        """Step sizes from ``t_start`` to ``t_end``; the last one is
        shortened so that the final time is hit exactly."""
        span = self.t_end - self.t_start
        if span == 0:
            return []
        n = max(1, math.ceil(span / dt - 1e-9))
        return [dt] * (n - 1) + [span - (n - 1) * dt]


@dataclass
class IntegrationResult:
    t: float
    state: np.ndarray
    dt: float
    steps: int
    energy_log: list = field(default_factory=list)   # (step, t, total, per block)

    def energy_csv(self, path, block_ids) -> None:
        with open(path, "w") as fh:
            cols = ",".join(f"energy_block_{b}" for b in block_ids)
            fh.write(f"step,t,energy_total,{cols}\n")
            for k, t, tot, per in self.energy_log:
                vals = ",".join(f"{e:.17g}" for e in per)
                fh.write(f"{k},{t:.17g},{tot:.17g},{vals}\n")


def integrate(problem, stepper: TimeStepper, y0=None, log_energy: bool = True,
              growth_limit: float = 1e6, callback=None) -> IntegrationResult:
    """Advance ``problem`` from ``stepper.t_start`` to ``stepper.t_end``."""
    y = problem.exact_state(stepper.t_start) if y0 is None else np.array(y0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise NumericalFailure("initial state is not finite", 0)
    rhs = problem.rhs_function()
    dt = stepper.step_size(problem)
    t = stepper.t_start
    log = []
    e0 = problem.block_energies(y)
    if log_energy:
        log.append((0, t, float(sum(e0)), e0))
    ref = max(sum(e0), 1e-300)
    steps = stepper.schedule(dt)
    for k, h in enumerate(steps, start=1):
        y = rk4_step(rhs, t, y, h)
        t = stepper.t_end if k == len(steps) else t + h
        if log_energy or k % 50 == 0 or k == len(steps):
            e = problem.block_energies(y)
            tot = float(sum(e))
            if not math.isfinite(tot):
                raise NumericalFailure(f"non-finite state at step {k}", k)
            if tot > growth_limit * ref and tot > 1e-12:
                raise NumericalFailure(f"energy grew by more than {growth_limit:g} at step {k}", k)
            if log_energy:
                log.append((k, t, tot, e))
        if callback is not None:
            callback(k, t, y)
    return IntegrationResult(t, y, dt, len(steps), log)

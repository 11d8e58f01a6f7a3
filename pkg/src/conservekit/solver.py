"""Implicit-step root finding and trajectory integration.

Fixed-point iteration in the form x <- x^k + tau * f^tau(t^k, x^k, x) is the
default (every bundled residual isolates f^tau); a finite-difference Newton
iteration on the raw residual is the fallback for stiff parameters. Steps
that exhaust the iteration budget return the best iterate and are recorded
as warnings rather than aborting the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .expr import DomainError, ExprError


class SolverError(ValueError):
    pass


class StepFailure(SolverError):
    """A step could not be evaluated at all (domain error mid-iteration)."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


@dataclass(frozen=True)
class SolverConfig:
    method: str = "fixed-point"  # or "newton"
    abs_tol: float = 1e-15
    max_iter: int = 100
    newton_fd_step: float = 1e-8
    predictor: bool = False  # explicit-Euler seed instead of x^k

    def __post_init__(self):
        if self.abs_tol <= 0:
            raise SolverError("abs_tol must be positive")
        if self.max_iter < 1:
            raise SolverError("max_iter must be at least 1")
        if self.method not in ("fixed-point", "newton"):
            raise SolverError(f"unknown solver method {self.method!r}")


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # (N+1, n)
    iters: np.ndarray
    events: list = field(default_factory=list)
    nonconverged_steps: int = 0

    @property
    def steps(self):
        return len(self.t) - 1

    def final_state(self):
        return tuple(self.x[-1])


def _seed(scheme_ftau, tk, xk, tau, cfg):
    if not cfg.predictor:
        return list(xk)
    f0 = scheme_ftau(tk, xk, xk, tau)
    return [xk[j] + tau * f0[j] for j in range(len(xk))]


def _fixed_point_step(ftau, tk, xk, tau, cfg):
    x = _seed(ftau, tk, xk, tau, cfg)
    n = len(xk)
    for it in range(1, cfg.max_iter + 1):
        f = ftau(tk, xk, x, tau)
        xn = [xk[j] + tau * f[j] for j in range(n)]
        delta = max(abs(xn[j] - x[j]) for j in range(n))
        x = xn
        if delta <= cfg.abs_tol:
            return x, it, True
    return x, cfg.max_iter, False


def _newton_step(scheme, ftau, tk, xk, tau, cfg):
    n = len(xk)

    def residual(xx):
        f = ftau(tk, xk, xx, tau)
        return [(xx[j] - xk[j]) / tau - f[j] for j in range(n)]

    x = _seed(ftau, tk, xk, tau, cfg)
    for it in range(1, cfg.max_iter + 1):
        r = residual(x)
        rnorm = max(abs(v) for v in r)
        if rnorm <= cfg.abs_tol:
            return x, it, True
        jac = np.empty((n, n))
        for j in range(n):
            h = cfg.newton_fd_step * max(1.0, abs(x[j]))
            xp = list(x)
            xp[j] += h
            rp = residual(xp)
            for i in range(n):
                jac[i, j] = (rp[i] - r[i]) / h
        try:
            step = np.linalg.solve(jac, -np.array(r))
        except np.linalg.LinAlgError as err:
            raise StepFailure(f"singular Newton Jacobian at t={tk!r}: {err}") from err
        x = [x[j] + step[j] for j in range(n)]
        # increment stagnation doubles as convergence at machine precision,
        # where an absolute residual tolerance is unreachable for large |f|
        if max(abs(v) for v in step) <= cfg.abs_tol:
            return x, it, True
    return x, cfg.max_iter, False


def implicit_step(scheme, tk, xk, tau, cfg=SolverConfig(), ftau=None):
    """Solve one implicit step; returns (x^{k+1}, iterations, converged)."""
    if tau == 0.0:
        return tuple(xk), 1, True
    f = ftau if ftau is not None else scheme.ftau
    if cfg.method == "newton":
        x, its, ok = _newton_step(scheme, f, tk, xk, tau, cfg)
    else:
        x, its, ok = _fixed_point_step(f, tk, xk, tau, cfg)
    if any(math.isnan(v) or math.isinf(v) for v in x):
        raise StepFailure(f"iteration diverged to non-finite state at t={tk!r}")
    return tuple(x), its, ok


def integrate(scheme, x0, t0=0.0, tau=None, steps=None, grid=None, cfg=SolverConfig()) -> Trajectory:
    """Run sequential implicit steps on a uniform grid (tau, steps) or an
    explicit strictly-increasing grid. Deterministic for identical inputs."""
    if grid is not None:
        t_grid = np.asarray(grid, dtype=float)
        if len(t_grid) < 1:
            raise SolverError("grid needs at least one point")
        if np.any(np.diff(t_grid) <= 0):
            raise SolverError("grid must be strictly increasing")
    else:
        if tau is None or steps is None:
            raise SolverError("need tau and steps, or an explicit grid")
        if tau <= 0:
            raise SolverError("tau must be positive")
        if steps < 0:
            raise SolverError("steps must be nonnegative")
        t_grid = t0 + tau * np.arange(steps + 1)

    n = len(x0)
    count = len(t_grid) - 1
    xs = np.empty((count + 1, n))
    xs[0] = x0
    iters = np.zeros(count + 1, dtype=int)
    events = []
    ftau = scheme.ftau_with_events(events)
    nonconv = 0
    state = tuple(float(v) for v in x0)
    for k in range(count):
        dt = float(t_grid[k + 1] - t_grid[k])
        try:
            state, its, ok = implicit_step(scheme, float(t_grid[k]), state, dt, cfg, ftau=ftau)
        except (DomainError, ExprError) as err:
            raise StepFailure(f"step {k + 1} rejected: {err}", step_index=k + 1) from err
        xs[k + 1] = state
        iters[k + 1] = its
        if not ok:
            nonconv += 1
            events.append(f"step {k + 1}: max_iter={cfg.max_iter} reached before tolerance")
    return Trajectory(t=t_grid, x=xs, iters=iters, events=events, nonconverged_steps=nonconv)


def with_tolerance(cfg: SolverConfig, abs_tol) -> SolverConfig:
    return replace(cfg, abs_tol=abs_tol)

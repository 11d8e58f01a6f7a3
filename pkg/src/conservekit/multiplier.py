"""Conservation-law multipliers, analytic and discrete, plus condition checks.

The analytic multiplier of a conserved quantity is its state Jacobian; the
discrete multiplier replaces each column by a divided difference at the
permutation-staggered stencil. Residual checks certify both the continuous
pair (multiplier = state gradient, multiplier . rhs = -time partial) and the
discrete pair (telescoping identity and kernel condition) at sample points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .divdiff import (
    DiscreteExpression,
    PermutationPlan,
    StepPair,
    divided_difference_symbolic,
    zero_discrete,
)


@dataclass(frozen=True)
class MultiplierMatrix:
    """m x n matrix of expressions; analytic entries evaluate at a Point,
    discrete entries at a StepPair."""

    m: int
    n: int
    entries: tuple  # tuple of m rows, each a tuple of n Expression/DiscreteExpression
    discrete: bool

    def __post_init__(self):
        if not 1 <= self.m <= self.n:
            raise ex.ExprError(f"multiplier shape {self.m}x{self.n} needs 1 <= m <= n")

    def evaluate(self, at) -> np.ndarray:
        out = np.empty((self.m, self.n))
        for i, row in enumerate(self.entries):
            for j, entry in enumerate(row):
                if self.discrete:
                    out[i, j] = entry.evaluate(at)
                else:
                    out[i, j] = ex.evaluate(entry, at)
        return out


@dataclass(frozen=True)
class DiscreteDerivatives:
    """The per-step discrete quantities: state derivative, total and partial
    time derivatives of the invariants."""

    dt_x: np.ndarray
    dt_psi: np.ndarray
    pt_psi: np.ndarray


def analytic_multiplier(invariants, n) -> MultiplierMatrix:
    """Rows are the state gradients of the invariants (t column excluded)."""
    entries = tuple(
        tuple(ex.partial_derivative(psi, j) for j in range(1, n + 1))
        for psi in invariants
    )
    return MultiplierMatrix(len(invariants), n, entries, discrete=False)


def discrete_multiplier(invariants, plan: PermutationPlan) -> MultiplierMatrix:
    """Column j is the divided difference in x_j at the plan's stencil for j."""
    n = plan.n
    entries = tuple(
        tuple(
            divided_difference_symbolic(psi, j, plan.stencil_for(j))
            for j in range(1, n + 1)
        )
        for psi in invariants
    )
    return MultiplierMatrix(len(invariants), n, entries, discrete=True)


def discrete_multiplier_stenciled(invariants, column_stencils, n) -> MultiplierMatrix:
    """Like discrete_multiplier but with an explicit stencil per column.

    Used for scheme variants whose column stencils are not generated by a
    single permutation chain.
    """
    entries = tuple(
        tuple(
            divided_difference_symbolic(psi, j + 1, column_stencils[j])
            for j in range(n)
        )
        for psi in invariants
    )
    return MultiplierMatrix(len(invariants), n, entries, discrete=True)


def discrete_time_partial(invariants, plan: PermutationPlan):
    """Divided difference in t at the plan's time stencil, one per invariant."""
    out = []
    for psi in invariants:
        if not ex.depends_on(psi, 0):
            out.append(zero_discrete(plan.n))
        else:
            out.append(divided_difference_symbolic(psi, 0, plan.stencil_for(0)))
    return out


def discrete_total_derivative(invariants, s: StepPair) -> np.ndarray:
    """(psi(t^{k+1}, x^{k+1}) - psi(t^k, x^k)) / dt; constant-compatible by
    construction with the pointwise invariant values."""
    if s.dt <= 0:
        raise ex.ExprError(f"discrete total derivative needs dt > 0, got {s.dt}")
    hi = s.hi.values()
    lo = s.lo.values()
    return np.array(
        [(ex.evaluate(psi, hi) - ex.evaluate(psi, lo)) / s.dt for psi in invariants]
    )


def discrete_derivatives(invariants, plan: PermutationPlan, s: StepPair) -> DiscreteDerivatives:
    dt_x = np.array([s.delta(j) / s.dt for j in range(1, s.n + 1)])
    dt_psi = discrete_total_derivative(invariants, s)
    pt = discrete_time_partial(invariants, plan)
    pt_psi = np.array([p.evaluate(s) for p in pt])
    return DiscreteDerivatives(dt_x, dt_psi, pt_psi)


# ---------------------------------------------------------------------------
# condition checks (residuals are normalized by 1 + local term magnitudes)


def check_continuous_conditions(system, sample) -> tuple:
    """Residuals of the two multiplier conditions at one sample point.

    r1 compares the stored multiplier with the state Jacobian of the
    invariants (zero by construction here), r2 measures multiplier . rhs
    plus the time partial of the invariants.
    """
    n, m = system.n, system.m
    lam = analytic_multiplier(system.invariants, n)
    vals = lam.evaluate(sample)
    grads = np.array(
        [
            [ex.evaluate(ex.partial_derivative(psi, j), sample) for j in range(1, n + 1)]
            for psi in system.invariants
        ]
    )
    scale1 = 1.0 + np.abs(vals).max()
    r1 = np.abs(vals - grads).max() / scale1

    f_vals = np.array([ex.evaluate(f, sample) for f in system.rhs_exprs])
    pt = np.array(
        [ex.evaluate(ex.partial_derivative(psi, 0), sample) for psi in system.invariants]
    )
    lam_f = vals @ f_vals
    scale2 = 1.0 + np.abs(lam_f).max() + np.abs(pt).max()
    r2 = np.abs(lam_f + pt).max() / scale2
    return float(r1), float(r2)


def check_discrete_conditions(scheme, s: StepPair) -> tuple:
    """Residuals of the discrete conditions for a multiplier scheme at one step.

    r1: telescoping identity multiplier . D_t x - D_t psi + p_t psi (an
    algebraic identity for permutation-generated stencils). r2: kernel
    condition multiplier . f_tau + p_t psi.
    """
    lam = scheme.discrete_multiplier_matrix
    if lam is None:
        raise ex.ExprError(f"scheme {scheme.label!r} carries no discrete multiplier")
    lam_vals = lam.evaluate(s)
    dt_x = np.array([s.delta(j) / s.dt for j in range(1, s.n + 1)])
    dt_psi = discrete_total_derivative(scheme.invariants, s)
    pt_psi = np.array([p.evaluate(s) for p in scheme.time_partial])

    lhs = lam_vals @ dt_x
    scale1 = 1.0 + np.abs(lhs).max() + np.abs(dt_psi).max() + np.abs(pt_psi).max()
    r1 = np.abs(lhs - dt_psi + pt_psi).max() / scale1

    f_vals = np.asarray(scheme.ftau(s.lo.t, s.lo.x, s.hi.x, s.dt))
    lam_f = lam_vals @ f_vals
    scale2 = 1.0 + np.abs(lam_f).max() + np.abs(pt_psi).max()
    r2 = np.abs(lam_f + pt_psi).max() / scale2
    return float(r1), float(r2)


# ---------------------------------------------------------------------------
# Euler-operator residual


def multiplier_form(system):
    """Rows of multiplier . (xdot - rhs) over the extended variables
    (t, x1..xn, xdot1..xdotn), with xdot_j at index n+j."""
    n = system.n
    lam = analytic_multiplier(system.invariants, n)
    rows = []
    for i in range(system.m):
        terms = []
        for j in range(n):
            factor = ex.sub(ex.var(n + 1 + j), system.rhs_exprs[j])
            terms.append(ex.mul(lam.entries[i][j], factor))
        rows.append(ex.add(*terms))
    return rows


def _path_state(path_coeffs, t):
    x = np.array([np.polyval(c, t) for c in path_coeffs])
    xdot = np.array([np.polyval(np.polyder(np.array(c, dtype=float)), t) for c in path_coeffs])
    return x, xdot


RICHARDSON_STEP = 1e-5


def euler_operator_residual(lambda_f, n, path_coeffs, t) -> np.ndarray:
    """Euler operator applied to one row of multiplier . F along a path.

    lambda_f is an expression over (t, x, xdot); the path is polynomial
    (numpy polyval coefficient rows, one per state component) so the total
    time derivative is smooth and a fourth-order Richardson stencil of size
    RICHARDSON_STEP evaluates it to ~1e-10.

    Returns the n-vector d/dx_l (lambda_f) - D_t d/dxdot_l (lambda_f).
    """
    dx = [ex.partial_derivative(lambda_f, 1 + l) for l in range(n)]
    dxdot = [ex.partial_derivative(lambda_f, n + 1 + l) for l in range(n)]

    def at(tt):
        x, xdot = _path_state(path_coeffs, tt)
        return (tt,) + tuple(x) + tuple(xdot)

    vals_x = np.array([ex.evaluate(d, at(t)) for d in dx])

    def momentum(tt):
        pt = at(tt)
        return np.array([ex.evaluate(d, pt) for d in dxdot])

    h = RICHARDSON_STEP
    dt_momentum = (
        momentum(t - 2 * h) - 8 * momentum(t - h) + 8 * momentum(t + h) - momentum(t + 2 * h)
    ) / (12 * h)
    return vals_x - dt_momentum

"""Assembly of conservative one-step residuals and baseline integrators.

The generic route evaluates the discrete multiplier at each step, solves the
selected invertible minor for the constrained components of f^tau, and fills
the rest with any consistent discretization g^tau. The hand-derived closed
forms for the bundled systems take the kernel/undetermined-coefficient route
and avoid the inversion entirely; both routes satisfy the same kernel
condition and are cross-checked against each other in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import expr as ex
from .divdiff import (
    PermutationPlan,
    StepPair,
    coincident_pair,
    permutation_stencils,
    step_pair,
    zero_discrete,
)
from .multiplier import (
    MultiplierMatrix,
    discrete_multiplier,
    discrete_multiplier_stenciled,
    discrete_time_partial,
)


class SchemeError(ValueError):
    pass


class RankDeficientError(SchemeError):
    """All candidate minors are numerically singular: the invariants are
    linearly dependent at the probe point."""


class StepError(SchemeError):
    """A single residual evaluation failed; carries context for the caller."""

    def __init__(self, message, det_estimate=None):
        super().__init__(message)
        self.det_estimate = det_estimate


MINOR_DET_FLOOR = 1e-12

BASELINE_METHODS = ("backward-euler", "midpoint", "trapezoidal")


@dataclass(frozen=True)
class MinorSelection:
    """Column permutation placing an invertible m x m block first."""

    order: tuple  # all n column indices, chosen minor columns first
    m: int
    det_value: float

    @property
    def minor_cols(self):
        return self.order[: self.m]

    @property
    def complement(self):
        return self.order[self.m :]


@dataclass(frozen=True)
class SchemeDefinition:
    """A one-step method: residual(t^k, x^k, x^{k+1}, tau) -> n-vector."""

    system: object
    method: str  # multiplier | multiplier-closed-form | backward-euler | midpoint | trapezoidal
    label: str
    ftau: Callable
    invariants: tuple
    n: int
    plan: Optional[PermutationPlan] = None
    discrete_multiplier_matrix: Optional[MultiplierMatrix] = None
    time_partial: Optional[tuple] = None
    minor: Optional[MinorSelection] = None
    variant: Optional[str] = None
    conservative: bool = False
    ftau_factory: Optional[Callable] = None  # events-list -> ftau, generic path only
    display: str = ""

    def residual(self, tk, xk, xk1, tau):
        f = self.ftau(tk, xk, xk1, tau)
        return tuple((xk1[j] - xk[j]) / tau - f[j] for j in range(self.n))

    def ftau_with_events(self, events):
        if self.ftau_factory is None:
            return self.ftau
        return self.ftau_factory(events)


# ---------------------------------------------------------------------------
# minor selection


def select_minor(multiplier_matrix, probe, det_floor=MINOR_DET_FLOOR) -> MinorSelection:
    """Pick m independent columns by Gaussian elimination with row pivoting.

    Columns are scanned left to right and accepted when their pivot clears
    det_floor times the matrix scale, matching the leftmost-minor convention;
    a column with a tiny pivot is skipped rather than chosen.
    """
    if isinstance(multiplier_matrix, MultiplierMatrix):
        a = multiplier_matrix.evaluate(probe)
    else:
        a = np.array(multiplier_matrix, dtype=float)
    m, n = a.shape
    original = a.copy()
    scale = max(1.0, float(np.abs(a).max()))
    floor = det_floor * scale
    work = a.copy()
    chosen = []
    r = 0
    for c in range(n):
        if r == m:
            break
        pr = r + int(np.argmax(np.abs(work[r:, c])))
        if abs(work[pr, c]) <= floor:
            continue
        work[[r, pr]] = work[[pr, r]]
        for i in range(r + 1, m):
            work[i] -= (work[i, c] / work[r, c]) * work[r]
        chosen.append(c)
        r += 1
    if r < m:
        raise RankDeficientError(
            f"invariants are linearly dependent at the probe (all {m}x{m} minors "
            f"below {det_floor:.0e} * scale)"
        )
    rest = [c for c in range(n) if c not in chosen]
    order = tuple(chosen + rest)
    det_value = float(np.linalg.det(original[:, chosen])) if m > 1 else float(original[0, chosen[0]])
    return MinorSelection(order=order, m=m, det_value=det_value)


def _minor_scale(block):
    # Hadamard-style scale: product of column max magnitudes, floored at 1
    return max(1.0, float(np.prod(np.maximum(1e-30, np.abs(block).max(axis=0)))))


# ---------------------------------------------------------------------------
# generic f^tau from the solvability construction


def build_ftau(multiplier_matrix, time_partial, g_tau, minor, n, det_floor=MINOR_DET_FLOOR, events=None):
    """f^tau solving multiplier . f^tau = -partial_t^tau psi for the minor
    block, with the complement filled by g_tau.

    Revalidates the minor at every stencil; if it degenerates mid-trajectory
    a fresh selection is taken for that evaluation and recorded in `events`.
    """
    m = minor.m

    def evaluate(tk, xk, xk1, tau):
        s = step_pair(tk, xk, tk + tau, xk1)
        a = multiplier_matrix.evaluate(s)
        pt = np.array([p.evaluate(s) for p in time_partial])
        sel = minor
        block = a[:, sel.minor_cols]
        det = float(np.linalg.det(block))
        if abs(det) <= det_floor * _minor_scale(block):
            try:
                sel = select_minor(a, None, det_floor)
            except RankDeficientError as err:
                raise StepError(
                    f"multiplier minor singular at t={tk!r} and no alternative "
                    f"column set is invertible (det {det:.3e})",
                    det_estimate=det,
                ) from err
            if events is not None:
                events.append(
                    f"re-pivot at t={tk!r}: minor {minor.minor_cols} det {det:.3e}, "
                    f"switched to {sel.minor_cols}"
                )
            block = a[:, sel.minor_cols]
            det = float(np.linalg.det(block))
        g_vals = np.asarray(g_tau(tk, xk, xk1, tau), dtype=float)
        if m == n:
            solved = np.linalg.solve(a, -pt)
            return tuple(solved)
        sigma_block = a[:, sel.complement]
        solved = np.linalg.solve(block, -(pt + sigma_block @ g_vals))
        out = np.empty(n)
        out[list(sel.minor_cols)] = solved
        out[list(sel.complement)] = g_vals
        return tuple(out)

    return evaluate


def default_g_tau(system, complement_rows):
    """The free components of f evaluated at the time-centered state average."""
    rows = tuple(complement_rows)

    def g(tk, xk, xk1, tau):
        mid = tuple((a + b) / 2 for a, b in zip(xk, xk1))
        f = system.rhs_fn(tk + tau / 2, mid)
        return tuple(f[j] for j in rows)

    return g


# ---------------------------------------------------------------------------
# hand-derived closed forms (kernel / undetermined-coefficient route)


def _dlog(a, b):
    """(log a - log b)/(a - b), smooth through a == b."""
    if a <= 0 or b <= 0:
        raise ex.DomainError(f"divided log needs positive values, got ({a}, {b})")
    d = a - b
    if d == 0.0:
        return 1.0 / a
    return math.log1p(d / b) / d


def lv2_kernel_ftau(alpha, beta, gamma, delta):
    def ftau(tk, a, b, tau):
        ly = _dlog(b[1], a[1])
        lx = _dlog(b[0], a[0])
        return (
            a[0] * (alpha * a[1] * ly - beta * a[1]),
            a[1] * (delta * a[0] - gamma * a[0] * lx),
        )

    return ftau


def closed_form_ftau_lv2(s: StepPair, alpha=1.0, beta=1.0, gamma=1.0, delta=1.0):
    return lv2_kernel_ftau(alpha, beta, gamma, delta)(s.lo.t, s.lo.x, s.hi.x, s.dt)


def pr3bp_variant_ftau(alpha, r, s):
    """The four-component kernel form; r, s in {0,1} pick the frozen levels of
    x1 in the second radical column and x2 in the first."""
    beta = 1.0 - alpha

    def radius_a(u, v):
        return math.sqrt((u + alpha) ** 2 + v * v)

    def radius_b(u, v):
        return math.sqrt((u - beta) ** 2 + v * v)

    def ftau(tk, a, b, tau):
        x1b = (a[0] + b[0]) / 2
        x2b = (a[1] + b[1]) / 2
        y1b = (a[2] + b[2]) / 2
        y2b = (a[3] + b[3]) / 2
        x2s = b[1] if s else a[1]
        x1r = b[0] if r else a[0]
        bks, bk1s = radius_b(a[0], x2s), radius_b(b[0], x2s)
        aks, ak1s = radius_a(a[0], x2s), radius_a(b[0], x2s)
        brk, brk1 = radius_b(x1r, a[1]), radius_b(x1r, b[1])
        ark, ark1 = radius_a(x1r, a[1]), radius_a(x1r, b[1])
        if 0.0 in (bks, bk1s, aks, ak1s, brk, brk1, ark, ark1):
            raise ex.DomainError("collision with a primary body at a stencil corner")
        f3 = (
            x1b
            + 2 * y2b
            - 2 * alpha * (x1b - beta) / (bks * bk1s * (bks + bk1s))
            - 2 * beta * (x1b + alpha) / (aks * ak1s * (aks + ak1s))
        )
        f4 = (
            x2b
            - 2 * y1b
            - 2 * alpha * x2b / (brk * brk1 * (brk + brk1))
            - 2 * beta * x2b / (ark * ark1 * (ark + ark1))
        )
        return (y1b, y2b, f3, f4)

    return ftau


def closed_form_ftau_pr3bp(s: StepPair, r_level, s_level, alpha=0.012277471):
    return pr3bp_variant_ftau(alpha, r_level, s_level)(s.lo.t, s.lo.x, s.hi.x, s.dt)


def _one_minus_exp_over(u):
    """(1 - e^{-u})/u, smooth in u with value 1 at 0."""
    if u == 0.0:
        return 1.0
    return -math.expm1(-u) / u


def dho_exponential_ftau(mass, damping, stiffness):
    m, gam, kap = mass, damping, stiffness

    def ftau(tk, a, b, tau):
        xb = (a[0] + b[0]) / 2
        yb = (a[1] + b[1]) / 2
        scale = _one_minus_exp_over(gam / m * tau)
        den = m * yb + gam / 2 * b[0]
        if den == 0.0:
            raise ex.DomainError(
                "singular velocity-correction denominator m*ybar + gamma/2*x^{k+1}"
            )
        ytau = (
            a[1] * (m * (a[1] + yb) / 2 + gam / 2 * a[0])
            + kap / 2 * (a[0] ** 2 - b[0] * xb)
        ) / den
        return (scale * yb, -scale / m * (gam * ytau + kap * xb))

    return ftau


def closed_form_ftau_dho(s: StepPair, mass=4.0, damping=0.5, stiffness=5.0):
    return dho_exponential_ftau(mass, damping, stiffness)(s.lo.t, s.lo.x, s.hi.x, s.dt)


# ---------------------------------------------------------------------------
# baselines


def _backward_euler_ftau(rhs_fn):
    def ftau(tk, xk, xk1, tau):
        return rhs_fn(tk + tau, xk1)

    return ftau


def _midpoint_ftau(rhs_fn):
    def ftau(tk, xk, xk1, tau):
        mid = tuple((a + b) / 2 for a, b in zip(xk, xk1))
        return rhs_fn(tk + tau / 2, mid)

    return ftau


def _trapezoidal_ftau(rhs_fn):
    def ftau(tk, xk, xk1, tau):
        fa = rhs_fn(tk, xk)
        fb = rhs_fn(tk + tau, xk1)
        return tuple((u + v) / 2 for u, v in zip(fa, fb))

    return ftau


_BASELINE_BUILDERS = {
    "backward-euler": _backward_euler_ftau,
    "midpoint": _midpoint_ftau,
    "trapezoidal": _trapezoidal_ftau,
}


def baseline_residual(method, system) -> SchemeDefinition:
    if method not in _BASELINE_BUILDERS:
        raise SchemeError(f"unknown baseline {method!r}; known: {BASELINE_METHODS}")
    return SchemeDefinition(
        system=system,
        method=method,
        label=f"{system.id}/{method}",
        ftau=_BASELINE_BUILDERS[method](system.rhs_fn),
        invariants=tuple(system.invariants),
        n=system.n,
        conservative=False,
    )


# ---------------------------------------------------------------------------
# conservative scheme construction


def _normalize_sigma(sigma, n):
    sigma = tuple(int(s) for s in sigma)
    if len(sigma) == n and sorted(sigma) == list(range(1, n + 1)):
        sigma = (0,) + sigma  # state-only permutation, t raised first
    if len(sigma) != n + 1 or sorted(sigma) != list(range(n + 1)):
        raise SchemeError(
            f"sigma must permute the state variables 1..{n} or all of 0..{n}, got {sigma}"
        )
    return sigma


def _closed_form_scheme(system, variant) -> SchemeDefinition:
    cf = system.closed_forms[variant]
    if cf.midpoint_equivalent:
        ftau = _midpoint_ftau(system.rhs_fn)
    else:
        ftau = cf.ftau
    if cf.plan is not None:
        lam = discrete_multiplier(system.invariants, cf.plan)
        pt = tuple(discrete_time_partial(system.invariants, cf.plan))
    else:
        lam = discrete_multiplier_stenciled(system.invariants, cf.column_stencils, system.n)
        if any(ex.depends_on(psi, 0) for psi in system.invariants):
            raise SchemeError(
                "explicit-stencil variants are only defined for time-independent invariants"
            )
        pt = tuple(zero_discrete(system.n) for _ in system.invariants)
    return SchemeDefinition(
        system=system,
        method="multiplier-closed-form",
        label=f"{system.id}/multiplier[{variant}]",
        ftau=ftau,
        invariants=tuple(system.invariants),
        n=system.n,
        plan=cf.plan,
        discrete_multiplier_matrix=lam,
        time_partial=pt,
        variant=variant,
        conservative=cf.conservative,
        display=cf.display,
    )


def build_conservative_scheme(
    system,
    sigma=None,
    g_override=None,
    use_closed_form=True,
    variant=None,
    probe=None,
    det_floor=MINOR_DET_FLOOR,
) -> SchemeDefinition:
    """One-step conservative method for a registered system.

    With a bundled closed form (and no explicit sigma) the hand-derived
    f^tau is used; otherwise the minor-inversion construction runs with the
    given variable ordering (identity by default).
    """
    if variant is not None:
        if variant not in system.closed_forms:
            known = ", ".join(sorted(system.closed_forms))
            raise SchemeError(f"{system.id} has no variant {variant!r}; known: {known}")
        return _closed_form_scheme(system, variant)
    if sigma is None and use_closed_form and system.default_variant:
        return _closed_form_scheme(system, system.default_variant)

    n = system.n
    full_sigma = _normalize_sigma(sigma, n) if sigma is not None else tuple(range(n + 1))
    plan = permutation_stencils(full_sigma, n)
    lam = discrete_multiplier(system.invariants, plan)
    pt = tuple(discrete_time_partial(system.invariants, plan))
    if probe is None:
        probe = coincident_pair(system.default_t0, system.default_x0)
    minor = select_minor(lam, probe, det_floor)
    if g_override is not None:
        g_fn = g_override
    elif system.m == n:
        g_fn = lambda tk, xk, xk1, tau: ()  # noqa: E731
    else:
        g_fn = default_g_tau(system, minor.complement)

    def factory(events):
        return build_ftau(lam, pt, g_fn, minor, n, det_floor, events)

    return SchemeDefinition(
        system=system,
        method="multiplier",
        label=f"{system.id}/multiplier[sigma={','.join(map(str, full_sigma))}]",
        ftau=factory(None),
        invariants=tuple(system.invariants),
        n=n,
        plan=plan,
        discrete_multiplier_matrix=lam,
        time_partial=pt,
        minor=minor,
        conservative=True,
        ftau_factory=factory,
    )


def make_scheme(system, method, variant=None, sigma=None) -> SchemeDefinition:
    """Method-tag dispatch used by the harness and the CLI."""
    if method in _BASELINE_BUILDERS:
        return baseline_residual(method, system)
    if method in ("multiplier", "multiplier-closed-form"):
        use_closed = method != "multiplier" or (sigma is None)
        return build_conservative_scheme(
            system, sigma=sigma, use_closed_form=use_closed, variant=variant
        )
    raise SchemeError(f"unknown method {method!r}")

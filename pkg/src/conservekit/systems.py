"""The bundled dynamical systems and their conserved quantities.

Each factory returns a SystemSpec carrying the right-hand side and the
invariants both as expression trees (the source of truth for every symbolic
operation) and as plain callables (used in solver hot loops), the domain,
default run configuration, and any hand-derived conservative closed forms.
Construction runs a certification gate: the continuous multiplier conditions
must hold at 100 random domain points before a spec is handed out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import expr as ex
from .divdiff import (
    StencilAssignment,
    StepPair,
    all_low,
    identity_plan,
    state_permutation_plan,
)
from .multiplier import check_continuous_conditions
from .scheme import dho_exponential_ftau, lv2_kernel_ftau, pr3bp_variant_ftau


class SystemError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    check: Callable  # Point -> bool
    description: str
    sample: Callable  # rng -> Point


@dataclass(frozen=True)
class ClosedForm:
    """A hand-derived conservative discretization attached to a system."""

    variant: str
    ftau: Optional[Callable]  # (tk, xk, xk1, tau) -> tuple; None = midpoint-equivalent
    display: str
    plan: object = None  # PermutationPlan for permutation-generated variants
    column_stencils: tuple = ()  # explicit per-column stencils otherwise
    conservative: bool = True
    midpoint_equivalent: bool = False


@dataclass(frozen=True)
class SystemSpec:
    id: str
    n: int
    m: int
    rhs_exprs: tuple
    invariants: tuple
    invariant_names: tuple
    params: dict
    domain: DomainSpec
    rhs_fn: Callable  # (t, x) -> tuple, fast path equal to rhs_exprs
    closed_forms: dict = field(default_factory=dict)
    default_variant: Optional[str] = None
    g_rows: Optional[tuple] = None  # rows forming the recorded closed forms' free block (0-based)
    default_x0: tuple = ()
    default_t0: float = 0.0
    default_sigma: Optional[tuple] = None  # full permutation of {0..n}

    def rhs_from_exprs(self, t, x):
        vals = (t,) + tuple(x)
        return tuple(ex.evaluate(f, vals) for f in self.rhs_exprs)

    def invariant_values(self, t, x):
        vals = (t,) + tuple(x)
        return tuple(ex.evaluate(psi, vals) for psi in self.invariants)

    def in_domain(self, point):
        return self.domain.check(point)

    def sample_point(self, rng):
        return self.domain.sample(rng)

    def sample_pair(self, rng, dt_range=(1e-3, 1e-1)):
        """A random two-level stencil with both corners in the domain."""
        lo = self.domain.sample(rng)
        hi = self.domain.sample(rng)
        dt = rng.uniform(*dt_range)
        return StepPair(ex.Point(lo.t, lo.x), ex.Point(lo.t + dt, hi.x))


CERT_POINTS = 100
CERT_TOL = 1e-10


def _certify(spec: SystemSpec) -> SystemSpec:
    """Registration gate: the transcribed rhs/invariant pair must satisfy the
    continuous multiplier conditions before the system is usable."""
    if not 1 <= spec.m <= spec.n:
        raise SystemError(f"{spec.id}: invariant count {spec.m} outside 1..{spec.n}")
    rng = np.random.default_rng(0xC0457)
    t_independent = not any(ex.depends_on(psi, 0) for psi in spec.invariants)
    worst = 0.0
    any_rhs = 0.0
    for _ in range(CERT_POINTS):
        p = spec.sample_point(rng)
        _, r2 = check_continuous_conditions(spec, p)
        worst = max(worst, r2)
        any_rhs = max(any_rhs, max(abs(v) for v in spec.rhs_from_exprs(p.t, p.x)))
    if worst > CERT_TOL:
        raise SystemError(
            f"{spec.id}: continuous multiplier condition residual {worst:.3e} "
            f"exceeds {CERT_TOL:.0e}; transcription is inconsistent"
        )
    if spec.m == spec.n and t_independent and any_rhs > 1e-12:
        raise SystemError(
            f"{spec.id}: {spec.n} time-independent independent invariants force a "
            "zero right-hand side, but the rhs is nonzero"
        )
    return spec


def _box_domain(bounds, t_range=(0.0, 5.0), check=None, description=""):
    """Domain with box sampling; `check` is the true admissibility predicate
    (defaults to everywhere-admissible — the box only steers test sampling)."""

    if check is None:
        check = lambda p: True  # noqa: E731

    def sample(rng):
        for _ in range(1000):
            x = tuple(rng.uniform(lo, hi) for lo, hi in bounds)
            t = rng.uniform(*t_range)
            p = ex.Point(t, x)
            if check(p):
                return p
        raise SystemError("domain sampler failed to find an admissible point")

    return DomainSpec(check=check, description=description, sample=sample)


# ---------------------------------------------------------------------------
# rigid body rotation


def rigid_body(I1=1.0, I2=2.0, I3=3.0) -> SystemSpec:
    """Angular-velocity form of free rigid-body rotation.

    Conserves the (unnormalized) kinetic energy sum w_i^2/I_i and the squared
    angular-momentum magnitude sum w_i^2.
    """
    if min(I1, I2, I3) <= 0:
        raise SystemError("moments of inertia must be positive")
    if I1 == I2 == I3:
        raise SystemError("degenerate rigid body (all moments equal) has dependent invariants")
    c1 = (I2 - I3) / (I2 * I3)
    c2 = (I3 - I1) / (I1 * I3)
    c3 = (I1 - I2) / (I1 * I2)
    w1, w2, w3 = ex.var(1), ex.var(2), ex.var(3)
    rhs = (
        ex.mul(ex.const(c1), w2, w3),
        ex.mul(ex.const(c2), w1, w3),
        ex.mul(ex.const(c3), w1, w2),
    )
    energy = ex.add(
        ex.mul(ex.const(1 / I1), ex.rpow(w1, 2)),
        ex.mul(ex.const(1 / I2), ex.rpow(w2, 2)),
        ex.mul(ex.const(1 / I3), ex.rpow(w3, 2)),
    )
    momentum = ex.add(ex.rpow(w1, 2), ex.rpow(w2, 2), ex.rpow(w3, 2))

    def rhs_fn(t, w):
        return (c1 * w[1] * w[2], c2 * w[0] * w[2], c3 * w[0] * w[1])

    closed = ClosedForm(
        variant="midpoint",
        ftau=None,
        display=(
            "(w_i^{k+1} - w_i^k)/tau = c_i * wbar_j * wbar_l   (two-level averages;\n"
            "identical to the midpoint rule, which the multiplier construction\n"
            "reproduces for this system)"
        ),
        plan=identity_plan(3),
        midpoint_equivalent=True,
    )
    spec = SystemSpec(
        id="rigid-body",
        n=3,
        m=2,
        rhs_exprs=rhs,
        invariants=(energy, momentum),
        invariant_names=("E", "L"),
        params={"I1": I1, "I2": I2, "I3": I3},
        domain=_box_domain([(0.25, 2.0)] * 3, description="all angular velocities nonzero"),
        rhs_fn=rhs_fn,
        closed_forms={"midpoint": closed},
        default_variant="midpoint",
        g_rows=(2,),
        default_x0=(1.0, 1.0, 1.0),
    )
    return _certify(spec)


# ---------------------------------------------------------------------------
# 2-species Lotka-Volterra


def lotka_volterra_2(alpha=1.0, beta=1.0, gamma=1.0, delta=1.0) -> SystemSpec:
    """Classical predator-prey system with its logarithmic first integral."""
    if min(alpha, beta, gamma, delta) <= 0:
        raise SystemError("Lotka-Volterra parameters must be positive")
    x, y = ex.var(1), ex.var(2)
    rhs = (
        ex.mul(x, ex.sub(ex.const(alpha), ex.mul(ex.const(beta), y))),
        ex.mul(y, ex.sub(ex.mul(ex.const(delta), x), ex.const(gamma))),
    )
    invariant = ex.add(
        ex.mul(ex.const(gamma), ex.log(x)),
        ex.neg(ex.mul(ex.const(delta), x)),
        ex.mul(ex.const(alpha), ex.log(y)),
        ex.neg(ex.mul(ex.const(beta), y)),
    )

    def rhs_fn(t, z):
        return (z[0] * (alpha - beta * z[1]), z[1] * (delta * z[0] - gamma))

    closed = ClosedForm(
        variant="kernel",
        ftau=lv2_kernel_ftau(alpha, beta, gamma, delta),
        display=(
            "(x^{k+1} - x^k)/tau = x^k*(alpha*y^k*dlog(y^{k+1},y^k) - beta*y^k)\n"
            "(y^{k+1} - y^k)/tau = y^k*(delta*x^k - gamma*x^k*dlog(x^{k+1},x^k))\n"
            "with dlog(a,b) := (log(a) - log(b))/(a - b)"
        ),
        plan=identity_plan(2),
    )
    spec = SystemSpec(
        id="lv2",
        n=2,
        m=1,
        rhs_exprs=rhs,
        invariants=(invariant,),
        invariant_names=("V",),
        params={"alpha": alpha, "beta": beta, "gamma": gamma, "delta": delta},
        domain=_box_domain(
            [(0.2, 3.0)] * 2,
            check=lambda p: all(v > 0 for v in p.x),
            description="positive populations",
        ),
        rhs_fn=rhs_fn,
        closed_forms={"kernel": closed},
        default_variant="kernel",
        default_x0=(1.0, 2.0),
    )
    return _certify(spec)


# ---------------------------------------------------------------------------
# degenerate 3-species Lotka-Volterra


def lotka_volterra_3() -> SystemSpec:
    """Cyclic 3-species system conserving both the total population and the
    product of the populations; all six variable orderings give distinct
    conservative discretizations."""
    x1, x2, x3 = ex.var(1), ex.var(2), ex.var(3)
    rhs = (
        ex.mul(x1, ex.sub(x2, x3)),
        ex.mul(x2, ex.sub(x3, x1)),
        ex.mul(x3, ex.sub(x1, x2)),
    )
    total = ex.add(x1, x2, x3)
    product = ex.mul(x1, x2, x3)

    def rhs_fn(t, z):
        return (z[0] * (z[1] - z[2]), z[1] * (z[2] - z[0]), z[2] * (z[0] - z[1]))

    # one closed form per ordering of the state variables, F1..F6
    forms = {}
    defs = {
        "F1": ((1, 2, 3), _lv3_f1, (
            "x1: x1^{k+1}*(x2^{k+1} - x3^k)\n"
            "x2: x2^k*x3^k - x1^{k+1}*x2^{k+1}\n"
            "x3: x3^k*(x1^{k+1} - x2^k)")),
        "F2": ((1, 3, 2), _lv3_f2, (
            "x1: x1^{k+1}*(x2^k - x3^{k+1})\n"
            "x2: x2^k*(x3^k - x1^{k+1})\n"
            "x3: x3^{k+1}*x1^{k+1} - x2^k*x3^k")),
        "F3": ((2, 1, 3), _lv3_f3, (
            "x1: x1^{k+1}*x2^{k+1} - x1^k*x3^k\n"
            "x2: x2^{k+1}*(x3^k - x1^{k+1})\n"
            "x3: x3^k*(x1^k - x2^{k+1})")),
        "F4": ((2, 3, 1), _lv3_f4, (
            "x1: x1^k*(x2^{k+1} - x3^k)\n"
            "x2: x2^{k+1}*(x3^{k+1} - x1^k)\n"
            "x3: x1^k*x3^k - x2^{k+1}*x3^{k+1}")),
        "F5": ((3, 1, 2), _lv3_f5, (
            "x1: x1^k*x2^k - x1^{k+1}*x3^{k+1}\n"
            "x2: x2^k*(x3^{k+1} - x1^k)\n"
            "x3: x3^{k+1}*(x1^{k+1} - x2^k)")),
        "F6": ((3, 2, 1), _lv3_f6, (
            "x1: x1^k*(x2^k - x3^{k+1})\n"
            "x2: x2^{k+1}*x3^{k+1} - x1^k*x2^k\n"
            "x3: x3^{k+1}*(x1^k - x2^{k+1})")),
    }
    for name, (sigma, fn, rows) in defs.items():
        forms[name] = ClosedForm(
            variant=name,
            ftau=fn,
            display=f"(x_i^{{k+1}} - x_i^k)/tau = f_i^tau with\n{rows}\n(ordering {sigma})",
            plan=state_permutation_plan(sigma, 3),
        )
    spec = SystemSpec(
        id="lv3",
        n=3,
        m=2,
        rhs_exprs=rhs,
        invariants=(total, product),
        invariant_names=("x+y+z", "xyz"),
        params={},
        domain=_box_domain(
            [(0.2, 3.0)] * 3,
            check=lambda p: all(v > 0 for v in p.x),
            description="positive populations",
        ),
        rhs_fn=rhs_fn,
        closed_forms=forms,
        default_variant="F1",
        g_rows=(2,),
        default_x0=(1.0, 2.0, 3.0),
    )
    return _certify(spec)


def _lv3_f1(tk, a, b, tau):
    return (b[0] * (b[1] - a[2]), a[1] * a[2] - b[0] * b[1], a[2] * (b[0] - a[1]))


def _lv3_f2(tk, a, b, tau):
    return (b[0] * (a[1] - b[2]), a[1] * (a[2] - b[0]), b[2] * b[0] - a[1] * a[2])


def _lv3_f3(tk, a, b, tau):
    return (b[0] * b[1] - a[0] * a[2], b[1] * (a[2] - b[0]), a[2] * (a[0] - b[1]))


def _lv3_f4(tk, a, b, tau):
    return (a[0] * (b[1] - a[2]), b[1] * (b[2] - a[0]), a[0] * a[2] - b[1] * b[2])


def _lv3_f5(tk, a, b, tau):
    return (a[0] * a[1] - b[0] * b[2], a[1] * (b[2] - a[0]), b[2] * (b[0] - a[1]))


def _lv3_f6(tk, a, b, tau):
    return (a[0] * (a[1] - b[2]), b[1] * b[2] - a[0] * a[1], b[2] * (a[0] - b[1]))


# ---------------------------------------------------------------------------
# planar restricted three-body problem


ARENSTORF_X0 = (0.994, 0.0, 0.0, -2.00158510637908252240537862224)
ARENSTORF_PERIOD = 17.0652165601579625588917206249
PR3BP_VARIANTS = ("k+1,k", "k,k+1", "k,k", "k+1,k+1")


def pr3bp(alpha=0.012277471) -> SystemSpec:
    """Rotating-frame satellite motion around two primaries, conserving the
    Jacobi integral. State is (x1, x2, y1, y2) with y the velocity."""
    if not 0 < alpha < 1:
        raise SystemError("mass ratio must lie strictly between 0 and 1")
    beta = 1.0 - alpha
    x1, x2, y1, y2 = ex.var(1), ex.var(2), ex.var(3), ex.var(4)
    b_sq = ex.add(ex.rpow(ex.sub(x1, ex.const(beta)), 2), ex.rpow(x2, 2))
    a_sq = ex.add(ex.rpow(ex.add(x1, ex.const(alpha)), 2), ex.rpow(x2, 2))
    b_cube = ex.rpow(b_sq, 1.5)
    a_cube = ex.rpow(a_sq, 1.5)
    rhs = (
        y1,
        y2,
        ex.add(
            x1,
            ex.mul(ex.const(2.0), y2),
            ex.neg(ex.div(ex.mul(ex.const(alpha), ex.sub(x1, ex.const(beta))), b_cube)),
            ex.neg(ex.div(ex.mul(ex.const(beta), ex.add(x1, ex.const(alpha))), a_cube)),
        ),
        ex.add(
            x2,
            ex.neg(ex.mul(ex.const(2.0), y1)),
            ex.neg(ex.div(ex.mul(ex.const(alpha), x2), b_cube)),
            ex.neg(ex.div(ex.mul(ex.const(beta), x2), a_cube)),
        ),
    )
    jacobi = ex.add(
        ex.mul(
            ex.const(0.5),
            ex.add(ex.rpow(x1, 2), ex.rpow(x2, 2), ex.neg(ex.rpow(y1, 2)), ex.neg(ex.rpow(y2, 2))),
        ),
        ex.div(ex.const(alpha), ex.sqrt(b_sq)),
        ex.div(ex.const(beta), ex.sqrt(a_sq)),
    )

    def radius_a(u, v):
        return math.sqrt((u + alpha) ** 2 + v**2)

    def radius_b(u, v):
        return math.sqrt((u - beta) ** 2 + v**2)

    def rhs_fn(t, z):
        u1, u2, v1, v2 = z
        ra = radius_a(u1, u2)
        rb = radius_b(u1, u2)
        if ra == 0.0 or rb == 0.0:
            raise ex.DomainError("collision with a primary body")
        return (
            v1,
            v2,
            u1 + 2 * v2 - alpha * (u1 - beta) / rb**3 - beta * (u1 + alpha) / ra**3,
            u2 - 2 * v1 - alpha * u2 / rb**3 - beta * u2 / ra**3,
        )

    display = (
        "(x^{{k+1}} - x^k)/tau = f^tau with velocity rows f1 = y1bar, f2 = y2bar and\n"
        "f3 = x1bar + 2*y2bar - 2*alpha*(x1bar-beta)/(B^{{k,{s}}}B^{{k+1,{s}}}(B^{{k,{s}}}+B^{{k+1,{s}}}))"
        " - 2*beta*(x1bar+alpha)/(A.. same levels ..)\n"
        "f4 = x2bar - 2*y1bar - 2*alpha*x2bar/(B^{{{r},k}}B^{{{r},k+1}}(..)) - 2*beta*x2bar/(A.. same ..)\n"
        "A^{{r,s}} = sqrt((x1^r+alpha)^2 + (x2^s)^2), B^{{r,s}} = sqrt((x1^r-beta)^2 + (x2^s)^2)"
    )

    forms = {}
    # the two orderings of (x1, x2) give the r != s variants; these satisfy the
    # telescoping identity and conserve exactly
    forms["k+1,k"] = ClosedForm(
        variant="k+1,k",
        ftau=pr3bp_variant_ftau(alpha, 1, 0),
        display=display.format(r="k+1", s="k"),
        plan=identity_plan(4),
    )
    forms["k,k+1"] = ClosedForm(
        variant="k,k+1",
        ftau=pr3bp_variant_ftau(alpha, 0, 1),
        display=display.format(r="k", s="k+1"),
        plan=state_permutation_plan((2, 1, 3, 4), 4),
    )
    # the level-matched variants keep multiplier . f_tau = 0 but are not
    # generated by any ordering, so they do not conserve exactly
    forms["k,k"] = ClosedForm(
        variant="k,k",
        ftau=pr3bp_variant_ftau(alpha, 0, 0),
        display=display.format(r="k", s="k"),
        column_stencils=(
            all_low(4),
            all_low(4),
            all_low(4),
            all_low(4),
        ),
        conservative=False,
    )
    forms["k+1,k+1"] = ClosedForm(
        variant="k+1,k+1",
        ftau=pr3bp_variant_ftau(alpha, 1, 1),
        display=display.format(r="k+1", s="k+1"),
        column_stencils=(
            StencilAssignment((0, 0, 1, 0, 0)),
            StencilAssignment((0, 1, 0, 0, 0)),
            all_low(4),
            all_low(4),
        ),
        conservative=False,
    )

    def domain_check(p):
        return radius_a(p.x[0], p.x[1]) > 1e-6 and radius_b(p.x[0], p.x[1]) > 1e-6

    def sample(rng):
        for _ in range(1000):
            x = (
                rng.uniform(-1.5, 1.5),
                rng.uniform(-1.5, 1.5),
                rng.uniform(-2.0, 2.0),
                rng.uniform(-2.0, 2.0),
            )
            p = ex.Point(rng.uniform(0.0, 5.0), x)
            if radius_a(x[0], x[1]) > 0.05 and radius_b(x[0], x[1]) > 0.05:
                return p
        raise SystemError("domain sampler failed")

    spec = SystemSpec(
        id="pr3bp",
        n=4,
        m=1,
        rhs_exprs=rhs,
        invariants=(jacobi,),
        invariant_names=("J",),
        params={"alpha": alpha, "beta": beta},
        domain=DomainSpec(domain_check, "away from both primaries", sample),
        rhs_fn=rhs_fn,
        closed_forms=forms,
        default_variant="k+1,k",
        default_x0=ARENSTORF_X0,
    )
    return _certify(spec)


# ---------------------------------------------------------------------------
# damped harmonic oscillator


def damped_harmonic_oscillator(mass=4.0, damping=0.5, stiffness=5.0) -> SystemSpec:
    """Position-velocity form of the damped oscillator; its exponentially
    weighted quadratic form is a time-dependent conserved quantity."""
    if mass <= 0 or stiffness <= 0 or damping < 0:
        raise SystemError("need mass, stiffness > 0 and damping >= 0")
    m, gam, kap = mass, damping, stiffness
    x, y = ex.var(1), ex.var(2)
    rhs = (
        y,
        ex.neg(ex.div(ex.add(ex.mul(ex.const(gam), y), ex.mul(ex.const(kap), x)), ex.const(m))),
    )
    quad = ex.add(
        ex.mul(ex.const(m), ex.rpow(y, 2)),
        ex.mul(ex.const(gam), x, y),
        ex.mul(ex.const(kap), ex.rpow(x, 2)),
    )
    if gam == 0.0:
        invariant = ex.mul(ex.const(0.5), quad)
    else:
        invariant = ex.mul(
            ex.const(0.5), ex.exp(ex.mul(ex.const(gam / m), ex.var(0))), quad
        )

    def rhs_fn(t, z):
        return (z[1], -(gam * z[1] + kap * z[0]) / m)

    closed = ClosedForm(
        variant="exponential",
        ftau=dho_exponential_ftau(m, gam, kap),
        display=(
            "(x^{k+1} - x^k)/tau = C^tau * ybar\n"
            "(y^{k+1} - y^k)/tau = -C^tau/m * (gamma*y^tau + kappa*xbar)\n"
            "C^tau = (1 - e^{-(gamma/m) tau})/((gamma/m) tau)\n"
            "y^tau = (y^k*(m*(y^k+ybar)/2 + gamma/2*x^k) + kappa/2*((x^k)^2 - x^{k+1}*xbar))\n"
            "        / (m*ybar + gamma/2*x^{k+1})"
        ),
        plan=identity_plan(2),
    )
    spec = SystemSpec(
        id="dho",
        n=2,
        m=1,
        rhs_exprs=rhs,
        invariants=(invariant,),
        invariant_names=("psi",),
        params={"mass": m, "damping": gam, "stiffness": kap},
        domain=_box_domain([(-2.0, 2.0)] * 2, t_range=(0.0, 5.0), description="whole plane"),
        rhs_fn=rhs_fn,
        closed_forms={"exponential": closed},
        default_variant="exponential",
        default_x0=(1.0, 0.0),
    )
    return _certify(spec)


def dho_exact_solution(mass, damping, stiffness, x0, y0):
    """Closed-form underdamped solution, used as a convergence reference."""
    zeta = damping / (2 * mass)
    w_sq = stiffness / mass - zeta**2
    if w_sq <= 0:
        raise SystemError("exact reference implemented for the underdamped regime only")
    w = math.sqrt(w_sq)
    a = x0
    b = (y0 + zeta * x0) / w

    def state(t):
        decay = math.exp(-zeta * t)
        c, s = math.cos(w * t), math.sin(w * t)
        x = decay * (a * c + b * s)
        y = decay * (-zeta * (a * c + b * s) + w * (-a * s + b * c))
        return (x, y)

    return state


# ---------------------------------------------------------------------------
# registry and plain-text system files


_FACTORIES = {
    "rigid-body": rigid_body,
    "lv2": lotka_volterra_2,
    "lv3": lotka_volterra_3,
    "pr3bp": pr3bp,
    "dho": damped_harmonic_oscillator,
}


def registry():
    return dict(_FACTORIES)


def get_system(system_id, **params) -> SystemSpec:
    if system_id not in _FACTORIES:
        known = ", ".join(sorted(_FACTORIES))
        raise SystemError(f"unknown system {system_id!r}; known: {known}")
    return _FACTORIES[system_id](**params)


def system_from_expressions(
    system_id, n, rhs_texts, invariant_texts, domain_texts=(), box=None
) -> SystemSpec:
    """Build (and certify) a system from grammar text; used by the file loader."""
    rhs = tuple(ex.parse(s, n) for s in rhs_texts)
    if len(rhs) != n:
        raise SystemError(f"need {n} rhs components, got {len(rhs)}")
    invariants = tuple(ex.parse(s, n) for s in invariant_texts)
    if not invariants:
        raise SystemError("need at least one invariant")
    predicates = [_parse_predicate(s, n) for s in domain_texts]
    bounds = box if box is not None else [(-3.0, 3.0)] * n

    def check(p):
        return all(pred(p) for pred in predicates)

    def sample(rng):
        for _ in range(2000):
            x = tuple(rng.uniform(lo, hi) for lo, hi in bounds)
            p = ex.Point(rng.uniform(0.0, 2.0), x)
            try:
                ok = check(p)
            except ex.DomainError:
                ok = False
            if ok:
                return p
        raise SystemError(f"{system_id}: sampler found no admissible points")

    def rhs_fn(t, x):
        vals = (t,) + tuple(x)
        return tuple(ex.evaluate(f, vals) for f in rhs)

    spec = SystemSpec(
        id=system_id,
        n=n,
        m=len(invariants),
        rhs_exprs=rhs,
        invariants=invariants,
        invariant_names=tuple(f"psi{i+1}" for i in range(len(invariants))),
        params={},
        domain=DomainSpec(check, "; ".join(domain_texts) or "unrestricted", sample),
        rhs_fn=rhs_fn,
        default_x0=tuple(1.0 for _ in range(n)),
    )
    return _certify(spec)


_COMPARATORS = {
    ">": lambda a, b: a > b,
    "<": lambda a, b: a < b,
    ">=": lambda a, b: a >= b,
    "<=": lambda a, b: a <= b,
    "!=": lambda a, b: a != b,
}


def _parse_predicate(text, n):
    for op in (">=", "<=", "!=", ">", "<"):
        if op in text:
            left, right = text.split(op, 1)
            le = ex.parse(left, n)
            re_ = ex.parse(right, n)
            cmp = _COMPARATORS[op]
            return lambda p: cmp(ex.evaluate(le, p), ex.evaluate(re_, p))
    raise SystemError(f"cannot parse domain predicate {text!r}")


def load_system_file(path) -> SystemSpec:
    """Plain-text system definition: lines n=.., f1=.., psi1=.., domain=.., name=.."""
    n = None
    name = None
    rhs_lines = {}
    psi_lines = {}
    domain_texts = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SystemError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            value = value.strip()
            if key == "n":
                n = int(value)
            elif key == "name":
                name = value
            elif key == "domain":
                domain_texts = [s.strip() for s in value.split(",") if s.strip()]
            elif key.startswith("f") and key[1:].isdigit():
                rhs_lines[int(key[1:])] = value
            elif key.startswith("psi") and key[3:].isdigit():
                psi_lines[int(key[3:])] = value
            else:
                raise SystemError(f"{path}:{lineno}: unknown key {key!r}")
    if n is None:
        raise SystemError(f"{path}: missing n=")
    missing = [i for i in range(1, n + 1) if i not in rhs_lines]
    if missing:
        raise SystemError(f"{path}: missing rhs components {missing}")
    rhs_texts = [rhs_lines[i] for i in range(1, n + 1)]
    psi_texts = [psi_lines[i] for i in sorted(psi_lines)]
    return system_from_expressions(
        name or "user-system", n, rhs_texts, psi_texts, domain_texts
    )

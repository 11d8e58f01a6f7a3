"""Divided-difference calculus on two-level space-time stencils.

Forward differences, permutation-ordered telescoping stencils, exact
symbolic rewriting of first-order divided differences into closed forms
over the doubled variable set {x_j^k, x_j^{k+1}}, and a guarded numeric
fallback. The symbolic forms are algebraically exact at distinct points
and reduce to the partial derivative at coincident ones, so no small-
divisor guard is needed on that path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from . import expr as ex
from .expr import (
    Const,
    DomainError,
    Exp,
    ExprError,
    Log,
    Neg,
    Point,
    Pow,
    Prod,
    Quot,
    Sum,
    Var,
)

LEVEL_K = 0
LEVEL_K1 = 1


class RewriteError(ExprError):
    """No divided-difference rule applies (unreachable for grammar-conforming input)."""


@dataclass(frozen=True)
class StepPair:
    """One time step: the stencil endpoints X^k and X^{k+1}."""

    lo: Point
    hi: Point

    def __post_init__(self):
        if len(self.lo.x) != len(self.hi.x):
            raise ExprError("stencil endpoints have mismatched dimensions")

    @property
    def n(self):
        return len(self.lo.x)

    @property
    def dt(self):
        return self.hi.t - self.lo.t

    def value(self, i, level):
        pt = self.hi if level == LEVEL_K1 else self.lo
        return pt.t if i == 0 else pt.x[i - 1]

    def delta(self, i):
        return self.value(i, LEVEL_K1) - self.value(i, LEVEL_K)

    def doubled_values(self):
        """Flat vector for discrete trees: (t^k, x^k .., t^{k+1}, x^{k+1} ..)."""
        return self.lo.values() + self.hi.values()

    def corner(self, levels) -> Point:
        """The stencil corner with per-variable levels (levels[0] is t)."""
        t = self.hi.t if levels[0] else self.lo.t
        x = tuple(
            self.hi.x[j] if levels[j + 1] else self.lo.x[j] for j in range(self.n)
        )
        return Point(t, x)


def step_pair(tk, xk, tk1, xk1) -> StepPair:
    return StepPair(Point(tk, tuple(xk)), Point(tk1, tuple(xk1)))


def coincident_pair(t, x) -> StepPair:
    p = Point(t, tuple(x))
    return StepPair(p, p)


@dataclass(frozen=True)
class StencilAssignment:
    """Per-variable time level, entry 0 for t, entries in {LEVEL_K, LEVEL_K1}."""

    levels: tuple

    def __post_init__(self):
        if any(l not in (LEVEL_K, LEVEL_K1) for l in self.levels):
            raise ExprError(f"stencil levels must be 0 or 1, got {self.levels}")

    @property
    def n(self):
        return len(self.levels) - 1

    def raised(self, i) -> "StencilAssignment":
        lv = list(self.levels)
        if lv[i] != LEVEL_K:
            raise ExprError(f"variable {i} already at level k+1 in stencil {self.levels}")
        lv[i] = LEVEL_K1
        return StencilAssignment(tuple(lv))


def all_low(n) -> StencilAssignment:
    return StencilAssignment((LEVEL_K,) * (n + 1))


@dataclass(frozen=True)
class PermutationPlan:
    """A variable ordering and the telescoping stencil chain it generates.

    v[i] gives the multi-index after the first i increments; the divided
    difference in variable j is taken at stencil v[inverse(j)], i.e. with
    exactly the variables incremented before j already at level k+1.
    """

    sigma: tuple
    v: tuple

    @property
    def n(self):
        return len(self.sigma) - 1

    def position(self, i):
        return self.sigma.index(i)

    def stencil_for(self, i) -> StencilAssignment:
        return StencilAssignment(self.v[self.position(i)])


def permutation_stencils(sigma, n) -> PermutationPlan:
    """Build the v-sequence for a permutation of {0..n} (0 is the t slot)."""
    sigma = tuple(int(s) for s in sigma)
    if sorted(sigma) != list(range(n + 1)):
        raise ExprError(f"{sigma} is not a permutation of 0..{n}")
    v = [(0,) * (n + 1)]
    for i in range(n + 1):
        nxt = list(v[-1])
        nxt[sigma[i]] += 1
        v.append(tuple(nxt))
    return PermutationPlan(sigma, tuple(v))


def identity_plan(n) -> PermutationPlan:
    return permutation_stencils(range(n + 1), n)


def state_permutation_plan(state_sigma, n) -> PermutationPlan:
    """Plan from a permutation of the state variables 1..n, with t raised first."""
    sigma = (0,) + tuple(int(s) for s in state_sigma)
    return permutation_stencils(sigma, n)


# ---------------------------------------------------------------------------
# forward differences


def forward_difference(fs, s: StepPair):
    """f(X^{k+1}) - f(X^k) componentwise."""
    hi = s.hi.values()
    lo = s.lo.values()
    return [ex.evaluate(f, hi) - ex.evaluate(f, lo) for f in fs]


def partial_forward_difference(f, i, base: StencilAssignment, s: StepPair) -> float:
    """f with variable i raised to level k+1 minus f at the base stencil."""
    up = base.raised(i)
    return ex.evaluate(f, s.corner(up.levels)) - ex.evaluate(f, s.corner(base.levels))


def symmetrized_forward_difference(f, s: StepPair) -> float:
    """Forward difference averaged over all (n+1)! telescoping orderings.

    Grouping the permutation average by stencil corner costs 2^(n+1) corner
    evaluations: the step that raises variable j from corner w carries weight
    |w|! (n-|w|)! / (n+1)!. Equals the plain forward difference exactly in
    real arithmetic and to round-off in floats.
    """
    n1 = s.n + 1
    corner_vals = {}
    for w in itertools.product((0, 1), repeat=n1):
        corner_vals[w] = ex.evaluate(f, s.corner(w))
    total_orders = math.factorial(n1)
    acc = 0.0
    for w, fw in corner_vals.items():
        ones = sum(w)
        if ones == n1:  # the all-raised corner starts no step
            continue
        weight = math.factorial(ones) * math.factorial(n1 - 1 - ones) / total_orders
        for j in range(n1):
            if w[j]:
                continue
            up = w[:j] + (1,) + w[j + 1 :]
            acc += weight * (corner_vals[up] - fw)
    return acc


# ---------------------------------------------------------------------------
# symbolic divided differences


@dataclass(frozen=True)
class DiscreteExpression:
    """A closed form over the doubled variable set {x_j^k, x_j^{k+1}}.

    Variable j of the underlying tree is the level-k value of variable j;
    variable (n+1)+j is its level-(k+1) value.
    """

    tree: ex.Expression
    n: int

    def evaluate(self, s: StepPair) -> float:
        return ex.evaluate(self.tree, s.doubled_values())

    def evaluate_values(self, values) -> float:
        return ex.evaluate(self.tree, values)

    def __str__(self):
        return ex.format_expr(self.tree, names=doubled_names(self.n))


def doubled_names(n):
    base = ["t"] + [f"x{j}" for j in range(1, n + 1)]
    return [f"{b}^k" for b in base] + [f"{b}^k1" for b in base]


def zero_discrete(n) -> DiscreteExpression:
    return DiscreteExpression(Const(0.0), n)


def _lift(node, levels, n):
    """Pin every variable of a continuous tree to the given corner levels."""
    mapping = {
        j: Var(j + (n + 1) * levels[j]) for j in range(n + 1) if ex.depends_on(node, j)
    }
    return ex.substitute(node, mapping)


def _dsum(terms):
    kept = [t for t in terms if not (isinstance(t, Const) and t.value == 0.0)]
    return ex.add(*kept) if kept else Const(0.0)


def _dmul(*factors):
    for f in factors:
        if isinstance(f, Const) and f.value == 0.0:
            return Const(0.0)
    return ex.mul(*factors)


def _single_var_power_quotient(a, b, p, q):
    """(a^{p/q} - b^{p/q}) / (a - b) as a coincidence-safe closed form.

    With A = a^{1/q}, B = b^{1/q}: sum_{l<p} A^l B^{p-1-l} / sum_{l<q} A^l B^{q-1-l}.
    """

    def root(node, l):
        if l == 0:
            return Const(1.0)
        return ex.rpow(node, Fraction(l, q))

    num = _dsum([_dmul(root(a, l), root(b, p - 1 - l)) for l in range(p)])
    if q == 1:
        return num
    den = _dsum([_dmul(root(a, l), root(b, q - 1 - l)) for l in range(q)])
    return ex.div(num, den)


def divided_difference_symbolic(f, i, base: StencilAssignment) -> DiscreteExpression:
    """Rewrite (Delta_i f / Delta x_i) at the base stencil into a closed form.

    The result has no difference quotient left in variable i: it evaluates at
    coincident points x_i^{k+1} = x_i^k, where it equals df/dx_i exactly.
    """
    n = base.n
    if ex.max_var_index(f) > n:
        raise ExprError(f"expression uses variables beyond dimension {n}")
    lo = base.levels
    up = base.raised(i).levels
    tree = _dd(f, i, lo, up, n)
    return DiscreteExpression(tree, n)


def _dd(node, i, lo, up, n):
    if not ex.depends_on(node, i):  # constant rule
        return Const(0.0)
    kind = type(node)
    if kind is Var:  # node is Var(i) here
        return Const(1.0)
    if kind is Sum:  # linearity
        return _dsum([_dd(t, i, lo, up, n) for t in node.terms])
    if kind is Neg:
        return ex.neg(_dd(node.arg, i, lo, up, n))
    if kind is Prod:
        # discrete product rule, telescoped over the factors: the j-th term
        # takes factors before j at the base stencil and after j at the raised one
        terms = []
        for j, f in enumerate(node.factors):
            dj = _dd(f, i, lo, up, n)
            if isinstance(dj, Const) and dj.value == 0.0:
                continue
            before = [_lift(g, lo, n) for g in node.factors[:j]]
            after = [_lift(g, up, n) for g in node.factors[j + 1 :]]
            terms.append(_dmul(*before, dj, *after))
        return _dsum(terms)
    if kind is Quot:
        dn = _dd(node.num, i, lo, up, n)
        dd = _dd(node.den, i, lo, up, n)
        num_lo = _lift(node.num, lo, n)
        den_lo = _lift(node.den, lo, n)
        den_up = _lift(node.den, up, n)
        return ex.div(
            _dsum([_dmul(dn, den_lo), ex.neg(_dmul(num_lo, dd))]),
            _dmul(den_up, den_lo),
        )
    if kind is Pow:
        # chain rule with the rational power rule for the outer function
        inner = _dd(node.base, i, lo, up, n)
        outer = _single_var_power_quotient(
            _lift(node.base, up, n), _lift(node.base, lo, n), node.p, node.q
        )
        return _dmul(outer, inner)
    if kind is Exp:
        # chain rule with the exponential rule: e^b * exprel(a - b)
        inner = _dd(node.arg, i, lo, up, n)
        a = _lift(node.arg, up, n)
        b = _lift(node.arg, lo, n)
        return _dmul(ex.exp(b), ex.exprel(ex.sub(a, b)), inner)
    if kind is Log:
        inner = _dd(node.arg, i, lo, up, n)
        a = _lift(node.arg, up, n)
        b = _lift(node.arg, lo, n)
        return _dmul(ex.logquot(a, b), inner)
    raise RewriteError(f"no divided-difference rule for node kind {kind.__name__}")


DEFAULT_GUARD = 1e-7


def divided_difference_numeric(f, i, base: StencilAssignment, s: StepPair, guard=DEFAULT_GUARD) -> float:
    """Black-box quotient with a small-divisor guard.

    Above the guard the plain quotient is returned; below it, the analytic
    limit (the partial derivative at the base corner) replaces it.
    """
    dxi = s.delta(i)
    scale = max(1.0, abs(s.value(i, LEVEL_K)))
    if abs(dxi) > guard * scale:
        return partial_forward_difference(f, i, base, s) / dxi
    return ex.evaluate(ex.partial_derivative(f, i), s.corner(base.levels))


def telescoped_difference(f, plan: PermutationPlan, s: StepPair) -> float:
    """Sum of symbolic divided differences times increments along the plan.

    Equals f(X^{k+1}) - f(X^k) exactly in real arithmetic for any ordering.
    """
    acc = 0.0
    for i in range(plan.n + 1):
        d = divided_difference_symbolic(f, i, plan.stencil_for(i))
        acc += d.evaluate(s) * s.delta(i)
    return acc

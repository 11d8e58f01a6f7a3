"""Property suites behind the `verify` CLI command.

Each suite samples the contracts that hold as identities (telescoping,
kernel conditions, coincidence limits, conservation per accepted step) with
seeded RNGs and reports one pass/fail line per property. The pytest suite
runs these too, alongside the frozen-oracle example tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import expr as ex
from . import divdiff as dd
from . import multiplier as mult
from .scheme import (
    baseline_residual,
    build_conservative_scheme,
    make_scheme,
)
from .solver import SolverConfig, integrate
from .systems import get_system

SYSTEM_IDS = ("rigid-body", "lv2", "lv3", "pr3bp", "dho")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.detail}"


# ---------------------------------------------------------------------------
# random expression corpus


def random_expression(rng, n, depth=3, positive=False, allow_t=True):
    """A random tree from the grammar, safe to evaluate on positive boxes.

    With positive=True the value is guaranteed positive on positive inputs,
    which keeps log/sqrt/quotient arguments in-domain.
    """
    if depth == 0:
        kind = rng.integers(0, 3)
        if kind == 0:
            return ex.const(round(float(rng.uniform(0.2, 2.5)), 3))
        lo = 0 if (allow_t and kind == 2) else 1
        return ex.var(int(rng.integers(lo, n + 1)))
    choices = ["sum", "product", "power", "quotient", "log", "exp", "sqrt"]
    if not positive:
        choices.append("neg")
    kind = choices[rng.integers(0, len(choices))]
    sub = lambda pos: random_expression(rng, n, depth - 1, pos, allow_t)  # noqa: E731
    if kind == "sum":
        k = int(rng.integers(2, 4))
        return ex.add(*[sub(positive) for _ in range(k)])
    if kind == "product":
        k = int(rng.integers(2, 4))
        return ex.mul(*[sub(positive) for _ in range(k)])
    if kind == "quotient":
        return ex.div(sub(positive), sub(True))
    if kind == "power":
        exponent = [2, 3, Fraction(1, 2), Fraction(3, 2), Fraction(2, 3)][rng.integers(0, 5)]
        base = sub(True)
        return ex.rpow(base, exponent)
    if kind == "log":
        inner = sub(True)
        if positive:  # keep the whole node positive: log(1 + positive)
            return ex.log(ex.add(ex.const(1.0), inner))
        return ex.log(inner)
    if kind == "exp":
        return ex.exp(ex.mul(ex.const(round(float(rng.uniform(0.05, 0.4)), 3)), sub(False)))
    if kind == "sqrt":
        return ex.sqrt(sub(True))
    return ex.neg(sub(False))


def corpus(rng, n, count, depth=3):
    out = []
    while len(out) < count:
        e = random_expression(rng, n, depth=depth)
        if ex.max_var_index(e) >= 0:  # skip pure constants
            out.append(e)
    return out


def _sample_values(rng, n):
    return tuple(rng.uniform(0.3, 2.4) for _ in range(n + 1))


# ---------------------------------------------------------------------------
# expr suite


def expr_suite(samples=1000):
    rng = np.random.default_rng(11)
    results = []

    worst = 0.0
    checked = 0
    while checked < samples:
        n = int(rng.integers(1, 4))
        e = random_expression(rng, n, depth=int(rng.integers(1, 4)))
        if ex.max_var_index(e) < 0:
            continue
        i = int(rng.integers(0, n + 1))
        vals = _sample_values(rng, n)
        try:
            deriv = ex.evaluate(ex.partial_derivative(e, i), vals)
            scale = max(1.0, abs(vals[i]))
            h = 1e-6 * scale
            up = list(vals)
            dn = list(vals)
            up[i] += h
            dn[i] -= h
            central = (ex.evaluate(e, up) - ex.evaluate(e, dn)) / (2 * h)
        except ex.DomainError:
            continue
        checked += 1
        denom = max(1.0, abs(deriv), abs(central))
        worst = max(worst, abs(deriv - central) / denom)
    results.append(
        CheckResult(
            "expr/derivative-vs-central-difference",
            worst <= 1e-6,
            f"worst relative deviation {worst:.3e} over {samples} expressions (tol 1e-6)",
        )
    )

    stable = True
    for _ in range(400):
        n = int(rng.integers(1, 4))
        e = random_expression(rng, n, depth=int(rng.integers(1, 4)))
        text1 = ex.format_expr(e)
        reparsed = ex.parse(text1, n)
        text2 = ex.format_expr(reparsed)
        if text1 != text2 or ex.parse(text2, n) != reparsed:
            stable = False
            break
    results.append(
        CheckResult(
            "expr/print-parse-idempotent",
            stable,
            "canonical form is a fixed point of parse after one print",
        )
    )

    e = ex.parse("exp(0.3*x1) + log(x2)/sqrt(x1) - x1^(3/2)*x2", 2)
    v = (0.0, 1.7, 0.9)
    deterministic = all(ex.evaluate(e, v) == ex.evaluate(e, v) for _ in range(10))
    results.append(
        CheckResult("expr/evaluate-deterministic", deterministic, "bit-identical repeats")
    )
    return results


# ---------------------------------------------------------------------------
# divdiff suite


def _corpus_pairs(rng, n, count, spread=1.0):
    pairs = []
    for _ in range(count):
        lo = _sample_values(rng, n)
        hi = tuple(v + spread * rng.uniform(-0.25, 1.2) for v in lo)
        hi = tuple(max(0.05, v) for v in hi)
        hi = (lo[0] + abs(hi[0] - lo[0]) + 1e-3,) + hi[1:]  # keep dt > 0
        pairs.append(dd.step_pair(lo[0], lo[1:], hi[0], hi[1:]))
    return pairs


def divdiff_suite(corpus_size=60):
    rng = np.random.default_rng(23)
    results = []
    n = 3
    exprs = corpus(rng, n, corpus_size)

    # telescoping over random orderings
    worst = 0.0
    for e in exprs:
        for _ in range(4):
            sigma = list(range(n + 1))
            rng.shuffle(sigma)
            plan = dd.permutation_stencils(sigma, n)
            s = _corpus_pairs(rng, n, 1)[0]
            try:
                lhs = dd.telescoped_difference(e, plan, s)
                rhs = dd.forward_difference([e], s)[0]
            except ex.DomainError:
                continue
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    results.append(
        CheckResult(
            "divdiff/telescoping-identity",
            worst <= 1e-12,
            f"worst relative defect {worst:.3e} over {corpus_size} expressions (tol 1e-12)",
        )
    )

    # symbolic vs numeric quotient agreement away from coincidence
    worst = 0.0
    for e in exprs:
        for _ in range(3):
            i = int(rng.integers(0, n + 1))
            base = dd.all_low(n)
            s = _corpus_pairs(rng, n, 1)[0]
            if abs(s.delta(i)) < 1e-3:
                continue
            try:
                sym = dd.divided_difference_symbolic(e, i, base).evaluate(s)
                num = dd.partial_forward_difference(e, i, base, s) / s.delta(i)
            except ex.DomainError:
                continue
            worst = max(worst, abs(sym - num) / max(1.0, abs(num)))
    results.append(
        CheckResult(
            "divdiff/symbolic-numeric-agreement",
            worst <= 1e-12,
            f"worst relative gap {worst:.3e} for |dx| >= 1e-3 (tol 1e-12)",
        )
    )

    # coincidence limit equals the exact derivative
    worst = 0.0
    for e in exprs:
        for i in range(n + 1):
            vals = _sample_values(rng, n)
            s = dd.coincident_pair(vals[0], vals[1:])
            try:
                sym = dd.divided_difference_symbolic(e, i, dd.all_low(n)).evaluate(s)
                der = ex.evaluate(ex.partial_derivative(e, i), vals)
            except ex.DomainError:
                continue
            worst = max(worst, abs(sym - der) / max(1.0, abs(der)))
    results.append(
        CheckResult(
            "divdiff/coincidence-limit",
            worst <= 1e-14,
            f"worst relative gap to the derivative {worst:.3e} (tol 1e-14)",
        )
    )

    # symmetrized difference equals the plain forward difference
    worst = 0.0
    count = 0
    for e in exprs:
        if count >= 100:
            break
        s = _corpus_pairs(rng, n, 1)[0]
        try:
            sym = dd.symmetrized_forward_difference(e, s)
            plain = dd.forward_difference([e], s)[0]
        except ex.DomainError:
            continue
        count += 1
        worst = max(worst, abs(sym - plain) / max(1.0, abs(plain)))
    results.append(
        CheckResult(
            "divdiff/symmetrized-equals-forward",
            worst <= 1e-13,
            f"worst relative gap {worst:.3e} over {count} random pairs (tol 1e-13)",
        )
    )

    # product rule: both level pairings match the direct quotient
    worst = 0.0
    for _ in range(200):
        f = random_expression(rng, n, 2, positive=True)
        g = random_expression(rng, n, 2, positive=True)
        i = int(rng.integers(0, n + 1))
        s = _corpus_pairs(rng, n, 1)[0]
        if abs(s.delta(i)) < 1e-6:
            continue
        base = dd.all_low(n)
        try:
            direct = dd.partial_forward_difference(ex.mul(f, g), i, base, s) / s.delta(i)
            df = dd.divided_difference_symbolic(f, i, base).evaluate(s)
            dg = dd.divided_difference_symbolic(g, i, base).evaluate(s)
            up = base.raised(i).levels
            lo = base.levels
            f_lo = ex.evaluate(f, s.corner(lo))
            f_up = ex.evaluate(f, s.corner(up))
            g_lo = ex.evaluate(g, s.corner(lo))
            g_up = ex.evaluate(g, s.corner(up))
        except ex.DomainError:
            continue
        form_a = df * g_up + f_lo * dg
        form_b = df * g_lo + f_up * dg
        scale = max(1.0, abs(direct))
        worst = max(worst, abs(form_a - direct) / scale, abs(form_b - direct) / scale)
    results.append(
        CheckResult(
            "divdiff/product-rule-asymmetry",
            worst <= 1e-12,
            f"both pairings match the direct quotient to {worst:.3e} (tol 1e-12)",
        )
    )

    # numeric guard: below threshold the limit branch takes over
    f = ex.parse("x1^2", 1)
    s_close = dd.step_pair(0.0, (3.0,), 1e-9, (3.0 + 1e-9,))
    guard_val = dd.divided_difference_numeric(f, 1, dd.all_low(1), s_close)
    results.append(
        CheckResult(
            "divdiff/numeric-guard-limit-branch",
            abs(guard_val - 6.0) < 1e-12,
            f"|dx|=1e-9 under default guard returns derivative {guard_val!r} (want 6)",
        )
    )
    return results


# ---------------------------------------------------------------------------
# multiplier suite


def _plans_for(system):
    """The stencil plans this system ships: closed-form variants' plans, and
    the identity plan for the generic route."""
    plans = {}
    for name, cf in system.closed_forms.items():
        if cf.plan is not None:
            plans[name] = cf.plan
    plans.setdefault("identity", dd.identity_plan(system.n))
    return plans


def multiplier_suite(points=100, stencils=1000):
    rng = np.random.default_rng(37)
    results = []

    for sid in SYSTEM_IDS:
        system = get_system(sid)
        worst = 0.0
        for _ in range(points):
            _, r2 = mult.check_continuous_conditions(system, system.sample_point(rng))
            worst = max(worst, r2)
        results.append(
            CheckResult(
                f"multiplier/continuous-conditions[{sid}]",
                worst <= 1e-10,
                f"worst r2 {worst:.3e} over {points} domain points (tol 1e-10)",
            )
        )

    for sid in SYSTEM_IDS:
        system = get_system(sid)
        for variant, cf in sorted(system.closed_forms.items()):
            scheme = make_scheme(system, "multiplier", variant=variant)
            w1 = w2 = 0.0
            for _ in range(stencils):
                s = system.sample_pair(rng)
                try:
                    r1, r2 = mult.check_discrete_conditions(scheme, s)
                except ex.DomainError:
                    continue
                if cf.plan is not None:
                    w1 = max(w1, r1)
                w2 = max(w2, r2)
            ok = w1 <= 1e-12 and w2 <= 1e-12
            note = "" if cf.plan is not None else " (kernel condition only: no ordering)"
            results.append(
                CheckResult(
                    f"multiplier/discrete-conditions[{sid}/{variant}]",
                    ok,
                    f"r1 {w1:.3e}, r2 {w2:.3e} over {stencils} stencils (tol 1e-12){note}",
                )
            )

    # coincidence reduction: discrete multiplier -> analytic at equal levels
    worst = 0.0
    for sid in SYSTEM_IDS:
        system = get_system(sid)
        analytic = mult.analytic_multiplier(system.invariants, system.n)
        state_sigmas = list(itertools.permutations(range(1, system.n + 1)))
        if len(state_sigmas) > 6:
            state_sigmas = state_sigmas[:3] + state_sigmas[-3:]
        for sigma in state_sigmas:
            plan = dd.state_permutation_plan(sigma, system.n)
            disc = mult.discrete_multiplier(system.invariants, plan)
            for _ in range(10):
                p = system.sample_point(rng)
                s = dd.coincident_pair(p.t, p.x)
                a = analytic.evaluate(p)
                d = disc.evaluate(s)
                worst = max(worst, np.abs(a - d).max() / (1.0 + np.abs(a).max()))
    results.append(
        CheckResult(
            "multiplier/coincidence-reduction",
            worst <= 1e-14,
            f"worst gap to analytic multiplier {worst:.3e} across orderings (tol 1e-14)",
        )
    )

    # ordering independence where the invariants are sums of one-variable terms
    worst = 0.0
    for sid in ("rigid-body", "lv2"):
        system = get_system(sid)
        plans = [
            dd.state_permutation_plan(sigma, system.n)
            for sigma in itertools.permutations(range(1, system.n + 1))
        ]
        mats = [mult.discrete_multiplier(system.invariants, p) for p in plans]
        for _ in range(30):
            s = system.sample_pair(rng)
            vals = [m.evaluate(s) for m in mats]
            for v in vals[1:]:
                worst = max(worst, np.abs(v - vals[0]).max() / (1.0 + np.abs(vals[0]).max()))
    results.append(
        CheckResult(
            "multiplier/ordering-independence",
            worst <= 1e-14,
            f"separable invariants give ordering-independent multipliers ({worst:.3e})",
        )
    )

    # Euler-operator residual along polynomial paths + negative control
    paths = {
        "rigid-body": [[1.0, 1.0], [2.0, 0.0], [-1.0, 1.0]],  # (1+t, 2t, 1-t)
        "lv2": [[0.2, 1.0], [0.3, 1.5]],
        "lv3": [[0.1, 1.0], [0.2, 1.5], [-0.1, 2.0]],
        "pr3bp": [[0.1, 0.8], [0.05, 0.6], [0.1, 0.2], [-0.05, -0.1]],
        "dho": [[1.0, 0.0, 1.0], [1.0, 0.0]],  # (1+t^2, t)
    }
    worst_ok = 0.0
    control_min = math.inf
    for sid in SYSTEM_IDS:
        system = get_system(sid)
        rows = mult.multiplier_form(system)
        for row in rows:
            res = mult.euler_operator_residual(row, system.n, paths[sid], t=0.3)
            worst_ok = max(worst_ok, float(np.abs(res).max()))
        # control: replace the first row's multiplier with (1, 0, ..)
        wrong = ex.sub(ex.var(system.n + 1), system.rhs_exprs[0])
        res = mult.euler_operator_residual(wrong, system.n, paths[sid], t=0.3)
        control_min = min(control_min, float(np.abs(res).max()))
    results.append(
        CheckResult(
            "multiplier/euler-operator",
            worst_ok <= 1e-6 and control_min >= 1e-3,
            f"true multipliers {worst_ok:.3e} (tol 1e-6); negative control {control_min:.3e} (floor 1e-3)",
        )
    )
    return results


# ---------------------------------------------------------------------------
# scheme suite


def _conservative_schemes(system):
    out = []
    for variant, cf in sorted(system.closed_forms.items()):
        if cf.conservative:
            out.append(make_scheme(system, "multiplier", variant=variant))
    out.append(build_conservative_scheme(system, use_closed_form=False))
    return out


def scheme_suite(steps=200):
    rng = np.random.default_rng(53)
    results = []
    cfg = SolverConfig(abs_tol=1e-14)

    worst = 0.0
    for sid in SYSTEM_IDS:
        system = get_system(sid)
        tau = 0.01 if sid != "pr3bp" else 0.002
        x0 = system.default_x0 if sid != "pr3bp" else (0.787722529, 0.0, 0.0, 0.311137)
        for scheme in _conservative_schemes(system):
            traj = integrate(scheme, x0, t0=0.0, tau=tau, steps=steps, cfg=cfg)
            base = system.invariant_values(traj.t[0], traj.x[0])
            for k in range(1, len(traj.t)):
                vals = system.invariant_values(traj.t[k], traj.x[k])
                prev = system.invariant_values(traj.t[k - 1], traj.x[k - 1])
                for i in range(system.m):
                    step_gap = abs(vals[i] - prev[i])
                    allowance = 10 * (cfg.abs_tol * 100 + 2.2e-16 * abs(base[i]) * 100)
                    worst = max(worst, step_gap / max(allowance, 1e-300))
    results.append(
        CheckResult(
            "scheme/per-step-conservation",
            worst <= 1.0,
            f"per-step invariant jump within {worst:.2f}x of the solver-tolerance allowance",
        )
    )

    # closed form vs minor inversion with the recorded g choices
    rb = get_system("rigid-body")
    c3 = (rb.params["I1"] - rb.params["I2"]) / (rb.params["I1"] * rb.params["I2"])

    def rb_g(tk, xk, xk1, tau):
        return (c3 * (xk[0] + xk1[0]) / 2 * (xk[1] + xk1[1]) / 2,)

    lv3 = get_system("lv3")

    def lv3_g(tk, xk, xk1, tau):
        return (xk[2] * (xk1[0] - xk[1]),)

    worst = 0.0
    for system, g_fn, variant in ((rb, rb_g, "midpoint"), (lv3, lv3_g, "F1")):
        closed = make_scheme(system, "multiplier", variant=variant)
        generic = build_conservative_scheme(system, use_closed_form=False, g_override=g_fn)
        for _ in range(100):
            s = system.sample_pair(rng)
            fa = np.asarray(generic.ftau(s.lo.t, s.lo.x, s.hi.x, s.dt))
            fb = np.asarray(closed.ftau(s.lo.t, s.lo.x, s.hi.x, s.dt))
            worst = max(worst, float(np.abs(fa - fb).max() / (1.0 + np.abs(fb).max())))
    results.append(
        CheckResult(
            "scheme/minor-inversion-matches-closed-form",
            worst <= 1e-13,
            f"recorded g choices reproduce the closed forms to {worst:.3e} (tol 1e-13)",
        )
    )

    # baselines do drift (sanity that the conservation tests can fail)
    rb_traj = integrate(baseline_residual("backward-euler", rb), (1.0, 1.0, 1.0), tau=0.01, steps=1000)
    base = rb.invariant_values(0.0, (1.0, 1.0, 1.0))
    drift = max(
        abs(rb.invariant_values(t, x)[0] - base[0]) for t, x in zip(rb_traj.t[1:], rb_traj.x[1:])
    )
    results.append(
        CheckResult(
            "scheme/baseline-non-conservation",
            drift > 1e-3,
            f"backward Euler drifts the energy by {drift:.3e} over the recorded run (floor 1e-3)",
        )
    )
    return results


# ---------------------------------------------------------------------------
# solver suite


def solver_suite():
    rng = np.random.default_rng(71)
    results = []

    lv2 = get_system("lv2")
    scheme = make_scheme(lv2, "multiplier")
    cfg = SolverConfig(abs_tol=1e-13)
    t1 = integrate(scheme, (1.0, 2.0), tau=0.01, steps=500, cfg=cfg)
    t2 = integrate(scheme, (1.0, 2.0), tau=0.01, steps=500, cfg=cfg)
    results.append(
        CheckResult(
            "solver/determinism",
            bool(np.array_equal(t1.x, t2.x)),
            "identical configs give bit-identical trajectories",
        )
    )

    # tightening the tolerance never makes the drift worse, up to the noise
    # floor and the per-tolerance solver allowance (drift at tolerance T is
    # only guaranteed below ~N*T; a looser run can beat that bound by luck)
    tols = (1e-7, 1e-9, 1e-11, 1e-13, 1e-15)
    steps = 400
    monotone = True
    ladders = {}
    for sid, x0 in (("rigid-body", (1.0, 1.0, 1.0)), ("dho", (1.0, 0.0)), ("lv2", (1.0, 2.0))):
        system = get_system(sid)
        sch = make_scheme(system, "multiplier")
        base = system.invariant_values(0.0, x0)[0]
        drifts = []
        for tol in tols:
            traj = integrate(sch, x0, tau=0.01, steps=steps, cfg=SolverConfig(abs_tol=tol))
            drifts.append(
                max(abs(system.invariant_values(t, x)[0] - base) for t, x in zip(traj.t[1:], traj.x[1:]))
            )
        noise = drifts[-1]
        scale = 1.0 + abs(base)
        for i in range(len(tols) - 1):
            allowance = max(drifts[i], 2 * noise, steps * tols[i + 1] * scale)
            if drifts[i + 1] > allowance:
                monotone = False
        if drifts[-1] > drifts[0] / 100:
            monotone = False
        ladders[sid] = ["%.1e" % d for d in drifts]
    results.append(
        CheckResult(
            "solver/tolerance-conservation-coupling",
            monotone,
            f"drift ladders over tol {list(tols)}: {ladders}",
        )
    )

    worst = 0.0
    for sid, tau in (("rigid-body", 0.01), ("lv2", 0.01), ("lv3", 0.01), ("dho", 0.01), ("pr3bp", 8.5e-5)):
        system = get_system(sid)
        sch = make_scheme(system, "multiplier")
        xk = system.default_x0
        tol = 1e-13
        from .solver import implicit_step

        x_fp, _, _ = implicit_step(sch, 0.0, xk, tau, SolverConfig(abs_tol=tol))
        x_nw, _, _ = implicit_step(sch, 0.0, xk, tau, SolverConfig(method="newton", abs_tol=tol))
        worst = max(worst, max(abs(a - b) for a, b in zip(x_fp, x_nw)) / (10 * tol))
    results.append(
        CheckResult(
            "solver/fixed-point-newton-agreement",
            worst <= 1.0,
            f"per-step gap within {worst:.2f}x of 10*abs_tol across bundled systems",
        )
    )
    return results


SUITES = {
    "expr": expr_suite,
    "divdiff": divdiff_suite,
    "multiplier": multiplier_suite,
    "scheme": scheme_suite,
    "solver": solver_suite,
}


def run_suites(module=None):
    names = [module] if module else list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown verify module(s) {unknown}; known: {sorted(SUITES)}")
    results = []
    for name in names:
        results.extend(SUITES[name]())
    return results

import math

import numpy as np
import pytest

from conservekit import divdiff as dd
from conservekit import expr as ex
from conservekit.verify import corpus


class TestForwardDifference:
    def test_linear(self):
        s = dd.step_pair(0.0, (1.0,), 0.1, (3.0,))
        assert dd.forward_difference([ex.var(1)], s) == [2.0]

    def test_constant_is_zero(self, rng):
        for _ in range(10):
            s = dd.step_pair(0.0, tuple(rng.uniform(0, 2, 2)), 0.3, tuple(rng.uniform(0, 2, 2)))
            assert dd.forward_difference([ex.const(7.5)], s) == [0.0]

    def test_square(self):
        s = dd.step_pair(0.0, (1.0,), 0.0, (3.0,))
        assert dd.forward_difference([ex.parse("x1^2", 1)], s) == [8.0]


class TestPartialForwardDifference:
    def test_product(self):
        f = ex.parse("x1*x2", 2)
        s = dd.step_pair(0.0, (1.0, 2.0), 0.0, (3.0, 5.0))
        assert dd.partial_forward_difference(f, 1, dd.all_low(2), s) == 4.0

    def test_independent_variable_gives_zero(self):
        f = ex.parse("x2^2", 2)
        s = dd.step_pair(0.0, (1.0, 2.0), 0.1, (3.0, 5.0))
        assert dd.partial_forward_difference(f, 1, dd.all_low(2), s) == 0.0

    def test_time_identity(self):
        s = dd.step_pair(0.0, (1.0,), 0.5, (1.0,))
        assert dd.partial_forward_difference(ex.var(0), 0, dd.all_low(1), s) == 0.5

    def test_raised_position_rejected(self):
        base = dd.all_low(1).raised(1)
        s = dd.step_pair(0.0, (1.0,), 0.1, (2.0,))
        with pytest.raises(ex.ExprError):
            dd.partial_forward_difference(ex.var(1), 1, base, s)


class TestPermutationStencils:
    def test_identity_n2(self):
        plan = dd.permutation_stencils((0, 1, 2), 2)
        assert plan.v == ((0, 0, 0), (1, 0, 0), (1, 1, 0), (1, 1, 1))

    def test_reversal_n1(self):
        plan = dd.permutation_stencils((1, 0), 1)
        assert plan.v == ((0, 0), (0, 1), (1, 1))

    def test_endpoint_is_all_ones(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 5))
            sigma = list(range(n + 1))
            rng.shuffle(sigma)
            plan = dd.permutation_stencils(sigma, n)
            assert plan.v[-1] == (1,) * (n + 1)

    def test_invalid_permutation(self):
        with pytest.raises(ex.ExprError):
            dd.permutation_stencils((0, 0, 1), 2)

    def test_stencil_for_places_variable_low(self):
        plan = dd.permutation_stencils((2, 0, 1), 2)
        for i in range(3):
            assert plan.stencil_for(i).levels[i] == dd.LEVEL_K


class TestSymbolicDividedDifference:
    def test_square_gives_level_sum(self, rng):
        d = dd.divided_difference_symbolic(ex.parse("x1^2", 1), 1, dd.all_low(1))
        for _ in range(50):
            a, b = rng.uniform(-3, 3, 2)
            if a == b:
                continue
            s = dd.step_pair(0.0, (b,), 0.1, (a,))
            assert d.evaluate(s) == pytest.approx((a * a - b * b) / (a - b), rel=1e-13)

    def test_log_quotient(self):
        d = dd.divided_difference_symbolic(ex.parse("log(x1)", 1), 1, dd.all_low(1))
        s = dd.step_pair(0.0, (1.0,), 0.1, (math.e,))
        assert d.evaluate(s) == pytest.approx(1 / (math.e - 1), rel=1e-14)
        assert d.evaluate(s) == pytest.approx(0.581977, rel=1e-5)

    def test_exp_quotient(self):
        d = dd.divided_difference_symbolic(ex.parse("exp(x1)", 1), 1, dd.all_low(1))
        s = dd.step_pair(0.0, (0.0,), 0.1, (1.0,))
        assert d.evaluate(s) == pytest.approx(math.e - 1, rel=1e-14)

    def test_reciprocal_sqrt_composition(self, rng):
        # reciprocal + chain + rational power compose to the radical form
        d = dd.divided_difference_symbolic(ex.parse("1/sqrt(x1)", 1), 1, dd.all_low(1))
        for _ in range(30):
            b, a = sorted(rng.uniform(0.1, 4.0, 2))
            if a == b:
                continue
            s = dd.step_pair(0.0, (b,), 0.1, (a,))
            want = -1 / (math.sqrt(a) * math.sqrt(b) * (math.sqrt(a) + math.sqrt(b)))
            assert d.evaluate(s) == pytest.approx(want, rel=1e-13)

    def test_no_quotient_left_in_differenced_variable(self, rng):
        # evaluable at coincident points, where it equals the derivative
        exprs = corpus(rng, 2, 30)
        for e in exprs:
            for i in range(3):
                d = dd.divided_difference_symbolic(e, i, dd.all_low(2))
                vals = tuple(rng.uniform(0.4, 2.0) for _ in range(3))
                s = dd.coincident_pair(vals[0], vals[1:])
                try:
                    got = d.evaluate(s)
                    want = ex.evaluate(ex.partial_derivative(e, i), vals)
                except ex.DomainError:
                    continue
                assert got == pytest.approx(want, rel=1e-13, abs=1e-13)

    def test_mixed_level_base_stencil(self):
        # d/dx1 of x1*x2 with x2 frozen at the upper level
        f = ex.parse("x1*x2", 2)
        base = dd.StencilAssignment((0, 0, 1))
        d = dd.divided_difference_symbolic(f, 1, base)
        s = dd.step_pair(0.0, (1.0, 2.0), 0.1, (4.0, 7.0))
        assert d.evaluate(s) == 7.0


class TestNumericDividedDifference:
    def test_plain_quotient(self):
        f = ex.parse("x1^2", 1)
        s = dd.step_pair(0.0, (1.0,), 0.1, (3.0,))
        assert dd.divided_difference_numeric(f, 1, dd.all_low(1), s) == 4.0

    def test_coincident_limit_branch(self):
        f = ex.parse("x1^2", 1)
        s = dd.coincident_pair(0.0, (3.0,))
        assert dd.divided_difference_numeric(f, 1, dd.all_low(1), s) == 6.0

    def test_guard_threshold(self):
        f = ex.parse("x1^2", 1)
        s = dd.step_pair(0.0, (3.0,), 0.1, (3.0 + 1e-9,))
        # below the default guard the analytic limit takes over
        assert dd.divided_difference_numeric(f, 1, dd.all_low(1), s) == 6.0
        wide = dd.step_pair(0.0, (3.0,), 0.1, (3.0 + 1e-3,))
        quotient = dd.divided_difference_numeric(f, 1, dd.all_low(1), wide)
        assert quotient == pytest.approx(6.0 + 1e-3, rel=1e-12)


class TestSymmetrizedDifference:
    def test_coincident_pair_is_zero(self):
        f = ex.parse("x1*x2 + exp(0.2*x1)", 2)
        s = dd.coincident_pair(0.5, (1.2, 0.7))
        assert dd.symmetrized_forward_difference(f, s) == 0.0

    def test_matches_forward_difference(self, rng):
        f = ex.parse("x1*x2", 2)
        for _ in range(100):
            s = dd.step_pair(
                0.0, tuple(rng.uniform(0.2, 2.0, 2)), rng.uniform(0.01, 0.5), tuple(rng.uniform(0.2, 2.0, 2))
            )
            plain = dd.forward_difference([f], s)[0]
            sym = dd.symmetrized_forward_difference(f, s)
            assert sym == pytest.approx(plain, rel=1e-13, abs=1e-13)

    def test_linear_is_exact(self, rng):
        f = ex.parse("2*x1 - 3*x2 + t", 2)
        for _ in range(20):
            s = dd.step_pair(
                0.0, tuple(rng.uniform(-2, 2, 2)), rng.uniform(0.01, 1.0), tuple(rng.uniform(-2, 2, 2))
            )
            assert dd.symmetrized_forward_difference(f, s) == pytest.approx(
                dd.forward_difference([f], s)[0], rel=1e-15, abs=1e-15
            )


class TestTelescoping:
    def test_identity_over_corpus(self, rng):
        exprs = corpus(rng, 3, 50)
        checked = 0
        for e in exprs:
            sigma = list(range(4))
            rng.shuffle(sigma)
            plan = dd.permutation_stencils(sigma, 3)
            lo = tuple(rng.uniform(0.3, 2.4, 4))
            hi = tuple(max(0.05, v + rng.uniform(-0.2, 1.0)) for v in lo)
            s = dd.step_pair(lo[0], lo[1:], lo[0] + abs(hi[0] - lo[0]) + 1e-3, hi[1:])
            try:
                lhs = dd.telescoped_difference(e, plan, s)
                rhs = dd.forward_difference([e], s)[0]
            except ex.DomainError:
                continue
            checked += 1
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
        assert checked >= 40

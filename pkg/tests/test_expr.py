import math

import numpy as np
import pytest

from conservekit import expr as ex
from conservekit.verify import random_expression


class TestParse:
    def test_sum_of_products(self):
        e = ex.parse("x1 + x2*x3", 3)
        assert e == ex.add(ex.var(1), ex.mul(ex.var(2), ex.var(3)))

    def test_log(self):
        assert ex.parse("log(x1)", 1) == ex.log(ex.var(1))

    def test_variable_out_of_range(self):
        with pytest.raises(ex.ParseError) as info:
            ex.parse("x4", 3)
        assert info.value.offset == 0

    def test_whitespace_insensitive(self):
        assert ex.parse(" x1+ x2 * x3 ", 3) == ex.parse("x1+x2*x3", 3)

    def test_sqrt_desugars_to_half_power(self):
        e = ex.parse("sqrt(x1)", 1)
        assert isinstance(e, ex.Pow) and (e.p, e.q) == (1, 2)

    def test_rational_exponent(self):
        e = ex.parse("x1^(3/2)", 1)
        assert (e.p, e.q) == (3, 2)

    def test_unary_minus(self):
        e = ex.parse("-x1*x2", 2)
        assert ex.evaluate(e, (0.0, 2.0, 3.0)) == -6.0

    def test_scientific_literal(self):
        assert ex.evaluate(ex.parse("1.5e-3", 1), (0.0, 1.0)) == 1.5e-3

    def test_t_is_variable_zero(self):
        assert ex.parse("t", 2) == ex.var(0)

    def test_trailing_garbage_offset(self):
        with pytest.raises(ex.ParseError):
            ex.parse("x1 + )", 1)

    def test_unknown_identifier(self):
        with pytest.raises(ex.ParseError):
            ex.parse("sin(x1)", 1)

    def test_nonpositive_exponent_rejected(self):
        with pytest.raises(ex.ParseError):
            ex.parse("x1^0", 1)
        with pytest.raises(ex.ParseError):
            ex.parse("x1^(0/2)", 1)


class TestEvaluate:
    def test_constant(self):
        assert ex.evaluate(ex.const(5), ex.Point(0.3, (1.0, 2.0))) == 5.0

    def test_square(self):
        assert ex.evaluate(ex.parse("x1^2", 1), ex.Point(0.0, (3.0,))) == 9.0

    def test_log_domain_error_names_node(self):
        with pytest.raises(ex.DomainError) as info:
            ex.evaluate(ex.parse("log(x1)", 1), ex.Point(0.0, (-1.0,)))
        assert "log(x1)" in str(info.value)

    def test_division_by_zero(self):
        with pytest.raises(ex.DomainError):
            ex.evaluate(ex.parse("1/x1", 1), ex.Point(0.0, (0.0,)))

    def test_fractional_power_of_negative(self):
        with pytest.raises(ex.DomainError):
            ex.evaluate(ex.parse("sqrt(x1)", 1), ex.Point(0.0, (-2.0,)))

    def test_deterministic(self):
        e = ex.parse("exp(0.2*x1)*log(x2) + x1^(2/3)/x2", 2)
        vals = (0.1, 1.4, 2.2)
        results = {ex.evaluate(e, vals) for _ in range(25)}
        assert len(results) == 1


class TestDerivative:
    def test_power_rule(self, rng):
        d = ex.partial_derivative(ex.parse("x1^2", 1), 1)
        for _ in range(20):
            x = rng.uniform(-3, 3)
            assert ex.evaluate(d, (0.0, x)) == pytest.approx(2 * x, rel=1e-14)

    def test_log_rule(self):
        d = ex.partial_derivative(ex.parse("log(x1)", 1), 1)
        assert ex.evaluate(d, (0.0, 4.0)) == pytest.approx(0.25, rel=1e-15)

    def test_oscillator_invariant_gradient(self, oscillator, rng):
        # d/dx of the exponentially weighted quadratic form
        m = oscillator.params["mass"]
        gam = oscillator.params["damping"]
        kap = oscillator.params["stiffness"]
        d = ex.partial_derivative(oscillator.invariants[0], 1)
        for _ in range(20):
            t, x, y = rng.uniform(0, 3), rng.uniform(-2, 2), rng.uniform(-2, 2)
            want = math.exp(gam / m * t) * (kap * x + gam / 2 * y)
            assert ex.evaluate(d, (t, x, y)) == pytest.approx(want, rel=1e-13)

    def test_derivative_matches_central_difference(self, rng):
        checked = 0
        while checked < 300:
            n = int(rng.integers(1, 4))
            e = random_expression(rng, n, depth=int(rng.integers(1, 4)))
            if ex.max_var_index(e) < 0:
                continue
            i = int(rng.integers(0, n + 1))
            vals = tuple(rng.uniform(0.3, 2.4) for _ in range(n + 1))
            try:
                deriv = ex.evaluate(ex.partial_derivative(e, i), vals)
                h = 1e-6 * max(1.0, abs(vals[i]))
                up, dn = list(vals), list(vals)
                up[i] += h
                dn[i] -= h
                central = (ex.evaluate(e, up) - ex.evaluate(e, dn)) / (2 * h)
            except ex.DomainError:
                continue
            checked += 1
            assert deriv == pytest.approx(central, rel=1e-6, abs=1e-6 * max(1, abs(deriv)))

    def test_derivative_stays_in_grammar(self, rng):
        # every derivative is printable and reparseable
        for _ in range(100):
            n = int(rng.integers(1, 4))
            e = random_expression(rng, n, depth=2)
            d = ex.partial_derivative(e, 1)
            assert ex.parse(ex.format_expr(d), n) == d


class TestCanonicalForm:
    def test_print_parse_idempotent(self, rng):
        for _ in range(300):
            n = int(rng.integers(1, 4))
            e = random_expression(rng, n, depth=int(rng.integers(1, 4)))
            text = ex.format_expr(e)
            reparsed = ex.parse(text, n)
            assert ex.format_expr(reparsed) == text
            assert ex.parse(ex.format_expr(reparsed), n) == reparsed

    def test_constant_merging_is_grouping_independent(self):
        a = ex.mul(ex.const(0.4), ex.mul(ex.const(0.5), ex.var(1)))
        b = ex.mul(ex.mul(ex.const(0.4), ex.const(0.5)), ex.var(1))
        assert a == b

    def test_flattening(self):
        e = ex.add(ex.add(ex.var(1), ex.var(2)), ex.var(3))
        assert isinstance(e, ex.Sum) and len(e.terms) == 3

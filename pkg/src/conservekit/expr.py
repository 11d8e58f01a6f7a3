"""Expression trees for scalar functions of (t, x1..xn).

Supported node kinds: constants, variables (index 0 is t), n-ary sums and
products, quotients, positive rational powers, exp, log, and negation.
This covers every right-hand side and conserved quantity bundled with the
package while keeping the set small enough that the divided-difference
rewriting in :mod:`conservekit.divdiff` is total.

Two extra node kinds (`ExpRel`, `LogQuot`) exist only in discrete trees
produced by the rewriter; they are smooth stand-ins for the removable-
singularity quotients (e^u-1)/u and (log a - log b)/(a-b) and are not
reachable from the text grammar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    """Syntax or scoping error, with the byte offset of the offending token."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class DomainError(ExprError):
    """Evaluation hit an invalid point (log/root of non-positive, zero divisor)."""

    def __init__(self, message, node=None):
        if node is not None:
            message = f"{message} in subexpression '{format_expr(node)}'"
        super().__init__(message)
        self.node = node


# ---------------------------------------------------------------------------
# node kinds


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0 is t, 1..n are the state variables


@dataclass(frozen=True)
class Sum:
    terms: tuple


@dataclass(frozen=True)
class Prod:
    factors: tuple


@dataclass(frozen=True)
class Quot:
    num: "Expression"
    den: "Expression"


@dataclass(frozen=True)
class Pow:
    base: "Expression"
    p: int  # exponent p/q, reduced, p >= 1, q >= 1
    q: int


@dataclass(frozen=True)
class Exp:
    arg: "Expression"


@dataclass(frozen=True)
class Log:
    arg: "Expression"


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class ExpRel:
    """(e^u - 1)/u with the removable singularity filled in (value 1 at u=0)."""

    arg: "Expression"


@dataclass(frozen=True)
class LogQuot:
    """(log a - log b)/(a - b) for a, b > 0, equal to 1/a at a == b."""

    a: "Expression"
    b: "Expression"


Expression = Union[Const, Var, Sum, Prod, Quot, Pow, Exp, Log, Neg, ExpRel, LogQuot]


@dataclass(frozen=True)
class Point:
    """A space-time sample (t, x1..xn)."""

    t: float
    x: tuple

    def values(self):
        return (self.t,) + tuple(self.x)


# ---------------------------------------------------------------------------
# smart constructors (flattening + constant folding, nothing fancier)


def const(v) -> Const:
    return Const(float(v))


def var(i) -> Var:
    if i < 0:
        raise ExprError(f"variable index {i} is negative")
    return Var(int(i))


def add(*terms) -> Expression:
    flat = []
    for term in terms:
        if isinstance(term, Sum):
            flat.extend(term.terms)
        else:
            flat.append(term)
    # merge all constant terms into a single trailing one so that grouping
    # does not matter (parse folds incrementally, rewriting folds in bulk)
    kept = [t for t in flat if not isinstance(t, Const)]
    folded = math.fsum(t.value for t in flat if isinstance(t, Const))
    if not kept:
        return Const(folded)
    if folded != 0.0:
        kept.append(Const(folded))
    if len(kept) == 1:
        return kept[0]
    return Sum(tuple(kept))


def mul(*factors) -> Expression:
    flat = []
    for f in factors:
        if isinstance(f, Prod):
            flat.extend(f.factors)
        else:
            flat.append(f)
    kept = [f for f in flat if not isinstance(f, Const)]
    folded = 1.0
    for f in flat:
        if isinstance(f, Const):
            folded *= f.value
    if not kept:
        return Const(folded)
    if folded != 1.0:
        kept.insert(0, Const(folded))  # coefficient position
    if len(kept) == 1:
        return kept[0]
    return Prod(tuple(kept))


def div(num, den) -> Expression:
    if isinstance(den, Const):
        if den.value == 0.0:
            raise DomainError("constant zero denominator", den)
        if den.value == 1.0:
            return num
        if isinstance(num, Const):
            return Const(num.value / den.value)
    return Quot(num, den)


def rpow(base, exponent) -> Expression:
    """base raised to a positive rational exponent (int, Fraction, or exact float)."""
    frac = exponent if isinstance(exponent, Fraction) else Fraction(exponent)
    if frac <= 0:
        raise ExprError(f"power exponent must be positive, got {frac}")
    p, q = frac.numerator, frac.denominator
    if frac == 1:
        return base
    if isinstance(base, Const):
        if q > 1 and base.value <= 0:
            raise DomainError(f"fractional power of non-positive constant {base.value}")
        return Const(base.value ** (p / q))
    return Pow(base, p, q)


def sqrt(arg) -> Expression:
    return rpow(arg, Fraction(1, 2))


def exp(arg) -> Expression:
    if isinstance(arg, Const):
        return Const(math.exp(arg.value))
    return Exp(arg)


def log(arg) -> Expression:
    if isinstance(arg, Const):
        if arg.value <= 0:
            raise DomainError(f"log of non-positive constant {arg.value}")
        return Const(math.log(arg.value))
    return Log(arg)


def neg(arg) -> Expression:
    if isinstance(arg, Const):
        return Const(-arg.value)
    if isinstance(arg, Neg):
        return arg.arg
    return Neg(arg)


def sub(a, b) -> Expression:
    return add(a, neg(b))


def exprel(arg) -> Expression:
    if isinstance(arg, Const):
        return Const(_exprel_value(arg.value))
    return ExpRel(arg)


def logquot(a, b) -> Expression:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(_logquot_value(a.value, b.value))
    return LogQuot(a, b)


# ---------------------------------------------------------------------------
# evaluation


def _exprel_value(u):
    if u == 0.0:
        return 1.0
    return math.expm1(u) / u


def _logquot_value(a, b, node=None):
    if a <= 0 or b <= 0:
        raise DomainError(f"log difference quotient needs positive arguments, got ({a}, {b})", node)
    d = a - b
    if d == 0.0:
        return 1.0 / a
    return math.log1p(d / b) / d


def evaluate(e: Expression, values) -> float:
    """Evaluate at a Point or a flat value vector (values[i] = variable i)."""
    if isinstance(values, Point):
        values = values.values()
    return _eval(e, values)


def _eval(e, vals):
    kind = type(e)
    if kind is Const:
        return e.value
    if kind is Var:
        if e.index >= len(vals):
            raise DomainError(f"variable index {e.index} outside point of size {len(vals)}", e)
        return float(vals[e.index])
    if kind is Sum:
        return math.fsum(_eval(t, vals) for t in e.terms)
    if kind is Prod:
        out = 1.0
        for f in e.factors:
            out *= _eval(f, vals)
        return out
    if kind is Quot:
        den = _eval(e.den, vals)
        if den == 0.0:
            raise DomainError("division by zero", e)
        return _eval(e.num, vals) / den
    if kind is Pow:
        base = _eval(e.base, vals)
        if e.q > 1:
            if base <= 0.0:
                raise DomainError(f"fractional power of non-positive value {base}", e)
            return base ** (e.p / e.q)
        return base**e.p
    if kind is Exp:
        return math.exp(_eval(e.arg, vals))
    if kind is Log:
        arg = _eval(e.arg, vals)
        if arg <= 0.0:
            raise DomainError(f"log of non-positive value {arg}", e)
        return math.log(arg)
    if kind is Neg:
        return -_eval(e.arg, vals)
    if kind is ExpRel:
        return _exprel_value(_eval(e.arg, vals))
    if kind is LogQuot:
        return _logquot_value(_eval(e.a, vals), _eval(e.b, vals), e)
    raise ExprError(f"unknown node kind {kind!r}")


# ---------------------------------------------------------------------------
# symbolic differentiation


def partial_derivative(e: Expression, i: int) -> Expression:
    """Exact derivative with respect to variable i (0 is t)."""
    kind = type(e)
    if kind is Const:
        return Const(0.0)
    if kind is Var:
        return Const(1.0 if e.index == i else 0.0)
    if kind is Sum:
        return add(*[partial_derivative(t, i) for t in e.terms])
    if kind is Prod:
        terms = []
        for j, f in enumerate(e.factors):
            df = partial_derivative(f, i)
            if isinstance(df, Const) and df.value == 0.0:
                continue
            rest = e.factors[:j] + e.factors[j + 1 :]
            terms.append(mul(df, *rest))
        return add(*terms)
    if kind is Quot:
        dn = partial_derivative(e.num, i)
        dd = partial_derivative(e.den, i)
        if isinstance(dd, Const) and dd.value == 0.0:
            return div(dn, e.den)
        return div(sub(mul(dn, e.den), mul(e.num, dd)), mul(e.den, e.den))
    if kind is Pow:
        db = partial_derivative(e.base, i)
        if isinstance(db, Const) and db.value == 0.0:
            return Const(0.0)
        coeff = Const(e.p / e.q)
        shifted = Fraction(e.p, e.q) - 1
        if shifted == 0:
            return mul(coeff, db)
        if shifted > 0:
            return mul(coeff, rpow(e.base, shifted), db)
        return mul(coeff, div(db, rpow(e.base, -shifted)))
    if kind is Exp:
        return mul(exp(e.arg), partial_derivative(e.arg, i))
    if kind is Log:
        return div(partial_derivative(e.arg, i), e.arg)
    if kind is Neg:
        return neg(partial_derivative(e.arg, i))
    raise ExprError(f"cannot differentiate internal discrete node {kind.__name__}")


def gradient(e: Expression, n: int):
    """State-space gradient (d/dx1 .. d/dxn); excludes the t slot."""
    return [partial_derivative(e, i) for i in range(1, n + 1)]


def depends_on(e: Expression, i: int) -> bool:
    kind = type(e)
    if kind is Const:
        return False
    if kind is Var:
        return e.index == i
    if kind is Sum:
        return any(depends_on(t, i) for t in e.terms)
    if kind is Prod:
        return any(depends_on(f, i) for f in e.factors)
    if kind is Quot:
        return depends_on(e.num, i) or depends_on(e.den, i)
    if kind is Pow:
        return depends_on(e.base, i)
    if kind in (Exp, Log, Neg, ExpRel):
        return depends_on(e.arg, i)
    if kind is LogQuot:
        return depends_on(e.a, i) or depends_on(e.b, i)
    raise ExprError(f"unknown node kind {kind!r}")


def max_var_index(e: Expression) -> int:
    kind = type(e)
    if kind is Const:
        return -1
    if kind is Var:
        return e.index
    if kind is Sum:
        return max(max_var_index(t) for t in e.terms)
    if kind is Prod:
        return max(max_var_index(f) for f in e.factors)
    if kind is Quot:
        return max(max_var_index(e.num), max_var_index(e.den))
    if kind is Pow:
        return max_var_index(e.base)
    if kind in (Exp, Log, Neg, ExpRel):
        return max_var_index(e.arg)
    if kind is LogQuot:
        return max(max_var_index(e.a), max_var_index(e.b))
    raise ExprError(f"unknown node kind {kind!r}")


def substitute(e: Expression, mapping) -> Expression:
    """Replace Var(i) by mapping[i] (an Expression) wherever defined."""
    kind = type(e)
    if kind is Const:
        return e
    if kind is Var:
        return mapping.get(e.index, e)
    if kind is Sum:
        return add(*[substitute(t, mapping) for t in e.terms])
    if kind is Prod:
        return mul(*[substitute(f, mapping) for f in e.factors])
    if kind is Quot:
        return div(substitute(e.num, mapping), substitute(e.den, mapping))
    if kind is Pow:
        return rpow(substitute(e.base, mapping), Fraction(e.p, e.q))
    if kind is Exp:
        return exp(substitute(e.arg, mapping))
    if kind is Log:
        return log(substitute(e.arg, mapping))
    if kind is Neg:
        return neg(substitute(e.arg, mapping))
    if kind is ExpRel:
        return exprel(substitute(e.arg, mapping))
    if kind is LogQuot:
        return logquot(substitute(e.a, mapping), substitute(e.b, mapping))
    raise ExprError(f"unknown node kind {kind!r}")


# ---------------------------------------------------------------------------
# printing (canonical, round-trippable for the continuous grammar)

_PREC_SUM, _PREC_PROD, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _fmt_const(v):
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def format_expr(e: Expression, names=None) -> str:
    """Render to the text grammar; `names` maps variable index to a label."""

    def name(i):
        if names is not None:
            return names[i]
        return "t" if i == 0 else f"x{i}"

    def fmt(node, prec):
        kind = type(node)
        if kind is Const:
            s = _fmt_const(node.value)
            if node.value < 0 and prec > _PREC_SUM:
                return f"({s})"
            return s
        if kind is Var:
            return name(node.index)
        if kind is Sum:
            parts = [fmt(node.terms[0], _PREC_SUM + 1)]
            for term in node.terms[1:]:
                if isinstance(term, Neg):
                    parts.append(" - " + fmt(term.arg, _PREC_SUM + 1))
                elif isinstance(term, Const) and term.value < 0:
                    parts.append(" - " + _fmt_const(-term.value))
                else:
                    parts.append(" + " + fmt(term, _PREC_SUM + 1))
            s = "".join(parts)
            return f"({s})" if prec > _PREC_SUM else s
        if kind is Prod:
            s = "*".join(fmt(f, _PREC_PROD + 1) for f in node.factors)
            return f"({s})" if prec > _PREC_PROD else s
        if kind is Quot:
            s = fmt(node.num, _PREC_PROD + 1) + "/" + fmt(node.den, _PREC_PROD + 1)
            return f"({s})" if prec > _PREC_PROD else s
        if kind is Neg:
            s = "-" + fmt(node.arg, _PREC_UNARY + 1)
            return f"({s})" if prec > _PREC_UNARY else s
        if kind is Pow:
            if node.p == 1 and node.q == 2:
                return f"sqrt({fmt(node.base, _PREC_SUM)})"
            ex = str(node.p) if node.q == 1 else f"({node.p}/{node.q})"
            s = fmt(node.base, _PREC_ATOM) + "^" + ex
            return f"({s})" if prec > _PREC_POW else s
        if kind is Exp:
            return f"exp({fmt(node.arg, _PREC_SUM)})"
        if kind is Log:
            return f"log({fmt(node.arg, _PREC_SUM)})"
        if kind is ExpRel:
            return f"exprel({fmt(node.arg, _PREC_SUM)})"
        if kind is LogQuot:
            return f"dlog({fmt(node.a, _PREC_SUM)}, {fmt(node.b, _PREC_SUM)})"
        raise ExprError(f"unknown node kind {kind!r}")

    return fmt(e, _PREC_SUM)


# ---------------------------------------------------------------------------
# parsing

_FUNCTIONS = ("exp", "log", "sqrt")


class _Lexer:
    def __init__(self, text):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        if self.pos >= len(self.text):
            return ""
        return self.text[self.pos]

    def number(self):
        self.skip_ws()
        start = self.pos
        text = self.text
        n = len(text)
        while self.pos < n and text[self.pos].isdigit():
            self.pos += 1
        if self.pos < n and text[self.pos] == ".":
            self.pos += 1
            while self.pos < n and text[self.pos].isdigit():
                self.pos += 1
        if self.pos < n and text[self.pos] in "eE":
            mark = self.pos
            self.pos += 1
            if self.pos < n and text[self.pos] in "+-":
                self.pos += 1
            if self.pos < n and text[self.pos].isdigit():
                while self.pos < n and text[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = mark  # not an exponent suffix after all
        if self.pos == start:
            raise ParseError("expected a number", start)
        return text[start : self.pos], start

    def ident(self):
        self.skip_ws()
        start = self.pos
        text = self.text
        while self.pos < len(text) and (text[self.pos].isalnum() or text[self.pos] == "_"):
            self.pos += 1
        if self.pos == start:
            raise ParseError("expected an identifier", start)
        return text[start : self.pos], start


def parse(text: str, n: int) -> Expression:
    """Parse the text grammar for a system with n state variables.

    Grammar: identifiers t, x1..xn; decimal literals; + - * / ^;
    exp(..), log(..), sqrt(..); parentheses. sqrt desugars to power 1/2
    and ^ accepts a positive integer or parenthesized rational exponent.
    """
    lex = _Lexer(text)
    node = _parse_sum(lex, n)
    lex.skip_ws()
    if lex.pos != len(text):
        raise ParseError(f"unexpected trailing input {text[lex.pos:]!r}", lex.pos)
    return node


def _parse_sum(lex, n):
    node = _parse_term(lex, n)
    while True:
        ch = lex.peek()
        if ch == "+":
            lex.pos += 1
            node = add(node, _parse_term(lex, n))
        elif ch == "-":
            lex.pos += 1
            node = add(node, neg(_parse_term(lex, n)))
        else:
            return node


def _parse_term(lex, n):
    node = _parse_unary(lex, n)
    while True:
        ch = lex.peek()
        if ch == "*":
            lex.pos += 1
            node = mul(node, _parse_unary(lex, n))
        elif ch == "/":
            lex.pos += 1
            node = div(node, _parse_unary(lex, n))
        else:
            return node


def _parse_unary(lex, n):
    if lex.peek() == "-":
        lex.pos += 1
        return neg(_parse_unary(lex, n))
    return _parse_power(lex, n)


def _parse_power(lex, n):
    base = _parse_atom(lex, n)
    if lex.peek() == "^":
        lex.pos += 1
        exponent = _parse_exponent(lex)
        try:
            return rpow(base, exponent)
        except ExprError as err:
            raise ParseError(str(err), lex.pos) from err
    return base


def _parse_exponent(lex):
    ch = lex.peek()
    if ch == "(":
        lex.pos += 1
        num, off = lex.number()
        top = _number_to_fraction(num, off)
        if lex.peek() == "/":
            lex.pos += 1
            den, off2 = lex.number()
            bottom = _number_to_fraction(den, off2)
            if bottom == 0:
                raise ParseError("zero exponent denominator", off2)
            top = top / bottom
        if lex.peek() != ")":
            raise ParseError("expected ')' closing exponent", lex.pos)
        lex.pos += 1
        return top
    num, off = lex.number()
    return _number_to_fraction(num, off)


def _number_to_fraction(text, offset):
    try:
        return Fraction(text)
    except ValueError as err:
        raise ParseError(f"exponent {text!r} is not an exact rational", offset) from err


def _parse_atom(lex, n):
    ch = lex.peek()
    if ch == "":
        raise ParseError("unexpected end of input", lex.pos)
    if ch == "(":
        lex.pos += 1
        node = _parse_sum(lex, n)
        if lex.peek() != ")":
            raise ParseError("expected ')'", lex.pos)
        lex.pos += 1
        return node
    if ch.isdigit() or ch == ".":
        text, _ = lex.number()
        return Const(float(text))
    if ch.isalpha():
        name, off = lex.ident()
        if name in _FUNCTIONS:
            if lex.peek() != "(":
                raise ParseError(f"expected '(' after {name}", lex.pos)
            lex.pos += 1
            arg = _parse_sum(lex, n)
            if lex.peek() != ")":
                raise ParseError("expected ')'", lex.pos)
            lex.pos += 1
            try:
                return {"exp": exp, "log": log, "sqrt": sqrt}[name](arg)
            except DomainError as err:
                raise ParseError(str(err), off) from err
        if name == "t":
            return Var(0)
        if name.startswith("x") and name[1:].isdigit():
            idx = int(name[1:])
            if not 1 <= idx <= n:
                raise ParseError(f"variable {name} out of range for dimension {n}", off)
            return Var(idx)
        raise ParseError(f"unknown identifier {name!r}", off)
    raise ParseError(f"unexpected character {ch!r}", lex.pos)

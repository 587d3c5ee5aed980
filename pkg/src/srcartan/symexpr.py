"""Coefficient expressions on a coordinate chart and exterior calculus.

Grammar (whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | atom ('^' integer)?
    atom   := rational | ident | fn '(' expr ')' | '(' expr ')'

``fn`` is one of sqrt, sin, cos, exp.  ``^`` binds tighter than unary minus,
so ``-x^2`` is ``-(x^2)``.  A minus sign directly in front of a numeric
literal without an exponent is folded into the literal.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .errors import EvaluationError, ParseError

FUNCTIONS = ("sqrt", "sin", "cos", "exp")


class Expr:
    __slots__ = ("_hash",)
    prec = 100

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or hash(self) != hash(other):
            return False
        return self._key() == other._key()

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Expr({to_string(self)!r})"

    def __str__(self):
        return to_string(self)

    # operator sugar builds simplified trees
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k: int):
        return power(self, k)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = Fraction(value)
        self._hash = hash(("c", self.value))

    def _key(self):
        return self.value


class Var(Expr):
    __slots__ = ("index",)

    def __init__(self, index: int):
        self.index = int(index)
        self._hash = hash(("v", self.index))

    def _key(self):
        return self.index


class _Binary(Expr):
    __slots__ = ("left", "right")
    tag = ""

    def __init__(self, left: Expr, right: Expr):
        self.left = left
        self.right = right
        self._hash = hash((self.tag, left._hash, right._hash))

    def _key(self):
        return (self.left, self.right)


class Add(_Binary):
    __slots__ = ()
    tag, prec = "+", 1


class Sub(_Binary):
    __slots__ = ()
    tag, prec = "-", 1


class Mul(_Binary):
    __slots__ = ()
    tag, prec = "*", 2


class Div(_Binary):
    __slots__ = ()
    tag, prec = "/", 2


class Neg(Expr):
    __slots__ = ("arg",)
    prec = 3

    def __init__(self, arg: Expr):
        self.arg = arg
        self._hash = hash(("neg", arg._hash))

    def _key(self):
        return self.arg


class Pow(Expr):
    __slots__ = ("base", "exponent")
    prec = 4

    def __init__(self, base: Expr, exponent: int):
        self.base = base
        self.exponent = int(exponent)
        self._hash = hash(("^", base._hash, self.exponent))

    def _key(self):
        return (self.base, self.exponent)


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        self.name = name
        self.arg = arg
        self._hash = hash(("f", name, arg._hash))

    def _key(self):
        return (self.name, self.arg)


ZERO = Const(0)
ONE = Const(1)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, float):
        x = Fraction(x).limit_denominator(10**12) if x != int(x) else int(x)
    return Const(x)


def is_const(e: Expr, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


# --- simplifying constructors: constant folding and 0/1 identities only ---

def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if is_const(a, 0):
        return b
    if is_const(b, 0):
        return a
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if is_const(b, 0):
        return a
    if is_const(a, 0):
        return neg(b)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if is_const(a, 0) or is_const(b, 0):
        return ZERO
    if is_const(a, 1):
        return b
    if is_const(b, 1):
        return a
    if is_const(a, -1):
        return neg(b)
    if is_const(b, -1):
        return neg(a)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(b, Const) and b.value != 0:
        return mul(a, Const(1 / b.value))
    if is_const(a, 0):
        return ZERO
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a: Expr, k: int) -> Expr:
    if k == 0:
        return ONE
    if k == 1:
        return a
    if isinstance(a, Const) and (a.value != 0 or k > 0):
        return Const(a.value ** k)
    return Pow(a, k)


def func(name: str, a: Expr) -> Expr:
    if isinstance(a, Const):
        if name == "sqrt" and a.value >= 0:
            num, den = a.value.numerator, a.value.denominator
            rn, rd = math.isqrt(num), math.isqrt(den)
            if rn * rn == num and rd * rd == den:
                return Const(Fraction(rn, rd))
        if a.value == 0:
            if name in ("sqrt", "sin"):
                return ZERO
            return ONE
    return Func(name, a)


def sqrt(a) -> Expr:
    return func("sqrt", as_expr(a))


def simplify(e: Expr) -> Expr:
    """Rebuild ``e`` bottom-up with the folding constructors."""
    memo: dict = {}

    def go(x: Expr) -> Expr:
        got = memo.get(id(x))
        if got is not None:
            return got[1]
        if isinstance(x, (Const, Var)):
            out = x
        elif isinstance(x, Add):
            out = add(go(x.left), go(x.right))
        elif isinstance(x, Sub):
            out = sub(go(x.left), go(x.right))
        elif isinstance(x, Mul):
            out = mul(go(x.left), go(x.right))
        elif isinstance(x, Div):
            out = div(go(x.left), go(x.right))
        elif isinstance(x, Neg):
            out = neg(go(x.arg))
        elif isinstance(x, Pow):
            out = power(go(x.base), x.exponent)
        else:
            out = func(x.name, go(x.arg))
        memo[id(x)] = (x, out)
        return out

    return go(e)


# --- chart and parser ---

@dataclass(frozen=True)
class Chart:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("chart variable names must be unique")
        for n in self.names:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", n) or n in FUNCTIONS:
                raise ValueError(f"invalid chart variable name {n!r}")

    @property
    def dimension(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))")


def _tokenize(src: str):
    pos = 0
    out = []
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {src[pos]!r}", pos)
        start = m.start(m.lastgroup)
        out.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str, names: dict[str, int]):
        self.toks = _tokenize(src)
        self.i = 0
        self.names = names

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        t = self.take()
        if t[1] != value:
            raise ParseError(f"expected {value!r}, found {t[1] or 'end of input'!r}", t[2])
        return t

    def parse(self) -> Expr:
        e = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ParseError(f"unexpected token {t[1]!r}", t[2])
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            r = self.term()
            e = Add(e, r) if op == "+" else Sub(e, r)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            r = self.factor()
            e = Mul(e, r) if op == "*" else Div(e, r)
        return e

    def factor(self) -> Expr:
        t = self.peek()
        if t[1] == "-":
            self.take()
            nxt = self.peek()
            after = self.toks[self.i + 1] if nxt[0] == "num" else None
            if nxt[0] == "num" and after[1] != "^":
                self.take()
                return Const(-Fraction(nxt[1]))
            return Neg(self.factor())
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[1] == "-":
                self.take()
                sign = -1
            t = self.take()
            if t[0] != "num" or "." in t[1]:
                raise ParseError("exponent must be an integer", t[2])
            return Pow(base, sign * int(t[1]))
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Const(Fraction(text))
        if kind == "id":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            if text not in self.names:
                raise ParseError(f"unknown identifier {text!r}", pos)
            return Var(self.names[text])
        if text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos)


def parse(src: str, chart: Chart) -> Expr:
    """Parse ``src`` into an (unsimplified) expression tree over ``chart``."""
    return _Parser(src, {n: i for i, n in enumerate(chart.names)}).parse()


def to_string(e: Expr, names: Sequence[str] | None = None) -> str:
    """Render ``e`` so that ``parse`` rebuilds the same tree."""

    def name(i):
        return names[i] if names is not None else f"x{i}"

    def const(c: Fraction) -> str:
        if c.denominator == 1:
            return str(c.numerator)
        d = c.denominator
        while d % 2 == 0:
            d //= 2
        while d % 5 == 0:
            d //= 5
        if d == 1:
            s = format(c.numerator / c.denominator, ".17g")
            if Fraction(s) == c and "e" not in s:
                return s
        return f"({c.numerator}/{c.denominator})"

    def go(x: Expr) -> str:
        if isinstance(x, Const):
            return const(x.value)
        if isinstance(x, Var):
            return name(x.index)
        if isinstance(x, _Binary):
            left = go(x.left)
            right = go(x.right)
            if x.left.prec < x.prec:
                left = f"({left})"
            if x.right.prec <= x.prec:
                right = f"({right})"
            if x.prec == 1:
                return f"{left} {x.tag} {right}"
            return f"{left}{x.tag}{right}"
        if isinstance(x, Neg):
            a = x.arg
            inner = go(a)
            if isinstance(a, Const) and a.value >= 0:
                return f"-({inner})"
            if a.prec < Neg.prec:
                return f"-({inner})"
            return f"-{inner}"
        if isinstance(x, Pow):
            b = go(x.base)
            if not isinstance(x.base, (Var, Func)) and not (
                    isinstance(x.base, Const) and x.base.value >= 0 and x.base.value.denominator == 1):
                b = f"({b})"
            return f"{b}^{x.exponent}"
        return f"{x.name}({go(x.arg)})"

    return go(e)



# --- calculus ---

def diff(e: Expr, var: int) -> Expr:
    """Partial derivative with respect to chart variable ``var``."""
    memo: dict = {}

    def go(x: Expr) -> Expr:
        got = memo.get(id(x))
        if got is not None:
            return got[1]
        if isinstance(x, Const):
            out = ZERO
        elif isinstance(x, Var):
            out = ONE if x.index == var else ZERO
        elif isinstance(x, Add):
            out = add(go(x.left), go(x.right))
        elif isinstance(x, Sub):
            out = sub(go(x.left), go(x.right))
        elif isinstance(x, Mul):
            out = add(mul(go(x.left), x.right), mul(x.left, go(x.right)))
        elif isinstance(x, Div):
            du, dv = go(x.left), go(x.right)
            if is_const(dv, 0):
                out = div(du, x.right)
            else:
                out = div(sub(mul(du, x.right), mul(x.left, dv)), power(x.right, 2))
        elif isinstance(x, Neg):
            out = neg(go(x.arg))
        elif isinstance(x, Pow):
            k = x.exponent
            out = mul(mul(Const(k), power(x.base, k - 1)), go(x.base))
        else:
            du = go(x.arg)
            if x.name == "sqrt":
                out = div(du, mul(Const(2), x))
            elif x.name == "sin":
                out = mul(func("cos", x.arg), du)
            elif x.name == "cos":
                out = neg(mul(func("sin", x.arg), du))
            else:
                out = mul(x, du)
        memo[id(x)] = (x, out)
        return out

    return go(e)


def substitute(e: Expr, values: Sequence[Expr]) -> Expr:
    """Replace ``Var(i)`` by ``values[i]`` and re-fold constants."""
    memo: dict = {}

    def go(x: Expr) -> Expr:
        got = memo.get(id(x))
        if got is not None:
            return got[1]
        if isinstance(x, Const):
            out = x
        elif isinstance(x, Var):
            out = values[x.index]
        elif isinstance(x, Add):
            out = add(go(x.left), go(x.right))
        elif isinstance(x, Sub):
            out = sub(go(x.left), go(x.right))
        elif isinstance(x, Mul):
            out = mul(go(x.left), go(x.right))
        elif isinstance(x, Div):
            out = div(go(x.left), go(x.right))
        elif isinstance(x, Neg):
            out = neg(go(x.arg))
        elif isinstance(x, Pow):
            out = power(go(x.base), x.exponent)
        else:
            out = func(x.name, go(x.arg))
        memo[id(x)] = (x, out)
        return out

    return go(e)


def variables(e: Expr) -> set[int]:
    seen: set[int] = set()
    out: set[int] = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if id(x) in seen:
            continue
        seen.add(id(x))
        if isinstance(x, Var):
            out.add(x.index)
        elif isinstance(x, _Binary):
            stack += [x.left, x.right]
        elif isinstance(x, (Neg, Func)):
            stack.append(x.arg)
        elif isinstance(x, Pow):
            stack.append(x.base)
    return out


# --- evaluation ---

_PY_FUNCS = {"sqrt": "_m.sqrt", "sin": "_m.sin", "cos": "_m.cos", "exp": "_m.exp"}


@lru_cache(maxsize=4096)
def _compile(exprs: tuple[Expr, ...]):
    names: dict = {}
    lines: list[str] = []

    def ref(x: Expr) -> str:
        if isinstance(x, Const):
            return repr(float(x.value))
        if isinstance(x, Var):
            return f"x[{x.index}]"
        key = id(x)
        got = names.get(key)
        if got is not None:
            return got[1]
        if isinstance(x, _Binary):
            a, b = ref(x.left), ref(x.right)
            code = f"{a} {x.tag} {b}"
        elif isinstance(x, Neg):
            code = f"-{ref(x.arg)}"
        elif isinstance(x, Pow):
            code = f"{ref(x.base)} ** {x.exponent}"
        else:
            code = f"{_PY_FUNCS[x.name]}({ref(x.arg)})"
        name = f"t{len(names)}"
        lines.append(f"    {name} = {code}")
        names[key] = (x, name)
        return name

    outs = [ref(e) for e in exprs]
    src = "def _f(x):\n" + "\n".join(lines) + f"\n    return ({', '.join(outs)},)\n"
    ns: dict = {"_m": math}
    exec(src, ns)  # noqa: S102 - generated from a closed grammar
    return ns["_f"]


def compile_exprs(exprs: Sequence[Expr]):
    """Return ``f(point) -> tuple[float, ...]`` evaluating all ``exprs``.

    Shared subtrees are evaluated once.  Division by zero, sqrt of a
    negative number and overflow raise :class:`EvaluationError`.
    """
    f = _compile(tuple(exprs))

    def run(point):
        try:
            out = f(point)
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise EvaluationError(f"cannot evaluate expression ({exc})", point) from None
        for v in out:
            if isinstance(v, complex) or not math.isfinite(v):
                raise EvaluationError("non-finite value", point)
        return out

    return run


def evaluate(e: Expr, point: Sequence[float]) -> float:
    return compile_exprs((e,))(tuple(float(p) for p in point))[0]


# --- forms ---

@dataclass(frozen=True)
class OneForm:
    coeffs: tuple[Expr, ...]

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    @classmethod
    def of(cls, coeffs) -> "OneForm":
        return cls(tuple(as_expr(c) for c in coeffs))

    def __add__(self, other: "OneForm") -> "OneForm":
        return OneForm(tuple(add(a, b) for a, b in zip(self.coeffs, other.coeffs)))

    def scale(self, f) -> "OneForm":
        f = as_expr(f)
        return OneForm(tuple(mul(f, c) for c in self.coeffs))

    def __call__(self, vector: Sequence[Expr]) -> Expr:
        out = ZERO
        for c, v in zip(self.coeffs, vector):
            out = add(out, mul(c, as_expr(v)))
        return out

    def values(self, point) -> tuple[float, ...]:
        return compile_exprs(self.coeffs)(point)


@dataclass(frozen=True)
class TwoForm:
    """Coefficients of dx_i ^ dx_j for i < j, row-major over the pairs."""

    dim: int
    coeffs: tuple[Expr, ...]

    @staticmethod
    def pairs(dim: int) -> list[tuple[int, int]]:
        return [(i, j) for i in range(dim) for j in range(i + 1, dim)]

    def coeff(self, i: int, j: int) -> Expr:
        if i == j:
            return ZERO
        if i > j:
            return neg(self.coeff(j, i))
        k = i * self.dim - i * (i + 1) // 2 + (j - i - 1)
        return self.coeffs[k]

    def matrix(self, point) -> list[list[float]]:
        vals = compile_exprs(self.coeffs)(point) if self.coeffs else ()
        m = [[0.0] * self.dim for _ in range(self.dim)]
        for (i, j), v in zip(self.pairs(self.dim), vals):
            m[i][j] = v
            m[j][i] = -v
        return m

    def is_zero(self) -> bool:
        return all(is_const(simplify(c), 0) for c in self.coeffs)


def differential(f: Expr, dim: int) -> OneForm:
    return OneForm(tuple(diff(f, i) for i in range(dim)))


def exterior_d(w: OneForm) -> TwoForm:
    n = w.dim
    return TwoForm(n, tuple(sub(diff(w.coeffs[j], i), diff(w.coeffs[i], j))
                            for i, j in TwoForm.pairs(n)))


def wedge(a: OneForm, b: OneForm) -> TwoForm:
    n = a.dim
    return TwoForm(n, tuple(sub(mul(a.coeffs[i], b.coeffs[j]), mul(a.coeffs[j], b.coeffs[i]))
                            for i, j in TwoForm.pairs(n)))


def add_two_forms(a: TwoForm, b: TwoForm) -> TwoForm:
    return TwoForm(a.dim, tuple(add(x, y) for x, y in zip(a.coeffs, b.coeffs)))


def pullback(w: OneForm, mapping: Sequence[Expr], src_dim: int | None = None) -> OneForm:
    """Pull ``w`` back along ``mapping`` (target coordinates as expressions
    in the source chart variables)."""
    src_dim = len(mapping) if src_dim is None else src_dim
    subst = [substitute(c, mapping) for c in w.coeffs]
    out = []
    for i in range(src_dim):
        acc = ZERO
        for c, m in zip(subst, mapping):
            acc = add(acc, mul(c, diff(m, i)))
        out.append(acc)
    return OneForm(tuple(out))


def parse_one_form(src: str, chart: Chart) -> OneForm:
    """Parse e.g. ``"dz + x1*dy1"``; ``d<name>`` denotes the differential of a chart variable."""
    n = chart.dimension
    names = {nm: i for i, nm in enumerate(chart.names)}
    for i, nm in enumerate(chart.names):
        names.setdefault("d" + nm, n + i)
    e = _Parser(src, names).parse()
    coeffs = []
    for i in range(n):
        c = simplify(diff(e, n + i))
        if any(v >= n for v in variables(c)):
            raise ParseError("one-form is not linear in the differentials", 0)
        coeffs.append(c)
    rest = simplify(substitute(e, [Var(i) for i in range(n)] + [ZERO] * n))
    if not is_const(rest, 0):
        raise ParseError("one-form has a term without a differential", 0)
    return OneForm(tuple(coeffs))


# --- symbolic matrices (pivoting decided numerically at a reference point) ---

def inverse(m: Sequence[Sequence[Expr]], ref_point: Sequence[float]) -> list[list[Expr]]:
    """Gauss-Jordan inverse of a square expression matrix.

    Pivots are chosen by largest magnitude at ``ref_point``; the result is
    valid wherever those pivots stay nonzero (checked at evaluation time).
    """
    n = len(m)
    a = [[as_expr(x) for x in row] + [ONE if i == j else ZERO for j in range(n)]
         for i, row in enumerate(m)]
    pt = tuple(float(p) for p in ref_point)
    for col in range(n):
        vals = [abs(evaluate(a[r][col], pt)) for r in range(col, n)]
        best = max(range(len(vals)), key=vals.__getitem__) + col
        if vals[best - col] < 1e-12:
            raise ZeroDivisionError("matrix is singular at the reference point")
        a[col], a[best] = a[best], a[col]
        piv = a[col][col]
        a[col] = [div(x, piv) for x in a[col]]
        for r in range(n):
            if r != col and not is_const(a[r][col], 0):
                f = a[r][col]
                a[r] = [sub(x, mul(f, y)) for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]

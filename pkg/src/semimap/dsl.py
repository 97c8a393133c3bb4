"""Piecewise semi-algebraic map DSL: parsing, evaluation, symbolic Jacobians.

Grammar (whitespace-insensitive, `#` starts a line comment)::

    map <ident>(<var>{,<var>}) = (<expr>{,<expr>})
    expr   ::= ['-'] term {(+|-) term}
    term   ::= sfactor {(*|/) sfactor}
    sfactor ::= ['-'] factor
    factor ::= base [^ <uint>]
    base   ::= <number> | <var> | (expr) | sqrt(expr) | cbrt(expr)
             | abs(expr) | min(expr,expr) | max(expr,expr)

The non-C1 locus of a parsed map is over-approximated syntactically: the
argument of every abs/sqrt/cbrt occurrence and the difference of every
min/max pair become "guards"; the map may fail to be C1 only where some
guard vanishes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, DimensionMismatch, DomainError, ParseError

GUARD_TOL_DEFAULT = 1e-9

_LEAF_KINDS = ("const", "var")
_BINARY_KINDS = ("add", "sub", "mul", "div", "min", "max")
_UNARY_KINDS = ("sqrt", "cbrt", "abs")


class NotSmooth:
    """Sentinel returned by eval_jacobian when a guard is too close to zero."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NotSmooth"


NOT_SMOOTH = NotSmooth()


@dataclass(frozen=True)
class ExprNode:
    kind: str
    children: tuple = ()
    value: float | None = None
    var: int | None = None

    def __post_init__(self):
        if self.kind == "const":
            assert self.value is not None
        elif self.kind == "var":
            assert self.var is not None and self.var >= 0
        elif self.kind == "pow":
            assert self.value is not None and self.value == int(self.value) >= 0


def const(v) -> ExprNode:
    return ExprNode("const", value=float(v))


def vref(i) -> ExprNode:
    return ExprNode("var", var=int(i))


ZERO = const(0.0)
ONE = const(1.0)


def _is_const(e, v=None):
    return e.kind == "const" and (v is None or e.value == v)


def _fold(op, *nodes):
    """Constant-fold, but only when the result stays representable."""
    v = op(*(n.value for n in nodes))
    return const(v) if np.isfinite(v) else None


def add(a, b) -> ExprNode:
    if _is_const(a) and _is_const(b):
        folded = _fold(lambda p, q: p + q, a, b)
        if folded is not None:
            return folded
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return ExprNode("add", (a, b))


def sub(a, b) -> ExprNode:
    if _is_const(a) and _is_const(b):
        folded = _fold(lambda p, q: p - q, a, b)
        if folded is not None:
            return folded
    if _is_const(b, 0.0):
        return a
    return ExprNode("sub", (a, b))


def mul(a, b) -> ExprNode:
    if _is_const(a) and _is_const(b):
        folded = _fold(lambda p, q: p * q, a, b)
        if folded is not None:
            return folded
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return ExprNode("mul", (a, b))


def div(a, b) -> ExprNode:
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        folded = _fold(lambda p, q: p / q, a, b)
        if folded is not None:
            return folded
    return ExprNode("div", (a, b))


def ipow(a, k) -> ExprNode:
    k = int(k)
    if k < 0:
        raise ValueError("integer power exponent must be >= 0")
    if k == 0:
        return ONE
    if k == 1:
        return a
    if _is_const(a):
        folded = _fold(lambda p: p**k, a)
        if folded is not None:
            return folded
    return ExprNode("pow", (a,), value=float(k))


def sqrt(a) -> ExprNode:
    return ExprNode("sqrt", (a,))


def cbrt(a) -> ExprNode:
    return ExprNode("cbrt", (a,))


def absval(a) -> ExprNode:
    return ExprNode("abs", (a,))


def emin(a, b) -> ExprNode:
    return ExprNode("min", (a, b))


def emax(a, b) -> ExprNode:
    return ExprNode("max", (a, b))


def neg(a) -> ExprNode:
    return sub(ZERO, a)


@dataclass(frozen=True)
class MapDef:
    """A named mapping R^n -> R^m given by component expressions."""

    name: str
    arity: int
    components: tuple[ExprNode, ...]

    def __post_init__(self):
        if self.arity < 1:
            raise ArityError("arity must be >= 1")
        for comp in self.components:
            _check_vars(comp, self.arity)

    @property
    def n_out(self):
        return len(self.components)

    @property
    def is_square(self):
        return self.n_out == self.arity


@dataclass(frozen=True)
class JacobianDef:
    """Symbolic partial derivatives plus the guard expressions whose zero
    sets over-approximate the non-C1 locus of the underlying map."""

    arity: int
    entries: tuple[tuple[ExprNode, ...], ...]  # entries[i][j] = d comp_i / d x_j
    guards: tuple[ExprNode, ...]


def _check_vars(e: ExprNode, arity: int):
    if e.kind == "var":
        if e.var >= arity:
            raise ArityError(f"variable index {e.var} exceeds arity {arity}")
    for c in e.children:
        _check_vars(c, arity)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"""(?P<ws>[ \t\r]+)
      | (?P<comment>\#[^\n]*)
      | (?P<nl>\n)
      | (?P<number>\d+(\.\d+)?([eE][+-]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<sym>[()=,+\-*/^])""",
    re.VERBOSE,
)


def _tokenize(text):
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "nl":
            line += 1
            col = 1
        elif kind not in ("ws", "comment"):
            tokens.append((kind, tok, line, col))
            col += len(tok)
        else:
            col += len(tok)
        pos = m.end()
    tokens.append(("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.vars: dict[str, int] = {}

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message):
        _, tok, line, col = self.peek()
        shown = f", got {tok!r}" if tok else " at end of input"
        raise ParseError(message + shown, line, col)

    def expect(self, sym):
        kind, tok, _, _ = self.peek()
        if kind == "sym" and tok == sym:
            return self.next()
        self.fail(f"expected {sym!r}")

    def expect_ident(self):
        kind, tok, _, _ = self.peek()
        if kind == "ident":
            return self.next()[1]
        self.fail("expected identifier")

    def parse_map(self):
        head = self.expect_ident()
        if head != "map":
            self.fail("expected 'map' keyword")
        name = self.expect_ident()
        self.expect("(")
        while True:
            var = self.expect_ident()
            if var in self.vars:
                self.fail(f"duplicate variable {var!r}")
            self.vars[var] = len(self.vars)
            kind, tok, _, _ = self.peek()
            if kind == "sym" and tok == ",":
                self.next()
                continue
            break
        self.expect(")")
        self.expect("=")
        self.expect("(")
        components = [self.parse_expr()]
        while True:
            kind, tok, _, _ = self.peek()
            if kind == "sym" and tok == ",":
                self.next()
                components.append(self.parse_expr())
                continue
            break
        self.expect(")")
        kind, _, _, _ = self.peek()
        if kind != "eof":
            self.fail("trailing input after map definition")
        return MapDef(name, len(self.vars), tuple(components))

    def parse_expr(self):
        kind, tok, _, _ = self.peek()
        if kind == "sym" and tok == "-":
            self.next()
            node = neg(self.parse_term())
        else:
            node = self.parse_term()
        while True:
            kind, tok, _, _ = self.peek()
            if kind == "sym" and tok in "+-":
                self.next()
                rhs = self.parse_term()
                node = add(node, rhs) if tok == "+" else sub(node, rhs)
            else:
                return node

    def parse_term(self):
        node = self.parse_signed_factor()
        while True:
            kind, tok, _, _ = self.peek()
            if kind == "sym" and tok in "*/":
                self.next()
                rhs = self.parse_signed_factor()
                node = mul(node, rhs) if tok == "*" else div(node, rhs)
            else:
                return node

    def parse_signed_factor(self):
        kind, tok, _, _ = self.peek()
        if kind == "sym" and tok == "-":
            self.next()
            return neg(self.parse_signed_factor())
        return self.parse_factor()

    def parse_factor(self):
        node = self.parse_base()
        kind, tok, _, _ = self.peek()
        if kind == "sym" and tok == "^":
            self.next()
            kind, tok, _, _ = self.peek()
            if kind != "number" or not tok.isdigit():
                self.fail("expected unsigned integer exponent")
            self.next()
            node = ipow(node, int(tok))
        return node

    def parse_base(self):
        kind, tok, _, _ = self.peek()
        if kind == "number":
            self.next()
            return const(float(tok))
        if kind == "ident":
            if tok in ("sqrt", "cbrt", "abs"):
                self.next()
                self.expect("(")
                arg = self.parse_expr()
                self.expect(")")
                return ExprNode(tok, (arg,))
            if tok in ("min", "max"):
                self.next()
                self.expect("(")
                a = self.parse_expr()
                self.expect(",")
                b = self.parse_expr()
                self.expect(")")
                return ExprNode(tok, (a, b))
            if tok in self.vars:
                self.next()
                return vref(self.vars[tok])
            self.fail(f"unknown identifier {tok!r}")
        if kind == "sym" and tok == "(":
            self.next()
            node = self.parse_expr()
            self.expect(")")
            return node
        self.fail("expected expression")


def parse_map(text: str) -> MapDef:
    """Parse a single `map ...` definition from DSL source."""
    return _Parser(text).parse_map()


# ---------------------------------------------------------------------------
# Printing (canonical, fully parenthesized; round-trips through parse_map)


def _fmt_const(v):
    if v < 0:
        return f"(0 - {_fmt_const(-v)})"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def print_expr(e: ExprNode) -> str:
    if e.kind == "const":
        return _fmt_const(e.value)
    if e.kind == "var":
        return f"x{e.var + 1}"
    if e.kind == "pow":
        return f"({print_expr(e.children[0])}^{int(e.value)})"
    if e.kind in _UNARY_KINDS:
        return f"{e.kind}({print_expr(e.children[0])})"
    if e.kind in ("min", "max"):
        a, b = e.children
        return f"{e.kind}({print_expr(a)}, {print_expr(b)})"
    op = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[e.kind]
    a, b = e.children
    return f"({print_expr(a)} {op} {print_expr(b)})"


def print_map(m: MapDef) -> str:
    args = ", ".join(f"x{i + 1}" for i in range(m.arity))
    body = ", ".join(print_expr(c) for c in m.components)
    return f"map {m.name}({args}) = ({body})"


# ---------------------------------------------------------------------------
# Evaluation


def eval_expr(e: ExprNode, x, strict=True):
    """Evaluate over points `x` of shape (..., n); returns shape (...).

    strict=True raises DomainError on sqrt-of-negative / division-by-zero;
    strict=False lets nan/inf propagate (used by batched numeric search).
    """
    x = np.asarray(x, dtype=float)
    if e.kind == "const":
        return np.full(x.shape[:-1], e.value)
    if e.kind == "var":
        return x[..., e.var]
    if e.kind == "pow":
        with np.errstate(over="ignore", invalid="ignore"):
            return eval_expr(e.children[0], x, strict) ** int(e.value)
    if e.kind == "sqrt":
        a = eval_expr(e.children[0], x, strict)
        if strict and np.any(a < 0):
            raise DomainError("sqrt of negative value")
        with np.errstate(invalid="ignore"):
            return np.sqrt(a)
    if e.kind == "cbrt":
        return np.cbrt(eval_expr(e.children[0], x, strict))
    if e.kind == "abs":
        return np.abs(eval_expr(e.children[0], x, strict))
    a = eval_expr(e.children[0], x, strict)
    b = eval_expr(e.children[1], x, strict)
    with np.errstate(over="ignore", invalid="ignore"):
        if e.kind == "add":
            return a + b
        if e.kind == "sub":
            return a - b
        if e.kind == "mul":
            return a * b
    if e.kind == "div":
        if strict and np.any(b == 0):
            raise DomainError("division by zero")
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return a / b
    if e.kind == "min":
        return np.minimum(a, b)
    if e.kind == "max":
        return np.maximum(a, b)
    raise AssertionError(f"unknown node kind {e.kind}")


def eval_map(m: MapDef, x, strict=True):
    """Component-wise evaluation at `x` of shape (..., arity) -> (..., n_out)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m.arity:
        raise DimensionMismatch(f"point has length {x.shape[-1]}, map arity {m.arity}")
    out = np.empty(x.shape[:-1] + (m.n_out,))
    for i, comp in enumerate(m.components):
        try:
            out[..., i] = eval_expr(comp, x, strict)
        except DomainError as exc:
            raise DomainError(str(exc), component=i) from None
    return out


# ---------------------------------------------------------------------------
# Differentiation


def derivative(e: ExprNode, j: int) -> ExprNode:
    """Symbolic partial derivative d e / d x_j (formal off the guard set)."""
    if e.kind == "const":
        return ZERO
    if e.kind == "var":
        return ONE if e.var == j else ZERO
    if e.kind == "add":
        return add(derivative(e.children[0], j), derivative(e.children[1], j))
    if e.kind == "sub":
        return sub(derivative(e.children[0], j), derivative(e.children[1], j))
    if e.kind == "mul":
        a, b = e.children
        return add(mul(derivative(a, j), b), mul(a, derivative(b, j)))
    if e.kind == "div":
        a, b = e.children
        num = sub(mul(derivative(a, j), b), mul(a, derivative(b, j)))
        return div(num, ipow(b, 2))
    if e.kind == "pow":
        (a,) = e.children
        k = int(e.value)
        return mul(mul(const(k), ipow(a, k - 1)), derivative(a, j))
    if e.kind == "sqrt":
        (a,) = e.children
        return div(derivative(a, j), mul(const(2.0), sqrt(a)))
    if e.kind == "cbrt":
        (a,) = e.children
        return div(derivative(a, j), mul(const(3.0), ipow(cbrt(a), 2)))
    if e.kind == "abs":
        (a,) = e.children
        da = derivative(a, j)
        # d|a| = sign(a) da, with sign(a) written as a/|a|
        return div(mul(a, da), absval(a))
    if e.kind in ("min", "max"):
        # min(u,v) = (u+v-|u-v|)/2, max(u,v) = (u+v+|u-v|)/2
        u, v = e.children
        du, dv = derivative(u, j), derivative(v, j)
        w = sub(u, v)
        signed = div(mul(w, sub(du, dv)), absval(w))
        inner = sub(add(du, dv), signed) if e.kind == "min" else add(add(du, dv), signed)
        return div(inner, const(2.0))
    raise AssertionError(f"unknown node kind {e.kind}")


def collect_guards(e: ExprNode, acc):
    """Guard expressions for one component: args of abs/sqrt/cbrt, tie
    differences of min/max. Constant-nonzero guards are dropped."""
    if e.kind in _UNARY_KINDS:
        g = e.children[0]
        if not (_is_const(g) and g.value != 0.0):
            acc.append(g)
    elif e.kind in ("min", "max"):
        g = sub(e.children[0], e.children[1])
        if not (_is_const(g) and g.value != 0.0):
            acc.append(g)
    for c in e.children:
        collect_guards(c, acc)
    return acc


def differentiate(m: MapDef) -> JacobianDef:
    """Symbolic Jacobian of a square map plus non-smoothness guards."""
    if not m.is_square:
        raise ArityError("differentiate expects a square map")
    entries = tuple(
        tuple(derivative(comp, j) for j in range(m.arity)) for comp in m.components
    )
    guards = []
    for comp in m.components:
        collect_guards(comp, guards)
    seen, unique = set(), []
    for g in guards:
        if g not in seen:
            seen.add(g)
            unique.append(g)
    return JacobianDef(m.arity, entries, tuple(unique))


def partial_jacobian(m: MapDef, var_indices) -> JacobianDef:
    """Jacobian of the components with respect to a subset of variables
    (used by the implicit-function solver; need not be square in the full
    variable set, but len(components) must equal len(var_indices))."""
    var_indices = list(var_indices)
    if len(var_indices) != m.n_out:
        raise ArityError("partial_jacobian needs as many variables as components")
    entries = tuple(
        tuple(derivative(comp, j) for j in var_indices) for comp in m.components
    )
    guards = []
    for comp in m.components:
        collect_guards(comp, guards)
    seen, unique = set(), []
    for g in guards:
        if g not in seen:
            seen.add(g)
            unique.append(g)
    return JacobianDef(m.arity, entries, tuple(unique))


def guard_values(j: JacobianDef, x, strict=False):
    """Stack of |guard_k(x)| values, shape (..., n_guards); empty -> +inf."""
    x = np.asarray(x, dtype=float)
    if not j.guards:
        return np.full(x.shape[:-1] + (1,), np.inf)
    vals = [np.abs(eval_expr(g, x, strict)) for g in j.guards]
    return np.stack(np.broadcast_arrays(*vals), axis=-1) if len(vals) > 1 else vals[0][..., None]


def eval_jacobian(j: JacobianDef, x, guard_tol=GUARD_TOL_DEFAULT):
    """Jacobian matrix at a single point, or NOT_SMOOTH near a guard zero."""
    x = np.asarray(x, dtype=float)
    if guard_tol <= 0:
        raise ValueError("guard_tol must be > 0")
    if np.any(guard_values(j, x) <= guard_tol):
        return NOT_SMOOTH
    p = len(j.entries)
    q = len(j.entries[0])
    out = np.empty((p, q))
    for a in range(p):
        for b in range(q):
            out[a, b] = eval_expr(j.entries[a][b], x, strict=True)
    return out


def eval_jacobian_batch(j: JacobianDef, X, guard_tol=GUARD_TOL_DEFAULT):
    """Jacobians at points X of shape (m, n): returns (mats, offguard_mask).

    mats has shape (m, p, q); rows where the mask is False contain values
    computed formally (possibly inf/nan) and must not be trusted.
    """
    X = np.asarray(X, dtype=float)
    mask = np.all(guard_values(j, X) > guard_tol, axis=-1)
    p = len(j.entries)
    q = len(j.entries[0])
    out = np.empty(X.shape[:-1] + (p, q))
    for a in range(p):
        for b in range(q):
            out[..., a, b] = eval_expr(j.entries[a][b], X, strict=False)
    mask = mask & np.all(np.isfinite(out), axis=(-2, -1))
    return out, mask

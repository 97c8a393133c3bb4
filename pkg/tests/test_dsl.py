import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semimap import dsl
from semimap.errors import ArityError, DimensionMismatch, DomainError, ParseError

# random expression ASTs over two variables, kept shallow so evaluation
# stays finite often enough


def exprs(arity=2):
    leaves = st.one_of(
        st.integers(0, arity - 1).map(dsl.vref),
        st.floats(-3, 3, allow_nan=False).map(dsl.const),
    )

    def extend(children):
        unary = st.one_of(
            children.map(dsl.sqrt),
            children.map(dsl.cbrt),
            children.map(dsl.absval),
            children.map(dsl.neg),
        )
        binary = st.one_of(
            st.tuples(children, children).map(lambda t: dsl.add(*t)),
            st.tuples(children, children).map(lambda t: dsl.sub(*t)),
            st.tuples(children, children).map(lambda t: dsl.mul(*t)),
            st.tuples(children, children).map(lambda t: dsl.div(*t)),
            st.tuples(children, children).map(lambda t: dsl.emin(*t)),
            st.tuples(children, children).map(lambda t: dsl.emax(*t)),
            st.tuples(children, st.integers(2, 4)).map(lambda t: dsl.ipow(*t)),
        )
        return st.one_of(unary, binary)

    return st.recursive(leaves, extend, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(exprs(), st.integers(0, 10))
def test_print_parse_round_trip(e, seed):
    m = dsl.MapDef("t", 2, (e,))
    m2 = dsl.parse_map(dsl.print_map(m))
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, size=(16, 2))
    a = dsl.eval_map(m, x, strict=False)
    b = dsl.eval_map(m2, x, strict=False)
    ok = np.isfinite(a)
    assert np.array_equal(np.isfinite(b), ok)
    assert np.allclose(a[ok], b[ok], rtol=0, atol=0)


@settings(max_examples=150, deadline=None)
@given(exprs(), st.integers(0, 10), st.integers(0, 1))
def test_derivative_matches_central_difference(e, seed, j):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, size=(64, 2))
    g = dsl.collect_guards(e, [])
    if g:
        gv = np.stack([dsl.eval_expr(u, x, strict=False) for u in g])
        x = x[np.all(np.abs(gv) > 1e-3, axis=0)]
    if len(x) == 0:
        return
    de = dsl.derivative(e, j)
    h = 1e-6
    xp, xm = x.copy(), x.copy()
    xp[:, j] += h
    xm[:, j] -= h
    with np.errstate(all="ignore"):
        fd = (dsl.eval_expr(e, xp, strict=False)
              - dsl.eval_expr(e, xm, strict=False)) / (2 * h)
        an = dsl.eval_expr(de, x, strict=False)
    ok = np.isfinite(fd) & np.isfinite(an) & (np.abs(fd) < 1e6)
    if not np.any(ok):
        return
    assert np.allclose(an[ok], fd[ok], rtol=1e-5, atol=1e-5)


def test_guard_collection_fixtures():
    m = dsl.parse_map("map g(x1, x2) = (abs(x1) + sqrt(x2), min(x1, x2))")
    jd = dsl.differentiate(m)
    printed = [dsl.print_expr(g) for g in jd.guards]
    assert any("x1" in p for p in printed)  # abs argument
    assert any("x2" in p for p in printed)  # sqrt argument
    assert any("-" in p for p in printed)  # min tie x1 - x2
    m2 = dsl.parse_map("map s(x1) = (x1 * x1)")
    assert dsl.differentiate(m2).guards == ()


def test_jacobian_returns_not_smooth_on_guard():
    m = dsl.parse_map("map a(x1, x2) = (abs(x1), x2)")
    jd = dsl.differentiate(m)
    assert dsl.eval_jacobian(jd, [0.0, 1.0]) is dsl.NOT_SMOOTH
    J = dsl.eval_jacobian(jd, [0.5, 1.0])
    assert np.allclose(J, np.eye(2))
    J = dsl.eval_jacobian(jd, [-0.5, 1.0])
    assert np.allclose(J, np.diag([-1.0, 1.0]))


def test_parse_errors_carry_position():
    with pytest.raises(ParseError) as exc:
        dsl.parse_map("map f(x1) = (x1 +)")
    assert exc.value.line == 1 and exc.value.col > 0
    with pytest.raises(ParseError):
        dsl.parse_map("map f(x1) = (y1)")
    with pytest.raises(ArityError):
        dsl.differentiate(dsl.parse_map("map f(x1) = (x1, x1)"))  # not square


def test_strict_domain_error():
    m = dsl.parse_map("map r(x1) = (sqrt(x1))")
    with pytest.raises(DomainError):
        dsl.eval_map(m, [[-1.0]], strict=True)
    out = dsl.eval_map(m, [[-1.0]], strict=False)
    assert np.isnan(out[0, 0])


def test_dimension_mismatch():
    m = dsl.parse_map("map f(x1, x2) = (x1, x2)")
    with pytest.raises(DimensionMismatch):
        dsl.eval_map(m, [[1.0, 2.0, 3.0]])


def test_batched_shapes():
    m = dsl.parse_map("map f(x1, x2) = (x1 + x2, x1 * x2)")
    x = np.zeros((5, 7, 2))
    assert dsl.eval_map(m, x).shape == (5, 7, 2)


def test_cbrt_negative():
    m = dsl.parse_map("map c(x1) = (cbrt(x1))")
    assert dsl.eval_map(m, [[-8.0]])[0, 0] == pytest.approx(-2.0)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algebrokit.expr import (
    ArityError,
    DomainError,
    ExprSyntaxError,
    UndeclaredVariableError,
    constant,
    derivative_field,
    parse_expr,
    partial,
    restrict,
)

VARS = ("x1", "x2", "x3")


def test_basic_arithmetic():
    assert parse_expr("x1*x2 + 3", ("x1", "x2"))([2.0, 5.0]) == 13.0


def test_unary_minus_binds_looser_than_power():
    assert parse_expr("-x1^2", ("x1",))([3.0]) == -9.0


def test_power_is_left_associative():
    assert parse_expr("2^3^2", ("x1",))([0.0]) == 64.0
    assert parse_expr("2**3", ("x1",))([0.0]) == 8.0


def test_functions_and_pi():
    f = parse_expr("sin(pi/2) + cos(0) + exp(0) + log(1) + sqrt(4) + tanh(0)", ("x1",))
    assert f([0.0]) == pytest.approx(5.0, abs=1e-15)


def test_syntax_error_reports_position():
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("x1 + * 2", ("x1",))
    assert err.value.position == 5


def test_undeclared_variable():
    with pytest.raises(UndeclaredVariableError):
        parse_expr("x1 + y", ("x1",))


def test_wrong_arity():
    with pytest.raises(ArityError):
        parse_expr("sin(x1, x1)", ("x1",))


@pytest.mark.parametrize("source, point", [("1/x1", [0.0]), ("log(x1)", [-1.0]), ("sqrt(x1)", [-4.0]),
                                           ("x1^(-1)", [0.0])])
def test_domain_errors(source, point):
    with pytest.raises(DomainError):
        parse_expr(source, ("x1",))(point)


def test_constant_folding_flags():
    assert constant(0.0, VARS).is_zero
    assert parse_expr("2*3 - 6", VARS).is_zero
    assert not parse_expr("x1 - x1", VARS).is_constant


def test_evaluate_many_matches_pointwise():
    f = parse_expr("x1*sin(x2) - x3^3/(1 + x1^2)", VARS)
    pts = np.random.default_rng(0).uniform(-1, 1, (20, 3))
    batch = f.evaluate_many(pts)
    assert np.array_equal(batch, [f(p) for p in pts])


_atoms = st.sampled_from(["x1", "x2", "x3", "1", "2.5", "pi"])


@st.composite
def expressions(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(_atoms)
    kind = draw(st.sampled_from(["bin", "neg", "call", "pow"]))
    if kind == "bin":
        op = draw(st.sampled_from(["+", "-", "*"]))
        return f"({draw(expressions(depth - 1))}) {op} ({draw(expressions(depth - 1))})"
    if kind == "neg":
        return f"-({draw(expressions(depth - 1))})"
    if kind == "pow":
        return f"({draw(expressions(depth - 1))})^{draw(st.integers(0, 3))}"
    fn = draw(st.sampled_from(["sin", "cos", "tanh"]))
    return f"{fn}({draw(expressions(depth - 1))})"


@settings(max_examples=60, deadline=None)
@given(expressions())
def test_source_roundtrip_is_exact(source):
    f = parse_expr(source, VARS)
    g = parse_expr(f.to_source(), VARS)
    pts = np.random.default_rng(1).uniform(-2, 2, (100, 3))
    assert np.array_equal(f.evaluate_many(pts), g.evaluate_many(pts))


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-1, 1), st.floats(-1, 1))
def test_partial_is_linear(a, b, x, y):
    f = parse_expr("sin(x1)*x2", ("x1", "x2"))
    g = parse_expr("x1^3 - x2", ("x1", "x2"))
    combo = constant(a, f.variables) * f + constant(b, f.variables) * g
    lhs = partial(combo, 0, [x, y])
    rhs = a * partial(f, 0, [x, y]) + b * partial(g, 0, [x, y])
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_stencil_is_fourth_order():
    f = parse_expr("exp(sin(x1))", ("x1",))
    x = 0.3
    exact = math.cos(x) * math.exp(math.sin(x))
    e1 = abs(partial(f, 0, [x], step=1e-2) - exact)
    e2 = abs(partial(f, 0, [x], step=5e-3) - exact)
    assert 10 <= e1 / e2 <= 22


def test_derivative_field_and_restrict():
    f = parse_expr("x1^2*x2 + x3", VARS)
    d = derivative_field(f, 0)
    assert d([1.5, 2.0, 0.0]) == pytest.approx(6.0, abs=1e-10)
    # derivatives along the fixed coordinate are still ambient derivatives
    r = restrict(derivative_field(f, 1), {"x2": 0.0}, ("x1", "x3"))
    assert r([3.0, 7.0]) == pytest.approx(9.0, abs=1e-10)


def test_field_arithmetic_drops_trivial_terms():
    f = parse_expr("x1", VARS)
    assert (f + constant(0.0, VARS)).to_source() == f.to_source()
    assert (constant(0.0, VARS) * f).is_zero

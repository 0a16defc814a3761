import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algebrokit.algebroid import (
    AntisymmetryError,
    JacobiError,
    algebroid_differential,
    anchor_apply,
    basis_section,
    bracket_sections,
    check_axioms,
    lie_algebra,
    make_algebroid,
    section,
    sl2,
    so3,
    tangent_algebroid,
    zero_algebroid,
)
from algebrokit.expr import parse_expr


def corrupted_so3(entry):
    """so(3) with f^{12}_sigma replaced by ``entry`` (antisymmetry kept)."""
    s = [[["0"] * 3 for _ in range(3)] for _ in range(3)]
    s[1][2][0], s[2][1][0] = "1", "-1"
    s[2][0][1], s[0][2][1] = "1", "-1"
    sigma, expr = entry
    s[0][1][sigma], s[1][0][sigma] = expr, f"-({expr})"
    if sigma != 2:
        s[0][1][2], s[1][0][2] = "1", "-1"
    return make_algebroid(1, 3, [["0"]] * 3, s, [[-1, 1]])


@pytest.mark.parametrize("A", [tangent_algebroid(3), so3(), sl2(), zero_algebroid(2, 3)],
                         ids=["T3", "so3", "sl2", "zero23"])
def test_golden_algebroids_pass(A):
    rep = check_axioms(A)
    assert rep.passed, str(rep)


def test_corrupted_structure_fails_jacobi():
    rep = check_axioms(corrupted_so3((0, "b1")))
    assert not rep.passed
    assert rep["jacobi"] > 0.5


def test_point_dependent_so3_scaling_is_still_an_algebroid():
    # f^{12}_3 = 1 + b1 with zero anchor is a bundle of Lie algebras
    assert check_axioms(corrupted_so3((2, "1 + b1"))).passed


def test_lie_algebra_rejects_bad_constants():
    c = np.zeros((2, 2, 2))
    c[0, 1, 0] = 1.0
    with pytest.raises(AntisymmetryError):
        lie_algebra(c)
    c = np.zeros((3, 3, 3))
    c[0, 1, 2], c[1, 0, 2] = 1, -1
    c[1, 2, 2], c[2, 1, 2] = 1, -1
    c[0, 2, 0], c[2, 0, 0] = 1, -1
    with pytest.raises(JacobiError):
        lie_algebra(c)


def test_nonantisymmetric_chart_rejected():
    with pytest.raises(AntisymmetryError):
        make_algebroid(1, 2, [["0"], ["0"]], [[["0", "0"], ["1", "0"]], [["1", "0"], ["0", "0"]]], [[-1, 1]])


def test_anchor_morphism_failure_detected():
    # [e1, e2] = e1 with rho(e1) = d/db1 and rho(e2) = 0
    A = make_algebroid(1, 2, [["1"], ["0"]], [[["0", "0"], ["1", "0"]], [["-1", "0"], ["0", "0"]]], [[-1, 1]])
    rep = check_axioms(A)
    assert rep.residuals["anchor_morphism"].value > 0.5


def test_bracket_of_tangent_vector_fields():
    A = tangent_algebroid(2)
    X = section(A, ["b2", "0"])
    Y = section(A, ["0", "b1"])
    # [b2 d1, b1 d2] = b2 d2 - b1 d1
    val = bracket_sections(A, X, Y, [0.3, -0.7])
    assert np.allclose(val, [-0.3, -0.7], atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_bracket_is_antisymmetric(u, v):
    A = tangent_algebroid(3)
    X = section(A, [f"{u[0]}*b2", f"sin(b3)*{u[1]}", f"{u[2]}"])
    Y = section(A, [f"{v[0]}*b1*b3", f"{v[1]}", f"cos(b1)*{v[2]}"])
    p = [0.1, 0.2, -0.3]
    assert np.allclose(bracket_sections(A, X, Y, p), -bracket_sections(A, Y, X, p), atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_leibniz_rule(x, y):
    A = tangent_algebroid(2)
    X = section(A, ["b2", "1"])
    Y = section(A, ["b1^2", "b2"])
    f = "exp(b1)*cos(b2)"
    fY = section(A, [f"({f})*(b1^2)", f"({f})*b2"])
    p = np.array([x, y])
    fv = parse_expr(f, A.variables)(p)
    df = algebroid_differential(A, parse_expr(f, A.variables), p)
    rho_x_f = float(np.dot(X.values(p)[0], df))
    expected = fv * bracket_sections(A, X, Y, p) + rho_x_f * Y.values(p)[0]
    assert np.allclose(bracket_sections(A, X, fY, p), expected, atol=1e-8)


def test_differential_of_constant_is_zero():
    A = tangent_algebroid(2)
    assert np.array_equal(algebroid_differential(A, parse_expr("3", A.variables), [0.1, 0.2]), [0.0, 0.0])


def test_differential_matches_cartan_on_tangent_bundle():
    A = tangent_algebroid(2)
    alpha = section(A, ["b1*b2", "sin(b1)"])
    X = section(A, ["b2", "1"])
    Y = section(A, ["b1^2", "b2"])
    rng = np.random.default_rng(4)
    for p in rng.uniform(-1, 1, (5, 2)):
        b1, b2 = p
        # classical X(alpha(Y)) - Y(alpha(X)) - alpha([X, Y]) for these fields, by hand
        aY = lambda q: q[0] * q[1] * q[0] ** 2 + np.sin(q[0]) * q[1]  # noqa: E731
        aX = lambda q: q[0] * q[1] * q[1] + np.sin(q[0])  # noqa: E731
        h = 1e-5

        def d(g, v):
            return (g(p + h * v) - g(p - h * v)) / (2 * h)

        xv, yv = np.array([b2, 1.0]), np.array([b1**2, b2])
        br = bracket_sections(A, X, Y, p)
        classical = d(aY, xv) - d(aX, yv) - np.dot([b1 * b2, np.sin(b1)], br)
        assert algebroid_differential(A, alpha, p, X, Y) == pytest.approx(classical, abs=1e-8)


def test_differential_squares_to_zero_on_functions():
    A = tangent_algebroid(2)
    f = parse_expr("exp(b1)*b2^2", A.variables)
    df = section(A, ["exp(b1)*b2^2", "2*exp(b1)*b2"])
    X, Y = section(A, ["b2", "b1"]), section(A, ["1", "b1*b2"])
    assert algebroid_differential(A, df, [0.2, 0.4], X, Y) == pytest.approx(0.0, abs=1e-8)
    assert np.allclose(algebroid_differential(A, f, [0.2, 0.4]), df.values([0.2, 0.4])[0], atol=1e-9)


def test_chevalley_eilenberg_sign_on_so3():
    A = so3()
    e3_dual = section(A, ["0", "0", "1"])
    val = algebroid_differential(A, e3_dual, [0.0], basis_section(A, 0), basis_section(A, 1))
    assert val == pytest.approx(-1.0, abs=1e-12)


def test_anchor_apply_on_tangent_is_identity():
    A = tangent_algebroid(3)
    X = section(A, ["1", "b1", "b2*b3"])
    assert np.allclose(anchor_apply(A, X, [0.5, 0.2, -0.4]), [1.0, 0.5, -0.08])


def test_flagged_points_on_domain_errors():
    A = corrupted_so3((2, "1/b1"))
    rep = check_axioms(A, sample_points=np.array([[0.5], [0.0], [0.2]]))
    assert rep.flagged_points == [[0.0]]
    assert rep.passed

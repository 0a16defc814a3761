import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algebrokit.algebroid import check_axioms, so3, sl2, tangent_algebroid
from algebrokit.expr import parse_expr
from algebrokit.poisson import (
    CotangentPoint,
    PoissonError,
    bracket_field,
    canonical_form,
    check_jacobi,
    cotangent_algebroid,
    dualize,
    from_twisted_symplectic,
    make_poisson,
    pathspace_twist_form,
    poisson_bracket,
    twisted_cotangent_form,
    twisted_koszul_bracket,
    untwisted,
    with_zero_twist,
)

X4 = ("x1", "x2", "x3", "x4")
BOX4 = [[-0.5, 0.5]] * 4


def oracle():
    return from_twisted_symplectic({"x1 x2": "1", "x3 x4": "1 + x1"}, X4, BOX4)


def oracle_explicit():
    return make_poisson(X4, {"x1 x2": "1", "x3 x4": "1/(1 + x1)"}, BOX4, twist={"x1 x3 x4": "1"})


def canonical_r4():
    return make_poisson(X4, {"x1 x3": "1", "x2 x4": "1"}, [[-1, 1]] * 4)


def test_canonical_r4_is_poisson():
    rep = check_jacobi(canonical_r4())
    assert rep.passed and rep["jacobi"] == 0.0


def test_linear_so3_dual_is_poisson():
    rep = check_jacobi(dualize(so3()))
    assert rep["jacobi"] <= 1e-9


def test_nonpoisson_bivector_fails_jacobi():
    # J^{123} = x1 + x2 + x3
    P = make_poisson(("x1", "x2", "x3"), {"x1 x2": "x1", "x2 x3": "x2", "x3 x1": "x3"}, [[-1, 1]] * 3)
    assert not check_jacobi(P).passed


def test_form_oracle_matches_explicit_chart():
    P, Q = oracle(), oracle_explicit()
    pts = P.samples(20)
    assert np.allclose(P.pi_at(pts), Q.pi_at(pts), atol=1e-12)
    assert np.allclose(P.phi_at(pts), Q.phi_at(pts), atol=1e-9)


@pytest.mark.parametrize("build", [oracle, oracle_explicit], ids=["form", "explicit"])
def test_oracle_is_twisted_but_not_untwisted_poisson(build):
    P = build()
    rep = check_jacobi(P)
    assert rep["twisted_jacobi"] <= 1e-7
    assert rep.passed
    assert not check_jacobi(untwisted(P)).passed


def test_twisted_cotangent_algebroid_passes_axioms():
    rep = check_axioms(cotangent_algebroid(oracle_explicit()), tol=1e-6)
    assert rep.passed, str(rep)


def test_cotangent_algebroid_refuses_failing_twisted_chart():
    bad = make_poisson(X4, {"x1 x2": "1", "x3 x4": "1/(1 + x1)"}, BOX4, twist={"x2 x3 x4": "1"})
    with pytest.raises(PoissonError):
        cotangent_algebroid(bad)


def test_bivector_must_be_antisymmetric():
    full = [["0", "1", "0"], ["1", "0", "0"], ["0", "0", "0"]]
    with pytest.raises(PoissonError):
        make_poisson(("x1", "x2", "x3"), full, [[-1, 1]] * 3)


def test_twist_must_be_closed():
    with pytest.raises(PoissonError):
        make_poisson(X4, {"x1 x2": "1"}, BOX4, twist={"x1 x2 x3": "x4"})


def test_dual_bracket_table_and_casimir():
    A = so3()
    P = dualize(A)
    v = P.variables
    rng = np.random.default_rng(11)
    pts = rng.uniform(-1, 1, (100, P.m))
    alpha = [parse_expr(a, v) for a in v[1:]]
    for mu in range(3):
        assert np.allclose(poisson_bracket(P, alpha[mu], parse_expr("b1", v), pts), 0.0, atol=1e-8)
        for nu in range(3):
            expected = pts[:, 1:] @ A.structure_at(pts[:, :1])[0, mu, nu]
            assert np.allclose(poisson_bracket(P, alpha[mu], alpha[nu], pts), expected, atol=1e-8)
    norm2 = parse_expr("alpha1^2 + alpha2^2 + alpha3^2", v)
    for a in alpha:
        assert np.max(np.abs(poisson_bracket(P, norm2, a, pts))) <= 1e-8


def test_dual_of_tangent_bundle_has_anchor_block():
    P = dualize(tangent_algebroid(2))
    pts = P.samples(10)
    pi = P.pi_at(pts)
    assert np.allclose(pi[:, 2:, :2], np.eye(2))
    assert np.allclose(pi[:, :2, :2], 0.0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-0.4, 0.4), min_size=4, max_size=4))
def test_zero_twist_operations_match_untwisted(x):
    P = oracle_explicit()
    Z, U = with_zero_twist(P), untwisted(P)
    f = parse_expr("x1*x3 + sin(x2)", X4)
    g = parse_expr("x4^2 - x1*x2", X4)
    assert np.allclose(twisted_koszul_bracket(Z, f, g, x), twisted_koszul_bracket(U, f, g, x), atol=1e-12)
    p = np.array([0.3, -0.2, 0.5, 0.1])
    wz = twisted_cotangent_form(Z, CotangentPoint(np.array(x), p))
    wu = twisted_cotangent_form(U, CotangentPoint(np.array(x), p))
    assert np.allclose(wz, wu, atol=1e-12)
    assert abs(check_jacobi(Z)["twisted_jacobi"] - check_jacobi(U)["jacobi"]) <= 1e-12


def test_koszul_bracket_of_exact_forms_untwisted():
    P = canonical_r4()
    f = parse_expr("x1*x2", X4)
    g = parse_expr("x3 + x4^2", X4)
    x = [0.2, 0.3, -0.1, 0.4]
    # {f, g} = x2 + 2 x1 x4
    assert np.allclose(twisted_koszul_bracket(P, f, g, x), [0.8, 1.0, 0.0, 0.4], atol=1e-8)
    assert bracket_field(P, f, g)(x) == pytest.approx(0.3 + 2 * 0.2 * 0.4, abs=1e-9)


def test_twisted_cotangent_form_is_antisymmetric_and_nondegenerate():
    P = oracle_explicit()
    w = twisted_cotangent_form(P, CotangentPoint(np.array([0.1, 0.2, 0.0, -0.3]), np.array([0.5, 1.0, -1.0, 0.2])))
    assert np.allclose(w, -w.T)
    assert abs(np.linalg.det(w)) > 0.1
    assert not np.allclose(w, canonical_form(4))


def test_pathspace_form_without_twist_is_canonical_pairing():
    P = canonical_r4()
    t = np.linspace(0, 1, 201)
    K = len(t)
    X = np.zeros((K, 4))
    eta = np.zeros((K, 4))
    xi1, e1 = np.ones((K, 4)), np.zeros((K, 4))
    xi2, e2 = np.zeros((K, 4)), np.tile([1.0, 2.0, 0.0, 0.0], (K, 1))
    assert pathspace_twist_form(P, t, X, eta, xi1, e1, xi2, e2) == pytest.approx(-3.0)
    with pytest.raises(PoissonError):
        pathspace_twist_form(P, t[:-1], X, eta, xi1, e1, xi2, e2)


def test_sl2_dual_is_poisson():
    assert check_jacobi(dualize(sl2()))["jacobi"] <= 1e-9

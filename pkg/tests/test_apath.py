import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algebrokit.algebroid import so3, tangent_algebroid
from algebrokit.apath import (
    APath,
    APathError,
    ChartExitError,
    DriftError,
    FlowHistory,
    HomotopyDriver,
    bump_profile,
    coiso_restricted_flow,
    column_names,
    concat,
    conormal_part,
    constant_path,
    constraint_residual,
    diff2,
    diff4,
    embed_conormal_path,
    format_path,
    full_flow,
    homotopy_flow,
    integrate_apath,
    invert,
    lift_path,
    max_distance,
    membership_L,
    parse_path,
    poisson_flow,
    random_driver,
    random_path,
    random_profile,
    read_path,
    sample_profile,
    write_path,
    zero_driver,
)
from algebrokit.coiso import conormal_algebroid, zero_section
from algebrokit.poisson import cotangent_algebroid, dualize, make_poisson

SO3_DUAL_VARS = ("x1", "x2", "x3")
X0 = [0.3, 0.2, -0.1]


def so3_dual_cotangent():
    P = make_poisson(SO3_DUAL_VARS, {"x1 x2": "x3", "x2 x3": "x1", "x3 x1": "x2"}, [[-1, 1]] * 3)
    return P, cotangent_algebroid(P)


def test_tangent_path_is_the_integral_of_its_density():
    A = tangent_algebroid(1)
    p = integrate_apath(A, [0.0], sample_profile(["cos(2*pi*t)"]), 200)
    assert np.allclose(p.X[:, 0], np.sin(2 * np.pi * p.t) / (2 * np.pi), atol=1e-10)


def test_integrated_path_meets_constraint_bound():
    _, A = so3_dual_cotangent()
    prof = sample_profile(["cos(pi*t)", "t^2", "0.5 - t"])
    for N in (100, 200, 400):
        assert constraint_residual(integrate_apath(A, X0, prof, N)) <= 10.0 / N**2


def test_cotangent_path_stays_on_coadjoint_sphere():
    P, A = so3_dual_cotangent()
    p = random_path(A, np.random.default_rng(2), x0=X0, N=400)
    r2 = np.sum(p.X**2, axis=1)
    assert np.max(np.abs(r2 - r2[0])) <= 1e-12


def test_so3_path_has_zero_constraint_residual():
    p = random_path(so3(), np.random.default_rng(0), N=100)
    assert constraint_residual(p) == 0.0


def test_integration_leaving_box_raises():
    with pytest.raises(ChartExitError):
        integrate_apath(tangent_algebroid(1), [0.9], sample_profile(["1"]), 50)
    with pytest.raises(ChartExitError):
        integrate_apath(tangent_algebroid(1), [2.0], sample_profile(["0"]), 50)


def test_path_arrays_are_read_only():
    p = constant_path(so3(), [0.0], 10)
    with pytest.raises(ValueError):
        p.X[0, 0] = 1.0


def test_shape_mismatch_rejected():
    with pytest.raises(APathError):
        APath(so3(), np.zeros((5, 1)), np.zeros((5, 2)))
    with pytest.raises(APathError):
        APath(so3(), np.zeros((5, 1)), np.zeros((5, 3)), segments=((0, 1, 3),))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(-1, 1))
def test_difference_stencils_converge_at_their_order(k, c):
    def errs(diff, N):
        t = np.linspace(0, 1, N + 1)
        f = np.sin(k * t + c)[:, None]
        return np.max(np.abs(diff(f, 1.0 / N)[:, 0] - k * np.cos(k * t + c)))
    assert errs(diff2, 40) / errs(diff2, 80) > 3.0
    assert errs(diff4, 40) / errs(diff4, 80) > 12.0


def test_bump_profile_is_flat_at_the_ends():
    t = np.array([0.0, 1e-3, 0.5, 1.0])
    v = bump_profile(t)
    assert v[0] == 0.0 and v[-1] == 0.0 and v[1] < 1e-300
    assert v[2] == pytest.approx(1.0)


def test_homotopy_flow_fixes_endpoints_and_records_history():
    _, A = so3_dual_cotangent()
    rng = np.random.default_rng(5)
    p = integrate_apath(A, X0, random_profile(rng, 3), 200)
    hist = FlowHistory()
    q = homotopy_flow(p, random_driver(rng, 3, amplitude=0.5, s_steps=10, profile="bump"), history=hist)
    assert np.array_equal(q.X[0], p.X[0])
    assert np.max(np.abs(q.X[-1] - p.X[-1])) <= 1e-14
    assert len(hist.residuals) == 10
    assert max_distance(p, q) > 1e-3


def test_constraint_drift_converges_at_fourth_order():
    # the default residual uses second-order differences and drops 4x; the flow itself is fourth order
    _, A = so3_dual_cotangent()
    rng = np.random.default_rng(0)
    prof = random_profile(rng, 3, amplitude=0.5)
    d = random_driver(rng, 3, amplitude=0.5, s_steps=25, profile="bump")
    coarse = homotopy_flow(integrate_apath(A, X0, prof, 250), d)
    fine = homotopy_flow(integrate_apath(A, X0, prof, 500), d.refined())
    ratio2 = constraint_residual(coarse) / constraint_residual(fine)
    ratio4 = constraint_residual(coarse, order=4) / constraint_residual(fine, order=4)
    assert 3.5 <= ratio2 <= 4.5
    assert ratio4 >= 8.0
    with pytest.raises(APathError):
        constraint_residual(coarse, order=3)


def test_drift_abort_and_input_check():
    _, A = so3_dual_cotangent()
    rng = np.random.default_rng(1)
    p = integrate_apath(A, X0, random_profile(rng, 3), 50)
    with pytest.raises(DriftError):
        homotopy_flow(p, random_driver(rng, 3, s_steps=5), drift_abort=1e-9)
    with pytest.raises(APathError):
        homotopy_flow(p, zero_driver(3), tol_in=1e-12)


def test_zero_driver_is_identity():
    p = random_path(so3(), np.random.default_rng(3), N=50)
    q = homotopy_flow(p, zero_driver(3, s_steps=4))
    assert max_distance(p, q) == 0.0


def test_lifted_foliation_autovanishes():
    rng = np.random.default_rng(4)
    for A, x0 in [(so3(), None), (so3_dual_cotangent()[1], X0)]:
        p = random_path(A, rng, x0=x0, N=200)
        hist = []
        out = full_flow(lift_path(p), random_driver(rng, A.r, s_steps=100), history=hist)
        assert len(hist) == 100
        assert max(hist) <= 1e-10
        assert np.max(np.abs(out.alpha)) <= 1e-10


def test_poisson_flow_matches_lifted_flow_under_dualize():
    _, A = so3_dual_cotangent()
    rng = np.random.default_rng(0)
    p = random_path(A, rng, x0=X0, N=200)
    lifted = lift_path(p)
    d = random_driver(rng, 3, n=3, amplitude=0.3, s_steps=20, profile="bump")
    out = full_flow(lifted, d)
    assert np.max(np.abs(out.alpha)) > 1e-3
    P = dualize(A)
    cp = APath(P, np.hstack([p.X, lifted.alpha]), np.hstack([lifted.eta, p.a]))
    t = p.t
    q = poisson_flow(cp, lambda s: np.hstack([d.beta(t, s, 3), d.b(t, s)]), d.s_steps, d.ds, drift_abort=1.0)
    assert np.allclose(q.X, np.hstack([out.X, out.alpha]), atol=1e-12)
    assert np.allclose(q.a, np.hstack([out.eta, out.a]), atol=1e-12)


def test_restricted_flow_matches_conormal_homotopy_flow():
    A = so3()
    P = dualize(A)
    S = zero_section(P, 3)
    B = conormal_algebroid(P, S)
    rng = np.random.default_rng(6)
    p = random_path(B, rng, N=300)
    d = random_driver(rng, 3, s_steps=30, profile="bump")
    lifted = embed_conormal_path(p, S)
    assert membership_L(lifted, S).passed
    q = coiso_restricted_flow(lifted, S, d)
    assert membership_L(q, S).passed
    assert max_distance(conormal_part(q, S, B), homotopy_flow(p, d)) <= 1e-8


def test_restricted_flow_requires_membership():
    P = dualize(so3())
    S = zero_section(P, 3)
    bad = APath(P, np.full((11, 4), 0.1), np.zeros((11, 4)))
    with pytest.raises(APathError):
        coiso_restricted_flow(bad, S, zero_driver(3))


def test_concat_and_invert_bookkeeping():
    A = tangent_algebroid(2)
    rng = np.random.default_rng(8)
    p = random_path(A, rng, x0=[0.0, 0.0], N=40)
    q = random_path(A, rng, x0=p.X[-1], N=60)
    pq = concat(p, q)
    assert np.array_equal(pq.X[0], p.X[0]) and np.array_equal(pq.X[-1], q.X[-1])
    assert pq.N == 100 and len(pq.t) == 102
    ip = invert(p)
    assert np.array_equal(ip.X[0], p.X[-1]) and np.array_equal(ip.X[-1], p.X[0])
    ii = invert(invert(p))
    assert np.array_equal(ii.X, p.X) and np.array_equal(ii.a, p.a) and np.array_equal(ii.t, p.t)
    assert constraint_residual(ip) == pytest.approx(constraint_residual(p), rel=1e-12)
    with pytest.raises(APathError):
        concat(q, p)


def test_dump_roundtrip_is_exact(tmp_path):
    A = tangent_algebroid(2)
    rng = np.random.default_rng(9)
    p = random_path(A, rng, x0=[0.1, 0.0], N=20)
    pq = concat(p, invert(p))
    fn = tmp_path / "p.txt"
    write_path(pq, fn)
    back = read_path(fn, A)
    assert np.array_equal(back.X, pq.X) and np.array_equal(back.a, pq.a)
    assert back.segments == pq.segments
    assert format_path(back) == format_path(pq)


def test_dump_columns():
    assert column_names(so3()) == ["t", "b1", "a1", "a2", "a3"]
    P = dualize(so3())
    assert column_names(P)[:3] == ["t", "b1", "alpha1"]
    assert column_names(P)[-1] == "eta_alpha3"
    with pytest.raises(APathError):
        parse_path("t x y\n0 0 0\n", so3())


def test_driver_validation():
    with pytest.raises(APathError):
        HomotopyDriver(lambda t, s: t, s_steps=0)
    with pytest.raises(APathError):
        HomotopyDriver(lambda t, s: t, profile="gauss")
    d = random_driver(np.random.default_rng(0), 2, s_steps=7)
    r = d.refined()
    assert r.s_steps == 14 and r.ds == pytest.approx(d.ds / 2)

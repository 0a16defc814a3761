"""Complete homotopy invariants of A-paths and the groupoid axioms on them.

Three model classes have a finite complete invariant:

* matrix Lie algebras: the product integral ``U(1)`` of ``dU/dt = U M(a(t))``;
* tangent algebroids of a convex box: the endpoint pair;
* zero-anchor bundles of abelian algebras: base point and ``int a dt``.

Orientation: the target of a path is its ``X(0)`` data and the source its
``X(1)`` data, so ``concat(p, q)`` maps to the product ``u v``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .algebroid import AlgebroidChart, levi_civita
from .apath import (APath, APathError, HomotopyDriver, constraint_residual, homotopy_flow, max_distance,
                    midpoints, polynomial_profile)
from .report import CheckReport

REP_TOL = 1e-10
KINDS = ("matrix", "pair", "fiber_integral")
AXIOMS = (
    "source_of_product",
    "target_of_product",
    "left_unit",
    "right_unit",
    "associativity",
    "source_of_inverse",
    "target_of_inverse",
    "right_inverse",
    "left_inverse",
)
AXIOM_TOL = {"matrix": 1e-6, "pair": 0.0, "fiber_integral": 1e-12}
HARNESS_TOL = {"matrix": 1e-6, "pair": 1e-9, "fiber_integral": 1e-9}


class GroupoidError(ValueError):
    pass


@dataclass(frozen=True)
class MatrixRep:
    images: np.ndarray  # (r, d, d)

    @property
    def r(self) -> int:
        return self.images.shape[0]

    @property
    def d(self) -> int:
        return self.images.shape[1]

    def of(self, a) -> np.ndarray:
        """``M(a) = a_mu M_mu`` for densities of shape ``(..., r)``."""
        return np.tensordot(a, self.images, axes=1)


def so3_rep() -> MatrixRep:
    """Defining representation ``(L_i)_{jk} = -eps_{ijk}``, so ``[L_1, L_2] = L_3``."""
    return MatrixRep(-levi_civita())


def sl2_rep() -> MatrixRep:
    h = np.diag([1.0, -1.0])
    e = np.array([[0.0, 1.0], [0.0, 0.0]])
    f = np.array([[0.0, 0.0], [1.0, 0.0]])
    return MatrixRep(np.stack([h, e, f]))


def rep_defect(rep: MatrixRep, constants: np.ndarray) -> float:
    """max |[M_mu, M_nu] - f^{mu nu}_s M_s|."""
    M = rep.images
    comm = np.einsum("mij,njk->mnik", M, M) - np.einsum("nij,mjk->mnik", M, M)
    return float(np.max(np.abs(comm - np.einsum("mns,sik->mnik", constants, M))))


def _constants(A: AlgebroidChart, x) -> np.ndarray:
    return A.structure_at(np.asarray(x, dtype=float))[0]


def check_rep(rep: MatrixRep, A: AlgebroidChart, x=None) -> None:
    if rep.r != A.r:
        raise GroupoidError(f"representation has {rep.r} generators, algebra has rank {A.r}")
    x = A.chart_box.mean(axis=1) if x is None else x
    defect = rep_defect(rep, _constants(A, x))
    if defect > REP_TOL:
        raise GroupoidError(f"representation is incompatible with the structure constants ({defect:.3e})")


@dataclass(frozen=True)
class GroupoidInvariant:
    kind: str
    target: np.ndarray
    source: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GroupoidError(f"unknown invariant kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "target": self.target.tolist(), "source": self.source.tolist(),
                "value": self.value.tolist()}


def product_integral(rep: MatrixRep, path: APath) -> np.ndarray:
    """``U(1)`` for ``dU/dt = U M(a(t))``, ``U(0) = 1``, by RK4 on each segment.

    Midpoint densities come from cubic interpolation of the samples.
    """
    check_rep(rep, path.algebroid, path.X[0])
    U = np.eye(rep.d)
    for sl, h in path.slices():
        M = rep.of(path.a[sl])
        Mm = rep.of(midpoints(path.a[sl]))
        for k in range(len(M) - 1):
            k1 = U @ M[k]
            k2 = (U + 0.5 * h * k1) @ Mm[k]
            k3 = (U + 0.5 * h * k2) @ Mm[k]
            k4 = (U + h * k3) @ M[k + 1]
            U = U + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(U)):
        raise GroupoidError("product integral diverged")
    return U


def matrix_invariant(rep: MatrixRep, path: APath) -> GroupoidInvariant:
    return GroupoidInvariant("matrix", path.X[0].copy(), path.X[-1].copy(), product_integral(rep, path))


def _require_chart(path: APath, kind: str) -> None:
    """Pair needs a tangent chart, fiber_integral a zero-anchor abelian one."""
    A = path.algebroid
    if not isinstance(A, AlgebroidChart):
        raise GroupoidError(f"{kind} invariant needs an algebroid chart")
    pts = path.X[:: max(1, len(path.X) // 16)]
    f = float(np.max(np.abs(A.structure_at(pts)), initial=0.0))
    rho = A.anchor_at(pts)
    if kind == "pair":
        bad = A.n != A.r or f > 0.0 or float(np.max(np.abs(rho - np.eye(A.n)))) > 0.0
    else:
        bad = f > 0.0 or float(np.max(np.abs(rho), initial=0.0)) > 0.0
    if bad:
        need = "a tangent algebroid" if kind == "pair" else "a zero anchor and abelian fibers"
        raise GroupoidError(f"{kind} invariant is only complete on {need}")


def pair_invariant(path: APath, tol: float | None = None) -> GroupoidInvariant:
    _require_chart(path, "pair")
    if tol is not None and constraint_residual(path) > tol:
        raise GroupoidError("path does not satisfy the constraint")
    return GroupoidInvariant("pair", path.X[0].copy(), path.X[-1].copy(), np.zeros(0))


def fiber_integral_invariant(path: APath, tol: float = 1e-12) -> GroupoidInvariant:
    _require_chart(path, "fiber_integral")
    drift = float(np.max(np.abs(path.X - path.X[0])))
    if drift > tol:
        raise GroupoidError(f"base point moves along the path ({drift:.3e})")
    t = path.t
    total = sum(np.trapezoid(path.a[sl], t[sl], axis=0) for sl, _ in path.slices())
    return GroupoidInvariant("fiber_integral", path.X[0].copy(), path.X[0].copy(), np.asarray(total))


def invariant_of(kind: str, path: APath, rep: MatrixRep | None = None) -> GroupoidInvariant:
    if kind == "matrix":
        if rep is None:
            raise GroupoidError("matrix invariant needs a representation")
        return matrix_invariant(rep, path)
    if kind == "pair":
        return pair_invariant(path)
    if kind == "fiber_integral":
        return fiber_integral_invariant(path)
    raise GroupoidError(f"unknown invariant kind {kind!r}")


# ---------------------------------------------------------------------------
# Structure maps
# ---------------------------------------------------------------------------


def composable(u: GroupoidInvariant, v: GroupoidInvariant, tol: float = 0.0) -> bool:
    return u.kind == v.kind and float(np.max(np.abs(u.source - v.target), initial=0.0)) <= tol


def mul(u: GroupoidInvariant, v: GroupoidInvariant) -> GroupoidInvariant:
    if u.kind != v.kind:
        raise GroupoidError("cannot multiply invariants of different kinds")
    if u.kind == "matrix":
        value = u.value @ v.value
    elif u.kind == "fiber_integral":
        value = u.value + v.value
    else:
        value = np.zeros(0)
    return GroupoidInvariant(u.kind, u.target, v.source, value)


def inv(u: GroupoidInvariant) -> GroupoidInvariant:
    if u.kind == "matrix":
        value = np.linalg.inv(u.value)
    elif u.kind == "fiber_integral":
        value = -u.value
    else:
        value = np.zeros(0)
    return GroupoidInvariant(u.kind, u.source, u.target, value)


def unit(kind: str, base, size: int) -> GroupoidInvariant:
    """``epsilon(b)``; ``size`` is the matrix dimension or the fiber rank."""
    base = np.asarray(base, dtype=float)
    if kind == "matrix":
        value = np.eye(size)
    elif kind == "fiber_integral":
        value = np.zeros(size)
    else:
        value = np.zeros(0)
    return GroupoidInvariant(kind, base, base, value)


def distance(u: GroupoidInvariant, v: GroupoidInvariant) -> float:
    if u.kind != v.kind:
        return float("inf")
    parts = [u.target - v.target, u.source - v.source, u.value - v.value]
    return max(float(np.max(np.abs(p), initial=0.0)) for p in parts)


def _size(u: GroupoidInvariant) -> int:
    return u.value.shape[0] if u.kind != "pair" else 0


def axiom_suite(kind: str, u: GroupoidInvariant, v: GroupoidInvariant, w: GroupoidInvariant,
                tol: float | None = None) -> CheckReport:
    """The nine groupoid axioms on a composable triple ``u v w``.

    Non-composable inputs are reported under ``precondition`` rather than as
    axiom failures.
    """
    tol = AXIOM_TOL[kind] if tol is None else tol
    report = CheckReport(f"axiom_suite[{kind}]")
    gap = max(float(np.max(np.abs(u.source - v.target), initial=0.0)),
              float(np.max(np.abs(v.source - w.target), initial=0.0)))
    if any(x.kind != kind for x in (u, v, w)):
        gap = float("inf")
    report.add("precondition", gap, tol)
    if not report.passed:
        report.details["error"] = "elements are not composable"
        return report
    size = _size(u)
    uv, vw = mul(u, v), mul(v, w)

    def diff(a, b):
        return float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0))

    values = {
        "source_of_product": diff(uv.source, v.source),
        "target_of_product": diff(uv.target, u.target),
        "left_unit": distance(mul(unit(kind, v.target, size), v), v),
        "right_unit": distance(mul(u, unit(kind, u.source, size)), u),
        "associativity": distance(mul(uv, w), mul(u, vw)),
        "source_of_inverse": diff(inv(u).source, u.target),
        "target_of_inverse": diff(inv(u).target, u.source),
        "right_inverse": distance(mul(u, inv(u)), unit(kind, u.target, size)),
        "left_inverse": distance(mul(inv(u), u), unit(kind, u.source, size)),
    }
    for name in AXIOMS:
        report.add(name, values[name], tol)
    return report


def homotopy_invariance_harness(path: APath, drivers: Sequence[HomotopyDriver], kind: str,
                                rep: MatrixRep | None = None, tol: float | None = None) -> CheckReport:
    """Invariant before and after ``homotopy_flow`` for each driver."""
    tol = HARNESS_TOL[kind] if tol is None else tol
    before = invariant_of(kind, path, rep)
    devs = []
    for driver in drivers:
        after = invariant_of(kind, homotopy_flow(path, driver), rep)
        devs.append(distance(before, after))
    report = CheckReport(f"homotopy_invariance[{kind}]")
    report.add("max_deviation", max(devs, default=0.0), tol)
    report.details["deviations"] = devs
    report.details["invariant"] = before.to_dict()
    return report



# ---------------------------------------------------------------------------
# Constructive completeness
# ---------------------------------------------------------------------------


def interpolating_driver(p: APath, q: APath, kind: str, s_steps: int = 10) -> HomotopyDriver:
    """Driver whose flow on ``[0, 1]`` carries ``p`` towards ``q``.

    pair: ``b = p.X - q.X`` moves ``X`` along the straight line (``rho = 1``).
    fiber_integral: ``b = int_0^t (p.a - q.a)`` (cubic-spline antiderivative) shifts ``a`` by ``q.a - p.a``.
    The linear interpolant of ``b`` between its end values is removed, so the
    driver vanishes at ``t = 0, 1`` and the flow stops short of ``q`` by
    exactly the invariant mismatch.
    """
    if p.algebroid is not q.algebroid or p.segments != q.segments:
        raise APathError("paths must share chart and grid")
    t = p.t
    if kind == "pair":
        target = p.X - q.X
    elif kind == "fiber_integral":
        target = np.zeros_like(p.a)
        for sl, _ in p.slices():
            seg = CubicSpline(t[sl], p.a[sl] - q.a[sl], axis=0).antiderivative()(t[sl])
            start = target[sl.start - 1] if sl.start else 0.0
            target[sl] = start + seg
    else:
        raise GroupoidError(f"no interpolating driver for kind {kind!r}")
    target = target - np.outer(1.0 - t, target[0]) - np.outer(t, target[-1])
    weight = polynomial_profile(t)
    raw = np.zeros_like(target)
    inside = weight > 0
    raw[inside] = target[inside] / weight[inside, None]

    def b_raw(tt, s):
        if len(tt) != len(t) or not np.array_equal(tt, t):
            raise APathError("interpolating driver evaluated off its grid")
        return raw

    return HomotopyDriver(b_raw, s_steps=s_steps, profile="polynomial")


def completeness_check(p: APath, q: APath, kind: str, tol: float = 1e-6,
                       s_steps: int = 10) -> CheckReport:
    """Equal invariants iff the interpolating flow deforms ``p`` into ``q`` (both ways)."""
    report = CheckReport(f"completeness[{kind}]")
    u, v = invariant_of(kind, p), invariant_of(kind, q)
    gap = distance(u, v)
    equal = gap <= HARNESS_TOL[kind]
    reached = []
    for a, b in ((p, q), (q, p)):
        flowed = homotopy_flow(a, interpolating_driver(a, b, kind, s_steps), drift_abort=np.inf)
        reached.append(max_distance(flowed, b))
    deformable = max(reached) <= tol
    report.add("invariant_distance", gap, HARNESS_TOL[kind], gating=False)
    report.add("deformation_distance", max(reached), tol, gating=False)
    report.add("iff_mismatch", float(equal != deformable), 0.0)
    report.details.update(equal_invariants=bool(equal), deformable=bool(deformable), reached=reached)
    return report

"""Lie algebroids in a single trivializing chart.

A chart is described by anchor functions ``rho[mu][i]`` (the component of
``rho_*(e^mu)`` along ``d/db^i``) and structure functions
``structure[mu][nu][sigma]`` with ``[e^mu, e^nu] = structure[mu][nu][sigma] e^sigma``.
All brackets of non-constant sections follow from these by the Leibniz rule.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import (
    DEFAULT_STEP,
    DomainError,
    ScalarField,
    constant,
    derivative_field,
    gradient_component,
    parse_expr,
)
from .report import CheckReport
from .sampling import DEFAULT_SAMPLES, as_box, halton_points

DEFAULT_TOL = 1e-7
ANTISYMMETRY_TOL = 1e-12


class AlgebroidError(ValueError):
    pass


class AntisymmetryError(AlgebroidError):
    pass


class JacobiError(AlgebroidError):
    pass


def _as_field(entry, variables) -> ScalarField:
    if isinstance(entry, ScalarField):
        if entry.variables != tuple(variables):
            return entry.with_variables(variables)
        return entry
    if isinstance(entry, (int, float, np.number)):
        return constant(float(entry), variables)
    return parse_expr(entry, variables)


def eval_fields(fields: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate an object array of fields on ``(K, n)`` points -> ``(K, *fields.shape)``."""
    points = np.atleast_2d(points)
    out = np.zeros((points.shape[0],) + fields.shape)
    for idx, f in np.ndenumerate(fields):
        if f.is_zero:
            continue
        out[(slice(None),) + idx] = f.evaluate_many(points)
    return out


def grad_fields(fields: np.ndarray, points: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Finite-difference gradients -> ``(K, *fields.shape, n)``."""
    points = np.atleast_2d(points)
    n = points.shape[-1]
    out = np.zeros((points.shape[0],) + fields.shape + (n,))
    for idx, f in np.ndenumerate(fields):
        if f.is_constant:
            continue
        for i in range(n):
            out[(slice(None),) + idx + (i,)] = gradient_component(f, i, points, step)
    return out


def _object_array(nested, shape) -> np.ndarray:
    arr = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        item = nested
        for k in idx:
            item = item[k]
        arr[idx] = item
    return arr


@dataclass(frozen=True, eq=False)
class AlgebroidChart:
    variables: tuple
    anchor: np.ndarray  # (r, n) object array of ScalarField
    structure: np.ndarray  # (r, r, r) object array of ScalarField
    chart_box: np.ndarray
    over_point: bool = False
    name: str = ""
    step: float = DEFAULT_STEP

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def r(self) -> int:
        return self.anchor.shape[0]

    def anchor_at(self, points) -> np.ndarray:
        return eval_fields(self.anchor, points)

    def structure_at(self, points) -> np.ndarray:
        return eval_fields(self.structure, points)

    def anchor_grad(self, points) -> np.ndarray:
        return grad_fields(self.anchor, points, self.step)

    def structure_grad(self, points) -> np.ndarray:
        return grad_fields(self.structure, points, self.step)

    @property
    def has_zero_anchor(self) -> bool:
        return all(f.is_zero for f in self.anchor.flat)

    def samples(self, count: int = DEFAULT_SAMPLES) -> np.ndarray:
        return halton_points(self.chart_box, count)


@dataclass(frozen=True)
class SectionValue:
    """A section ``X = X_mu e^mu`` given by its ``r`` coefficient fields."""

    coefficients: tuple

    def __len__(self) -> int:
        return len(self.coefficients)

    def values(self, points) -> np.ndarray:
        return np.stack([c.evaluate_many(np.atleast_2d(points)) for c in self.coefficients], axis=-1)

    def grads(self, points, step: float = DEFAULT_STEP) -> np.ndarray:
        points = np.atleast_2d(points)
        n = points.shape[-1]
        return np.stack(
            [np.stack([gradient_component(c, i, points, step) for i in range(n)], axis=-1)
             for c in self.coefficients],
            axis=1,
        )


def section(A: AlgebroidChart, coefficients: Sequence) -> SectionValue:
    if len(coefficients) != A.r:
        raise AlgebroidError(f"section needs {A.r} coefficients, got {len(coefficients)}")
    return SectionValue(tuple(_as_field(c, A.variables) for c in coefficients))


def basis_section(A: AlgebroidChart, mu: int) -> SectionValue:
    return section(A, [constant(1.0 if k == mu else 0.0, A.variables) for k in range(A.r)])


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def make_algebroid(
    n: int,
    r: int,
    anchor,
    structure,
    chart_box,
    variables: Sequence[str] | None = None,
    over_point: bool = False,
    name: str = "",
    step: float = DEFAULT_STEP,
) -> AlgebroidChart:
    """Build a chart from ``r x n`` anchor and ``r x r x r`` structure entries.

    Entries may be expression strings, numbers or ready-made fields.  The
    structure functions must be antisymmetric in their first two indices.
    """
    variables = tuple(variables) if variables is not None else tuple(f"b{i + 1}" for i in range(n))
    if len(variables) != n:
        raise AlgebroidError(f"expected {n} variable names, got {len(variables)}")
    if r < 1 or n < 1:
        raise AlgebroidError("base dimension and rank must be positive")
    if _shape_of(anchor, 2) != (r, n):
        raise AlgebroidError(f"anchor must have shape ({r}, {n}), got {_shape_of(anchor, 2)}")
    if _shape_of(structure, 3) != (r, r, r):
        raise AlgebroidError(f"structure must have shape ({r}, {r}, {r}), got {_shape_of(structure, 3)}")
    box = as_box(chart_box, n)
    anchor_f = _object_array(anchor, (r, n))
    structure_f = _object_array(structure, (r, r, r))
    for arr in (anchor_f, structure_f):
        for idx, entry in np.ndenumerate(arr):
            arr[idx] = _as_field(entry, variables)
    A = AlgebroidChart(variables, anchor_f, structure_f, box, over_point, name, step)
    pts = halton_points(box, 32)
    f, _, _ = _split_domain(A.structure_at, pts)
    asym = np.max(np.abs(f + np.swapaxes(f, 1, 2))) if f is not None else 0.0
    if asym > ANTISYMMETRY_TOL:
        raise AntisymmetryError(f"structure functions not antisymmetric (max |f+f^T| = {asym:.3e})")
    return A


def _shape_of(nested, depth: int) -> tuple:
    shape = []
    item = nested
    for _ in range(depth):
        try:
            shape.append(len(item))
        except TypeError:
            return tuple(shape)
        if len(item) == 0:
            return tuple(shape) + (0,) * (depth - len(shape))
        item = item[0]
    return tuple(shape)


def tangent_algebroid(n: int, chart_box=None, variables: Sequence[str] | None = None) -> AlgebroidChart:
    chart_box = [[-1.0, 1.0]] * n if chart_box is None else chart_box
    anchor = [["1" if i == mu else "0" for i in range(n)] for mu in range(n)]
    structure = [[["0"] * n for _ in range(n)] for _ in range(n)]
    return make_algebroid(n, n, anchor, structure, chart_box, variables, name=f"T(R^{n})")


def zero_algebroid(n: int, r: int, chart_box=None, variables: Sequence[str] | None = None) -> AlgebroidChart:
    chart_box = [[-1.0, 1.0]] * n if chart_box is None else chart_box
    anchor = [["0"] * n for _ in range(r)]
    structure = [[["0"] * r for _ in range(r)] for _ in range(r)]
    return make_algebroid(n, r, anchor, structure, chart_box, variables, name=f"zero({n},{r})")


def lie_algebra(constants, name: str = "", chart_box=None, variable: str = "b1") -> AlgebroidChart:
    """A Lie algebra with ``[e_mu, e_nu] = constants[mu][nu][sigma] e_sigma`` over a point.

    The point is encoded as a one-dimensional base with b-independent
    coefficients and zero anchor.
    """
    c = np.asarray(constants, dtype=float)
    r = c.shape[0]
    if c.shape != (r, r, r):
        raise AlgebroidError(f"structure constants must have shape (r, r, r), got {c.shape}")
    asym = np.max(np.abs(c + np.swapaxes(c, 0, 1)))
    if asym > ANTISYMMETRY_TOL:
        raise AntisymmetryError(f"structure constants not antisymmetric ({asym:.3e})")
    jac = lie_algebra_jacobiator(c)
    if jac > ANTISYMMETRY_TOL:
        raise JacobiError(f"structure constants violate Jacobi ({jac:.3e})")
    chart_box = [[-1.0, 1.0]] if chart_box is None else chart_box
    anchor = [["0"] for _ in range(r)]
    structure = [[[repr(float(c[a, b, s])) for s in range(r)] for b in range(r)] for a in range(r)]
    return make_algebroid(1, r, anchor, structure, chart_box, [variable], over_point=True, name=name)


def lie_algebra_jacobiator(c: np.ndarray) -> float:
    # [e_a,[e_b,e_c]]^s = c[b,c,n] c[a,n,s]
    inner = np.einsum("bcn,ans->abcs", c, c)
    cyc = inner + np.transpose(inner, (1, 2, 0, 3)) + np.transpose(inner, (2, 0, 1, 3))
    return float(np.max(np.abs(cyc))) if c.size else 0.0


def levi_civita() -> np.ndarray:
    eps = np.zeros((3, 3, 3))
    for (i, j, k), sign in (((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1),
                            ((0, 2, 1), -1), ((2, 1, 0), -1), ((1, 0, 2), -1)):
        eps[i, j, k] = sign
    return eps


def so3() -> AlgebroidChart:
    return lie_algebra(levi_civita(), name="so(3)")


def sl2_constants() -> np.ndarray:
    # basis (h, e, f): [h,e] = 2e, [h,f] = -2f, [e,f] = h
    c = np.zeros((3, 3, 3))
    c[0, 1, 1], c[1, 0, 1] = 2.0, -2.0
    c[0, 2, 2], c[2, 0, 2] = -2.0, 2.0
    c[1, 2, 0], c[2, 1, 0] = 1.0, -1.0
    return c


def sl2() -> AlgebroidChart:
    return lie_algebra(sl2_constants(), name="sl(2,R)")


# ---------------------------------------------------------------------------
# Brackets, anchor and differential
# ---------------------------------------------------------------------------


def _points(A: AlgebroidChart, point) -> tuple[np.ndarray, bool]:
    p = np.asarray(point, dtype=float)
    single = p.ndim == 1
    return np.atleast_2d(p), single


def anchor_apply(A: AlgebroidChart, X: SectionValue, point) -> np.ndarray:
    """Components ``X_mu rho^{mu i}`` of ``rho_* X``."""
    pts, single = _points(A, point)
    out = np.einsum("km,kmi->ki", X.values(pts), A.anchor_at(pts))
    return out[0] if single else out


def bracket_sections(A: AlgebroidChart, X: SectionValue, Y: SectionValue, point) -> np.ndarray:
    """Coefficients of ``[X, Y]`` forced from the constant-basis brackets by Leibniz."""
    pts, single = _points(A, point)
    xv, yv = X.values(pts), Y.values(pts)
    rho = A.anchor_at(pts)
    out = np.einsum("km,kn,kmns->ks", xv, yv, A.structure_at(pts))
    if not A.has_zero_anchor:
        rx = np.einsum("km,kmi->ki", xv, rho)
        ry = np.einsum("km,kmi->ki", yv, rho)
        out += np.einsum("ki,ksi->ks", rx, Y.grads(pts, A.step))
        out -= np.einsum("ki,ksi->ks", ry, X.grads(pts, A.step))
    return out[0] if single else out


def bracket_field(A: AlgebroidChart, X: SectionValue, Y: SectionValue) -> SectionValue:
    """``[X, Y]`` as a section of fields (derivatives stay finite differences)."""
    r, n = A.r, A.n
    zero = constant(0.0, A.variables)
    coeffs = []
    for s in range(r):
        total = zero
        for mu in range(r):
            for nu in range(r):
                f = A.structure[mu, nu, s]
                if not f.is_zero:
                    total = total + X.coefficients[mu] * Y.coefficients[nu] * f
        for mu in range(r):
            for i in range(n):
                rho = A.anchor[mu, i]
                if rho.is_zero:
                    continue
                total = total + X.coefficients[mu] * rho * derivative_field(Y.coefficients[s], i, A.step)
                total = total - Y.coefficients[mu] * rho * derivative_field(X.coefficients[s], i, A.step)
        coeffs.append(total)
    return SectionValue(tuple(coeffs))


def pairing(alpha: SectionValue, X: SectionValue) -> ScalarField:
    """The function ``<alpha, X> = alpha_mu X_mu``."""
    total = constant(0.0, alpha.coefficients[0].variables)
    for a, x in zip(alpha.coefficients, X.coefficients):
        total = total + a * x
    return total


def algebroid_differential(A: AlgebroidChart, form, point, X: SectionValue | None = None,
                           Y: SectionValue | None = None):
    """Algebroid differential of a function (degree 0) or a 1-form (degree 1).

    For a function ``f`` returns the ``r``-vector ``rho^{mu i} d_i f``.  For a
    1-form ``alpha`` (a :class:`SectionValue` of dual coefficients) returns
    ``<d alpha, X ^ Y>`` by the Cartan formula, so that ``d d f = 0``.
    """
    pts, single = _points(A, point)
    if isinstance(form, ScalarField):
        grad = np.stack([gradient_component(form, i, pts, A.step) for i in range(A.n)], axis=-1)
        out = np.einsum("kmi,ki->km", A.anchor_at(pts), grad)
        return out[0] if single else out
    if X is None or Y is None:
        raise ValueError("degree-1 differential needs two sections X and Y")
    ax = algebroid_differential(A, pairing(form, X), pts)
    ay = algebroid_differential(A, pairing(form, Y), pts)
    br = bracket_sections(A, X, Y, pts)
    # rho(X)<alpha, Y> - rho(Y)<alpha, X> - <alpha, [X, Y]>
    out = (-np.einsum("km,km->k", form.values(pts), br)
           + np.einsum("km,km->k", ay, X.values(pts))
           - np.einsum("km,km->k", ax, Y.values(pts)))
    return out[0] if single else out


# ---------------------------------------------------------------------------
# Axiom checks
# ---------------------------------------------------------------------------


def _split_domain(func, points: np.ndarray):
    """Run ``func`` on all points, falling back to per-point runs on domain errors."""
    try:
        return func(points), points, []
    except DomainError:
        pass
    good, flagged, results = [], [], []
    for p in points:
        try:
            results.append(func(p[None, :]))
            good.append(p)
        except DomainError:
            flagged.append(p.tolist())
    if not results:
        return None, np.empty((0, points.shape[1])), flagged
    return np.concatenate(results, axis=0), np.array(good), flagged


def jacobi_residuals(A: AlgebroidChart, points) -> np.ndarray:
    """Per-point max of the cyclic Jacobi sum over constant basis sections."""
    pts = np.atleast_2d(points)
    res = np.zeros(pts.shape[0])
    basis = [basis_section(A, mu) for mu in range(A.r)]
    inner = {}
    for b, c in itertools.combinations(range(A.r), 2):
        inner[b, c] = SectionValue(tuple(A.structure[b, c, :]))
    for a, b, c in itertools.combinations(range(A.r), 3):
        total = (bracket_sections(A, basis[a], inner[b, c], pts)
                 - bracket_sections(A, basis[b], inner[a, c], pts)
                 + bracket_sections(A, basis[c], inner[a, b], pts))
        res = np.maximum(res, np.max(np.abs(total), axis=-1))
    return res


def anchor_morphism_residuals(A: AlgebroidChart, points) -> np.ndarray:
    """Per-point max of ``rho_*[e^mu, e^nu] - [rho_* e^mu, rho_* e^nu]``."""
    pts = np.atleast_2d(points)
    rho = A.anchor_at(pts)
    if A.has_zero_anchor:
        return np.zeros(pts.shape[0])
    drho = A.anchor_grad(pts)  # (K, r, n, n): d_j rho^{mu i}
    f = A.structure_at(pts)
    lhs = np.einsum("kmns,ksi->kmni", f, rho)
    lie = np.einsum("kmj,knij->kmni", rho, drho)
    rhs = lie - np.swapaxes(lie, 1, 2)
    return np.max(np.abs(lhs - rhs), axis=(1, 2, 3))


def check_axioms(A: AlgebroidChart, sample_points=None, tol: float = DEFAULT_TOL,
                 samples: int = DEFAULT_SAMPLES) -> CheckReport:
    pts = A.samples(samples) if sample_points is None else np.atleast_2d(sample_points)
    report = CheckReport(f"check_axioms[{A.name or 'algebroid'}]")

    def both(p):
        return np.stack([jacobi_residuals(A, p), anchor_morphism_residuals(A, p)], axis=-1)

    values, used, flagged = _split_domain(both, pts)
    report.flagged_points = flagged
    if values is None:
        report.add("jacobi", float("nan"), tol)
        report.add("anchor_morphism", float("nan"), tol)
    else:
        report.add("jacobi", float(np.max(values[:, 0], initial=0.0)), tol)
        report.add("anchor_morphism", float(np.max(values[:, 1], initial=0.0)), tol)
    report.details["sample_points"] = int(len(used))
    return report


def structure_antisymmetry(A: AlgebroidChart, points) -> float:
    f = A.structure_at(points)
    return float(np.max(np.abs(f + np.swapaxes(f, 1, 2)), initial=0.0))


def compare_algebroids(A: AlgebroidChart, B: AlgebroidChart, points=None, samples: int = DEFAULT_SAMPLES):
    """Max componentwise differences of anchor and structure functions."""
    if (A.n, A.r) != (B.n, B.r):
        raise AlgebroidError(f"dimension mismatch: ({A.n},{A.r}) vs ({B.n},{B.r})")
    pts = A.samples(samples) if points is None else np.atleast_2d(points)
    return (float(np.max(np.abs(A.anchor_at(pts) - B.anchor_at(pts)), initial=0.0)),
            float(np.max(np.abs(A.structure_at(pts) - B.structure_at(pts)), initial=0.0)))

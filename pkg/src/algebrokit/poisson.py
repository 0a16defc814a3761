"""(Twisted) Poisson charts, the dual Poisson structure on A* and cotangent algebroids.

Bivector components ``pi[i][j]`` are the brackets ``{x^i, x^j}``; the anchor of
the cotangent algebroid sends ``dx^i`` to ``pi^{ij} d/dx^j``.  A twist is a closed
3-form stored as a fully antisymmetric array ``phi[a][b][c] = phi(d_a, d_b, d_c)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .algebroid import (
    AlgebroidChart,
    _split_domain,
    eval_fields,
    grad_fields,
    make_algebroid,
)
from .expr import (
    DEFAULT_STEP,
    ScalarField,
    constant,
    derivative_field,
    gradient_component,
    native,
    parse_expr,
)
from .report import TWISTED_JACOBI_CONSTANT, CheckReport
from .sampling import DEFAULT_SAMPLES, as_box, halton_points

ANTISYMMETRY_TOL = 1e-12
CLOSEDNESS_TOL = 1e-7
JACOBI_TOL = 1e-7


class PoissonError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PoissonChart:
    variables: tuple
    bivector: np.ndarray  # (m, m) object array of ScalarField
    chart_box: np.ndarray
    twist: np.ndarray | None = None  # (m, m, m) object array or None
    name: str = ""
    step: float = DEFAULT_STEP

    @property
    def m(self) -> int:
        return len(self.variables)

    @property
    def twisted(self) -> bool:
        return self.twist is not None

    def pi_at(self, points) -> np.ndarray:
        return eval_fields(self.bivector, points)

    def pi_grad(self, points) -> np.ndarray:
        return grad_fields(self.bivector, points, self.step)

    def phi_at(self, points) -> np.ndarray:
        points = np.atleast_2d(points)
        if self.twist is None:
            return np.zeros((points.shape[0], self.m, self.m, self.m))
        return eval_fields(self.twist, points)

    def samples(self, count: int = DEFAULT_SAMPLES) -> np.ndarray:
        return halton_points(self.chart_box, count)


@dataclass(frozen=True)
class CotangentPoint:
    base: np.ndarray
    momentum: np.ndarray


def _field(entry, variables) -> ScalarField:
    if isinstance(entry, ScalarField):
        return entry if entry.variables == tuple(variables) else entry.with_variables(variables)
    if isinstance(entry, (int, float, np.number)):
        return constant(float(entry), variables)
    return parse_expr(entry, variables)


def _index(name_or_index, variables) -> int:
    if isinstance(name_or_index, (int, np.integer)):
        return int(name_or_index)
    return variables.index(name_or_index)


def _bivector_from(spec, variables) -> np.ndarray:
    m = len(variables)
    pi = np.empty((m, m), dtype=object)
    zero = constant(0.0, variables)
    if isinstance(spec, Mapping):
        pi[:] = zero
        for key, expr in spec.items():
            i, j = (_index(k, variables) for k in (key.split() if isinstance(key, str) else key))
            if i == j:
                raise PoissonError(f"diagonal bivector entry {key!r}")
            f = _field(expr, variables)
            pi[i, j], pi[j, i] = f, -f
        return pi
    if np.shape(spec)[:2] != (m, m):
        raise PoissonError(f"bivector must be {m}x{m}")
    for i, j in np.ndindex(m, m):
        pi[i, j] = _field(spec[i][j], variables)
    return pi


def _twist_from(spec, variables) -> np.ndarray:
    m = len(variables)
    phi = np.empty((m, m, m), dtype=object)
    zero = constant(0.0, variables)
    if isinstance(spec, Mapping):
        phi[:] = zero
        for key, expr in spec.items():
            idx = tuple(_index(k, variables) for k in (key.split() if isinstance(key, str) else key))
            if len(set(idx)) != 3:
                raise PoissonError(f"3-form entry {key!r} needs three distinct indices")
            f = _field(expr, variables)
            for perm in itertools.permutations(range(3)):
                sign = _perm_sign(perm)
                phi[tuple(idx[p] for p in perm)] = f if sign > 0 else -f
        return phi
    if np.shape(spec)[:3] != (m, m, m):
        raise PoissonError(f"twist must be {m}x{m}x{m}")
    for idx in np.ndindex(m, m, m):
        phi[idx] = _field(spec[idx[0]][idx[1]][idx[2]], variables)
    return phi


def _perm_sign(perm) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


def make_poisson(variables: Sequence[str], bivector, chart_box, twist=None, name: str = "",
                 step: float = DEFAULT_STEP) -> PoissonChart:
    """Build a chart from a full matrix or a sparse ``{"x1 x2": expr}`` bracket table.

    The twist, if given, is a full ``m x m x m`` array or a sparse
    ``{"x1 x3 x4": expr}`` table completed by antisymmetry.  Antisymmetry of
    the bivector and closedness of the twist are verified on sample points.
    """
    variables = tuple(variables)
    box = as_box(chart_box, len(variables))
    pi = _bivector_from(bivector, variables)
    phi = None if twist is None else _twist_from(twist, variables)
    P = PoissonChart(variables, pi, box, phi, name, step)
    pts = halton_points(box, 32)
    p = P.pi_at(pts)
    asym = float(np.max(np.abs(p + np.swapaxes(p, 1, 2))))
    if asym > ANTISYMMETRY_TOL:
        raise PoissonError(f"bivector not antisymmetric (max |pi + pi^T| = {asym:.3e})")
    if phi is not None:
        t = P.phi_at(pts)
        asym = max(float(np.max(np.abs(t + np.swapaxes(t, 1, 2)))),
                   float(np.max(np.abs(t + np.swapaxes(t, 2, 3)))))
        if asym > ANTISYMMETRY_TOL:
            raise PoissonError(f"twist not antisymmetric ({asym:.3e})")
        closed = twist_closedness(P, pts)
        if closed > CLOSEDNESS_TOL:
            raise PoissonError(f"twist is not closed (max |d phi| = {closed:.3e})")
    return P


def twist_closedness(P: PoissonChart, points) -> float:
    """Max |(d phi)_{abcd}| over index quadruples a<b<c<d."""
    if P.twist is None or P.m < 4:
        return 0.0
    dphi = grad_fields(P.twist, points, P.step)  # (K, a, b, c, l) = d_l phi_abc
    worst = 0.0
    for a, b, c, d in itertools.combinations(range(P.m), 4):
        val = (dphi[:, b, c, d, a] - dphi[:, a, c, d, b]
               + dphi[:, a, b, d, c] - dphi[:, a, b, c, d])
        worst = max(worst, float(np.max(np.abs(val))))
    return worst


def from_twisted_symplectic(omega, variables: Sequence[str], chart_box, name: str = "",
                            step: float = DEFAULT_STEP) -> PoissonChart:
    """Twisted Poisson chart of a nondegenerate 2-form: ``pi = -omega^{-1}``, ``phi = d omega``.

    ``omega`` is a full antisymmetric matrix or a sparse ``{"x1 x2": expr}``
    table of ``omega(d_i, d_j)``.  The bivector is obtained by numerical matrix
    inversion at each evaluation point.
    """
    variables = tuple(variables)
    m = len(variables)
    om = _bivector_from(omega, variables)

    def inverse_entry(i, j):
        def func(*xs):
            pts = np.stack(np.broadcast_arrays(*xs), axis=-1)
            mat = eval_fields(om, pts.reshape(-1, m))
            return -np.linalg.inv(mat)[:, i, j].reshape(pts.shape[:-1])
        return native(func, variables, label=f"-inv(omega)[{i},{j}]")

    pi = [[inverse_entry(i, j) if i != j else constant(0.0, variables) for j in range(m)]
          for i in range(m)]
    phi = np.empty((m, m, m), dtype=object)
    for a, b, c in np.ndindex(m, m, m):
        phi[a, b, c] = (derivative_field(om[b, c], a, step)
                        + derivative_field(om[c, a], b, step)
                        + derivative_field(om[a, b], c, step))
    return PoissonChart(variables, np.array(pi, dtype=object), as_box(chart_box, m),
                        phi, name or "from-omega", step)


def untwisted(P: PoissonChart) -> PoissonChart:
    return PoissonChart(P.variables, P.bivector, P.chart_box, None, P.name, P.step)


def with_zero_twist(P: PoissonChart) -> PoissonChart:
    zero = constant(0.0, P.variables)
    phi = np.empty((P.m,) * 3, dtype=object)
    phi[:] = zero
    return PoissonChart(P.variables, P.bivector, P.chart_box, phi, P.name, P.step)


# ---------------------------------------------------------------------------
# Brackets and Jacobi
# ---------------------------------------------------------------------------


def _grad(f: ScalarField, pts, step) -> np.ndarray:
    return np.stack([gradient_component(f, i, pts, step) for i in range(pts.shape[-1])], axis=-1)


def poisson_bracket(P: PoissonChart, f: ScalarField, g: ScalarField, point):
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    out = np.einsum("kij,ki,kj->k", P.pi_at(pts), _grad(f, pts, P.step), _grad(g, pts, P.step))
    return float(out[0]) if np.ndim(point) == 1 else out


def bracket_field(P: PoissonChart, f: ScalarField, g: ScalarField) -> ScalarField:
    """``{f, g}`` as a field (derivatives by finite differences)."""
    total = constant(0.0, P.variables)
    for i, j in np.ndindex(P.m, P.m):
        pij = P.bivector[i, j]
        if pij.is_zero or not f.depends_on(P.variables[i]) or not g.depends_on(P.variables[j]):
            continue
        total = total + pij * derivative_field(f, i, P.step) * derivative_field(g, j, P.step)
    return total


def jacobiator(P: PoissonChart, points) -> np.ndarray:
    """``J^{ijk} = pi^{il} d_l pi^{jk} + cyclic``, shape (K, m, m, m)."""
    pi = P.pi_at(points)
    dpi = P.pi_grad(points)  # (K, j, k, l)
    t = np.einsum("kil,kjml->kijm", pi, dpi)
    return t + np.transpose(t, (0, 2, 3, 1)) + np.transpose(t, (0, 3, 1, 2))


def twist_term(P: PoissonChart, points) -> np.ndarray:
    """``pi^{ia} pi^{jb} pi^{kc} phi_{abc}``, shape (K, m, m, m)."""
    pi = P.pi_at(points)
    return np.einsum("kia,kjb,kmc,kabc->kijm", pi, pi, pi, P.phi_at(points))


def check_jacobi(P: PoissonChart, sample_points=None, tol: float = JACOBI_TOL,
                 samples: int = DEFAULT_SAMPLES) -> CheckReport:
    """Untwisted: max |J|.  Twisted: max |J - c * pi pi pi phi| with the calibrated ``c``."""
    pts = P.samples(samples) if sample_points is None else np.atleast_2d(sample_points)
    report = CheckReport(f"check_jacobi[{P.name or 'poisson'}]")
    triples = list(itertools.combinations(range(P.m), 3))

    def residuals(p):
        J = jacobiator(P, p)
        if not triples:
            return np.zeros((p.shape[0], 2))
        Jt = np.stack([J[:, i, j, k] for i, j, k in triples], axis=-1)
        out = [np.max(np.abs(Jt), axis=-1)]
        if P.twisted:
            T = twist_term(P, p)
            Tt = np.stack([T[:, i, j, k] for i, j, k in triples], axis=-1)
            out.append(np.max(np.abs(Jt - TWISTED_JACOBI_CONSTANT * Tt), axis=-1))
        else:
            out.append(out[0])
        return np.stack(out, axis=-1)

    values, used, flagged = _split_domain(residuals, pts)
    report.flagged_points = flagged
    if values is None:
        report.add("jacobi", float("nan"), tol)
        return report
    if P.twisted:
        report.add("twisted_jacobi", float(np.max(values[:, 1])), tol)
        report.add("untwisted_jacobi", float(np.max(values[:, 0])), tol, gating=False)
        report.details["twisted_jacobi_constant"] = TWISTED_JACOBI_CONSTANT
    else:
        report.add("jacobi", float(np.max(values[:, 0])), tol)
    report.details["sample_points"] = int(len(used))
    return report


# ---------------------------------------------------------------------------
# Constructions
# ---------------------------------------------------------------------------


def dualize(A: AlgebroidChart, fiber_names: Sequence[str] | None = None, fiber_box=None,
            name: str = "") -> PoissonChart:
    """Poisson chart on A* with ``{alpha^mu, alpha^nu} = alpha^s f^{mu nu}_s``,
    ``{alpha^mu, b^i} = rho^{mu i}`` and ``{b^i, b^j} = 0``."""
    n, r = A.n, A.r
    fiber_names = tuple(fiber_names) if fiber_names else tuple(f"alpha{mu + 1}" for mu in range(r))
    if len(fiber_names) != r or set(fiber_names) & set(A.variables):
        raise PoissonError(f"fiber coordinate names {fiber_names} clash or have wrong length")
    variables = tuple(A.variables) + fiber_names
    zero = constant(0.0, variables)
    alpha = [parse_expr(a, variables) for a in fiber_names]
    m = n + r
    pi = np.empty((m, m), dtype=object)
    pi[:] = zero
    for mu in range(r):
        for i in range(n):
            rho = A.anchor[mu, i].with_variables(variables)
            pi[n + mu, i], pi[i, n + mu] = rho, -rho
        for nu in range(r):
            total = zero
            for s in range(r):
                f = A.structure[mu, nu, s]
                if not f.is_zero:
                    total = total + alpha[s] * f.with_variables(variables)
            pi[n + mu, n + nu] = total
    fiber_box = [[-1.0, 1.0]] * r if fiber_box is None else fiber_box
    box = np.vstack([A.chart_box, np.asarray(fiber_box, dtype=float)])
    return PoissonChart(variables, pi, box, None, name or f"dual({A.name})", A.step)


def cotangent_algebroid(P: PoissonChart, name: str = "", check: bool = True) -> AlgebroidChart:
    """Cotangent algebroid: anchor ``pi^{ri}``, structure ``d_k pi^{rs}`` (+ twist term).

    With a twist the structure functions gain ``pi^{ra} pi^{sb} phi_{abk}``,
    the coordinate form of the correction in ``[df, dg] = d{f,g} + i i phi``.
    """
    if P.twisted and check:
        rep = check_jacobi(P)
        if not rep.passed:
            raise PoissonError(f"twisted Jacobi identity fails: {rep['twisted_jacobi']:.3e}")
    m = P.m
    structure = np.empty((m, m, m), dtype=object)
    for r_, s, k in np.ndindex(m, m, m):
        f = derivative_field(P.bivector[r_, s], k, P.step)
        if P.twisted:
            for a, b in np.ndindex(m, m):
                pra, psb, phi = P.bivector[r_, a], P.bivector[s, b], P.twist[a, b, k]
                if pra.is_zero or psb.is_zero or phi.is_zero:
                    continue
                f = f + pra * psb * phi
        structure[r_, s, k] = f
    return make_algebroid(m, m, P.bivector, structure, P.chart_box, P.variables,
                          name=name or f"T*({P.name})", step=P.step)


def twisted_koszul_bracket(P: PoissonChart, f: ScalarField, g: ScalarField, point) -> np.ndarray:
    """Components of ``[df, dg] = d{f,g} + phi(pi# df, pi# dg, .)``."""
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    out = _grad(bracket_field(P, f, g), pts, P.step)
    if P.twisted:
        pi = P.pi_at(pts)
        hf = np.einsum("ki,kia->ka", _grad(f, pts, P.step), pi)
        hg = np.einsum("ki,kia->ka", _grad(g, pts, P.step), pi)
        out = out + np.einsum("kabc,ka,kb->kc", P.phi_at(pts), hf, hg)
    return out[0] if np.ndim(point) == 1 else out


def canonical_form(m: int) -> np.ndarray:
    """Matrix of ``dp_i ^ dx^i`` in coordinates ``(x, p)``."""
    w = np.zeros((2 * m, 2 * m))
    w[m:, :m] = np.eye(m)
    w[:m, m:] = -np.eye(m)
    return w


def twisted_cotangent_form(P: PoissonChart, point: CotangentPoint) -> np.ndarray:
    """Matrix of ``omega + omega_hat`` on T*M at ``(x, p)``.

    ``omega_hat(d_k, d_l) = p_i pi^{ij} phi_{jkl}``; it only touches the x-x block.
    """
    m = P.m
    x = np.asarray(point.base, dtype=float)
    p = np.asarray(point.momentum, dtype=float)
    w = canonical_form(m)
    if P.twisted:
        pi = P.pi_at(x)[0]
        phi = P.phi_at(x)[0]
        w[:m, :m] += np.einsum("i,ij,jkl->kl", p, pi, phi)
    return w


def pathspace_twist_form(P: PoissonChart, t, X, eta, xi1, e1, xi2, e2) -> float:
    """Trapezoid value of the twisted path-space form on two variations.

    ``int <e1, xi2> - <e2, xi1> dt + 1/2 int phi(pi#(X) eta, xi1, xi2) dt``.
    """
    t = np.asarray(t, dtype=float)
    arrays = [np.asarray(v, dtype=float) for v in (X, eta, xi1, e1, xi2, e2)]
    for v in arrays:
        if v.shape != (len(t), P.m):
            raise PoissonError(f"grid mismatch: expected ({len(t)}, {P.m}), got {v.shape}")
    X, eta, xi1, e1, xi2, e2 = arrays
    integrand = np.einsum("ki,ki->k", e1, xi2) - np.einsum("ki,ki->k", e2, xi1)
    if P.twisted:
        u = np.einsum("ki,kia->ka", eta, P.pi_at(X))
        integrand = integrand + 0.5 * np.einsum("kabc,ka,kb,kc->k", P.phi_at(X), u, xi1, xi2)
    return float(np.trapezoid(integrand, t))

"""Coisotropic submanifolds in adapted coordinates and their conormal algebroids.

A submanifold is the common zero set of its transversal coordinates.  By
default these are the last ``codim`` coordinates; an explicit index list may be
given instead, which is only a relabelling of the chart.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .algebroid import AlgebroidChart, make_algebroid
from .expr import derivative_field, restrict
from .poisson import PoissonChart, PoissonError, check_jacobi
from .report import CheckReport
from .sampling import DEFAULT_SAMPLES, halton_points

DEFAULT_TOL = 1e-7
CONORMAL_DRAWS = 8


class CoisotropyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AdaptedSubmanifold:
    ambient: PoissonChart
    codim: int
    transversal: tuple = ()
    name: str = ""

    def __post_init__(self):
        m = self.ambient.m
        if not 0 < self.codim <= m:
            raise CoisotropyError(f"codimension must be in 1..{m}, got {self.codim}")
        trans = tuple(int(i) for i in self.transversal) or tuple(range(m - self.codim, m))
        if len(trans) != self.codim or len(set(trans)) != self.codim or not all(0 <= i < m for i in trans):
            raise CoisotropyError(f"bad transversal indices {self.transversal!r}")
        box = self.ambient.chart_box
        for i in trans:
            if not box[i, 0] <= 0.0 <= box[i, 1]:
                raise CoisotropyError(f"submanifold misses the chart box along {self.ambient.variables[i]}")
        object.__setattr__(self, "transversal", trans)

    @property
    def tangential(self) -> tuple:
        return tuple(i for i in range(self.ambient.m) if i not in self.transversal)

    @property
    def tangential_names(self) -> tuple:
        return tuple(self.ambient.variables[i] for i in self.tangential)

    def sample_points(self, count: int = DEFAULT_SAMPLES) -> np.ndarray:
        pts = np.zeros((count, self.ambient.m))
        if self.tangential:
            pts[:, self.tangential] = halton_points(self.ambient.chart_box[list(self.tangential)], count)
        return pts

    def require_on(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[-1] != self.ambient.m:
            raise CoisotropyError(f"points must have {self.ambient.m} coordinates")
        off = np.abs(points[:, list(self.transversal)])
        if np.any(off != 0.0):
            raise CoisotropyError(f"sample points off the submanifold (max |x^mu| = {off.max():.3e})")
        return points

    def lift(self, tangential_points) -> np.ndarray:
        tp = np.atleast_2d(np.asarray(tangential_points, dtype=float))
        pts = np.zeros((tp.shape[0], self.ambient.m))
        pts[:, list(self.tangential)] = tp
        return pts


def zero_section(P: PoissonChart, fiber_rank: int, name: str = "zero-section") -> AdaptedSubmanifold:
    """The zero section ``{alpha = 0}`` of a dual chart built by ``dualize``."""
    return AdaptedSubmanifold(P, fiber_rank, name=name)


def _points(S: AdaptedSubmanifold, sample_points, samples: int) -> np.ndarray:
    if sample_points is None:
        return S.sample_points(samples)
    return S.require_on(sample_points)


def coisotropy_residual(P: PoissonChart, S: AdaptedSubmanifold, points) -> float:
    T = list(S.transversal)
    return float(np.max(np.abs(P.pi_at(points)[:, T][:, :, T]), initial=0.0))


def horizontality_residual(P: PoissonChart, S: AdaptedSubmanifold, points) -> np.ndarray:
    """Per-point max ``|pi^{mu l} phi_{l i j}|`` over transversal mu and tangential i, j."""
    if not P.twisted or not S.tangential:
        return np.zeros(len(points))
    T, L = list(S.transversal), list(S.tangential)
    h = np.einsum("kml,klij->kmij", P.pi_at(points)[:, T, :], P.phi_at(points)[:, :, L][:, :, :, L])
    return np.max(np.abs(h).reshape(len(points), -1), axis=1)


def tangential_derivative_residual(P: PoissonChart, S: AdaptedSubmanifold, points) -> float:
    """max ``|d_i pi^{mu nu}|`` over tangential i at points of C."""
    T, L = list(S.transversal), list(S.tangential)
    if not L:
        return 0.0
    dpi = P.pi_grad(points)[:, T][:, :, T][:, :, :, L]
    return float(np.max(np.abs(dpi), initial=0.0))


def check_coisotropic(P: PoissonChart, S: AdaptedSubmanifold, sample_points=None,
                      tol: float = DEFAULT_TOL, samples: int = DEFAULT_SAMPLES) -> CheckReport:
    pts = _points(S, sample_points, samples)
    report = CheckReport(f"check_coisotropic[{S.name or 'C'}]")
    report.add("coisotropy", coisotropy_residual(P, S, pts), tol)
    if P.twisted:
        report.add("horizontality", float(np.max(horizontality_residual(P, S, pts), initial=0.0)), tol)
    report.add("tangential_derivative", tangential_derivative_residual(P, S, pts), 10 * tol, gating=False)
    report.details["transversal"] = [P.variables[i] for i in S.transversal]
    report.details["sample_points"] = int(len(pts))
    return report


def conormal_algebroid(P: PoissonChart, S: AdaptedSubmanifold, check: bool = True,
                       tol: float = DEFAULT_TOL, name: str = "") -> AlgebroidChart:
    """Lie subalgebroid ``N*C`` of the cotangent algebroid, in the frame ``dx^mu``.

    Anchor ``pi^{mu i}|_C`` and structure ``f^{mu nu}_lam = d_lam pi^{mu nu}|_C``
    (plus ``pi^{mu a} pi^{nu b} phi_{a b lam}`` with a twist).  Restriction
    substitutes zero for the transversal coordinates after differentiation.
    """
    if check:
        rep = check_coisotropic(P, S, tol=tol)
        if rep.residuals["coisotropy"].value > tol:
            raise CoisotropyError(f"submanifold is not coisotropic: {rep['coisotropy']:.3e}")
        if P.twisted:
            jac = check_jacobi(P)
            if not jac.passed:
                raise PoissonError(f"twisted Jacobi identity fails: {jac['twisted_jacobi']:.3e}")
    T, L = S.transversal, S.tangential
    base = S.tangential_names
    if not base:
        raise CoisotropyError("a point submanifold has no conormal algebroid chart")
    fixed = {P.variables[i]: 0.0 for i in T}
    k, m = len(T), P.m

    def cut(field):
        return restrict(field, fixed, base)

    anchor = [[cut(P.bivector[mu, i]) for i in L] for mu in T]
    structure = np.empty((k, k, k), dtype=object)
    for (a, mu), (b, nu), (c, lam) in itertools.product(enumerate(T), repeat=3):
        f = derivative_field(P.bivector[mu, nu], lam, P.step)
        if P.twisted:
            for x, y in np.ndindex(m, m):
                pmx, pny, phi = P.bivector[mu, x], P.bivector[nu, y], P.twist[x, y, lam]
                if not (pmx.is_zero or pny.is_zero or phi.is_zero):
                    f = f + pmx * pny * phi
        structure[a, b, c] = cut(f)
    box = P.chart_box[list(L)]
    return make_algebroid(len(L), k, anchor, structure, box, base,
                          name=name or f"N*({S.name or 'C'})", step=P.step)


def check_conormal_lagrangian_twisted(P: PoissonChart, S: AdaptedSubmanifold, sample_points=None,
                                      tol: float = DEFAULT_TOL, samples: int = 16,
                                      draws: int = CONORMAL_DRAWS, rng=None, momenta=None) -> CheckReport:
    """Is ``N*C`` Lagrangian for the twisted cotangent form, and does that match horizontality?

    The tangent space of ``N*C`` at ``(x, p)`` is spanned by ``d/dx^i`` (tangential)
    and ``d/dp_mu`` (transversal); ``omega_hat`` is linear in ``p``, so a few
    random unit conormal momenta per point suffice.  ``momenta`` (rows of
    transversal components) replaces the random draws.
    """
    if not P.twisted:
        raise PoissonError("check_conormal_lagrangian_twisted needs a twist")
    from .poisson import CotangentPoint, twisted_cotangent_form

    rng = np.random.default_rng(0) if rng is None else rng
    pts = _points(S, sample_points, samples)
    m = P.m
    T, L = list(S.transversal), list(S.tangential)
    basis = np.zeros((len(L) + len(T), 2 * m))
    for row, i in enumerate(L):
        basis[row, i] = 1.0
    for row, mu in enumerate(T, start=len(L)):
        basis[row, m + mu] = 1.0
    if momenta is None:
        d = rng.standard_normal((len(pts), draws, len(T)))
        momenta = d / np.linalg.norm(d, axis=-1, keepdims=True)
    else:
        momenta = np.broadcast_to(np.asarray(momenta, dtype=float).reshape(1, -1, len(T)),
                                  (len(pts), np.size(momenta) // len(T), len(T)))
    lag = np.zeros(len(pts))
    for k, x in enumerate(pts):
        for q in momenta[k]:
            p = np.zeros(m)
            p[T] = q
            w = twisted_cotangent_form(P, CotangentPoint(x, p))
            lag[k] = max(lag[k], float(np.max(np.abs(basis @ w @ basis.T))))
    hor = horizontality_residual(P, S, pts)
    agree = np.equal(lag <= tol, hor <= tol)
    report = CheckReport(f"check_conormal_lagrangian_twisted[{S.name or 'C'}]")
    report.add("lagrangian", float(lag.max(initial=0.0)), tol)
    report.add("horizontality", float(hor.max(initial=0.0)), tol, gating=False)
    report.details["verdicts_agree"] = bool(agree.all())
    report.details["disagreeing_points"] = int(np.count_nonzero(~agree))
    report.details["sample_points"] = int(len(pts))
    report.details["momenta_per_point"] = int(momenta.shape[1])
    return report

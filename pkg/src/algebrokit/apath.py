"""Discretized A-paths, homotopy-foliation flows and path plumbing.

A path is sampled on one or more uniform segments of ``[0, 1]``.  A fresh path
has one segment; ``concat`` juxtaposes segments and keeps both samples at the
junction, so a jump of the density ``a`` there is represented faithfully.
All t-derivatives are taken segment by segment.

The same container holds cotangent paths ``(X, eta)`` of a Poisson chart; in
that case the anchor is ``pi^{ri}`` (the cotangent algebroid anchor).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebroid import AlgebroidChart
from .coiso import AdaptedSubmanifold
from .poisson import PoissonChart
from .report import CheckReport
from .sampling import in_box

COMPOSABLE_TOL = 1e-9
DEFAULT_DRIFT_ABORT = 1e-3
MIN_INTERVALS = 4


class APathError(ValueError):
    pass


class ChartExitError(APathError):
    pass


class DriftError(APathError):
    pass


def _grid(segments) -> np.ndarray:
    parts = [start + (stop - start) * (np.arange(n + 1) / n) for start, stop, n in segments]
    return np.concatenate(parts)


@dataclass(frozen=True, eq=False)
class APath:
    """Samples ``X`` (base curve) and ``a`` (density of the fiber 1-form) on a grid."""

    algebroid: AlgebroidChart | PoissonChart
    X: np.ndarray
    a: np.ndarray
    segments: tuple = ()

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        a = np.array(self.a, dtype=float, copy=True)
        if X.ndim != 2 or a.ndim != 2 or len(X) != len(a):
            raise APathError(f"X and a must be 2-d with equal length, got {X.shape} and {a.shape}")
        segs = tuple((float(s), float(e), int(n)) for s, e, n in self.segments) or ((0.0, 1.0, len(X) - 1),)
        if sum(n + 1 for _, _, n in segs) != len(X) or any(n < 1 for *_, n in segs):
            raise APathError("segment sizes do not match the number of samples")
        n, r = _dims(self.algebroid)
        if X.shape[1] != n or a.shape[1] != r:
            raise APathError(f"expected X with {n} and a with {r} columns, got {X.shape[1]} and {a.shape[1]}")
        X.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "segments", segs)

    @property
    def t(self) -> np.ndarray:
        return _grid(self.segments)

    @property
    def N(self) -> int:
        return sum(n for *_, n in self.segments)

    def slices(self):
        """Per-segment ``(slice, step)`` pairs."""
        out, k = [], 0
        for start, stop, n in self.segments:
            out.append((slice(k, k + n + 1), (stop - start) / n))
            k += n + 1
        return out

    def replace(self, X=None, a=None) -> "APath":
        return APath(self.algebroid, self.X if X is None else X, self.a if a is None else a, self.segments)


def _dims(chart) -> tuple[int, int]:
    if isinstance(chart, PoissonChart):
        return chart.m, chart.m
    return chart.n, chart.r


def _anchor_at(chart, X) -> np.ndarray:
    return chart.pi_at(X) if isinstance(chart, PoissonChart) else chart.anchor_at(X)


def path_from_samples(chart, X, a) -> APath:
    return APath(chart, X, a)


def constant_path(chart, x0, N: int) -> APath:
    n, r = _dims(chart)
    return APath(chart, np.tile(np.asarray(x0, dtype=float), (N + 1, 1)), np.zeros((N + 1, r)))


# ---------------------------------------------------------------------------
# Finite differences along t
# ---------------------------------------------------------------------------


def diff2(f: np.ndarray, h: float) -> np.ndarray:
    """Second-order derivative along axis 0 (one-sided at the ends)."""
    d = np.empty_like(f)
    if len(f) < 3:
        d[:] = (f[-1] - f[0]) / (h * (len(f) - 1))
        return d
    d[1:-1] = (f[2:] - f[:-2]) / (2 * h)
    d[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
    d[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
    return d


_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def diff4(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order derivative along axis 0 (one-sided stencils near the ends)."""
    if len(f) < MIN_INTERVALS + 1:
        raise APathError(f"need at least {MIN_INTERVALS} intervals per segment")
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / 12.0
    d[0] = np.tensordot(_EDGE0, f[:5], axes=1)
    d[1] = np.tensordot(_EDGE1, f[:5], axes=1)
    d[-1] = -np.tensordot(_EDGE0, f[::-1][:5], axes=1)
    d[-2] = -np.tensordot(_EDGE1, f[::-1][:5], axes=1)
    return d / h


def per_segment(path: APath, func, arr: np.ndarray) -> np.ndarray:
    out = np.empty_like(arr)
    for sl, h in path.slices():
        out[sl] = func(arr[sl], h)
    return out


def midpoints(f: np.ndarray) -> np.ndarray:
    """Cubic interpolation of samples to interval midpoints (length ``len(f) - 1``)."""
    if len(f) < 4:
        return 0.5 * (f[1:] + f[:-1])
    mid = np.empty((len(f) - 1,) + f.shape[1:])
    mid[1:-1] = (-f[:-3] + 9 * f[1:-2] + 9 * f[2:-1] - f[3:]) / 16.0
    mid[0] = (5 * f[0] + 15 * f[1] - 5 * f[2] + f[3]) / 16.0
    mid[-1] = (5 * f[-1] + 15 * f[-2] - 5 * f[-3] + f[-4]) / 16.0
    return mid


# ---------------------------------------------------------------------------
# Constraint and integration
# ---------------------------------------------------------------------------


def constraint_defect(path: APath, order: int = 2) -> np.ndarray:
    """Per-sample ``dX/dt - rho(X)^T a`` with second- (default) or fourth-order differences."""
    if order not in (2, 4):
        raise APathError(f"difference order must be 2 or 4, got {order}")
    dX = per_segment(path, diff2 if order == 2 else diff4, path.X)
    return dX - np.einsum("kmi,km->ki", _anchor_at(path.algebroid, path.X), path.a)


def constraint_residual(path: APath, order: int = 2) -> float:
    return float(np.max(np.abs(constraint_defect(path, order)), initial=0.0))


def integrate_apath(chart, X0, a_profile: Callable, N: int, check_box: bool = True) -> APath:
    """Solve ``dX/dt = rho(X)^T a(t)`` on ``[0, 1]`` with classical RK4.

    ``a_profile`` maps an array of times ``(K,)`` to densities ``(K, r)``.
    """
    n, r = _dims(chart)
    X0 = np.asarray(X0, dtype=float)
    if X0.shape != (n,):
        raise APathError(f"X0 must have {n} components")
    if check_box and not in_box(chart.chart_box, X0[None])[0]:
        raise ChartExitError(f"X0 = {X0.tolist()} lies outside the chart box")
    t = _grid(((0.0, 1.0, N),))
    h = 1.0 / N
    a = np.asarray(a_profile(t), dtype=float).reshape(N + 1, r)
    am = np.asarray(a_profile(t[:-1] + 0.5 * h), dtype=float).reshape(N, r)

    def rhs(x, av):
        return np.einsum("mi,m->i", _anchor_at(chart, x)[0], av)

    X = np.empty((N + 1, n))
    X[0] = X0
    for k in range(N):
        x = X[k]
        k1 = rhs(x, a[k])
        k2 = rhs(x + 0.5 * h * k1, am[k])
        k3 = rhs(x + 0.5 * h * k2, am[k])
        k4 = rhs(x + h * k3, a[k + 1])
        X[k + 1] = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if check_box and not in_box(chart.chart_box, X[k + 1][None])[0]:
            raise ChartExitError(f"trajectory leaves the chart box at t = {t[k + 1]:.6g}")
    return APath(chart, X, a)


# ---------------------------------------------------------------------------
# Homotopy drivers and flows
# ---------------------------------------------------------------------------


def polynomial_profile(t):
    return t * (1.0 - t)


def bump_profile(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0.0) & (t < 1.0)
    ti = t[inside]
    out[inside] = np.exp(4.0 - 1.0 / (ti * (1.0 - ti)))
    return out


PROFILES = {"polynomial": polynomial_profile, "bump": bump_profile}


@dataclass(frozen=True, eq=False)
class HomotopyDriver:
    """Section ``b(t, s)`` (and optionally ``beta(t, s)``) vanishing at ``t = 0, 1``.

    ``b_raw`` and ``beta_raw`` map ``(t array, s)`` to ``(K, r)`` / ``(K, n)``;
    the profile factor enforces the boundary zeros exactly.
    """

    b_raw: Callable
    beta_raw: Callable | None = None
    s_steps: int = 100
    s_stepsize: float | None = None
    profile: str = "polynomial"

    def __post_init__(self):
        if self.s_steps < 1:
            raise APathError("s_steps must be positive")
        if self.profile not in PROFILES:
            raise APathError(f"unknown profile {self.profile!r}")

    @property
    def ds(self) -> float:
        return self.s_stepsize if self.s_stepsize is not None else 1.0 / self.s_steps

    def b(self, t, s) -> np.ndarray:
        return PROFILES[self.profile](t)[:, None] * np.asarray(self.b_raw(t, s), dtype=float)

    def beta(self, t, s, n: int) -> np.ndarray:
        if self.beta_raw is None:
            return np.zeros((len(t), n))
        return PROFILES[self.profile](t)[:, None] * np.asarray(self.beta_raw(t, s), dtype=float)

    def refined(self) -> "HomotopyDriver":
        """Same driver with half the s-step (twice as many steps)."""
        return HomotopyDriver(self.b_raw, self.beta_raw, 2 * self.s_steps, 0.5 * self.ds, self.profile)


def zero_driver(r: int, s_steps: int = 1) -> HomotopyDriver:
    return HomotopyDriver(lambda t, s: np.zeros((len(t), r)), s_steps=s_steps)


def random_driver(rng, r: int, n: int | None = None, modes: int = 3, amplitude: float = 1.0,
                  s_steps: int = 100, profile: str = "polynomial") -> HomotopyDriver:
    """Smooth random driver: sine modes in t with mildly s-dependent amplitudes."""
    cb = rng.uniform(-1, 1, (modes, r)) * amplitude / modes
    db = rng.uniform(-0.5, 0.5, (modes, r))
    k = np.arange(1, modes + 1)

    def b_raw(t, s):
        return np.sin(np.pi * np.outer(t, k)) @ (cb * (1.0 + s * db))

    beta_raw = None
    if n is not None:
        cq = rng.uniform(-1, 1, (modes, n)) * amplitude / modes

        def beta_raw(t, s):
            return np.cos(np.pi * np.outer(t, k)) @ cq * (1.0 + 0.5 * s)

    return HomotopyDriver(b_raw, beta_raw, s_steps, None, profile)


def homotopy_field(path: APath, X, a, b) -> tuple[np.ndarray, np.ndarray]:
    """``dX = -rho^{mu i} b_mu``, ``da_mu = -D_t b_mu - f^{nu sig}_mu a_nu b_sig``."""
    A = path.algebroid
    dX = -np.einsum("kmi,km->ki", A.anchor_at(X), b)
    db = per_segment(path, diff4, b)
    da = -db - np.einsum("kvsm,kv,ks->km", A.structure_at(X), a, b)
    return dX, da


def _rk4(state, field_fn, s, ds):
    k1 = field_fn(state, s)
    k2 = field_fn([x + 0.5 * ds * k for x, k in zip(state, k1)], s + 0.5 * ds)
    k3 = field_fn([x + 0.5 * ds * k for x, k in zip(state, k2)], s + 0.5 * ds)
    k4 = field_fn([x + ds * k for x, k in zip(state, k3)], s + ds)
    return [x + ds / 6.0 * (p + 2 * q + 2 * u + v) for x, p, q, u, v in zip(state, k1, k2, k3, k4)]


@dataclass
class FlowHistory:
    residuals: list = field(default_factory=list)


def homotopy_flow(path: APath, driver: HomotopyDriver, drift_abort: float = DEFAULT_DRIFT_ABORT,
                  tol_in: float | None = None, history: FlowHistory | None = None) -> APath:
    """Evolve an A-path along the restricted homotopy foliation by RK4 in ``s``."""
    A = path.algebroid
    if not isinstance(A, AlgebroidChart):
        raise APathError("homotopy_flow needs a path over an algebroid chart")
    start = constraint_residual(path)
    if tol_in is not None and start > tol_in:
        raise APathError(f"input path violates the constraint ({start:.3e} > {tol_in:.3e})")
    t = path.t
    X, a = path.X.copy(), path.a.copy()
    ds = driver.ds

    def fn(state, s):
        return list(homotopy_field(path, state[0], state[1], driver.b(t, s)))

    for step in range(driver.s_steps):
        X, a = _rk4([X, a], fn, step * ds, ds)
        if not np.all(in_box(A.chart_box, X)):
            raise ChartExitError(f"flow leaves the chart box at s-step {step + 1}")
        res = constraint_residual(path.replace(X, a))
        if history is not None:
            history.residuals.append(res)
        if res > drift_abort:
            raise DriftError(f"constraint drift {res:.3e} above {drift_abort:.3e} at s-step {step + 1}")
    return path.replace(X, a)


# ---------------------------------------------------------------------------
# The lifted system on T*P(A*) and the Poisson foliation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LiftedPath:
    """Samples of ``(X, alpha, eta, a)`` on the grid of ``base``."""

    base: APath
    alpha: np.ndarray
    eta: np.ndarray

    @property
    def X(self):
        return self.base.X

    @property
    def a(self):
        return self.base.a


def lift_path(path: APath, alpha=None, eta=None) -> LiftedPath:
    A = path.algebroid
    K = len(path.X)
    alpha = np.zeros((K, A.r)) if alpha is None else np.asarray(alpha, dtype=float)
    eta = np.zeros((K, A.n)) if eta is None else np.asarray(eta, dtype=float)
    if alpha.shape != (K, A.r) or eta.shape != (K, A.n):
        raise APathError("alpha/eta arrays do not match the grid")
    return LiftedPath(path, alpha, eta)


def full_foliation_field(path: APath, X, alpha, eta, a, beta, b):
    """The four variations of the lifted foliation, evaluated sample by sample.

    ``dX^i = -rho^{mu i} b_mu``
    ``dalpha^mu = rho^{mu i} beta_i + alpha^s f^{mu nu}_s b_nu``
    ``deta_i = -D beta_i - alpha^s d_i f^{mu nu}_s a_mu b_nu - d_i rho^{mu j}(a_mu beta_j - eta_j b_mu)``
    ``da_mu = -D b_mu - f^{nu s}_mu a_nu b_s``
    """
    A = path.algebroid
    rho = A.anchor_at(X)
    f = A.structure_at(X)
    drho = A.anchor_grad(X)  # (K, mu, j, i)
    df = A.structure_grad(X)  # (K, mu, nu, s, i)
    dX = -np.einsum("kmi,km->ki", rho, b)
    dalpha = np.einsum("kmi,ki->km", rho, beta) + np.einsum("ks,kmns,kn->km", alpha, f, b)
    deta = (-per_segment(path, diff4, beta)
            - np.einsum("ks,kmnsi,km,kn->ki", alpha, df, a, b)
            - np.einsum("kmji,km,kj->ki", drho, a, beta)
            + np.einsum("kmji,kj,km->ki", drho, eta, b))
    da = -per_segment(path, diff4, b) - np.einsum("kvsm,kv,ks->km", f, a, b)
    return dX, dalpha, deta, da


def full_flow(lifted: LiftedPath, driver: HomotopyDriver, history: list | None = None) -> LiftedPath:
    """RK4 in ``s`` of the full lifted foliation.  ``history`` collects max |alpha|, |eta|."""
    path = lifted.base
    A = path.algebroid
    t = path.t

    def fn(state, s):
        X, alpha, eta, a = state
        return list(full_foliation_field(path, X, alpha, eta, a, driver.beta(t, s, A.n), driver.b(t, s)))

    state = [path.X.copy(), lifted.alpha.copy(), lifted.eta.copy(), path.a.copy()]
    ds = driver.ds
    for step in range(driver.s_steps):
        state = _rk4(state, fn, step * ds, ds)
        if not np.all(in_box(A.chart_box, state[0])):
            raise ChartExitError(f"flow leaves the chart box at s-step {step + 1}")
        if history is not None:
            history.append(max(float(np.max(np.abs(state[1]), initial=0.0)),
                               float(np.max(np.abs(state[2]), initial=0.0))))
    X, alpha, eta, a = state
    return LiftedPath(path.replace(X, a), alpha, eta)


def poisson_foliation_field(path: APath, X, eta, C):
    """``dX^I = -C_J pi^{JI}``, ``deta_I = -D C_I - d_I pi^{SR} C_R eta_S``."""
    P = path.algebroid
    pi = P.pi_at(X)
    dpi = P.pi_grad(X)  # (K, S, R, I)
    dX = -np.einsum("kj,kji->ki", C, pi)
    deta = -per_segment(path, diff4, C) - np.einsum("ksri,kr,ks->ki", dpi, C, eta)
    return dX, deta


def poisson_flow(path: APath, C_fn: Callable, s_steps: int, ds: float,
                 drift_abort: float = DEFAULT_DRIFT_ABORT) -> APath:
    P = path.algebroid
    if not isinstance(P, PoissonChart):
        raise APathError("poisson_flow needs a cotangent path of a Poisson chart")

    def fn(state, s):
        return list(poisson_foliation_field(path, state[0], state[1], C_fn(s)))

    X, eta = path.X.copy(), path.a.copy()
    for step in range(s_steps):
        X, eta = _rk4([X, eta], fn, step * ds, ds)
        if not np.all(in_box(P.chart_box, X)):
            raise ChartExitError(f"flow leaves the chart box at s-step {step + 1}")
        res = constraint_residual(path.replace(X, eta))
        if res > drift_abort:
            raise DriftError(f"constraint drift {res:.3e} above {drift_abort:.3e} at s-step {step + 1}")
    return path.replace(X, eta)


def membership_L(path: APath, S: AdaptedSubmanifold, tol: float = 1e-9) -> CheckReport:
    """Distance of a cotangent path from ``L(C)``: transversal ``X`` and tangential ``eta``."""
    T, L = list(S.transversal), list(S.tangential)
    report = CheckReport(f"membership_L[{S.name or 'C'}]")
    report.add("transversal_X", float(np.max(np.abs(path.X[:, T]), initial=0.0)), tol)
    report.add("tangential_eta", float(np.max(np.abs(path.a[:, L]), initial=0.0)), tol)
    return report


def coiso_restricted_flow(path: APath, S: AdaptedSubmanifold, driver: HomotopyDriver,
                          tol: float = 1e-9, drift_abort: float = DEFAULT_DRIFT_ABORT) -> APath:
    """Poisson foliation driven by ``C`` with tangential components zero.

    ``driver.b`` supplies the transversal components ``C_mu``.
    """
    P = path.algebroid
    if S.ambient is not P:
        raise APathError("path and submanifold live on different charts")
    mem = membership_L(path, S, tol)
    if not mem.passed:
        raise APathError(f"path is not in L(C): {mem.residuals}")
    t = path.t
    T = list(S.transversal)

    def C_fn(s):
        C = np.zeros((len(t), P.m))
        C[:, T] = driver.b(t, s)
        return C

    return poisson_flow(path, C_fn, driver.s_steps, driver.ds, drift_abort)


def embed_conormal_path(path: APath, S: AdaptedSubmanifold) -> APath:
    """Cotangent path on the ambient chart from a path of the conormal algebroid."""
    K = len(path.X)
    X = np.zeros((K, S.ambient.m))
    eta = np.zeros((K, S.ambient.m))
    X[:, list(S.tangential)] = path.X
    eta[:, list(S.transversal)] = path.a
    return APath(S.ambient, X, eta, path.segments)


def conormal_part(path: APath, S: AdaptedSubmanifold, chart: AlgebroidChart) -> APath:
    """Inverse of ``embed_conormal_path``: keep tangential ``X`` and transversal ``eta``."""
    return APath(chart, path.X[:, list(S.tangential)], path.a[:, list(S.transversal)], path.segments)


# ---------------------------------------------------------------------------
# Concatenation, inversion and serialization
# ---------------------------------------------------------------------------


def concat(p1: APath, p2: APath) -> APath:
    """``p1`` on ``[0, 1/2]`` then ``p2`` on ``[1/2, 1]``; densities doubled."""
    if p1.algebroid is not p2.algebroid:
        raise APathError("paths live on different charts")
    gap = float(np.max(np.abs(p1.X[-1] - p2.X[0])))
    if gap > COMPOSABLE_TOL:
        raise APathError(f"paths are not composable: |p1(1) - p2(0)| = {gap:.3e}")
    segs = tuple((0.5 * s, 0.5 * e, n) for s, e, n in p1.segments)
    segs += tuple((0.5 + 0.5 * s, 0.5 + 0.5 * e, n) for s, e, n in p2.segments)
    return APath(p1.algebroid, np.vstack([p1.X, p2.X]), 2.0 * np.vstack([p1.a, p2.a]), segs)


def invert(p: APath) -> APath:
    """``t -> 1 - t`` with the density negated."""
    segs = tuple((1.0 - e, 1.0 - s, n) for s, e, n in reversed(p.segments))
    return APath(p.algebroid, p.X[::-1], -p.a[::-1], segs)


def column_names(chart) -> list[str]:
    n, r = _dims(chart)
    if isinstance(chart, PoissonChart):
        return ["t"] + list(chart.variables) + [f"eta_{v}" for v in chart.variables]
    return ["t"] + list(chart.variables) + [f"a{mu + 1}" for mu in range(r)]


def format_path(path: APath) -> str:
    lines = [" ".join(column_names(path.algebroid))]
    for t, x, a in zip(path.t, path.X, path.a):
        lines.append(" ".join(repr(float(v)) for v in (t, *x, *a)))
    return "\n".join(lines) + "\n"


def write_path(path: APath, filename) -> None:
    with open(filename, "w", encoding="utf-8") as fh:
        fh.write(format_path(path))


def parse_path(text: str, chart) -> APath:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise APathError("empty path dump")
    names = lines[0].split()
    if names != column_names(chart):
        raise APathError(f"dump columns {names} do not match the chart {column_names(chart)}")
    rows = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    if rows.ndim != 2 or rows.shape[1] != len(names):
        raise APathError("malformed path dump rows")
    n, _ = _dims(chart)
    t = rows[:, 0]
    breaks = [0] + [k for k in range(1, len(t)) if t[k] == t[k - 1]] + [len(t)]
    segs = tuple((t[s], t[e - 1], e - s - 1) for s, e in zip(breaks[:-1], breaks[1:]))
    path = APath(chart, rows[:, 1:1 + n], rows[:, 1 + n:], segs)
    if not np.array_equal(path.t, t):
        raise APathError("time column is not a uniform segmented grid")
    return path


def read_path(filename, chart) -> APath:
    with open(filename, encoding="utf-8") as fh:
        return parse_path(fh.read(), chart)


def max_distance(p: APath, q: APath) -> float:
    return max(float(np.max(np.abs(p.X - q.X))), float(np.max(np.abs(p.a - q.a))))


def sample_profile(exprs: Sequence, variable: str = "t") -> Callable:
    """Vectorized ``t -> (K, r)`` profile from expression strings in ``t``."""
    from .expr import parse_expr

    fields = [parse_expr(e, (variable,)) if isinstance(e, str) else float(e) for e in exprs]

    def profile(t):
        t = np.asarray(t, dtype=float)
        cols = [f.evaluate_many(t[:, None]) if not isinstance(f, float) else np.full(len(t), f)
                for f in fields]
        return np.stack(cols, axis=-1)

    return profile


def random_profile(rng, r: int, modes: int = 3, amplitude: float = 0.5) -> Callable:
    """Smooth random density ``t -> (K, r)`` built from a few trigonometric modes."""
    c = rng.uniform(-1, 1, (modes, r)) * amplitude
    ph = rng.uniform(0, 2 * np.pi, (modes, r))
    k = np.arange(1, modes + 1)[:, None]

    def profile(t):
        t = np.asarray(t, dtype=float)
        return np.sum(c * np.cos(np.pi * k * t[:, None, None] + ph), axis=1)

    return profile


def random_path(chart, rng, x0=None, N: int = 1000, amplitude: float = 0.3) -> APath:
    n, r = _dims(chart)
    x0 = chart.chart_box.mean(axis=1) if x0 is None else x0
    return integrate_apath(chart, x0, random_profile(rng, r, amplitude=amplitude), N)

"""Batch front end: ``algebrokit run <config> [--out DIR] [--seed S] [--jobs-filter NAME]``.

Exit codes: 0 all jobs pass, 1 some check failed, 2 config error (nothing is
written), 3 some job raised at runtime (its report records the error).
"""

from __future__ import annotations

import argparse
import fnmatch
import json
import math
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import algebroid as alg
from . import apath as ap
from . import coiso as co
from . import groupoid as gr
from . import poisson as po
from .config import Config, ConfigError, Job, load_config, parse_config
from .expr import constant, parse_expr
from .report import CONVENTIONS, CheckReport

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
DEFAULT_BOX = [-1.0, 1.0]


# ---------------------------------------------------------------------------
# Object construction
# ---------------------------------------------------------------------------


def _box(spec, dim):
    box = spec.get("box")
    return np.array(box if box is not None else [DEFAULT_BOX] * dim, dtype=float)


def _sparse_structure(entries, r, variables):
    zero = constant(0.0, variables)
    f = np.empty((r, r, r), dtype=object)
    f[:] = zero
    for key, row in entries.items():
        mu, nu = (int(x) - 1 for x in str(key).split())
        for sig, expr in row.items():
            field = parse_expr(str(expr), variables)
            f[mu, nu, int(sig) - 1] = field
            f[nu, mu, int(sig) - 1] = -field
    return f


def _driver_callable(exprs):
    fields = [parse_expr(str(e), ("t", "s")) for e in exprs]

    def fn(t, s):
        pts = np.stack([t, np.full_like(t, s)], axis=-1)
        return np.stack([f.evaluate_many(pts) for f in fields], axis=-1)

    return fn


class Namespace:
    """Lazily built objects, plus constructions added by jobs."""

    def __init__(self, cfg: Config):
        self.cfg = cfg
        self.built: dict[str, object] = {}

    def __getitem__(self, name: str):
        if name not in self.built:
            self.built[name] = self._build(name, self.cfg.objects[name])
        return self.built[name]

    def __setitem__(self, name: str, value) -> None:
        self.built[name] = value

    def _build(self, name: str, spec: dict):
        kind = spec["type"]
        if kind == "lie_algebra":
            preset = spec.get("preset")
            if preset == "so3":
                return alg.so3()
            if preset == "sl2":
                return alg.sl2()
            r = spec["rank"]
            c = np.zeros((r, r, r))
            for key, val in spec["constants"].items():
                mu, nu, sig = (int(x) - 1 for x in str(key).split())
                c[mu, nu, sig] = val
                c[nu, mu, sig] = -val
            return alg.lie_algebra(c, name=name)
        if kind == "tangent":
            return alg.tangent_algebroid(spec["dim"], _box(spec, spec["dim"]))
        if kind == "zero":
            return alg.zero_algebroid(spec["dim"], spec["rank"], _box(spec, spec["dim"]))
        if kind == "algebroid":
            variables = tuple(spec["variables"])
            r = len(spec["anchor"])
            structure = spec.get("structure", {})
            if isinstance(structure, dict):
                structure = _sparse_structure(structure, r, variables)
            return alg.make_algebroid(len(variables), r, spec["anchor"], structure, _box(spec, len(variables)),
                                      variables, name=name)
        if kind == "poisson":
            variables = tuple(spec["variables"])
            if "form" in spec:
                return po.from_twisted_symplectic(spec["form"], variables, spec["box"], name=name)
            biv = spec.get("brackets", spec.get("bivector"))
            return po.make_poisson(variables, biv, spec["box"], twist=spec.get("twist"), name=name)
        if kind == "submanifold":
            P = self[spec["ambient"]]
            trans = spec.get("transversal")
            if trans is not None:
                idx = tuple(P.variables.index(v) for v in trans)
                return co.AdaptedSubmanifold(P, len(idx), idx, name=name)
            return co.AdaptedSubmanifold(P, spec["codim"], name=name)
        if kind == "rep":
            preset = spec.get("preset")
            if preset == "so3":
                return gr.so3_rep()
            if preset == "sl2":
                return gr.sl2_rep()
            return gr.MatrixRep(np.asarray(spec["images"], dtype=float))
        if kind == "driver":
            common = dict(s_steps=spec.get("s_steps", 100), profile=spec.get("profile", "polynomial"))
            if "random" in spec:
                opts = spec["random"] if isinstance(spec["random"], dict) else {}
                rng = np.random.default_rng([self.cfg.seed, opts.get("seed", 0)])
                d = ap.random_driver(rng, spec["rank"], modes=opts.get("modes", 3),
                                     amplitude=opts.get("amplitude", 1.0), **common)
            else:
                beta = spec.get("beta")
                d = ap.HomotopyDriver(_driver_callable(spec["b"]),
                                      None if beta is None else _driver_callable(beta), **common)
            if "s_stepsize" in spec:
                d = ap.HomotopyDriver(d.b_raw, d.beta_raw, d.s_steps, float(spec["s_stepsize"]), d.profile)
            return d
        if kind == "path":
            return build_path(self[spec["chart"]], spec, self.cfg.base_dir)
        raise AssertionError(kind)


def build_path(chart, spec: dict, base_dir: Path) -> ap.APath:
    if "file" in spec:
        return ap.read_path(base_dir / spec["file"], chart)
    return ap.integrate_apath(chart, spec["x0"], ap.sample_profile(spec["a"]), spec.get("N", 1000))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _merge(report: CheckReport, other: CheckReport, prefix: str = "") -> CheckReport:
    for key, res in other.residuals.items():
        report.add(prefix + key, res.value, res.tol, res.gating)
    report.flagged_points.extend(other.flagged_points)
    return report


def _cmd_check_algebroid(ns, job, rng, out_dir):
    p = job.params
    return alg.check_axioms(ns[p["algebroid"]], tol=p.get("tol", alg.DEFAULT_TOL), samples=p.get("samples", 64))


def _cmd_check_poisson(ns, job, rng, out_dir):
    p = job.params
    return po.check_jacobi(ns[p["poisson"]], tol=p.get("tol", po.JACOBI_TOL), samples=p.get("samples", 64))


def _cmd_dualize(ns, job, rng, out_dir):
    p = job.params
    D = po.dualize(ns[p["algebroid"]], p.get("fiber_names"), p.get("fiber_box"), name=p["output"])
    ns[p["output"]] = D
    report = _merge(CheckReport("dualize"), po.check_jacobi(D, tol=p.get("tol", po.JACOBI_TOL)))
    report.details["variables"] = list(D.variables)
    return report


def _cmd_cotangent(ns, job, rng, out_dir):
    p = job.params
    T = po.cotangent_algebroid(ns[p["poisson"]], name=p["output"])
    ns[p["output"]] = T
    return _merge(CheckReport("cotangent-algebroid"), alg.check_axioms(T, tol=p.get("tol", alg.DEFAULT_TOL)))


def _cmd_check_coisotropic(ns, job, rng, out_dir):
    p = job.params
    S = ns[p["submanifold"]]
    return co.check_coisotropic(S.ambient, S, tol=p.get("tol", co.DEFAULT_TOL), samples=p.get("samples", 64))


def _cmd_conormal(ns, job, rng, out_dir):
    p = job.params
    S = ns[p["submanifold"]]
    N = co.conormal_algebroid(S.ambient, S, tol=p.get("tol", co.DEFAULT_TOL), name=p["output"])
    ns[p["output"]] = N
    report = _merge(CheckReport("conormal"), alg.check_axioms(N, tol=p.get("tol", alg.DEFAULT_TOL)))
    if "compare_to" in p:
        da, df = alg.compare_algebroids(N, ns[p["compare_to"]])
        ctol = p.get("compare_tol", 1e-10)
        report.add("anchor_difference", da, ctol)
        report.add("structure_difference", df, ctol)
    report.details["base_variables"] = list(N.variables)
    return report


def _cmd_lagrangian(ns, job, rng, out_dir):
    p = job.params
    S = ns[p["submanifold"]]
    report = co.check_conormal_lagrangian_twisted(S.ambient, S, tol=p.get("tol", co.DEFAULT_TOL),
                                                  samples=p.get("samples", 16),
                                                  draws=p.get("draws", co.CONORMAL_DRAWS), rng=rng)
    report.add("verdict_disagreements", report.details["disagreeing_points"], 0.5)
    return report


def _cmd_integrate(ns, job, rng, out_dir):
    p = job.params
    N = p.get("N", 1000)
    path = ap.integrate_apath(ns[p["algebroid"]], p["x0"], ap.sample_profile(p["a"]), N)
    ns[p["output"]] = path
    report = CheckReport("integrate-apath")
    report.add("constraint", ap.constraint_residual(path), p.get("tol", 10.0 / N**2))
    report.details["endpoints"] = [path.X[0].tolist(), path.X[-1].tolist()]
    return report


def _cmd_homotopy_flow(ns, job, rng, out_dir):
    p = job.params
    path, driver = ns[p["path"]], ns[p["driver"]]
    hist = ap.FlowHistory()
    out = ap.homotopy_flow(path, driver, drift_abort=p.get("drift_abort", ap.DEFAULT_DRIFT_ABORT), history=hist)
    if p.get("output"):
        ns[p["output"]] = out
    report = CheckReport("homotopy-flow")
    report.add("constraint_after", ap.constraint_residual(out), p.get("tol", 1e-5))
    report.add("constraint_before", ap.constraint_residual(path), p.get("tol", 1e-5), gating=False)
    shift = max(float(np.max(np.abs(out.X[0] - path.X[0]))), float(np.max(np.abs(out.X[-1] - path.X[-1]))))
    report.add("endpoint_shift", shift, p.get("endpoint_tol", 1e-14))
    report.details["max_drift"] = max(hist.residuals, default=0.0)
    return report


def _cmd_full_foliation(ns, job, rng, out_dir):
    p = job.params
    path, driver = ns[p["path"]], ns[p["driver"]]
    restricted = ap.HomotopyDriver(driver.b_raw, None, driver.s_steps, driver.s_stepsize, driver.profile)
    hist: list = []
    lifted = ap.full_flow(ap.lift_path(path), restricted, history=hist)
    report = CheckReport("full-foliation-test")
    report.add("max_alpha_eta", max(hist, default=0.0), p.get("tol", 1e-10))
    ref = ap.homotopy_flow(path, restricted)
    report.add("restricted_agreement", ap.max_distance(ref, lifted.base), p.get("agreement_tol", 1e-12),
               gating=False)
    return report


def _cmd_coiso_identity(ns, job, rng, out_dir):
    p = job.params
    S, driver = ns[p["submanifold"]], ns[p["driver"]]
    N = co.conormal_algebroid(S.ambient, S)
    src = ns[p["path"]]
    path = ap.APath(N, src.X, src.a, src.segments)
    mtol = p.get("membership_tol", 1e-9)
    flowed = ap.homotopy_flow(path, driver)
    ambient = ap.coiso_restricted_flow(ap.embed_conormal_path(path, S), S, driver, tol=mtol)
    report = CheckReport("coiso-flow-identity")
    report.add("difference", ap.max_distance(flowed, ap.conormal_part(ambient, S, N)), p.get("tol", 1e-8))
    _merge(report, ap.membership_L(ambient, S, mtol), "after_")
    return report


def _cmd_invariant(ns, job, rng, out_dir):
    p = job.params
    path = ns[p["path"]]
    rep = ns[p["rep"]] if "rep" in p else None
    inv = gr.invariant_of(p["kind"], path, rep)
    report = CheckReport("groupoid-invariant")
    report.add("constraint", ap.constraint_residual(path), p.get("tol", 1e-5))
    report.details["invariant"] = inv.to_dict()
    return report


def _cmd_axiom_suite(ns, job, rng, out_dir):
    p = job.params
    kind = p["kind"]
    rep = ns[p["rep"]] if "rep" in p else None
    if "paths" in p:
        paths = [ns[q] for q in p["paths"]]
    else:
        A = ns[p["algebroid"]]
        N = p.get("N", 200)
        paths, x = [], None
        for _ in range(3):
            q = ap.random_path(A, rng, x, N, amplitude=p.get("amplitude", 0.3))
            paths.append(q)
            x = q.X[-1]
    invs = [gr.invariant_of(kind, q, rep) for q in paths]
    report = gr.axiom_suite(kind, *invs, tol=p.get("tol"))
    if report.residuals["precondition"].passed:
        tol = gr.AXIOM_TOL[kind] if p.get("tol") is None else p["tol"]
        u, v = paths[0], paths[1]
        uv = gr.invariant_of(kind, ap.concat(u, v), rep)
        iu = gr.invariant_of(kind, ap.invert(u), rep)
        report.add("concat_source", float(np.max(np.abs(uv.source - invs[1].source))), 0.0)
        report.add("concat_target", float(np.max(np.abs(uv.target - invs[0].target))), 0.0)
        report.add("concat_product", gr.distance(uv, gr.mul(invs[0], invs[1])), max(tol, 1e-9))
        report.add("invert_inverse", gr.distance(iu, gr.inv(invs[0])), max(tol, 1e-9))
    return report


def _cmd_invariance(ns, job, rng, out_dir):
    p = job.params
    path = ns[p["path"]]
    rep = ns[p["rep"]] if "rep" in p else None
    drivers = [ns[d] for d in p.get("drivers", [])]
    _, r = ap._dims(path.algebroid)
    for _ in range(p.get("random_drivers", 0)):
        drivers.append(ap.random_driver(rng, r, amplitude=p.get("amplitude", 1.0),
                                        s_steps=p.get("s_steps", 100), profile=p.get("profile", "bump")))
    return gr.homotopy_invariance_harness(path, drivers, p["kind"], rep, tol=p.get("tol"))


def _cmd_dump(ns, job, rng, out_dir):
    p = job.params
    path = ns[p["path"]]
    target = out_dir / p["file"]
    target.parent.mkdir(parents=True, exist_ok=True)
    ap.write_path(path, target)
    back = ap.read_path(target, path.algebroid)
    same = np.array_equal(back.X, path.X) and np.array_equal(back.a, path.a) and back.segments == path.segments
    report = CheckReport("dump-path")
    report.add("roundtrip_mismatch", 0.0 if same else 1.0, 0.5)
    report.details["file"] = p["file"]
    report.details["columns"] = ap.column_names(path.algebroid)
    return report


DISPATCH = {
    "check-algebroid": _cmd_check_algebroid,
    "check-poisson": _cmd_check_poisson,
    "dualize": _cmd_dualize,
    "cotangent-algebroid": _cmd_cotangent,
    "check-coisotropic": _cmd_check_coisotropic,
    "conormal": _cmd_conormal,
    "conormal-lagrangian-twisted": _cmd_lagrangian,
    "integrate-apath": _cmd_integrate,
    "homotopy-flow": _cmd_homotopy_flow,
    "full-foliation-test": _cmd_full_foliation,
    "coiso-flow-identity": _cmd_coiso_identity,
    "groupoid-invariant": _cmd_invariant,
    "axiom-suite": _cmd_axiom_suite,
    "homotopy-invariance": _cmd_invariance,
    "dump-path": _cmd_dump,
}


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def select_jobs(cfg: Config, pattern: str | None) -> list[Job]:
    if not pattern:
        return list(cfg.jobs)
    chosen = [j for j in cfg.jobs if fnmatch.fnmatchcase(j.id, pattern) or j.command == pattern]
    if not chosen:
        raise ConfigError(f"no job matches '{pattern}'")
    produced = {j.params.get("output"): j.id for j in cfg.jobs if j not in chosen and j.params.get("output")}
    for job in chosen:
        for key, val in job.params.items():
            names = val if isinstance(val, list) else [val]
            for name in names:
                if isinstance(name, str) and name in produced and key not in ("output", "file"):
                    raise ConfigError(f"job '{job.id}' needs '{name}', produced by unselected job '{produced[name]}'")
    return chosen


def run_config(cfg: Config, out_dir, seed: int | None = None, jobs_filter: str | None = None) -> int:
    """Run the jobs of a validated config and write reports; returns the exit status."""
    seed = cfg.seed if seed is None else seed
    cfg = Config(seed, cfg.objects, cfg.jobs, cfg.base_dir)
    jobs = select_jobs(cfg, jobs_filter)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ns = Namespace(cfg)
    summary, timings = [], {}
    status = EXIT_PASS
    for job in jobs:
        rng = np.random.default_rng([seed, job.index])
        record = {"job": job.id, "command": job.command, "parameters": job.params, "seed": seed,
                  "conventions": CONVENTIONS}
        start = time.perf_counter()
        try:
            report = DISPATCH[job.command](ns, job, rng, out_dir)
            record.update(report.to_dict())
            verdict = record["verdict"]
            if verdict != "pass" and status == EXIT_PASS:
                status = EXIT_FAIL
        except Exception as exc:  # noqa: BLE001 - recorded in the job report
            verdict = "error"
            record.update({"verdict": verdict, "error": f"{type(exc).__name__}: {exc}",
                           "traceback_tail": traceback.format_exception_only(type(exc), exc)[-1].strip()})
            status = EXIT_RUNTIME
        timings[job.id] = time.perf_counter() - start
        _write_json(out_dir / f"{job.id}.json", record)
        summary.append({"job": job.id, "command": job.command, "verdict": verdict})
    _write_json(out_dir / "summary.json", {"seed": seed, "jobs": summary, "exit_status": status})
    _write_json(out_dir / "timings.json", {k: round(v, 6) for k, v in timings.items()})
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="algebrokit", description="Lie algebroid and Poisson chart checks.")
    sub = parser.add_subparsers(dest="action", required=True)
    run = sub.add_parser("run", help="run the jobs of a config file")
    run.add_argument("config", help="YAML config file")
    run.add_argument("--out", default="reports", help="directory for JSON reports (default: reports)")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--jobs-filter", default=None, metavar="NAME",
                     help="run only jobs whose id matches this glob, or whose command equals it")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None and args.seed < 0:
            raise ConfigError("seed must be non-negative")
        select_jobs(cfg, args.jobs_filter)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status = run_config(cfg, args.out, args.seed, args.jobs_filter)
    with open(Path(args.out) / "summary.json", encoding="utf-8") as fh:
        for entry in json.load(fh)["jobs"]:
            print(f"{entry['verdict']:5s}  {entry['job']}  ({entry['command']})")
    return status


__all__ = ["main", "run_config", "parse_config", "load_config", "EXIT_PASS", "EXIT_FAIL", "EXIT_CONFIG",
           "EXIT_RUNTIME"]

"""Loading and validating batch configs.

A config is a YAML mapping with ``seed``, ``objects`` (named definitions) and
``jobs`` (an ordered list of commands).  Validation resolves every reference
and checks dimensions, including those of objects that earlier jobs will
construct, before anything is evaluated numerically.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .expr import ExprError, parse_expr

OBJECT_TYPES = ("algebroid", "lie_algebra", "tangent", "zero", "poisson", "submanifold", "rep", "driver", "path")

# command -> (parameter -> kind of referenced object); "?" marks optional parameters
COMMANDS: dict[str, dict[str, str]] = {
    "check-algebroid": {"algebroid": "algebroid"},
    "check-poisson": {"poisson": "poisson"},
    "dualize": {"algebroid": "algebroid"},
    "cotangent-algebroid": {"poisson": "poisson"},
    "check-coisotropic": {"submanifold": "submanifold"},
    "conormal": {"submanifold": "submanifold", "compare_to?": "algebroid"},
    "conormal-lagrangian-twisted": {"submanifold": "submanifold"},
    "integrate-apath": {"algebroid": "chart"},
    "homotopy-flow": {"path": "path", "driver": "driver"},
    "full-foliation-test": {"path": "path", "driver": "driver"},
    "coiso-flow-identity": {"submanifold": "submanifold", "path": "path", "driver": "driver"},
    "groupoid-invariant": {"path": "path", "rep?": "rep"},
    "axiom-suite": {"algebroid?": "algebroid", "rep?": "rep"},
    "homotopy-invariance": {"path": "path", "rep?": "rep"},
    "dump-path": {"path": "path"},
}
# commands that add an object to the namespace, and its kind
OUTPUTS = {
    "dualize": "poisson",
    "cotangent-algebroid": "algebroid",
    "conormal": "algebroid",
    "integrate-apath": "path",
    "homotopy-flow": "path",
}
INVARIANT_KINDS = ("matrix", "pair", "fiber_integral")
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.-]*$")


class ConfigError(ValueError):
    pass


@dataclass
class Job:
    index: int
    id: str
    command: str
    params: dict


@dataclass
class Config:
    seed: int
    objects: dict[str, dict]
    jobs: list[Job]
    base_dir: Path = field(default_factory=Path.cwd)


@dataclass
class _Shape:
    """Static description of an object: its kind and dimensions."""

    kind: str  # algebroid | poisson | submanifold | rep | driver | path
    n: int = 0  # base dimension (algebroid), dimension (poisson)
    r: int = 0  # rank (algebroid), generators (rep), components (driver)
    variables: tuple = ()
    ambient: str = ""
    chart: str = ""
    extra: dict = field(default_factory=dict)


def load_config(path) -> Config:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(raw, path.parent)


def parse_config(raw: Any, base_dir=None) -> Config:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping with 'objects' and 'jobs'")
    unknown = set(raw) - {"seed", "objects", "jobs"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    objects = raw.get("objects") or {}
    if not isinstance(objects, dict):
        raise ConfigError("'objects' must be a mapping")
    jobs_raw = raw.get("jobs") or []
    if not isinstance(jobs_raw, list):
        raise ConfigError("'jobs' must be a list")
    jobs = []
    for k, entry in enumerate(jobs_raw):
        if not isinstance(entry, dict) or "command" not in entry:
            raise ConfigError(f"job #{k + 1} needs a 'command'")
        params = {key: val for key, val in entry.items() if key not in ("command", "id")}
        jid = str(entry.get("id", f"job{k + 1:02d}-{entry['command']}"))
        jobs.append(Job(k, jid, entry["command"], params))
    cfg = Config(seed, objects, jobs, Path(base_dir) if base_dir else Path.cwd())
    validate(cfg)
    return cfg


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _require(spec: dict, key: str, where: str):
    if key not in spec:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return spec[key]


def _positive_int(value, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        raise ConfigError(f"{where} must be a positive integer, got {value!r}")
    return value


def _positive_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"{where} must be a positive number, got {value!r}")
    return float(value)


def _check_exprs(exprs, variables, where: str) -> None:
    for e in exprs:
        if isinstance(e, (int, float)) and not isinstance(e, bool):
            continue
        if not isinstance(e, str):
            raise ConfigError(f"{where}: expected an expression string, got {e!r}")
        try:
            parse_expr(e, variables)
        except ExprError as exc:
            raise ConfigError(f"{where}: {exc}") from exc


def _check_box(box, dim: int, where: str) -> None:
    if box is None:
        return
    arr = np.asarray(box, dtype=float) if isinstance(box, list) else None
    if arr is None or arr.shape != (dim, 2) or not np.all(arr[:, 0] < arr[:, 1]):
        raise ConfigError(f"{where}: box must be {dim} pairs [lower, upper] with lower < upper")


def _flat(nested) -> list:
    if isinstance(nested, list):
        return [x for item in nested for x in _flat(item)]
    return [nested]


def _shape_of_nested(nested, depth: int) -> tuple:
    dims = []
    level = nested
    for _ in range(depth):
        if not isinstance(level, list):
            return ()
        dims.append(len(level))
        level = level[0] if level else None
    return tuple(dims)


def _parse_index_key(key, count: int, where: str, names=None) -> tuple:
    parts = str(key).split()
    out = []
    for p in parts:
        if names is not None and p in names:
            out.append(names.index(p))
        elif p.isdigit() and 1 <= int(p) <= count:
            out.append(int(p) - 1)
        else:
            raise ConfigError(f"{where}: bad index {p!r} in key {key!r}")
    return tuple(out)


def _validate_object(name: str, spec: dict, shapes: dict) -> _Shape:
    where = f"object '{name}'"
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be a mapping")
    kind = _require(spec, "type", where)
    if kind not in OBJECT_TYPES:
        raise ConfigError(f"{where}: unknown type {kind!r} (expected one of {', '.join(OBJECT_TYPES)})")

    if kind == "lie_algebra":
        preset = spec.get("preset")
        if preset in ("so3", "sl2"):
            return _Shape("algebroid", 1, 3, ("b1",))
        if preset is not None:
            raise ConfigError(f"{where}: unknown preset {preset!r}")
        consts = _require(spec, "constants", where)
        r = _positive_int(_require(spec, "rank", where), f"{where}: rank")
        if not isinstance(consts, dict):
            raise ConfigError(f"{where}: constants must map 'mu nu sigma' to numbers")
        for key, val in consts.items():
            if len(_parse_index_key(key, r, where)) != 3 or isinstance(val, str):
                raise ConfigError(f"{where}: constant entries need three indices and a number")
        return _Shape("algebroid", 1, r, ("b1",))

    if kind == "tangent":
        n = _positive_int(_require(spec, "dim", where), f"{where}: dim")
        _check_box(spec.get("box"), n, where)
        return _Shape("algebroid", n, n, tuple(f"b{i + 1}" for i in range(n)))

    if kind == "zero":
        n = _positive_int(_require(spec, "dim", where), f"{where}: dim")
        r = _positive_int(_require(spec, "rank", where), f"{where}: rank")
        _check_box(spec.get("box"), n, where)
        return _Shape("algebroid", n, r, tuple(f"b{i + 1}" for i in range(n)))

    if kind == "algebroid":
        variables = tuple(_require(spec, "variables", where))
        n = len(variables)
        anchor = _require(spec, "anchor", where)
        dims = _shape_of_nested(anchor, 2)
        if len(dims) != 2 or dims[1] != n or any(not isinstance(row, list) or len(row) != n for row in anchor):
            raise ConfigError(f"{where}: anchor must be a list of rows with {n} entries each")
        r = dims[0]
        _check_exprs(_flat(anchor), variables, f"{where} anchor")
        structure = spec.get("structure", {})
        if isinstance(structure, dict):
            for key, row in structure.items():
                if len(_parse_index_key(key, r, where)) != 2 or not isinstance(row, dict):
                    raise ConfigError(f"{where}: structure key {key!r} must be 'mu nu' mapping sigma -> expr")
                for sig, expr in row.items():
                    _parse_index_key(sig, r, where)
                    _check_exprs([expr], variables, f"{where} structure")
        elif _shape_of_nested(structure, 3) != (r, r, r):
            raise ConfigError(f"{where}: structure must be a sparse mapping or a {r}x{r}x{r} nested list")
        else:
            _check_exprs(_flat(structure), variables, f"{where} structure")
        _check_box(_require(spec, "box", where), n, where)
        return _Shape("algebroid", n, r, variables)

    if kind == "poisson":
        variables = tuple(_require(spec, "variables", where))
        m = len(variables)
        sources = [k for k in ("brackets", "bivector", "form") if k in spec]
        if len(sources) != 1:
            raise ConfigError(f"{where}: give exactly one of 'brackets', 'bivector' or 'form'")
        entries = spec[sources[0]]
        if isinstance(entries, dict):
            for key, expr in entries.items():
                if len(_parse_index_key(key, m, where, list(variables))) != 2:
                    raise ConfigError(f"{where}: key {key!r} must name two coordinates")
                _check_exprs([expr], variables, where)
        elif _shape_of_nested(entries, 2) == (m, m):
            _check_exprs(_flat(entries), variables, where)
        else:
            raise ConfigError(f"{where}: {sources[0]} must be a sparse mapping or an {m}x{m} matrix")
        twist = spec.get("twist")
        if twist is not None:
            if sources[0] == "form":
                raise ConfigError(f"{where}: a chart built from a form gets its twist from d(form)")
            if not isinstance(twist, dict):
                raise ConfigError(f"{where}: twist must map 'xa xb xc' to expressions")
            for key, expr in twist.items():
                if len(_parse_index_key(key, m, where, list(variables))) != 3:
                    raise ConfigError(f"{where}: twist key {key!r} must name three coordinates")
                _check_exprs([expr], variables, where)
        _check_box(_require(spec, "box", where), m, where)
        return _Shape("poisson", m, m, variables)

    if kind == "submanifold":
        amb = _require(spec, "ambient", where)
        P = _lookup(shapes, amb, "poisson", where)
        trans = spec.get("transversal")
        if trans is not None:
            if not isinstance(trans, list) or not trans or any(t not in P.variables for t in trans):
                raise ConfigError(f"{where}: transversal must list coordinates of '{amb}'")
            k = len(trans)
        else:
            k = _positive_int(_require(spec, "codim", where), f"{where}: codim")
        if not 0 < k <= P.n:
            raise ConfigError(f"{where}: codimension {k} out of range for dimension {P.n}")
        return _Shape("submanifold", P.n, k, P.variables, ambient=amb)

    if kind == "rep":
        preset = spec.get("preset")
        if preset in ("so3", "sl2"):
            return _Shape("rep", 0, 3, extra={"d": 3 if preset == "so3" else 2})
        if preset is not None:
            raise ConfigError(f"{where}: unknown preset {preset!r}")
        images = np.asarray(_require(spec, "images", where), dtype=float)
        if images.ndim != 3 or images.shape[1] != images.shape[2]:
            raise ConfigError(f"{where}: images must be a list of square matrices")
        return _Shape("rep", 0, images.shape[0], extra={"d": images.shape[1]})

    if kind == "driver":
        _positive_int(spec.get("s_steps", 100), f"{where}: s_steps")
        if "s_stepsize" in spec:
            _positive_number(spec["s_stepsize"], f"{where}: s_stepsize")
        if spec.get("profile", "polynomial") not in ("polynomial", "bump"):
            raise ConfigError(f"{where}: profile must be 'polynomial' or 'bump'")
        if "random" in spec:
            r = _positive_int(_require(spec, "rank", where), f"{where}: rank")
            return _Shape("driver", 0, r)
        b = _require(spec, "b", where)
        if not isinstance(b, list) or not b:
            raise ConfigError(f"{where}: b must be a list of expressions in t and s")
        _check_exprs(b, ("t", "s"), f"{where} b")
        beta = spec.get("beta")
        if beta is not None:
            _check_exprs(beta, ("t", "s"), f"{where} beta")
        return _Shape("driver", 0, len(b), extra={"beta": None if beta is None else len(beta)})

    if kind == "path":
        chart = _require(spec, "chart", where)
        C = _lookup(shapes, chart, ("algebroid", "poisson"), where)
        _validate_path_source(spec, C, where)
        return _Shape("path", C.n, C.r, C.variables, chart=chart)

    raise AssertionError(kind)


def _validate_path_source(spec: dict, C: _Shape, where: str) -> None:
    if "file" in spec:
        return
    x0 = _require(spec, "x0", where)
    if not isinstance(x0, list) or len(x0) != C.n:
        raise ConfigError(f"{where}: x0 must have {C.n} components")
    a = _require(spec, "a", where)
    if not isinstance(a, list) or len(a) != C.r:
        raise ConfigError(f"{where}: a must list {C.r} expressions in t")
    _check_exprs(a, ("t",), f"{where} a")
    _positive_int(spec.get("N", 1000), f"{where}: N")


def _lookup(shapes: dict, name, kinds, where: str) -> _Shape:
    kinds = (kinds,) if isinstance(kinds, str) else kinds
    if not isinstance(name, str) or name not in shapes:
        raise ConfigError(f"{where}: reference to undefined object '{name}'")
    shape = shapes[name]
    if shape.kind not in kinds:
        raise ConfigError(f"{where}: '{name}' is a {shape.kind}, expected {' or '.join(kinds)}")
    return shape


def _object_refs(spec) -> list[str]:
    if not isinstance(spec, dict):
        return []
    return [spec[k] for k in ("ambient", "chart") if isinstance(spec.get(k), str)]


def _object_order(objects: dict) -> list[str]:
    """Definition order with references to other objects resolved first."""
    order, seen = [], set()

    def visit(name, stack):
        if name in seen:
            return
        if name in stack:
            raise ConfigError(f"object '{name}' is defined in terms of itself")
        for ref in _object_refs(objects[name]):
            if ref in objects:
                visit(ref, stack | {name})
        seen.add(name)
        order.append(name)

    for name in objects:
        visit(name, frozenset())
    return order


def validate(cfg: Config) -> dict:
    """Resolve references and dimensions; returns the final static namespace.

    Objects may refer to charts built by jobs (e.g. a submanifold of a
    dualized chart); those are validated as soon as the producing job is.
    """
    shapes: dict[str, _Shape] = {}
    pending: list[str] = []
    for name in cfg.objects:
        if not _NAME_RE.match(str(name)):
            raise ConfigError(f"invalid object name {name!r}")

    def settle():
        progress = True
        while progress:
            progress = False
            for name in list(pending):
                if all(ref in shapes for ref in _object_refs(cfg.objects[name])):
                    shapes[name] = _validate_object(name, cfg.objects[name], shapes)
                    pending.remove(name)
                    progress = True

    for name in _object_order(cfg.objects):
        pending.append(name)
    outputs = {j.params.get("output") for j in cfg.jobs}
    for name in pending:
        for ref in _object_refs(cfg.objects[name]):
            if ref not in cfg.objects and ref not in outputs:
                raise ConfigError(f"object '{name}': reference to undefined object '{ref}'")
    settle()
    ids = set()
    for job in cfg.jobs:
        where = f"job '{job.id}'"
        if job.id in ids:
            raise ConfigError(f"duplicate job id '{job.id}'")
        ids.add(job.id)
        if job.command not in COMMANDS:
            raise ConfigError(f"{where}: unknown command {job.command!r}")
        refs = {}
        for key, kind in COMMANDS[job.command].items():
            optional = key.endswith("?")
            key = key.rstrip("?")
            if key not in job.params:
                if not optional:
                    raise ConfigError(f"{where}: missing parameter '{key}'")
                continue
            if job.params[key] in pending:
                raise ConfigError(f"{where}: '{job.params[key]}' depends on a chart that no earlier job builds")
            kinds = ("algebroid", "poisson") if kind == "chart" else kind
            refs[key] = _lookup(shapes, job.params[key], kinds, where)
        _validate_job(job, refs, shapes, where)
        if job.command in OUTPUTS:
            out = job.params.get("output")
            if job.command in ("dualize", "cotangent-algebroid", "conormal", "integrate-apath") and not out:
                raise ConfigError(f"{where}: missing parameter 'output'")
            if out:
                if not _NAME_RE.match(str(out)):
                    raise ConfigError(f"{where}: invalid output name {out!r}")
                if out in shapes or out in cfg.objects:
                    raise ConfigError(f"{where}: output '{out}' would shadow an existing object")
                shapes[out] = _output_shape(job, refs, shapes)
                settle()
    return shapes


def _validate_job(job: Job, refs: dict, shapes: dict, where: str) -> None:
    p = job.params
    for key in ("tol", "compare_tol", "drift_abort", "membership_tol"):
        if key in p:
            _positive_number(p[key], f"{where}: {key}")
    for key in ("samples", "N", "draws", "random_drivers", "s_steps"):
        if key in p:
            _positive_int(p[key], f"{where}: {key}")
    cmd = job.command
    if cmd == "dualize" and "fiber_box" in p:
        _check_box(p["fiber_box"], refs["algebroid"].r, where)
    if cmd == "conormal" and "compare_to" in refs:
        S, A = refs["submanifold"], refs["compare_to"]
        if (A.n, A.r) != (S.n - S.r, S.r):
            raise ConfigError(f"{where}: compare_to has base {A.n}, rank {A.r}; conormal has base "
                              f"{S.n - S.r}, rank {S.r}")
    if cmd == "integrate-apath":
        C = refs["algebroid"]
        _validate_path_source(p, C, where)
    if cmd in ("homotopy-flow", "full-foliation-test"):
        path, drv = refs["path"], refs["driver"]
        chart = shapes[path.chart]
        if chart.kind != "algebroid":
            raise ConfigError(f"{where}: path '{p['path']}' must live on an algebroid chart")
        if drv.r != chart.r:
            raise ConfigError(f"{where}: driver has {drv.r} components, algebroid rank is {chart.r}")
    if cmd == "coiso-flow-identity":
        S, path, drv = refs["submanifold"], refs["path"], refs["driver"]
        if (path.n, path.r) != (S.n - S.r, S.r):
            raise ConfigError(f"{where}: path must have base {S.n - S.r} and rank {S.r} (conormal data)")
        if drv.r != S.r:
            raise ConfigError(f"{where}: driver has {drv.r} components, codimension is {S.r}")
    if cmd in ("groupoid-invariant", "homotopy-invariance", "axiom-suite"):
        kind = p.get("kind")
        if kind not in INVARIANT_KINDS:
            raise ConfigError(f"{where}: kind must be one of {', '.join(INVARIANT_KINDS)}")
        if kind == "matrix" and "rep" not in refs:
            raise ConfigError(f"{where}: the matrix invariant needs a 'rep'")
        base = refs.get("path") or refs.get("algebroid")
        if cmd == "axiom-suite" and "paths" in p:
            if not isinstance(p["paths"], list) or len(p["paths"]) != 3:
                raise ConfigError(f"{where}: paths must name three paths")
            shapes_ = [_lookup(shapes, q, "path", where) for q in p["paths"]]
            if len({s.chart for s in shapes_}) != 1:
                raise ConfigError(f"{where}: the three paths must share one chart")
            base = shapes_[0]
        elif cmd == "axiom-suite" and "algebroid" not in refs:
            raise ConfigError(f"{where}: give 'paths' or an 'algebroid' to draw random paths on")
        if kind == "matrix" and base is not None and refs["rep"].r != base.r:
            raise ConfigError(f"{where}: rep has {refs['rep'].r} generators, rank is {base.r}")
        if cmd == "homotopy-invariance":
            drivers = p.get("drivers", [])
            if not drivers and "random_drivers" not in p:
                raise ConfigError(f"{where}: give 'drivers' or 'random_drivers'")
            for d in drivers:
                if _lookup(shapes, d, "driver", where).r != base.r:
                    raise ConfigError(f"{where}: driver '{d}' does not match rank {base.r}")
    if cmd == "dump-path":
        if not isinstance(p.get("file"), str):
            raise ConfigError(f"{where}: missing parameter 'file'")


def _output_shape(job: Job, refs: dict, shapes: dict) -> _Shape:
    cmd = job.command
    if cmd == "dualize":
        A = refs["algebroid"]
        names = tuple(job.params.get("fiber_names") or [f"alpha{mu + 1}" for mu in range(A.r)])
        return _Shape("poisson", A.n + A.r, A.n + A.r, A.variables + names)
    if cmd == "cotangent-algebroid":
        P = refs["poisson"]
        return _Shape("algebroid", P.n, P.n, P.variables)
    if cmd == "conormal":
        S = refs["submanifold"]
        return _Shape("algebroid", S.n - S.r, S.r)
    if cmd == "integrate-apath":
        C = refs["algebroid"]
        return _Shape("path", C.n, C.r, C.variables, chart=job.params["algebroid"])
    if cmd == "homotopy-flow":
        return refs["path"]
    raise AssertionError(cmd)

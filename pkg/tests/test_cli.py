import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from algebrokit.apath import read_path
from algebrokit.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, EXIT_RUNTIME, main
from algebrokit.config import ConfigError, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def reports(out):
    return {p.name: p.read_bytes() for p in sorted(Path(out).rglob("*")) if p.is_file() and p.name != "timings.json"}


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.fixture(scope="module")
def golden_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("golden")
    status = main(["run", str(CONFIGS / "golden.yaml"), "--out", str(out)])
    return status, out


def test_golden_config_passes(golden_run):
    status, out = golden_run
    assert status == EXIT_PASS
    summary = json.loads((out / "summary.json").read_text())
    assert all(j["verdict"] == "pass" for j in summary["jobs"])
    assert len(summary["jobs"]) == len(list(out.glob("*.json"))) - 2


def test_report_schema(golden_run):
    _, out = golden_run
    rep = json.loads((out / "axioms-so3.json").read_text())
    assert {"job", "command", "verdict", "residuals", "conventions", "seed"} <= set(rep)
    assert rep["residuals"]["jacobi"]["value"] <= 1e-12
    assert rep["conventions"]["twisted_jacobi_constant"] == -1
    assert "time" not in json.dumps(rep)


def test_roundtrip_job_agrees(golden_run):
    _, out = golden_run
    rep = json.loads((out / "roundtrip-so3-conormal.json").read_text())
    assert max(r["value"] for r in rep["residuals"].values()) <= 1e-10


def test_dump_reingests_bit_exactly(golden_run):
    _, out = golden_run
    text = (out / "paths" / "p_so3_flowed.txt").read_text()
    header = text.splitlines()[0].split()
    assert header == ["t", "b1", "a1", "a2", "a3"]
    from algebrokit.algebroid import so3
    p = read_path(out / "paths" / "p_so3_flowed.txt", so3())
    assert len(p.X) == 1001 and np.all(np.isfinite(p.a))


def test_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", str(CONFIGS / "golden.yaml"), "--out", str(out), "--seed", "11"]) == EXIT_PASS
    assert reports(a) == reports(b)


def test_twisted_config_reports_expected_failure(tmp_path):
    assert main(["run", str(CONFIGS / "twisted.yaml"), "--out", str(tmp_path)]) == EXIT_FAIL
    verdicts = {j["job"]: j["verdict"] for j in json.loads((tmp_path / "summary.json").read_text())["jobs"]}
    assert verdicts.pop("lagrangian-C4-skew") == "fail"
    assert set(verdicts.values()) == {"pass"}
    skew = json.loads((tmp_path / "lagrangian-C4-skew.json").read_text())
    assert skew["details"]["verdicts_agree"]


def test_not_coisotropic_config(tmp_path):
    assert main(["run", str(CONFIGS / "not_coisotropic.yaml"), "--out", str(tmp_path)]) == EXIT_FAIL
    rep = json.loads(next(p for p in tmp_path.glob("*.json") if p.name not in ("summary.json", "timings.json"))
                     .read_text())
    assert abs(rep["residuals"]["coisotropy"]["value"] - 1.0) <= 1e-12


BASE = """
seed: 1
objects:
  so3: {type: lie_algebra, preset: so3}
jobs:
  - {id: ax, command: check-algebroid, algebroid: so3}
"""


@pytest.mark.parametrize("text, needle", [
    (BASE.replace("algebroid: so3}", "algebroid: so4}"), "so4"),
    (BASE.replace("preset: so3", "preset: so5"), "so5"),
    (BASE + "  - {id: ax, command: check-algebroid, algebroid: so3}\n", "duplicate"),
    (BASE.replace("check-algebroid", "check-everything"), "check-everything"),
    ("seed: 1\nobjects: {}\njobs: [\n", ""),
    (BASE + "  - {id: p, command: integrate-apath, algebroid: so3, x0: [0, 0], a: ['1', '0', '0'], N: 10}\n",
     "x0"),
    (BASE + "  - {id: p, command: integrate-apath, algebroid: so3, x0: [0], a: ['1', '0', '0'], N: -5}\n", "N"),
])
def test_config_errors_exit_2_without_reports(tmp_path, capsys, text, needle):
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_CONFIG
    assert not out.exists() or not any(out.iterdir())
    assert needle in capsys.readouterr().err


def test_runtime_error_is_recorded_and_later_jobs_run(tmp_path):
    text = """
seed: 2
objects:
  T1: {type: tangent, dim: 1, box: [[-1, 1]]}
jobs:
  - {id: escape, command: integrate-apath, algebroid: T1, x0: [0.9], a: ["5"], N: 50, output: q}
  - {id: ok, command: check-algebroid, algebroid: T1}
"""
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, text)), "--out", str(out)]) == EXIT_RUNTIME
    bad = json.loads((out / "escape.json").read_text())
    assert bad["verdict"] == "error" and "chart box" in bad["error"]
    assert json.loads((out / "ok.json").read_text())["verdict"] == "pass"


def test_jobs_filter(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(CONFIGS / "golden.yaml"), "--out", str(out), "--jobs-filter", "axioms-s*"]) == EXIT_PASS
    names = {p.stem for p in out.glob("*.json")} - {"summary", "timings"}
    assert names == {"axioms-so3", "axioms-sl2"}
    by_command = tmp_path / "cmd"
    assert main(["run", str(CONFIGS / "golden.yaml"), "--out", str(by_command), "--jobs-filter", "axiom-suite"]) == 0
    assert {p.stem for p in by_command.glob("axioms-*.json")} == {"axioms-matrix", "axioms-pair", "axioms-fiber"}


def test_jobs_filter_needing_unselected_producer_is_a_config_error(tmp_path, capsys):
    assert main(["run", str(CONFIGS / "golden.yaml"), "--out", str(tmp_path / "o"),
                 "--jobs-filter", "axioms-cotangent-dual"]) == EXIT_CONFIG
    assert "cotangent-dual" in capsys.readouterr().err


def test_jobs_filter_matching_nothing_is_a_config_error(tmp_path):
    assert main(["run", str(CONFIGS / "golden.yaml"), "--out", str(tmp_path / "o"),
                 "--jobs-filter", "nothing-here"]) == EXIT_CONFIG


def test_parse_config_rejects_dimension_mismatch():
    text = """
seed: 0
objects:
  T2: {type: tangent, dim: 2}
  p: {type: path, chart: T2, x0: [0, 0, 0], a: ["1", "0"], N: 10}
jobs:
  - {id: inv, command: groupoid-invariant, kind: pair, path: p}
"""
    with pytest.raises(ConfigError, match="x0"):
        parse_config(yaml.safe_load(text))


def test_dump_path_roundtrip_job(tmp_path):
    text = """
seed: 5
objects:
  T2: {type: tangent, dim: 2}
  p: {type: path, chart: T2, x0: [0, 0], a: ["cos(t)", "t"], N: 64}
jobs:
  - {id: dump, command: dump-path, path: p, file: p.txt}
"""
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_PASS
    rep = json.loads((out / "dump.json").read_text())
    assert rep["verdict"] == "pass"
    dumped = next(out.rglob("p.txt")).read_text()
    assert dumped.splitlines()[0] == "t b1 b2 a1 a2"
    assert len(dumped.splitlines()) == 66

"""Check reports shared by all verification routines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from .expr import DEFAULT_STEP

# Conventions fixed once for the whole toolkit; copied into every report.
TWISTED_JACOBI_CONSTANT = -1.0
CONVENTIONS = {
    "orientation": "source(p) = X(1), target(p) = X(0); concat(p, q) needs p(1) = q(0)",
    "product_integral": "dU/dt = U M(a(t)), U(0) = 1",
    "twisted_jacobi_constant": TWISTED_JACOBI_CONSTANT,
    "bivector_from_form": "pi = -inverse(omega)",
    "stencil": "4th-order central differences",
    "stencil_step": DEFAULT_STEP,
}


@dataclass
class Residual:
    value: float
    tol: float
    gating: bool = True

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tol) and not math.isnan(self.value)


@dataclass
class CheckReport:
    """Named residuals with tolerances; passes iff every gating residual does."""

    name: str
    residuals: dict[str, Residual] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)
    flagged_points: list[list[float]] = field(default_factory=list)

    def add(self, key: str, value: float, tol: float, gating: bool = True) -> "CheckReport":
        self.residuals[key] = Residual(float(value), float(tol), gating)
        return self

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.residuals.values() if r.gating)

    def __bool__(self) -> bool:
        return self.passed

    def __getitem__(self, key: str) -> float:
        return self.residuals[key].value

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "verdict": "pass" if self.passed else "fail",
            "residuals": {
                k: {"value": r.value, "tol": r.tol, "pass": r.passed, "gating": r.gating}
                for k, r in self.residuals.items()
            },
            "details": self.details,
            "flagged_points": self.flagged_points,
        }

    def __str__(self) -> str:
        lines = [f"{self.name}: {'PASS' if self.passed else 'FAIL'}"]
        for k, r in self.residuals.items():
            mark = "ok" if r.passed else ("FAIL" if r.gating else "info")
            lines.append(f"  {k} = {r.value:.3e} (tol {r.tol:.1e}) {mark}")
        return "\n".join(lines)

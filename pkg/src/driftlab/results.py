"""Result containers and error types shared by every module."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class DomainError(ValueError):
    """A parameter lies outside the domain of a formula or an operation."""


class InapplicableError(DomainError):
    """A method's measured precondition (e.g. a contraction ratio) fails."""


class NumericalError(RuntimeError):
    """An iterative method failed to reach its tolerance within budget."""

    def __init__(self, message: str, achieved: float | None = None, history=None):
        super().__init__(message)
        self.achieved = achieved
        self.history = list(history) if history is not None else []


@dataclass
class Check:
    """One pass/fail flag with the tolerance that decided it."""

    name: str
    passed: bool
    measured: float
    target: float
    tolerance: str
    margin: float
    anchor: str = ""

    def as_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "measured": jsonable(self.measured),
            "target": jsonable(self.target),
            "tolerance": self.tolerance,
            "margin": jsonable(self.margin),
            "anchor": self.anchor,
        }


@dataclass
class ScanResult:
    """Measured values, predicted values and pass flags of one scenario."""

    scenario: str
    measured: dict[str, Any] = field(default_factory=dict)
    predicted: dict[str, Any] = field(default_factory=dict)
    anchors: dict[str, str] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    series: dict[str, dict[str, list[float]]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    fits: dict[str, dict[str, Any]] = field(default_factory=dict)
    runtime: float = 0.0
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def predict(self, name: str, value: Any, anchor: str) -> None:
        self.predicted[name] = value
        self.anchors[name] = anchor

    def check(self, name: str, passed: bool, measured: float, target: float,
              tolerance: str, margin: float | None = None, anchor: str = "") -> Check:
        if margin is None:
            margin = float("nan")
        c = Check(name, bool(passed), float(measured), float(target), tolerance,
                  float(margin), anchor)
        self.checks.append(c)
        return c

    def add_series(self, name: str, **columns) -> None:
        self.series[name] = {k: [float(v) for v in np.ravel(np.asarray(vals, dtype=float))]
                             for k, vals in columns.items()}

    def fit(self, name: str, series: str, x: str, y: str, fitted: float, predicted: float,
            x_shift: float = 0.0) -> None:
        """Record a log-log slope of column y against x - x_shift; the report plots it."""
        self.fits[name] = {"series": series, "x": x, "y": y, "fitted": float(fitted),
                           "predicted": float(predicted), "x_shift": float(x_shift)}

    def absorb(self, sub: "ScanResult", prefix: str) -> None:
        """Copy the checks, values, series and fits of ``sub`` under ``prefix``."""
        for c in sub.checks:
            c.name = f"{prefix}.{c.name}"
            self.checks.append(c)
        for k, v in sub.series.items():
            self.series[f"{prefix}.{k}"] = v
        for k, v in sub.fits.items():
            self.fits[f"{prefix}.{k}"] = dict(v, series=f"{prefix}.{v['series']}")
        for k, v in sub.measured.items():
            self.measured[f"{prefix}.{k}"] = v
        for k, v in sub.predicted.items():
            self.predict(f"{prefix}.{k}", v, sub.anchors.get(k, ""))
        self.notes.extend(f"{prefix}: {n}" for n in sub.notes)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def finish(self) -> "ScanResult":
        self.runtime = time.perf_counter() - self._t0
        return self

    def as_dict(self, include_runtime: bool = True) -> dict[str, Any]:
        out = {
            "scenario": self.scenario,
            "passed": self.passed,
            "measured": jsonable(self.measured),
            "predicted": jsonable(self.predicted),
            "anchors": dict(self.anchors),
            "checks": [c.as_dict() for c in self.checks],
            "series": jsonable(self.series),
            "fits": jsonable(self.fits),
            "notes": list(self.notes),
        }
        if include_runtime:
            out["runtime"] = self.runtime
        return out


def jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if hasattr(obj, "item"):
        return jsonable(obj.item())
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return str(obj)
        return obj
    return str(obj)

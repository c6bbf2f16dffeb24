"""
MODULE: reports.py
CLASSIFICATION: Shared Report Contract
GOAL: Residual statistics for one identity over a set of samples, and the
      accumulator that builds them sample by sample.
CONTRACT ID: IO-REPORT
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

import settings


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays inside a context dict to JSON-friendly values."""
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


@dataclass
class CheckReport:
    check_id: str
    scenario: str
    samples: int
    max_residual: float
    mean_residual: float
    tolerance: float
    status: str
    worst: Optional[Dict[str, Any]] = None
    details: Dict[str, float] = field(default_factory=dict)
    note: str = ""
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return self.status == settings.STATUS_PASS

    @property
    def failed(self) -> bool:
        return self.status == settings.STATUS_FAIL

    @classmethod
    def skipped(cls, check_id: str, scenario: str, reason: str, tolerance: float = 0.0) -> "CheckReport":
        return cls(check_id, scenario, 0, 0.0, 0.0, tolerance, settings.STATUS_SKIPPED, note=reason)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "check_id": self.check_id,
            "scenario": self.scenario,
            "samples": self.samples,
            "max_residual": float(self.max_residual),
            "mean_residual": float(self.mean_residual),
            "tolerance": float(self.tolerance),
            "status": self.status,
            "worst": _plain(self.worst),
            "details": {k: float(v) for k, v in sorted(self.details.items())},
            "note": self.note,
        }


class ResidualAccumulator:
    """Collects one residual per sample; the worst sample keeps its context."""

    def __init__(self, check_id: str, scenario: str, tolerance: float):
        self.check_id = check_id
        self.scenario = scenario
        self.tolerance = tolerance
        self.values: List[float] = []
        self.worst: Optional[Dict[str, Any]] = None
        self.details: Dict[str, float] = {}
        self._worst_value = -1.0

    def add(self, residual: float, **context: Any) -> None:
        residual = float(residual)
        self.values.append(residual)
        if math.isnan(self._worst_value):
            return
        # the first NaN becomes the worst sample and stays there
        if math.isnan(residual) or residual > self._worst_value:
            self._worst_value = residual
            self.worst = {"residual": residual, **context}

    def detail(self, name: str, value: float) -> None:
        """Track the running max of a named diagnostic."""
        self.details[name] = max(self.details.get(name, 0.0), float(value))

    def finish(self, note: str = "") -> CheckReport:
        values = np.asarray(self.values, dtype=float)
        if values.size == 0:
            return CheckReport(
                self.check_id, self.scenario, 0, 0.0, 0.0, self.tolerance,
                settings.STATUS_NOT_APPLICABLE, None, dict(self.details),
                note or "no applicable samples", values,
            )
        max_residual = float(np.max(values)) if not np.isnan(values).any() else math.nan
        status = settings.STATUS_PASS if max_residual < self.tolerance else settings.STATUS_FAIL
        return CheckReport(
            self.check_id, self.scenario, int(values.size), max_residual,
            float(np.mean(values)), self.tolerance, status, self.worst,
            dict(self.details), note, values,
        )

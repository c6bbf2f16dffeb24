"""
MODULE: errors.py
CLASSIFICATION: Shared Error Contract
GOAL: One exception hierarchy for the engine. Every error carries the exit
      code the CLI reports for it.
"""
from __future__ import annotations

from typing import Optional, Sequence

import settings


class MetallicLabError(Exception):
    """Base class for all engine errors."""

    exit_code = settings.EXIT_INPUT_ERROR


# --- Expression DSL ---

class ExprSyntaxError(MetallicLabError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(MetallicLabError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class ExprDomainError(MetallicLabError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (node at offset {offset})")
        self.offset = offset


# --- Linear algebra / structures ---

class SingularMetricError(MetallicLabError):
    pass


class StructureError(MetallicLabError):
    pass


class InvalidProductError(StructureError):
    pass


# --- Geometry ---

class ImmersionDegenerateError(MetallicLabError):
    def __init__(self, point: Sequence[float], rank: int, expected: int):
        pretty = ", ".join(f"{x:.6g}" for x in point)
        super().__init__(
            f"immersion is degenerate at ({pretty}): Jacobian rank {rank} < {expected}"
        )
        self.point = tuple(point)
        self.rank = rank


class NotInDistributionError(MetallicLabError):
    pass


class NotNormalFieldError(MetallicLabError):
    pass


class PreconditionError(MetallicLabError):
    exit_code = settings.EXIT_CHECK_FAILURE

    def __init__(self, check_id: str, requirement: str):
        super().__init__(f"{check_id}: precondition not met: {requirement}")
        self.check_id = check_id
        self.requirement = requirement


# --- Scenario files ---

class ScenarioError(MetallicLabError):
    def __init__(
        self,
        message: str,
        section: Optional[str] = None,
        key: Optional[str] = None,
        line: Optional[int] = None,
        column: Optional[int] = None,
    ):
        where = []
        if section:
            where.append(f"[{section}]")
        if key:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        prefix = " ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.section = section
        self.key = key
        self.line = line
        self.column = column

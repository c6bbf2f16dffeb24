"""
MODULE: metallic.py
CLASSIFICATION: Ambient Structure Layer
GOAL: Metallic numbers and constant metallic structures J on flat R^m
      (J^2 = pJ + qI, J symmetric): diagonal sigma/sigma_bar patterns,
      structures induced by almost-product structures F, and explicit
      matrices that must pass verify_structure before use.
CONTRACT ID: IO-STRUCT

J is constant, so the ambient Levi-Civita derivative of J vanishes and
every scenario is locally metallic by construction.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

import settings
from modules.errors import InvalidProductError, StructureError
from modules.reports import ResidualAccumulator, CheckReport

log = logging.getLogger(__name__)

KIND_DIAGONAL = "diagonal-pattern"
KIND_PRODUCT = "product-induced"
KIND_CUSTOM = "custom"


@dataclass(frozen=True)
class MetallicParams:
    p: int
    q: int
    sigma: float
    sigma_bar: float

    def consts(self) -> dict:
        """Named constants bound for the expression language."""
        return {"sigma": self.sigma, "sigma_bar": self.sigma_bar}


class Eigenvalue(str, Enum):
    SIGMA = "sigma"
    SIGMA_BAR = "sigma_bar"


@dataclass(frozen=True)
class ProductStructure:
    matrix: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class StructureOp:
    matrix: np.ndarray
    params: MetallicParams
    kind: str
    product: Optional[ProductStructure] = None
    sign: int = 1

    @property
    def ambient_dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)


def metallic_number(p: int, q: int) -> MetallicParams:
    """sigma_{p,q}, the positive root of x^2 - p x - q."""
    if int(p) != p or int(q) != q or p < 1 or q < 1:
        raise StructureError(f"metallic parameters must be positive integers, got p={p}, q={q}")
    p, q = int(p), int(q)
    sigma = (p + math.sqrt(p * p + 4 * q)) / 2.0
    return MetallicParams(p, q, sigma, p - sigma)


def structure_residual(matrix: np.ndarray, params: MetallicParams) -> float:
    """max |J^2 - pJ - qI| entrywise."""
    m = matrix.shape[0]
    return float(np.max(np.abs(matrix @ matrix - params.p * matrix - params.q * np.eye(m))))


def _check_built(matrix: np.ndarray, params: MetallicParams, what: str) -> None:
    res = structure_residual(matrix, params)
    asym = float(np.max(np.abs(matrix - matrix.T)))
    if res > settings.STRUCTURE_BUILD_TOL * max(1.0, params.sigma ** 2) or asym > settings.STRUCTURE_BUILD_TOL:
        raise StructureError(f"{what} violates J^2 = pJ + qI or symmetry (residual {res:.3g}, asymmetry {asym:.3g})")


def diagonal_structure(pattern: Sequence[Union[Eigenvalue, str]], params: MetallicParams) -> StructureOp:
    try:
        entries = [params.sigma if Eigenvalue(e) is Eigenvalue.SIGMA else params.sigma_bar for e in pattern]
    except ValueError as exc:
        raise StructureError(f"pattern entries must be 'sigma' or 'sigma_bar': {exc}") from exc
    if not entries:
        raise StructureError("empty structure pattern")
    matrix = np.diag(entries)
    _check_built(matrix, params, "diagonal pattern")
    return StructureOp(matrix, params, KIND_DIAGONAL)


def product_structure(matrix) -> ProductStructure:
    """Validate an almost-product structure: F symmetric and F^2 = I."""
    f = np.array(matrix, dtype=float)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise InvalidProductError(f"product structure must be square, got shape {f.shape}")
    sq = float(np.max(np.abs(f @ f - np.eye(f.shape[0]))))
    if sq > settings.PRODUCT_TOL:
        raise InvalidProductError(f"F^2 != I (residual {sq:.3g})")
    if float(np.max(np.abs(f - f.T))) > settings.PRODUCT_TOL:
        raise InvalidProductError("product structure must be symmetric")
    return ProductStructure(f)


def from_product(product: ProductStructure, params: MetallicParams, sign: Union[int, str] = 1) -> StructureOp:
    """J = (p/2) I +- ((2 sigma - p)/2) F."""
    s = _sign(sign)
    f = product.matrix
    sq = float(np.max(np.abs(f @ f - np.eye(f.shape[0]))))
    if sq > settings.PRODUCT_TOL:
        raise InvalidProductError(f"F^2 != I (residual {sq:.3g})")
    m = f.shape[0]
    matrix = 0.5 * params.p * np.eye(m) + s * 0.5 * (2.0 * params.sigma - params.p) * f
    _check_built(matrix, params, "product-induced structure")
    return StructureOp(matrix, params, KIND_PRODUCT, product=product, sign=s)


def custom_structure(matrix, params: MetallicParams, samples: int = 32, seed: int = 0) -> StructureOp:
    """Explicit matrix; rejected unless verify_structure passes."""
    j = np.array(matrix, dtype=float)
    if j.ndim != 2 or j.shape[0] != j.shape[1]:
        raise StructureError(f"structure matrix must be square, got shape {j.shape}")
    op = StructureOp(j, params, KIND_CUSTOM)
    report = verify_structure(op, samples, seed)
    if not report.passed:
        raise StructureError(
            f"custom structure fails verification (max residual {report.max_residual:.3g})"
        )
    return op


def _sign(sign: Union[int, str]) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise StructureError(f"sign must be '+' or '-', got {sign!r}")


def verify_structure(j: StructureOp, samples: int, seed: int, scenario: str = "structure") -> CheckReport:
    """Residuals of J^2 = pJ + qI, <JX,Y> = <X,JY> and
    <JX,JY> = p<JX,Y> + q<X,Y> over random vector pairs."""
    if samples < 1:
        raise StructureError("verify_structure needs at least one sample")
    p, q = j.params.p, j.params.q
    a = j.matrix
    m = j.ambient_dim
    rng = np.random.default_rng(seed)
    acc = ResidualAccumulator("STRUCTURE", scenario, settings.STRUCTURE_TOL)

    sum_rule = 0.0
    if j.product is not None:
        # the two signs of the same F add up to pI
        other = 0.5 * p * np.eye(m) - j.sign * 0.5 * (2.0 * j.params.sigma - p) * j.product.matrix
        sum_rule = float(np.max(np.abs(a + other - p * np.eye(m))))
        acc.detail("product_sum_rule", sum_rule)

    for i in range(samples):
        x = rng.standard_normal(m)
        y = rng.standard_normal(m)
        nx, ny = np.linalg.norm(x), np.linalg.norm(y)
        jx, jy = a @ x, a @ y
        eq1 = float(np.linalg.norm(a @ jx - p * jx - q * x) / nx)
        eq2 = abs(float(jx @ y - x @ jy)) / (nx * ny)
        eq3 = abs(float(jx @ jy - p * (jx @ y) - q * (x @ y))) / (nx * ny)
        acc.detail("eq1_square", eq1)
        acc.detail("eq2_compatible", eq2)
        acc.detail("eq3_metric", eq3)
        acc.add(max(eq1, eq2, eq3, sum_rule), sample=i)

    report = acc.finish()
    log.debug(f"[Structure] {j.kind} m={m} max={report.max_residual:.3g} {report.status}")
    return report


def inverse(j: StructureOp) -> np.ndarray:
    """J^-1 = (J - pI)/q."""
    return (j.matrix - j.params.p * np.eye(j.ambient_dim)) / j.params.q

"""
MODULE: fields.py
CLASSIFICATION: Geometry Layer (vector fields)
GOAL: Tangent and ambient vector fields along an immersion, each able to
      report its first-order jet at a sample point. Tangent fields give
      coordinate-frame coefficients; ambient fields give R^m values.
CONTRACT ID: IO-FIELD

Random fields used by the residual checks are affine in the coordinates, so
every derivative the checks need is exact and generically nonzero.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence, Tuple

import numpy as np

from modules.core_numerics.exprdsl import ExprAST, eval_many, to_source
from modules.core_numerics.jets import ArrayJet, jets_to_array

if TYPE_CHECKING:  # pragma: no cover
    from modules.geometry.immersion import PointGeometry


class TangentField(ABC):
    """Field of tangent vectors, expressed in the coordinate frame."""

    @abstractmethod
    def coords_jet(self, geom: "PointGeometry") -> ArrayJet:
        """Coefficients (k,) and their partials (k, k) at ``geom.point``."""

    def at(self, geom: "PointGeometry") -> np.ndarray:
        return self.coords_jet(geom).value

    def ambient_jet(self, geom: "PointGeometry") -> ArrayJet:
        """The pushed-forward field Df . X as an R^m-valued jet."""
        return geom.df_jet @ self.coords_jet(geom)


class AmbientField(ABC):
    """Field along the immersion with values in R^m."""

    @abstractmethod
    def ambient_jet(self, geom: "PointGeometry") -> ArrayJet:
        """Value (m,) and partials (k, m) at ``geom.point``."""


@dataclass(frozen=True)
class ExprField(TangentField):
    coeffs: Tuple[ExprAST, ...]

    def coords_jet(self, geom: "PointGeometry") -> ArrayJet:
        jets = eval_many(self.coeffs, geom.env, geom.consts, geom.param_names)
        return jets_to_array(jets)

    def source(self) -> Tuple[str, ...]:
        return tuple(to_source(c) for c in self.coeffs)


@dataclass(frozen=True)
class AffineField(TangentField):
    base: np.ndarray
    slope: np.ndarray
    origin: np.ndarray

    def coords_jet(self, geom: "PointGeometry") -> ArrayJet:
        value = self.base + self.slope @ (geom.point - self.origin)
        return ArrayJet(value, np.ascontiguousarray(self.slope.T))


@dataclass(frozen=True)
class AffineScalar:
    base: float
    gradient: np.ndarray
    origin: np.ndarray

    def value(self, u: np.ndarray) -> float:
        return float(self.base + self.gradient @ (u - self.origin))


@dataclass(frozen=True)
class CombinationField(TangentField):
    """sum_a w_a(u) F_a(u); with F_a spanning a distribution the result is a
    section of that distribution."""

    fields: Tuple[TangentField, ...]
    weights: Tuple[AffineScalar, ...]

    def coords_jet(self, geom: "PointGeometry") -> ArrayJet:
        k = geom.k
        value = np.zeros(k)
        partials = np.zeros((k, k))
        for field, w in zip(self.fields, self.weights):
            fj = field.coords_jet(geom)
            wv = w.value(geom.point)
            value = value + wv * fj.value
            partials = partials + np.outer(w.gradient, fj.value) + wv * fj.partials
        return ArrayJet(value, partials)


@dataclass(frozen=True)
class ExprAmbientField(AmbientField):
    components: Tuple[ExprAST, ...]

    def ambient_jet(self, geom: "PointGeometry") -> ArrayJet:
        jets = eval_many(self.components, geom.env, geom.consts, geom.param_names)
        return jets_to_array(jets)


@dataclass(frozen=True)
class AffineAmbientField(AmbientField):
    base: np.ndarray
    slope: np.ndarray          # (m, k)
    origin: np.ndarray

    def ambient_jet(self, geom: "PointGeometry") -> ArrayJet:
        value = self.base + self.slope @ (geom.point - self.origin)
        return ArrayJet(value, np.ascontiguousarray(self.slope.T))


@dataclass(frozen=True)
class NormalProjectedField(AmbientField):
    """V = P_perp W: a normal field built from any ambient field W."""

    inner: AmbientField

    def ambient_jet(self, geom: "PointGeometry") -> ArrayJet:
        return geom.perp_jet @ self.inner.ambient_jet(geom)


# --- random field factories ---

def random_tangent_field(rng: np.random.Generator, k: int, origin: np.ndarray) -> AffineField:
    return AffineField(rng.standard_normal(k), 0.5 * rng.standard_normal((k, k)), np.array(origin, dtype=float))


def random_section(rng: np.random.Generator, spanning: Sequence[TangentField], k: int,
                   origin: np.ndarray) -> CombinationField:
    weights = tuple(
        AffineScalar(float(rng.standard_normal()), 0.5 * rng.standard_normal(k), np.array(origin, dtype=float))
        for _ in spanning
    )
    return CombinationField(tuple(spanning), weights)


def random_normal_field(rng: np.random.Generator, m: int, k: int, origin: np.ndarray) -> NormalProjectedField:
    inner = AffineAmbientField(rng.standard_normal(m), 0.5 * rng.standard_normal((m, k)),
                               np.array(origin, dtype=float))
    return NormalProjectedField(inner)


def constant_tangent_field(coords: np.ndarray, k: int) -> AffineField:
    return AffineField(np.array(coords, dtype=float), np.zeros((k, k)), np.zeros(k))


def constant_normal_field(vector: np.ndarray, k: int) -> NormalProjectedField:
    m = len(vector)
    return NormalProjectedField(AffineAmbientField(np.array(vector, dtype=float), np.zeros((m, k)), np.zeros(k)))

"""
MODULE: numlin.py
CLASSIFICATION: Numerical Utilities (small dense linear algebra)
GOAL: Orthonormalization, subspace projection, orthogonal complements,
      symmetric positive-definite solves and subspace angles.
CONTRACT ID: IO-LIN

Matrices are plain float ndarrays. A Subspace stores its orthonormal basis as
the rows of a (rank, ambient_dim) array.
"""
from __future__ import annotations

import logging
import math
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg

import settings
from modules.errors import MetallicLabError, SingularMetricError

log = logging.getLogger(__name__)


def as_matrix(entries, rows: Optional[int] = None, cols: Optional[int] = None) -> np.ndarray:
    """Coerce row-major entries to a finite float matrix of the given shape."""
    mat = np.array(entries, dtype=float)
    if rows is not None and cols is not None:
        if mat.size != rows * cols:
            raise MetallicLabError(f"expected {rows}x{cols} entries, got {mat.size}")
        mat = mat.reshape(rows, cols)
    if mat.ndim != 2:
        raise MetallicLabError(f"expected a matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise MetallicLabError("matrix has non-finite entries")
    return mat


class Subspace(NamedTuple):
    ambient_dim: int
    basis: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.basis.shape[0])

    @property
    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    @classmethod
    def zero(cls, ambient_dim: int) -> "Subspace":
        return cls(ambient_dim, np.zeros((0, ambient_dim)))


def _orthogonalize(v: np.ndarray, basis: Sequence[np.ndarray]) -> np.ndarray:
    # modified Gram-Schmidt, applied twice
    for _ in range(2):
        for b in basis:
            v = v - np.dot(b, v) * b
    return v


def gram_schmidt(vectors, tol: float = settings.RANK_TOL, ambient_dim: Optional[int] = None) -> Subspace:
    """Orthonormal basis of span(vectors).

    A vector is dropped when its residual after orthogonalization is below
    ``tol`` times the largest input norm.
    """
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    if ambient_dim is None:
        if not vecs:
            raise MetallicLabError("gram_schmidt needs vectors or an ambient dimension")
        ambient_dim = vecs[0].shape[0]
    for v in vecs:
        if v.shape != (ambient_dim,):
            raise MetallicLabError(f"vector of shape {v.shape} in R^{ambient_dim}")
    scale = max((float(np.linalg.norm(v)) for v in vecs), default=0.0)
    if scale == 0.0:
        return Subspace.zero(ambient_dim)
    cutoff = tol * scale
    basis = []
    for v in vecs:
        w = _orthogonalize(v, basis)
        norm = float(np.linalg.norm(w))
        if norm >= cutoff:
            basis.append(w / norm)
    if not basis:
        return Subspace.zero(ambient_dim)
    return Subspace(ambient_dim, np.array(basis))


def project(v, space: Subspace) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if space.rank == 0:
        return np.zeros_like(v)
    return space.basis.T @ (space.basis @ v)


def complement(space: Subspace) -> Subspace:
    """Orthogonal complement seeded by the canonical basis in index order."""
    m = space.ambient_dim
    target = m - space.rank
    if target == 0:
        return Subspace.zero(m)
    current = list(space.basis)
    found = []
    for i in range(m):
        w = _orthogonalize(np.eye(m)[i], current)
        norm = float(np.linalg.norm(w))
        if norm > settings.COMPLEMENT_PIVOT_TOL:
            w = w / norm
            current.append(w)
            found.append(w)
            if len(found) == target:
                return Subspace(m, np.array(found))
    log.debug(f"[numlin] canonical seeding found {len(found)}/{target} vectors; using null_space")
    if space.rank == 0:
        return Subspace(m, np.eye(m))
    ns = scipy.linalg.null_space(space.basis)
    return Subspace(m, ns.T[:target])


def solve_sym(a, b) -> np.ndarray:
    """Solve a x = b for symmetric positive-definite ``a`` (Cholesky)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > settings.SYMMETRY_TOL * scale:
        raise SingularMetricError("matrix is not symmetric")
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise SingularMetricError(f"matrix is not positive-definite: {exc}") from exc
    return scipy.linalg.cho_solve(factor, b)


def angle_to_subspace(v, space: Subspace) -> float:
    """Angle in [0, pi/2] between a nonzero vector and a subspace."""
    v = np.asarray(v, dtype=float)
    inside = project(v, space)
    return math.atan2(float(np.linalg.norm(v - inside)), float(np.linalg.norm(inside)))

import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

from modules.core_numerics.numlin import (
    Subspace,
    angle_to_subspace,
    as_matrix,
    complement,
    gram_schmidt,
    project,
    solve_sym,
)
from modules.errors import MetallicLabError, SingularMetricError


def test_gram_schmidt_plane():
    s = gram_schmidt([(1, 0), (1, 1)], 1e-10)
    assert s.rank == 2
    np.testing.assert_allclose(s.basis, [[1, 0], [0, 1]], atol=1e-15)


def test_gram_schmidt_drops_collinear_and_zero_vectors():
    assert gram_schmidt([(1, 0), (2, 0)], 1e-10).rank == 1
    assert gram_schmidt([(0, 0)], 1e-10).rank == 0


def test_gram_schmidt_rejects_mixed_dimensions():
    with pytest.raises(MetallicLabError):
        gram_schmidt([(1, 0), (1, 0, 0)])


def test_project_examples():
    s = gram_schmidt([(1, 0)])
    np.testing.assert_allclose(project((3, 4), s), (3, 0))
    np.testing.assert_allclose(project((5, 0), s), (5, 0), atol=1e-12)
    np.testing.assert_allclose(project((0, 2), s), (0, 0), atol=1e-12)
    np.testing.assert_allclose(project((1, 2), Subspace.zero(2)), (0, 0))


def test_complement_of_axis_and_full_space():
    c = complement(gram_schmidt([(1, 0, 0)]))
    assert c.rank == 2
    np.testing.assert_allclose(c.basis, [[0, 1, 0], [0, 0, 1]], atol=1e-15)
    assert complement(gram_schmidt(np.eye(3))).rank == 0
    assert complement(Subspace.zero(3)).rank == 3


def test_complement_is_deterministic():
    s = gram_schmidt([(1, 1, 0, 0), (0, 1, 1, 1)])
    assert np.array_equal(complement(s).basis, complement(s).basis)


def test_solve_sym_examples():
    b = np.array([1.5, -2.0, 0.25])
    np.testing.assert_allclose(solve_sym(np.eye(3), b), b)
    np.testing.assert_allclose(solve_sym([[2.0]], [4.0]), [2.0])
    np.testing.assert_allclose(solve_sym([[2.0, 1.0], [1.0, 2.0]], [3.0, 3.0]), [1.0, 1.0], atol=1e-14)


def test_solve_sym_rejects_indefinite_and_asymmetric():
    with pytest.raises(SingularMetricError):
        solve_sym([[1.0, 0.0], [0.0, -1.0]], [1.0, 1.0])
    with pytest.raises(SingularMetricError):
        solve_sym([[1.0, 0.5], [0.0, 1.0]], [1.0, 1.0])


def test_as_matrix_shape_and_finiteness():
    assert as_matrix([1, 2, 3, 4], 2, 2).shape == (2, 2)
    with pytest.raises(MetallicLabError):
        as_matrix([1, 2, 3], 2, 2)
    with pytest.raises(MetallicLabError):
        as_matrix([[1.0, math.inf]])


def test_angle_to_subspace():
    s = gram_schmidt([(1, 0, 0)])
    assert angle_to_subspace((1, 1, 0), s) == pytest.approx(math.pi / 4, abs=1e-15)
    assert angle_to_subspace((0, 0, 2), s) == math.pi / 2
    assert angle_to_subspace((3, 0, 0), s) == 0.0


def _random_subspace(seed: int, m: int, r: int) -> Subspace:
    rng = np.random.default_rng(seed)
    return gram_schmidt(list(rng.standard_normal((r, m))), ambient_dim=m)


@hsettings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 7), data=st.data())
def test_projection_is_idempotent_and_self_adjoint(seed, m, data):
    r = data.draw(st.integers(1, m))
    s = _random_subspace(seed, m, r)
    rng = np.random.default_rng(seed + 1)
    u, v = rng.standard_normal(m), rng.standard_normal(m)
    pu = project(u, s)
    np.testing.assert_allclose(project(pu, s), pu, atol=1e-12)
    assert abs(pu @ v - u @ project(v, s)) < 1e-12 * max(1.0, np.linalg.norm(u) * np.linalg.norm(v))
    assert abs((u - pu) @ s.basis.T).max() < 1e-12 * max(1.0, np.linalg.norm(u))


@hsettings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 7), data=st.data())
def test_subspace_plus_complement_is_orthonormal_basis(seed, m, data):
    r = data.draw(st.integers(0, m))
    s = _random_subspace(seed, m, r) if r else Subspace.zero(m)
    c = complement(s)
    assert s.rank + c.rank == m
    full = np.vstack([s.basis, c.basis])
    np.testing.assert_allclose(full @ full.T, np.eye(m), atol=1e-10)

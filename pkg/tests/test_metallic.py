import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

import settings
from modules.core_numerics.metallic import (
    KIND_CUSTOM,
    KIND_DIAGONAL,
    KIND_PRODUCT,
    StructureOp,
    custom_structure,
    diagonal_structure,
    from_product,
    inverse,
    metallic_number,
    product_structure,
    verify_structure,
)
from modules.errors import InvalidProductError, StructureError

from conftest import PHI


def test_golden_and_silver_means():
    golden = metallic_number(1, 1)
    assert golden.sigma == pytest.approx(PHI, abs=1e-15)
    assert golden.sigma_bar == pytest.approx(1.0 - PHI, abs=1e-15)
    assert metallic_number(2, 1).sigma == pytest.approx(1.0 + math.sqrt(2.0), abs=1e-15)
    assert metallic_number(1, 2).sigma == pytest.approx(2.0, abs=1e-15)


@pytest.mark.parametrize("p, q", [(0, 1), (1, 0), (-1, 2), (1.5, 1)])
def test_metallic_number_rejects_non_positive_integers(p, q):
    with pytest.raises(StructureError):
        metallic_number(p, q)


@given(p=st.integers(1, 20), q=st.integers(1, 20))
def test_vieta_relations(p, q):
    params = metallic_number(p, q)
    assert params.sigma + params.sigma_bar == pytest.approx(p, abs=1e-12)
    assert params.sigma * params.sigma_bar == pytest.approx(-q, rel=1e-12)
    assert params.sigma > 0 > params.sigma_bar


def test_diagonal_pattern_builds_and_verifies():
    params = metallic_number(1, 1)
    j = diagonal_structure(["sigma", "sigma_bar", "sigma", "sigma_bar"], params)
    assert j.kind == KIND_DIAGONAL
    np.testing.assert_allclose(np.diag(j.matrix), [PHI, 1 - PHI, PHI, 1 - PHI])
    assert verify_structure(j, 50, 1).passed


def test_diagonal_pattern_rejects_unknown_entry_and_empty_pattern():
    params = metallic_number(1, 1)
    with pytest.raises(StructureError):
        diagonal_structure(["sigma", "tau"], params)
    with pytest.raises(StructureError):
        diagonal_structure([], params)


@pytest.mark.parametrize("sign, expected", [("+", "sigma"), ("-", "sigma_bar")])
def test_identity_product_gives_scalar_structure(sign, expected):
    params = metallic_number(2, 3)
    j = from_product(product_structure(np.eye(3)), params, sign)
    assert j.kind == KIND_PRODUCT
    np.testing.assert_allclose(j.matrix, getattr(params, expected) * np.eye(3), atol=1e-14)


@pytest.mark.parametrize("p, q", [(1, 1), (2, 1), (3, 2)])
def test_swap_product_and_both_signs(p, q):
    params = metallic_number(p, q)
    f = product_structure(np.diag([1.0, -1.0]))
    plus, minus = from_product(f, params, "+"), from_product(f, params, "-")
    np.testing.assert_allclose(plus.matrix, np.diag([params.sigma, params.sigma_bar]), atol=1e-14)
    np.testing.assert_allclose(minus.matrix, np.diag([params.sigma_bar, params.sigma]), atol=1e-14)
    np.testing.assert_allclose(plus.matrix + minus.matrix, p * np.eye(2), atol=1e-14)
    for j in (plus, minus):
        report = verify_structure(j, 64, 3)
        assert report.passed
        assert report.details["product_sum_rule"] < 1e-14


@pytest.mark.parametrize("matrix", [
    [[1.0, 1.0], [0.0, 1.0]],
    [[2.0, 0.0], [0.0, 2.0]],
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
])
def test_invalid_product_is_rejected(matrix):
    with pytest.raises(InvalidProductError):
        product_structure(matrix)


def test_unknown_sign_is_rejected():
    with pytest.raises(StructureError):
        from_product(product_structure(np.eye(2)), metallic_number(1, 1), "*")


def test_perturbed_structure_fails_with_measurable_residual():
    params = metallic_number(1, 1)
    matrix = np.diag([params.sigma, params.sigma_bar]) + 1e-3 * np.diag([1.0, 0.0])
    report = verify_structure(StructureOp(matrix, params, KIND_CUSTOM), 32, 0)
    assert report.failed
    assert 1e-4 < report.max_residual < 1e-2
    assert report.worst is not None and "sample" in report.worst


def test_custom_structure_accepts_rotated_pattern_and_rejects_perturbation():
    params = metallic_number(1, 1)
    c, s = math.cos(0.3), math.sin(0.3)
    rot = np.array([[c, -s], [s, c]])
    matrix = rot @ np.diag([params.sigma, params.sigma_bar]) @ rot.T
    assert custom_structure(matrix, params).kind == KIND_CUSTOM
    with pytest.raises(StructureError):
        custom_structure(matrix + 1e-3 * np.eye(2), params)


def test_verify_structure_needs_a_sample():
    j = diagonal_structure(["sigma"], metallic_number(1, 1))
    with pytest.raises(StructureError):
        verify_structure(j, 0, 0)


def test_verify_structure_tolerance_comes_from_settings():
    j = diagonal_structure(["sigma", "sigma"], metallic_number(1, 1))
    assert verify_structure(j, 5, 0).tolerance == settings.STRUCTURE_TOL


@hsettings(max_examples=30, deadline=None)
@given(p=st.integers(1, 6), q=st.integers(1, 6), pattern=st.lists(st.booleans(), min_size=1, max_size=6))
def test_inverse_matches_formula(p, q, pattern):
    params = metallic_number(p, q)
    j = diagonal_structure(["sigma" if b else "sigma_bar" for b in pattern], params)
    np.testing.assert_allclose(j.matrix @ inverse(j), np.eye(len(pattern)), atol=1e-12)

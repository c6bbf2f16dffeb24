import math

import numpy as np
import pytest

from modules.errors import ImmersionDegenerateError, MetallicLabError, NotNormalFieldError
from modules.geometry.fields import (
    AffineAmbientField,
    constant_normal_field,
    constant_tangent_field,
    random_normal_field,
    random_tangent_field,
)
from modules.geometry.immersion import (
    frame_at,
    induced_ops,
    normal_connection,
    second_fundamental_form,
    shape_operator,
    tangent_connection,
    weingarten,
)
from modules.scenarios.builtins import builtin_document
from modules.scenarios.loader import scenario_from_dict

from conftest import PHI, builtin


def _scenario(name, **ambient):
    doc = builtin_document(name)
    doc["ambient"].update(ambient)
    return scenario_from_dict(doc)


def test_example1_frame_and_metric(example1):
    t = math.pi / 4
    geom = frame_at(example1, (1.0, 1.0))
    z1, z2 = geom.coord_frame
    np.testing.assert_allclose(z1, [math.cos(t), math.sin(t), 0, 0], atol=1e-15)
    np.testing.assert_allclose(z2, [0, 0, 1, PHI], atol=1e-14)
    np.testing.assert_allclose(geom.induced_metric, np.diag([1.0, PHI + 2.0]), atol=1e-12)
    assert geom.tangent.rank == 2 and geom.normal.rank == 2
    assert not geom.hessians.any()


@pytest.mark.parametrize("p, q", [(1, 1), (2, 1), (3, 2), (1, 5)])
def test_example1_metric_for_general_parameters(p, q):
    scn = builtin("example1", p=p, q=q)
    sigma = scn.structure.params.sigma
    geom = frame_at(scn, (0.7, -0.3))
    np.testing.assert_allclose(geom.induced_metric, np.diag([1.0, (p * sigma + 2 * q) / q]), atol=1e-12)


@pytest.mark.parametrize("p, q", [(1, 1), (2, 3)])
def test_example2_frame_norms(p, q):
    scn = builtin("example2", p=p, q=q)
    sigma = scn.structure.params.sigma
    geom = frame_at(scn, (1.3, 0.2, -0.4))
    norms2 = np.diag(geom.induced_metric)
    np.testing.assert_allclose(norms2, [1.0, (p * sigma + 2 * q) / q, (p * sigma + 2 * q) / (p * sigma + q)],
                               rtol=1e-12)


def test_point_with_wrong_arity_is_rejected(example1):
    with pytest.raises(MetallicLabError):
        frame_at(example1, (1.0, 1.0, 1.0))


def test_degenerate_point_names_the_point():
    doc = builtin_document("paraboloid")
    doc["immersion"]["components"] = ["u^2", "v", "0", "0"]
    doc["immersion"]["domain"] = [[-1.0, 2.0], [-1.0, 1.0]]
    scn = scenario_from_dict(doc)
    with pytest.raises(ImmersionDegenerateError) as info:
        frame_at(scn, (0.0, 0.5))
    assert info.value.point == (0.0, 0.5)
    assert info.value.rank == 1
    assert "(0, 0.5)" in str(info.value)


def test_induced_ops_on_example1(example1):
    geom = frame_at(example1, (1.0, 1.0))
    ops = induced_ops(geom, example1.structure)
    z2 = geom.coord_frame[1]
    np.testing.assert_allclose(ops.Tmat[:, 1], 0.0, atol=1e-14)
    np.testing.assert_allclose(geom.normal.basis.T @ ops.Nmat[:, 1], example1.structure.apply(z2), atol=1e-14)
    e1 = np.array([1.0, 0.0])
    assert geom.inner(ops.Tmat @ e1, e1) == pytest.approx(0.5, abs=1e-14)


def test_induced_ops_invariants_on_paraboloid(paraboloid):
    geom = frame_at(paraboloid, (0.4, -0.6))
    ops = induced_ops(geom, paraboloid.structure)
    gt = geom.induced_metric @ ops.Tmat
    np.testing.assert_allclose(gt, gt.T, atol=1e-12)
    np.testing.assert_allclose(ops.nmat, ops.nmat.T, atol=1e-12)
    # <NX, U> = <X, tU>
    np.testing.assert_allclose(ops.Nmat.T, geom.induced_metric @ ops.tmat, atol=1e-12)


def test_scalar_structure_has_no_normal_part():
    scn = _scenario("paraboloid", pattern=["sigma"] * 4)
    geom = frame_at(scn, (0.3, 0.8))
    ops = induced_ops(geom, scn.structure)
    np.testing.assert_allclose(ops.Tmat, PHI * np.eye(2), atol=1e-12)
    np.testing.assert_allclose(ops.Nmat, 0.0, atol=1e-12)


def test_induced_ops_rejects_dimension_mismatch(example1, example2):
    with pytest.raises(MetallicLabError):
        induced_ops(frame_at(example1, (1.0, 0.0)), example2.structure)


def test_paraboloid_second_fundamental_form_at_origin(paraboloid):
    geom = frame_at(paraboloid, (0.0, 0.0))
    np.testing.assert_allclose(second_fundamental_form(geom, (1, 0), (1, 0)), [0, 0, 2, 0], atol=1e-15)
    np.testing.assert_allclose(second_fundamental_form(geom, (1, 0), (0, 1)), 0.0, atol=1e-15)
    np.testing.assert_allclose(shape_operator(geom, [0, 0, 1, 0]), 2.0 * np.eye(2), atol=1e-14)
    np.testing.assert_allclose(shape_operator(geom, [0, 0, 0, 1]), 0.0, atol=1e-15)


def test_second_fundamental_form_is_normal_and_symmetric(paraboloid):
    rng = np.random.default_rng(3)
    geom = frame_at(paraboloid, (0.5, -0.25))
    for _ in range(20):
        x, y = rng.standard_normal(2), rng.standard_normal(2)
        hxy = second_fundamental_form(geom, x, y)
        np.testing.assert_allclose(hxy, second_fundamental_form(geom, y, x), atol=1e-12)
        assert np.abs(geom.jacobian.T @ hxy).max() < 1e-12


def test_shape_operator_is_adjoint_of_h(paraboloid):
    rng = np.random.default_rng(11)
    for _ in range(100):
        geom = frame_at(paraboloid, rng.uniform(-1, 1, 2))
        x, y = rng.standard_normal(2), rng.standard_normal(2)
        v = geom.perp_proj @ rng.standard_normal(4)
        lhs = second_fundamental_form(geom, x, y) @ v
        rhs = geom.inner(shape_operator(geom, v) @ x, y)
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


def test_shape_operator_vanishes_on_linear_immersion(example2):
    geom = frame_at(example2, (1.0, 0.5, 0.5))
    for v in geom.normal.basis:
        np.testing.assert_allclose(shape_operator(geom, v), 0.0, atol=1e-15)


def test_shape_operator_rejects_tangent_vector(paraboloid):
    geom = frame_at(paraboloid, (0.0, 0.0))
    with pytest.raises(NotNormalFieldError):
        shape_operator(geom, [1.0, 0.0, 0.0, 0.0])


def test_coordinate_fields_are_parallel_on_a_plane(example1):
    for i in range(2):
        for j in range(2):
            x = constant_tangent_field(np.eye(2)[i], 2)
            y = constant_tangent_field(np.eye(2)[j], 2)
            np.testing.assert_allclose(tangent_connection(example1, x, y, (1.0, 0.2)), 0.0, atol=1e-15)


def test_tangent_connection_matches_finite_differences(paraboloid):
    rng = np.random.default_rng(5)
    h = 1e-5
    for _ in range(10):
        point = rng.uniform(-0.8, 0.8, 2)
        xdir = rng.standard_normal(2)
        x = constant_tangent_field(xdir, 2)
        y = random_tangent_field(rng, 2, point)

        def pushed(u):
            g = frame_at(paraboloid, u)
            return g.push(y.at(g))

        fd = (pushed(point + h * xdir) - pushed(point - h * xdir)) / (2 * h)
        geom = frame_at(paraboloid, point)
        expected = geom.to_coords(fd)
        got = tangent_connection(paraboloid, x, y, geom)
        assert np.linalg.norm(got - expected) < 1e-6 * max(1.0, np.linalg.norm(expected))


def test_tangent_connection_is_metric_compatible(paraboloid):
    rng = np.random.default_rng(8)
    for _ in range(20):
        point = rng.uniform(-1, 1, 2)
        geom = frame_at(paraboloid, point)
        xdir = rng.standard_normal(2)
        x = constant_tangent_field(xdir, 2)
        y, z = random_tangent_field(rng, 2, point), random_tangent_field(rng, 2, point)
        yj, zj = y.ambient_jet(geom), z.ambient_jet(geom)
        lhs = yj.along(xdir) @ zj.value + yj.value @ zj.along(xdir)
        rhs = (geom.inner(tangent_connection(paraboloid, x, y, geom), z.at(geom))
               + geom.inner(y.at(geom), tangent_connection(paraboloid, x, z, geom)))
        assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


def test_constant_normal_field_is_parallel_on_linear_immersion(example1):
    geom = frame_at(example1, (1.2, 0.3))
    x = constant_tangent_field([0.3, -1.1], 2)
    for basis_vector in geom.normal.basis:
        v = constant_normal_field(basis_vector, 2)
        np.testing.assert_allclose(normal_connection(example1, x, v, geom), 0.0, atol=1e-14)


def test_weingarten_reconstruction(paraboloid):
    rng = np.random.default_rng(13)
    for _ in range(20):
        point = rng.uniform(-1, 1, 2)
        geom = frame_at(paraboloid, point)
        xdir = rng.standard_normal(2)
        v = random_normal_field(rng, 4, 2, point)
        vj = v.ambient_jet(geom)
        ambient = vj.along(xdir)
        shape_part = -geom.push(shape_operator(geom, vj.value) @ xdir)
        normal_part = geom.normal.basis.T @ normal_connection(paraboloid, constant_tangent_field(xdir, 2), v, geom)
        assert np.linalg.norm(ambient - shape_part - normal_part) < 1e-9 * max(1.0, np.linalg.norm(ambient))
        np.testing.assert_allclose(weingarten(geom, xdir, v), -shape_operator(geom, vj.value) @ xdir, atol=1e-9)


def test_normal_connection_is_metric_compatible(paraboloid):
    rng = np.random.default_rng(17)
    for _ in range(20):
        point = rng.uniform(-1, 1, 2)
        geom = frame_at(paraboloid, point)
        xdir = rng.standard_normal(2)
        x = constant_tangent_field(xdir, 2)
        v, w = random_normal_field(rng, 4, 2, point), random_normal_field(rng, 4, 2, point)
        vj, wj = v.ambient_jet(geom), w.ambient_jet(geom)
        lhs = vj.along(xdir) @ wj.value + vj.value @ wj.along(xdir)
        nb = geom.normal.basis
        rhs = normal_connection(paraboloid, x, v, geom) @ (nb @ wj.value) \
            + (nb @ vj.value) @ normal_connection(paraboloid, x, w, geom)
        assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))


def test_normal_connection_rejects_tangent_field(paraboloid):
    v = AffineAmbientField(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros((4, 2)), np.zeros(2))
    x = constant_tangent_field([1.0, 0.0], 2)
    with pytest.raises(NotNormalFieldError):
        normal_connection(paraboloid, x, v, (0.0, 0.0))

import math

import numpy as np
import pytest

from modules.core_numerics.exprdsl import eval_value
from modules.errors import NotInDistributionError
from modules.geometry.immersion import frame_at, induced_ops, sample_points
from modules.geometry.slant import (
    ANTI_INVARIANT,
    INVARIANT,
    NOT_SLANT,
    PROPER_HEMI_SLANT,
    SEMI_INVARIANT,
    SLANT,
    UNCLASSIFIED,
    classify,
    normal_split,
    slant_angle,
    slant_criterion,
    slant_report,
    snap_angle,
)
from modules.scenarios.builtins import builtin_document
from modules.scenarios.loader import scenario_from_dict

from conftest import builtin


def _geoms(scn, count=10, seed=1):
    return [frame_at(scn, u) for u in sample_points(scn, count, seed)]


def _closed_form(scn, index=0):
    return eval_value(scn.closed_forms[index].expr, scn.consts)


@pytest.mark.parametrize("p", [1, 2, 3])
@pytest.mark.parametrize("q", [1, 2, 3])
@pytest.mark.parametrize("t", [math.pi / 6, math.pi / 4, math.pi / 3])
def test_example1_angle_matches_closed_form(p, q, t):
    scn = builtin("example1", p=p, q=q, t=t)
    report = slant_report(scn, scn.distribution("D_theta"), _geoms(scn), seed=3)
    assert report.verdict in (SLANT, ANTI_INVARIANT)
    # the angle is a subspace angle, so it sees the closed form up to sign
    assert abs(report.cos_theta - abs(_closed_form(scn))) < 1e-10


def test_golden_angle_is_arccos_one_over_sqrt6(example1):
    geom = frame_at(example1, (1.0, 1.0))
    sample = slant_angle(geom, induced_ops(geom, example1.structure), example1.distribution("D_theta"), (1.0, 0.0))
    assert abs(sample.cos_theta - 1.0 / math.sqrt(6.0)) < 1e-12
    assert sample.theta == pytest.approx(math.atan(math.sqrt(5.0)), abs=1e-12)


def test_anti_invariant_direction_is_a_right_angle(example1):
    geom = frame_at(example1, (0.5, 0.5))
    sample = slant_angle(geom, induced_ops(geom, example1.structure), example1.distribution("D_perp"), (0.0, 2.0))
    assert snap_angle(sample.theta) == math.pi / 2


def test_slant_angle_is_scale_invariant(example2):
    geom = frame_at(example2, (1.0, 0.3, -0.2))
    ops = induced_ops(geom, example2.structure)
    spec = example2.distribution("D_perp")
    x = np.array([0.0, 0.7, -1.3])
    base = slant_angle(geom, ops, spec, x)
    for c in (4.0, -0.25, 1024.0):
        assert slant_angle(geom, ops, spec, c * x).theta == base.theta


def test_vector_outside_distribution_is_rejected(example1):
    geom = frame_at(example1, (1.0, 0.0))
    ops = induced_ops(geom, example1.structure)
    with pytest.raises(NotInDistributionError):
        slant_angle(geom, ops, example1.distribution("D_theta"), (1.0, 1.0))
    with pytest.raises(NotInDistributionError):
        slant_angle(geom, ops, example1.distribution("D_theta"), (0.0, 0.0))


def test_lambda_criterion_values(example1):
    geom = frame_at(example1, (1.0, 1.0))
    ops = induced_ops(geom, example1.structure)
    lam, res = slant_criterion(geom, ops, example1.distribution("D_theta"), 1, 1)
    assert lam == pytest.approx(1.0 / 6.0, abs=1e-12)
    assert res < 1e-10
    lam, res = slant_criterion(geom, ops, example1.distribution("D_perp"), 1, 1)
    assert abs(lam) < 1e-12 and res < 1e-10

    jbar = builtin("example1-jbar")
    geom = frame_at(jbar, (1.0, 1.0))
    lam, res = slant_criterion(geom, induced_ops(geom, jbar.structure), jbar.distribution("D_theta"), 1, 1)
    assert lam == pytest.approx(1.0, abs=1e-12)
    assert res < 1e-10


def test_normal_split_dimensions(example1, example2):
    for scn, dims in ((example1, (1, 1, 0)), (example2, (1, 2, 1))):
        geom = frame_at(scn, [(lo + hi) / 2 for lo, hi in scn.domain])
        split = normal_split(geom, induced_ops(geom, scn.structure), scn.distribution("D_theta"),
                             scn.distribution("D_perp"), scn.structure)
        assert (split.dim_theta, split.dim_perp, split.dim_mu) == dims
        assert split.orthogonality < 1e-10
        assert split.mu_invariance < 1e-10


@pytest.mark.parametrize("name", ["example1", "example1-golden"])
def test_normal_split_has_no_spurious_mu(name):
    scn = builtin(name)
    d1, d2 = scn.distribution("D_theta"), scn.distribution("D_perp")
    for geom in _geoms(scn, count=50, seed=2):
        split = normal_split(geom, induced_ops(geom, scn.structure), d1, d2, scn.structure)
        assert split.dim_mu == 0
        assert split.mu_invariance == 0.0
    verdict = classify(scn)
    assert verdict.dims == (1, 1, 0)
    assert verdict.diagnostics == []


def test_normal_split_of_scalar_structure():
    doc = builtin_document("example2")
    doc["ambient"]["pattern"] = ["sigma"] * 7
    scn = scenario_from_dict(doc)
    geom = frame_at(scn, (1.0, 0.0, 0.0))
    split = normal_split(geom, induced_ops(geom, scn.structure), scn.distribution("D_theta"),
                         scn.distribution("D_perp"), scn.structure)
    assert (split.dim_theta, split.dim_perp, split.dim_mu) == (0, 0, 4)


def test_classify_example1(example1):
    verdict = classify(example1)
    assert verdict.classification == PROPER_HEMI_SLANT
    assert verdict.dims == (1, 1, 0)
    assert math.cos(verdict.theta) == pytest.approx(1.0 / math.sqrt(6.0), abs=1e-10)
    assert verdict.is_hemi_slant


def test_classify_example2(example2):
    verdict = classify(example2)
    assert verdict.classification == PROPER_HEMI_SLANT
    assert verdict.dims == (1, 2, 1)
    assert abs(math.cos(verdict.theta) - _closed_form(example2)) < 1e-10
    assert math.cos(verdict.theta) == pytest.approx(0.831095, abs=1e-6)


@pytest.mark.parametrize("name, dims", [("example1-jbar", (1, 1, 1)), ("example2-jbar", (1, 2, 2))])
def test_second_structure_is_semi_invariant(name, dims):
    verdict = classify(builtin(name))
    assert verdict.classification == SEMI_INVARIANT
    assert abs(verdict.theta) < 1e-10
    assert verdict.dims == dims


def test_classify_other_builtins():
    assert classify(builtin("example1-golden")).classification == PROPER_HEMI_SLANT
    cylinder = classify(builtin("slant-cylinder"))
    assert cylinder.classification == PROPER_HEMI_SLANT
    assert cylinder.dims == (1, 1, 2)
    paraboloid = classify(builtin("paraboloid"))
    assert paraboloid.classification == UNCLASSIFIED
    assert paraboloid.diagnostics == ["no distributions declared"]


def test_classify_single_distribution_cases():
    doc = builtin_document("example1")
    doc["distributions"] = {"D_theta": [["1", "0"], ["0", "1"]]}
    doc.pop("closed_forms")
    verdict = classify(scenario_from_dict(doc))
    # D_theta is now the whole tangent plane, which holds directions of different angles
    assert verdict.classification == UNCLASSIFIED
    assert verdict.reports[0].verdict == NOT_SLANT

    doc["ambient"]["pattern"] = ["sigma"] * 4
    assert classify(scenario_from_dict(doc)).classification == INVARIANT


def test_classify_rejects_non_orthogonal_distributions():
    doc = builtin_document("example1")
    doc["distributions"]["D_perp"] = [["1", "1"]]
    verdict = classify(scenario_from_dict(doc))
    assert verdict.classification == UNCLASSIFIED
    assert "not orthogonal" in verdict.diagnostics[0]


def test_classify_is_deterministic(example2):
    a, b = classify(example2), classify(example2)
    assert a.to_dict() == b.to_dict()

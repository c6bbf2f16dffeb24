"""
MODULE: slant.py
CLASSIFICATION: Geometry Layer (slant distributions)
GOAL: Slant angles of declared distributions, the lambda criterion
      (P_D T)^2 X = lambda (p P_D T X + q X), the hemi-slant classification
      and the splitting of the normal bundle into N(D1), N(D2) and mu.
CONTRACT ID: IO-SLANT
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

import settings
from modules.core_numerics.numlin import Subspace, angle_to_subspace, gram_schmidt, project, solve_sym
from modules.errors import MetallicLabError, NotInDistributionError
from modules.geometry.immersion import (
    DistributionSpec,
    ImmersionScenario,
    InducedOps,
    PointGeometry,
    frame_at,
    induced_ops,
    sample_points,
)

log = logging.getLogger(__name__)

INVARIANT = "invariant"
ANTI_INVARIANT = "anti-invariant"
SLANT = "slant"
SEMI_INVARIANT = "semi-invariant"
PROPER_HEMI_SLANT = "proper hemi-slant"
BI_SLANT = "bi-slant"
UNCLASSIFIED = "unclassified"
NOT_SLANT = "not-slant"

# every verdict of the hemi-slant family (the four degenerate cases plus the proper one)
HEMI_SLANT_FAMILY = (INVARIANT, ANTI_INVARIANT, SLANT, SEMI_INVARIANT, PROPER_HEMI_SLANT)


@dataclass(frozen=True)
class SlantSample:
    point: Tuple[float, ...]
    direction: Tuple[float, ...]
    cos_theta: float
    theta: float


@dataclass
class SlantReport:
    distribution: str
    samples: List[SlantSample]
    mean_theta: float
    max_deviation: float
    lambda_fit: float
    lambda_residual: float
    verdict: str
    lambda_deviation: float = 0.0

    @property
    def cos_theta(self) -> float:
        return math.cos(self.mean_theta)

    def to_dict(self) -> Dict[str, object]:
        return {
            "distribution": self.distribution,
            "samples": len(self.samples),
            "mean_theta": self.mean_theta,
            "cos_theta": self.cos_theta,
            "max_deviation": self.max_deviation,
            "lambda_fit": self.lambda_fit,
            "lambda_residual": self.lambda_residual,
            "lambda_deviation": self.lambda_deviation,
            "verdict": self.verdict,
        }


@dataclass
class NormalSplit:
    dim_theta: int
    dim_perp: int
    dim_mu: int
    orthogonality: float
    mu_invariance: float
    t_on_mu: float
    mu: Subspace

    def to_dict(self) -> Dict[str, object]:
        return {
            "dims": [self.dim_theta, self.dim_perp, self.dim_mu],
            "orthogonality_residual": self.orthogonality,
            "mu_invariance_residual": self.mu_invariance,
            "t_on_mu_residual": self.t_on_mu,
        }


@dataclass
class HemiSlantVerdict:
    classification: str
    theta: Optional[float]
    dims: Tuple[int, int, int]
    diagnostics: List[str] = field(default_factory=list)
    reports: List[SlantReport] = field(default_factory=list)
    theta_perp: Optional[float] = None
    split: Optional[NormalSplit] = None

    @property
    def is_hemi_slant(self) -> bool:
        return self.classification in HEMI_SLANT_FAMILY

    @property
    def cos2(self) -> float:
        return math.cos(self.theta) ** 2 if self.theta is not None else 0.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "classification": self.classification,
            "theta": self.theta,
            "cos_theta": None if self.theta is None else math.cos(self.theta),
            "theta_perp": self.theta_perp,
            "dims": list(self.dims),
            "diagnostics": list(self.diagnostics),
            "slant_reports": [r.to_dict() for r in self.reports],
            "normal_split": None if self.split is None else self.split.to_dict(),
        }


# --- helpers ---

def ambient_span(geom: PointGeometry, spec: DistributionSpec) -> Subspace:
    frame = geom.distribution_frame(spec).value
    return gram_schmidt(list((geom.jacobian @ frame).T), settings.RANK_TOL, geom.m)


def coordinate_projector(geom: PointGeometry, frame: np.ndarray) -> np.ndarray:
    """g-orthogonal projector onto the span of ``frame`` columns:
    P_D = S (S^T G S)^-1 S^T G."""
    g = geom.induced_metric
    if frame.shape[1] == 0:
        return np.zeros((geom.k, geom.k))
    return frame @ solve_sym(frame.T @ g @ frame, frame.T @ g)


def snap_angle(theta: float) -> float:
    if theta < settings.RIGHT_ANGLE_SNAP:
        return 0.0
    if abs(theta - math.pi / 2) < settings.RIGHT_ANGLE_SNAP:
        return math.pi / 2
    return theta


# --- operations ---

def slant_angle(geom: PointGeometry, ops: InducedOps, spec: DistributionSpec, x) -> SlantSample:
    """Angle between JX and D at ``geom.point``; X must lie in D.

    The angle is measured against the ambient image of D, so it does not
    depend on the spanning fields chosen for D.
    """
    x = np.asarray(x, dtype=float)
    xa = geom.push(x)
    nx = float(np.linalg.norm(xa))
    if nx == 0.0:
        raise NotInDistributionError("slant angle of the zero vector is undefined")
    span = ambient_span(geom, spec)
    outside = float(np.linalg.norm(xa - project(xa, span))) / nx
    if outside > settings.IN_DISTRIBUTION_TOL:
        raise NotInDistributionError(
            f"vector is not in distribution {spec.name!r} (relative residual {outside:.3g})"
        )
    jx = ops.j @ xa
    theta = angle_to_subspace(jx, span)
    return SlantSample(tuple(geom.point.tolist()), tuple(x.tolist()), math.cos(theta), theta)


def slant_criterion(geom: PointGeometry, ops: InducedOps, spec: DistributionSpec,
                    p: int, q: int) -> Tuple[float, float]:
    """Least-squares lambda over the spanning vectors of D and the worst
    relative residual of (P_D T)^2 X = lambda (p P_D T X + q X)."""
    frame = geom.distribution_frame(spec).value
    if frame.shape[1] == 0:
        raise MetallicLabError(f"distribution {spec.name!r} is empty")
    pd = coordinate_projector(geom, frame)
    pt = pd @ ops.Tmat
    lhs = [pt @ (pt @ x) for x in frame.T]
    rhs = [p * (pt @ x) + q * x for x in frame.T]
    num = sum(geom.inner(l, r) for l, r in zip(lhs, rhs))
    den = sum(geom.inner(r, r) for r in rhs)
    lam = num / den if den > 0 else 0.0
    residual = max(
        geom.norm(l - lam * r) / geom.norm(x) for l, r, x in zip(lhs, rhs, frame.T)
    )
    return float(lam), float(residual)


def _directions(rng: np.random.Generator, frame: np.ndarray, extra: int) -> List[np.ndarray]:
    dirs = [frame[:, a] for a in range(frame.shape[1])]
    for _ in range(extra if frame.shape[1] > 1 else 0):
        dirs.append(frame @ rng.standard_normal(frame.shape[1]))
    return dirs


def slant_report(scn: ImmersionScenario, spec: DistributionSpec, geoms: Sequence[PointGeometry],
                 seed: int) -> SlantReport:
    """Angles of ``spec`` across the sample points and a few random directions
    per point, with the lambda fit."""
    rng = np.random.default_rng((seed, 0x51A7))
    p, q = scn.structure.params.p, scn.structure.params.q
    samples: List[SlantSample] = []
    lambdas: List[float] = []
    lam_res = 0.0
    for geom in geoms:
        ops = cached_ops(geom, scn)
        frame = geom.distribution_frame(spec).value
        for x in _directions(rng, frame, settings.SLANT_DIRECTIONS_PER_SAMPLE):
            samples.append(slant_angle(geom, ops, spec, x))
        lam, res = slant_criterion(geom, ops, spec, p, q)
        lambdas.append(lam)
        lam_res = max(lam_res, res)

    thetas = np.array([s.theta for s in samples])
    mean_theta = float(np.mean(thetas))
    deviation = float(np.max(np.abs(thetas - mean_theta)))
    lambda_fit = float(np.mean(lambdas))
    lam_dev = abs(lambda_fit - math.cos(mean_theta) ** 2)

    if deviation >= settings.ANGLE_TOL or lam_res >= settings.LAMBDA_TOL or lam_dev >= settings.LAMBDA_TOL:
        verdict = NOT_SLANT
    else:
        snapped = snap_angle(mean_theta)
        mean_theta = snapped
        verdict = INVARIANT if snapped == 0.0 else ANTI_INVARIANT if snapped == math.pi / 2 else SLANT
    log.debug(f"[Slant] {spec.name}: theta={mean_theta:.12g} dev={deviation:.3g} lambda={lambda_fit:.12g} {verdict}")
    return SlantReport(spec.name, samples, mean_theta, deviation, lambda_fit, lam_res, verdict, lam_dev)


def cached_ops(geom: PointGeometry, scn: ImmersionScenario) -> InducedOps:
    if "ops" not in geom.cache:
        geom.cache["ops"] = induced_ops(geom, scn.structure)
    return geom.cache["ops"]


def normal_split(geom: PointGeometry, ops: InducedOps, d1: Optional[DistributionSpec],
                 d2: Optional[DistributionSpec], structure) -> NormalSplit:
    """T^perp M = N(D1) + N(D2) + mu with mu the complement of both images."""
    jmat = structure.matrix
    perp = geom.perp_proj

    def images(spec):
        if spec is None:
            return [], []
        frame = geom.distribution_frame(spec).value
        vecs = [geom.push(x) for x in frame.T]
        return vecs, [perp @ (jmat @ v) for v in vecs]

    xs, n1 = images(d1)
    zs, n2 = images(d2)
    scale = max([1.0] + [float(np.linalg.norm(v)) for v in xs + zs])
    s1 = gram_schmidt(n1, settings.SPLIT_TOL, geom.m) if n1 else Subspace.zero(geom.m)
    s2 = gram_schmidt(n2, settings.SPLIT_TOL, geom.m) if n2 else Subspace.zero(geom.m)
    # drop images that vanish relative to the input vectors
    s1 = s1 if any(np.linalg.norm(v) > settings.SPLIT_TOL * scale for v in n1) else Subspace.zero(geom.m)
    s2 = s2 if any(np.linalg.norm(v) > settings.SPLIT_TOL * scale for v in n2) else Subspace.zero(geom.m)

    ortho = 0.0
    for x, a in zip(xs, n1):
        for z, b in zip(zs, n2):
            ortho = max(ortho, abs(float(a @ b)) / (np.linalg.norm(x) * np.linalg.norm(z)))

    both = gram_schmidt(list(s1.basis) + list(s2.basis), settings.SPLIT_TOL, geom.m) \
        if s1.rank + s2.rank else Subspace.zero(geom.m)
    # the normal basis is orthonormal, so leftovers are measured in absolute terms
    rest = [r for r in (b - project(b, both) for b in geom.normal.basis)
            if np.linalg.norm(r) > settings.SPLIT_TOL]
    mu = gram_schmidt(rest, settings.SPLIT_TOL, geom.m) if rest else Subspace.zero(geom.m)

    inv = 0.0
    t_mu = 0.0
    for v in mu.basis:
        nv = perp @ (jmat @ v)
        inv = max(inv, float(np.linalg.norm(nv - project(nv, mu))))
        t_mu = max(t_mu, float(np.linalg.norm(geom.tan_proj @ (jmat @ v))))
    return NormalSplit(s1.rank, s2.rank, mu.rank, ortho, inv, t_mu, mu)


def classify(scn: ImmersionScenario, points: Optional[np.ndarray] = None,
             geoms: Optional[Sequence[PointGeometry]] = None) -> HemiSlantVerdict:
    """Hemi-slant classification of the scenario over its sample points.

    D1 is the first declared distribution (slant candidate) and D2 the second
    (anti-invariant candidate); a missing D2 has dimension 0.
    """
    if geoms is None:
        if points is None:
            points = sample_points(scn, scn.sampling.count, scn.sampling.seed)
        geoms = [frame_at(scn, u) for u in points]
    if not scn.distributions:
        return HemiSlantVerdict(UNCLASSIFIED, None, (0, 0, 0), ["no distributions declared"])

    d1 = scn.distributions[0]
    d2 = scn.distributions[1] if len(scn.distributions) > 1 else None
    diagnostics: List[str] = []
    if len(scn.distributions) > 2:
        diagnostics.append(f"only the first two distributions are classified; ignored: "
                           f"{', '.join(d.name for d in scn.distributions[2:])}")
    dim1 = d1.size
    dim2 = d2.size if d2 is not None else 0

    # structural preconditions at every sample
    for geom in geoms:
        parts = [geom.push(x) for x in geom.distribution_frame(d1).value.T]
        perps = [geom.push(x) for x in geom.distribution_frame(d2).value.T] if d2 is not None else []
        span = gram_schmidt(parts + perps, settings.RANK_TOL, geom.m) if parts + perps else Subspace.zero(geom.m)
        where = np.round(geom.point, 6).tolist()
        if span.rank < dim1 + dim2:
            return HemiSlantVerdict(UNCLASSIFIED, None, (dim1, dim2, 0),
                                    diagnostics + [f"spans degenerate at {where}"])
        if dim1 + dim2 != scn.k:
            return HemiSlantVerdict(UNCLASSIFIED, None, (dim1, dim2, 0),
                                    diagnostics + [f"D1 + D2 has rank {dim1 + dim2}, tangent space has rank {scn.k}"])
        for a in parts:
            for b in perps:
                cosab = abs(float(a @ b)) / (np.linalg.norm(a) * np.linalg.norm(b))
                if cosab > settings.ORTHOGONALITY_TOL:
                    return HemiSlantVerdict(UNCLASSIFIED, None, (dim1, dim2, 0),
                                            diagnostics + [f"distributions not orthogonal at {where} (cos {cosab:.3g})"])

    seed = scn.sampling.seed
    reports = [slant_report(scn, d1, geoms, seed)] if dim1 else []
    theta = reports[0].mean_theta if reports else None

    # D2 anti-invariant: T vanishes on D2
    anti = 0.0
    if d2 is not None:
        for geom in geoms:
            ops = cached_ops(geom, scn)
            for z in geom.distribution_frame(d2).value.T:
                anti = max(anti, geom.norm(ops.Tmat @ z) / geom.norm(z))
        reports.append(slant_report(scn, d2, geoms, seed))

    split = normal_split(geoms[0], cached_ops(geoms[0], scn), d1, d2, scn.structure) if geoms else None
    dim_mu = split.dim_mu if split is not None else 0
    dims = (dim1, dim2, dim_mu)
    if split is not None:
        if split.orthogonality > settings.SPLIT_TOL:
            diagnostics.append(f"N({d1.name}) and N({d2.name}) not orthogonal (cos {split.orthogonality:.3g})")
        if split.mu_invariance > settings.SPLIT_TOL:
            diagnostics.append(f"mu is not invariant under J (defect {split.mu_invariance:.3g})")

    if dim1 and reports[0].verdict == NOT_SLANT:
        r = reports[0]
        return HemiSlantVerdict(UNCLASSIFIED, None, dims, diagnostics + [
            f"{d1.name}: theta non-constant or lambda criterion fails "
            f"(deviation {r.max_deviation:.3g}, lambda residual {r.lambda_residual:.3g})"
        ], reports, split=split)

    if dim2 and anti >= settings.ANTI_INVARIANT_TOL:
        r2 = reports[-1]
        if r2.verdict != NOT_SLANT:
            return HemiSlantVerdict(BI_SLANT, theta, dims, diagnostics + [
                f"{d2.name} is slant with angle {r2.mean_theta:.12g}, not anti-invariant"
            ], reports, theta_perp=r2.mean_theta, split=split)
        return HemiSlantVerdict(UNCLASSIFIED, theta, dims, diagnostics + [
            f"{d2.name} is neither anti-invariant nor slant (max |TZ|/|Z| = {anti:.3g})"
        ], reports, split=split)

    if dim1 == 0 or theta == math.pi / 2:
        kind = ANTI_INVARIANT
    elif theta == 0.0 and dim2 == 0:
        kind = INVARIANT
    elif dim2 == 0:
        kind = SLANT
    elif theta == 0.0:
        kind = SEMI_INVARIANT
    else:
        kind = PROPER_HEMI_SLANT
    log.info(f"[Classify] {scn.name}: {kind} theta={theta} dims={dims}")
    return HemiSlantVerdict(kind, theta, dims, diagnostics, reports,
                            theta_perp=math.pi / 2 if dim2 else None, split=split)

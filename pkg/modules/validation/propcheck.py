"""
MODULE: propcheck.py
CLASSIFICATION: Validation Layer (identity suites)
GOAL: Lie brackets, the covariant derivatives of T, N, t, n, and a registry
      of residual checks: every structural identity and proposition of the
      hemi-slant theory evaluated at seeded random points and vector choices.
CONTRACT ID: IO-CHECK

Residuals are relative: |lhs - rhs| / max(1, |terms|).  Membership claims
measure the part of a vector outside the target distribution relative to
the vector (or to the terms it was assembled from).  Propositions of the
form "A holds iff B holds" are checked in both directions.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

import settings
from modules.core_numerics.jets import ArrayJet
from modules.errors import MetallicLabError, PreconditionError
from modules.geometry.fields import (
    AmbientField,
    TangentField,
    constant_normal_field,
    constant_tangent_field,
    random_normal_field,
    random_section,
    random_tangent_field,
)
from modules.geometry.immersion import (
    DistributionSpec,
    ImmersionScenario,
    InducedOps,
    PointGeometry,
    ambient_parts,
    as_geometry,
    frame_at,
    require_normal,
    sample_points,
    second_fundamental_form,
    shape_operator,
)
from modules.geometry.slant import PROPER_HEMI_SLANT, HemiSlantVerdict, cached_ops, classify, coordinate_projector
from modules.reports import CheckReport, ResidualAccumulator

log = logging.getLogger(__name__)


class CheckID(str, Enum):
    E7_SYM = "E7_SYM"
    E8_ADJ = "E8_ADJ"
    E99 = "E99"
    E100 = "E100"
    E9E10_PRODUCT = "E9E10_PRODUCT"
    E12_SHAPE = "E12_SHAPE"
    E16_NABLA_T_SYM = "E16_NABLA_T_SYM"
    E17i = "E17i"
    E17ii = "E17ii"
    E18i = "E18i"
    E18ii = "E18ii"
    E19_DUALITY = "E19_DUALITY"
    E20_BRACKET_T = "E20_BRACKET_T"
    E21_BRACKET_N = "E21_BRACKET_N"
    E26 = "E26"
    E27 = "E27"
    E28 = "E28"
    E28_RECOVERY = "E28_RECOVERY"
    E29_DERIV = "E29_DERIV"
    E30_DTHETA_CLOSED = "E30_DTHETA_CLOSED"
    E31_ANTIINV_SHAPE = "E31_ANTIINV_SHAPE"
    E32_NABLA_SYM = "E32_NABLA_SYM"
    E33_SHAPE_COMM = "E33_SHAPE_COMM"
    E34_EQUIV = "E34_EQUIV"
    E35_EIGEN = "E35_EIGEN"
    DTHETA_INTEGRABLE = "DTHETA_INTEGRABLE"
    DPERP_INTEGRABLE = "DPERP_INTEGRABLE"
    MIXED_GEODESIC = "MIXED_GEODESIC"
    TOTALLY_GEODESIC_VANISH = "TOTALLY_GEODESIC_VANISH"
    MIXED_SHAPE_SPLIT = "MIXED_SHAPE_SPLIT"


ORDER: Dict[CheckID, int] = {cid: i for i, cid in enumerate(CheckID)}

# precondition names, reported verbatim as "precondition: <name>"
REQ_PRODUCT = "product structure"
REQ_HEMI = "hemi-slant verdict"
REQ_DTHETA = "nonempty D^theta"
REQ_DPERP = "declared D^perp"
REQ_PROPER = "proper hemi-slant verdict"
REQ_OBLIQUE = "theta below pi/2"


# --- 1. Brackets and covariant derivatives ---

def lie_bracket(scn: ImmersionScenario, x: TangentField, y: TangentField, point) -> np.ndarray:
    """[X, Y] in coordinates: X(Y^j) - Y(X^j)."""
    geom = as_geometry(scn, point)
    xj, yj = x.coords_jet(geom), y.coords_jet(geom)
    return yj.along(xj.value) - xj.along(yj.value)


def operator_derivative(geom: PointGeometry, structure, which: str, x, field_jet: ArrayJet) -> np.ndarray:
    """Ambient value of (nabla_X op)F for op in T, N, t, n.

    out(D_X(op F)) - op(in(D_X F)), with out/in the tangent or normal
    projector matching where op maps to and from.
    """
    op = ambient_parts(geom, structure)[which]
    out_proj = geom.tan_proj if which in ("T", "t") else geom.perp_proj
    in_proj = geom.tan_proj if which in ("T", "N") else geom.perp_proj
    return out_proj @ (op @ field_jet).along(x) - op.value @ (in_proj @ field_jet.along(x))


def cov_deriv_T(scn: ImmersionScenario, x: TangentField, y: TangentField, point) -> np.ndarray:
    """(nabla_X T)Y = nabla_X TY - T nabla_X Y, in coordinates."""
    geom = as_geometry(scn, point)
    return geom.to_coords(operator_derivative(geom, scn.structure, "T", x.at(geom), y.ambient_jet(geom)))


def cov_deriv_N(scn: ImmersionScenario, x: TangentField, y: TangentField, point) -> np.ndarray:
    """(nabla-bar_X N)Y = nabla-perp_X NY - N nabla_X Y, in normal-basis coordinates."""
    geom = as_geometry(scn, point)
    return geom.normal.basis @ operator_derivative(geom, scn.structure, "N", x.at(geom), y.ambient_jet(geom))


def cov_deriv_t(scn: ImmersionScenario, x: TangentField, v: AmbientField, point) -> np.ndarray:
    """(nabla_X t)V = nabla_X tV - t nabla-perp_X V, in coordinates."""
    geom = as_geometry(scn, point)
    vj = v.ambient_jet(geom)
    require_normal(geom, vj.value)
    return geom.to_coords(operator_derivative(geom, scn.structure, "t", x.at(geom), vj))


def cov_deriv_n(scn: ImmersionScenario, x: TangentField, v: AmbientField, point) -> np.ndarray:
    """(nabla-bar_X n)V = nabla-perp_X nV - n nabla-perp_X V, in normal-basis coordinates."""
    geom = as_geometry(scn, point)
    vj = v.ambient_jet(geom)
    require_normal(geom, vj.value)
    return geom.normal.basis @ operator_derivative(geom, scn.structure, "n", x.at(geom), vj)


def slant_eigenvalues(p: int, q: int, cos_theta: float) -> Tuple[float, float]:
    """Roots of lambda^2 - p cos^2 lambda - q cos^2 = 0."""
    c = cos_theta
    disc = c * math.sqrt(p * p * c * c + 4 * q)
    return (p * c * c + disc) / 2.0, (p * c * c - disc) / 2.0


# --- 2. Residual helpers ---

def _norm(v) -> float:
    return float(np.linalg.norm(np.atleast_1d(np.asarray(v, dtype=float))))


def _rel(residual, *terms) -> float:
    return _norm(residual) / max([1.0] + [_norm(t) for t in terms])


def membership_residual(v, projector: np.ndarray, *terms) -> float:
    """|v - P_D v| relative to |v| and the terms v was assembled from."""
    v = np.asarray(v, dtype=float)
    ref = max([_norm(v)] + [_norm(t) for t in terms])
    if ref <= settings.MEMBERSHIP_FLOOR:
        return 0.0
    return _norm(v - projector @ v) / ref


def _equivalence(acc: ResidualAccumulator, hypothesis: float, hyp_tol: float,
                 identity: float, id_tol: float, **where) -> None:
    """One sample of an "A iff B" check.

    Hypothesis holds: the identity residual counts.  Identity holds but the
    hypothesis does not: the hypothesis defect counts, rescaled so that it
    fails exactly when it exceeds its own tolerance.  Neither: 0.
    """
    acc.detail("hypothesis_defect", hypothesis)
    acc.detail("identity_residual", identity)
    if hypothesis < hyp_tol:
        acc.add(identity, branch="hypothesis", **where)
    elif identity < id_tol:
        acc.add(hypothesis * (acc.tolerance / hyp_tol), branch="converse", **where)
    else:
        acc.add(0.0, branch="neither", **where)


# --- 3. Per-sample context ---

@dataclass
class SampleContext:
    scn: ImmersionScenario
    geom: PointGeometry
    verdict: Optional[HemiSlantVerdict]
    rng: np.random.Generator
    index: int

    @property
    def ops(self) -> InducedOps:
        return cached_ops(self.geom, self.scn)

    @property
    def j(self) -> np.ndarray:
        return self.scn.structure.matrix

    @property
    def pq(self) -> Tuple[int, int]:
        return self.scn.structure.params.p, self.scn.structure.params.q

    @property
    def where(self) -> Dict[str, object]:
        return {"sample": self.index, "point": self.geom.point.tolist()}

    @property
    def d1(self) -> DistributionSpec:
        return self.scn.distributions[0]

    @property
    def d2(self) -> DistributionSpec:
        return self.scn.distributions[1]

    def vector(self) -> np.ndarray:
        return self.rng.standard_normal(self.geom.k)

    def tangent_field(self) -> TangentField:
        return random_tangent_field(self.rng, self.geom.k, self.geom.point)

    def section(self, spec: DistributionSpec) -> TangentField:
        return random_section(self.rng, spec.fields, self.geom.k, self.geom.point)

    def normal_field(self) -> AmbientField:
        return random_normal_field(self.rng, self.geom.m, self.geom.k, self.geom.point)

    def frame(self, spec: DistributionSpec) -> np.ndarray:
        return self.geom.distribution_frame(spec).value

    def in_frame(self, spec: DistributionSpec) -> np.ndarray:
        s = self.frame(spec)
        return s @ self.rng.standard_normal(s.shape[1])

    def deriv(self, which: str, x, field_jet: ArrayJet) -> np.ndarray:
        return operator_derivative(self.geom, self.scn.structure, which, x, field_jet)

    def h(self, x, y) -> np.ndarray:
        return second_fundamental_form(self.geom, x, y)

    def shape(self, v) -> np.ndarray:
        return shape_operator(self.geom, v)

    def normal_part_of_j(self, v) -> np.ndarray:
        """P_perp J v (N of a tangent vector, n of a normal one)."""
        return self.geom.perp_proj @ (self.j @ v)

    def tangent_part_of_j(self, v) -> np.ndarray:
        return self.geom.tan_proj @ (self.j @ v)


@dataclass(frozen=True)
class CheckSpec:
    check_id: CheckID
    tolerance: float
    anchor: str
    requires: Tuple[str, ...]
    evaluate: Callable[[SampleContext, ResidualAccumulator], None]
    describe: Optional[Callable[[ImmersionScenario, Optional[HemiSlantVerdict]], str]] = None


REGISTRY: Dict[CheckID, CheckSpec] = {}


def register(check_id: CheckID, tolerance: float, anchor: str, requires: Sequence[str] = (),
             describe=None):
    def wrap(fn):
        REGISTRY[check_id] = CheckSpec(check_id, tolerance, anchor, tuple(requires), fn, describe)
        return fn
    return wrap


# --- 4. Algebraic identities ---

@register(CheckID.E7_SYM, settings.ALGEBRAIC_TOL, "g(TX,Y)=g(X,TY); g(nU,V)=g(U,nV)")
def _e7(c: SampleContext, acc: ResidualAccumulator) -> None:
    gt = c.geom.induced_metric @ c.ops.Tmat
    n = c.ops.nmat
    acc.add(max(_rel(gt - gt.T, gt), _rel(n - n.T, n)), **c.where)


@register(CheckID.E8_ADJ, settings.ALGEBRAIC_TOL, "g(NX,V)=g(X,tV)")
def _e8(c: SampleContext, acc: ResidualAccumulator) -> None:
    gt = c.geom.induced_metric @ c.ops.tmat
    acc.add(_rel(c.ops.Nmat.T - gt, c.ops.Nmat, gt), **c.where)


@register(CheckID.E99, settings.ALGEBRAIC_TOL, "T^2=pT+qI-tN; pN=NT+nN")
def _e99(c: SampleContext, acc: ResidualAccumulator) -> None:
    p, q = c.pq
    o = c.ops
    tt, tn, nt, nn = o.Tmat @ o.Tmat, o.tmat @ o.Nmat, o.Nmat @ o.Tmat, o.nmat @ o.Nmat
    r1 = tt - p * o.Tmat - q * np.eye(c.geom.k) + tn
    r2 = p * o.Nmat - nt - nn
    acc.add(max(_rel(r1, tt, q, tn), _rel(r2, p * o.Nmat, nt, nn)), **c.where)


@register(CheckID.E100, settings.ALGEBRAIC_TOL, "n^2=pn+qI-Nt; pt=Tt+tn")
def _e100(c: SampleContext, acc: ResidualAccumulator) -> None:
    p, q = c.pq
    o = c.ops
    nn, nt, tt, tn = o.nmat @ o.nmat, o.Nmat @ o.tmat, o.Tmat @ o.tmat, o.tmat @ o.nmat
    r1 = nn - p * o.nmat - q * np.eye(o.nmat.shape[0]) + nt
    r2 = p * o.tmat - tt - tn
    acc.add(max(_rel(r1, nn, q, nt), _rel(r2, p * o.tmat, tt, tn)), **c.where)


@register(CheckID.E9E10_PRODUCT, settings.ALGEBRAIC_TOL,
          "T=(p/2)I+-((2s-p)/2)f, N=+-((2s-p)/2)w, t=+-((2s-p)/2)B, n=(p/2)I+-((2s-p)/2)C",
          requires=(REQ_PRODUCT,))
def _e9e10(c: SampleContext, acc: ResidualAccumulator) -> None:
    st = c.scn.structure
    p, sigma = st.params.p, st.params.sigma
    a, b = 0.5 * p, st.sign * 0.5 * (2.0 * sigma - p)
    f_mat = st.product.matrix
    geom, o = c.geom, c.ops
    nb = geom.normal.basis
    f = geom.to_coords(f_mat @ geom.jacobian)
    omega = nb @ f_mat @ geom.jacobian
    big_b = geom.to_coords(f_mat @ nb.T) if nb.shape[0] else np.zeros((geom.k, 0))
    big_c = nb @ f_mat @ nb.T
    res = max(
        _rel(o.Tmat - (a * np.eye(geom.k) + b * f), o.Tmat),
        _rel(o.Nmat - b * omega, o.Nmat),
        _rel(o.tmat - b * big_b, o.tmat),
        _rel(o.nmat - (a * np.eye(nb.shape[0]) + b * big_c), o.nmat),
    )
    acc.add(res, **c.where)


@register(CheckID.E12_SHAPE, settings.ALGEBRAIC_TOL, "g(h(X,Y),V)=g(A_V X,Y); D_X V=-A_V X+nabla-perp_X V")
def _e12(c: SampleContext, acc: ResidualAccumulator) -> None:
    geom = c.geom
    x, y = c.vector(), c.vector()
    vj = c.normal_field().ambient_jet(geom)
    v = vj.value
    a_v = c.shape(v)
    lhs = float(c.h(x, y) @ v)
    rhs = geom.inner(a_v @ x, y)
    pairing = abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))
    dv = vj.along(x)
    recon = -geom.push(a_v @ x) + geom.perp_proj @ dv
    weingarten = _rel(dv - recon, dv, recon)
    acc.detail("weingarten_reconstruction", weingarten)
    acc.add(max(pairing, weingarten), **c.where)


# --- 5. Connection identities ---

@register(CheckID.E16_NABLA_T_SYM, settings.ALGEBRAIC_TOL, "g((nabla_X T)Y,Z)=g(Y,(nabla_X T)Z)")
def _e16(c: SampleContext, acc: ResidualAccumulator) -> None:
    x = c.vector()
    yj = c.tangent_field().ambient_jet(c.geom)
    zj = c.tangent_field().ambient_jet(c.geom)
    lhs = float(c.deriv("T", x, yj) @ zj.value)
    rhs = float(yj.value @ c.deriv("T", x, zj))
    acc.add(abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)), **c.where)


@register(CheckID.E17i, settings.CONNECTION_TOL, "(nabla_X T)Y=A_{NY}X+th(X,Y)")
def _e17i(c: SampleContext, acc: ResidualAccumulator) -> None:
    x = c.vector()
    yf = c.tangent_field()
    yj = yf.ambient_jet(c.geom)
    lhs = c.deriv("T", x, yj)
    shape_term = c.geom.push(c.shape(c.normal_part_of_j(yj.value)) @ x)
    t_term = c.tangent_part_of_j(c.h(x, yf.at(c.geom)))
    acc.add(_rel(lhs - shape_term - t_term, lhs, shape_term, t_term), **c.where)


@register(CheckID.E17ii, settings.CONNECTION_TOL, "(nabla-bar_X N)Y=nh(X,Y)-h(X,TY)")
def _e17ii(c: SampleContext, acc: ResidualAccumulator) -> None:
    x = c.vector()
    yf = c.tangent_field()
    y = yf.at(c.geom)
    lhs = c.deriv("N", x, yf.ambient_jet(c.geom))
    nh = c.normal_part_of_j(c.h(x, y))
    h_ty = c.h(x, c.ops.Tmat @ y)
    acc.add(_rel(lhs - nh + h_ty, lhs, nh, h_ty), **c.where)


@register(CheckID.E18i, settings.CONNECTION_TOL, "(nabla_X t)V=A_{nV}X-TA_V X")
def _e18i(c: SampleContext, acc: ResidualAccumulator) -> None:
    x = c.vector()
    vj = c.normal_field().ambient_jet(c.geom)
    lhs = c.deriv("t", x, vj)
    a_nv = c.geom.push(c.shape(c.normal_part_of_j(vj.value)) @ x)
    t_av = c.tangent_part_of_j(c.geom.push(c.shape(vj.value) @ x))
    acc.add(_rel(lhs - a_nv + t_av, lhs, a_nv, t_av), **c.where)


@register(CheckID.E18ii, settings.CONNECTION_TOL, "(nabla-bar_X n)V=-h(X,tV)-NA_V X")
def _e18ii(c: SampleContext, acc: ResidualAccumulator) -> None:
    x = c.vector()
    vj = c.normal_field().ambient_jet(c.geom)
    lhs = c.deriv("n", x, vj)
    h_tv = c.h(x, c.geom.to_coords(c.j @ vj.value))
    n_av = c.normal_part_of_j(c.geom.push(c.shape(vj.value) @ x))
    acc.add(_rel(lhs + h_tv + n_av, lhs, h_tv, n_av), **c.where)


@register(CheckID.E19_DUALITY, settings.CONNECTION_TOL, "g((nabla-bar_X N)Y,V)=g((nabla_X t)V,Y)")
def _e19(c: SampleContext, acc: ResidualAccumulator) -> None:
    x = c.vector()
    yj = c.tangent_field().ambient_jet(c.geom)
    vj = c.normal_field().ambient_jet(c.geom)
    lhs = float(c.deriv("N", x, yj) @ vj.value)
    rhs = float(c.deriv("t", x, vj) @ yj.value)
    acc.add(abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)), **c.where)


def _bracket_t_rhs(c: SampleContext, xf: TangentField, yf: TangentField) -> Tuple[np.ndarray, List[np.ndarray]]:
    """nabla_X TY - nabla_Y TX - A_{NY}X + A_{NX}Y (ambient) and its terms."""
    geom = c.geom
    tj = ambient_parts(geom, c.scn.structure)["T"]
    xj, yj = xf.ambient_jet(geom), yf.ambient_jet(geom)
    xc, yc = xf.at(geom), yf.at(geom)
    terms = [
        geom.tan_proj @ (tj @ yj).along(xc),
        -(geom.tan_proj @ (tj @ xj).along(yc)),
        -geom.push(c.shape(c.normal_part_of_j(yj.value)) @ xc),
        geom.push(c.shape(c.normal_part_of_j(xj.value)) @ yc),
    ]
    return sum(terms), terms


@register(CheckID.E20_BRACKET_T, settings.CONNECTION_TOL, "T([X,Y])=nabla_X TY-nabla_Y TX-A_{NY}X+A_{NX}Y")
def _e20(c: SampleContext, acc: ResidualAccumulator) -> None:
    xf, yf = c.tangent_field(), c.tangent_field()
    bracket = lie_bracket(c.scn, xf, yf, c.geom)
    lhs = c.tangent_part_of_j(c.geom.push(bracket))
    rhs, terms = _bracket_t_rhs(c, xf, yf)
    acc.add(_rel(lhs - rhs, lhs, *terms), **c.where)


@register(CheckID.E21_BRACKET_N, settings.CONNECTION_TOL,
          "N([X,Y])=h(X,TY)-h(TX,Y)+nabla-perp_X NY-nabla-perp_Y NX")
def _e21(c: SampleContext, acc: ResidualAccumulator) -> None:
    geom = c.geom
    xf, yf = c.tangent_field(), c.tangent_field()
    xj, yj = xf.ambient_jet(geom), yf.ambient_jet(geom)
    xc, yc = xf.at(geom), yf.at(geom)
    nj = ambient_parts(geom, c.scn.structure)["N"]
    lhs = c.normal_part_of_j(geom.push(lie_bracket(c.scn, xf, yf, geom)))
    terms = [
        c.h(xc, c.ops.Tmat @ yc),
        -c.h(c.ops.Tmat @ xc, yc),
        geom.perp_proj @ (nj @ yj).along(xc),
        -(geom.perp_proj @ (nj @ xj).along(yc)),
    ]
    acc.add(_rel(lhs - sum(terms), lhs, *terms), **c.where)


@register(CheckID.E34_EQUIV, settings.CONNECTION_TOL,
          "g((nabla-bar_X N)Y,V)=g(A_{nV}X-TA_V X,Y)=g(A_{nV}Y-A_V TY,X)")
def _e34(c: SampleContext, acc: ResidualAccumulator) -> None:
    geom = c.geom
    x = c.vector()
    yf = c.tangent_field()
    y = yf.at(geom)
    v = c.normal_field().ambient_jet(geom).value
    a_v, a_nv = c.shape(v), c.shape(c.normal_part_of_j(v))
    t = c.ops.Tmat
    first = float(c.deriv("N", x, yf.ambient_jet(geom)) @ v)
    second = geom.inner(a_nv @ x - t @ (a_v @ x), y)
    third = geom.inner(a_nv @ y - a_v @ (t @ y), x)
    scale = max(1.0, abs(first), abs(second), abs(third))
    acc.add(max(abs(first - second), abs(first - third)) / scale, **c.where)


# --- 6. Slant distribution identities ---

def _p1(c: SampleContext) -> np.ndarray:
    return coordinate_projector(c.geom, c.frame(c.d1))


@register(CheckID.E26, settings.ALGEBRAIC_TOL, "g(TP1X,TP1Y)=cos^2(p g(TP1X,P1Y)+q g(P1X,P1Y))",
          requires=(REQ_HEMI, REQ_DTHETA))
def _e26(c: SampleContext, acc: ResidualAccumulator) -> None:
    p, q = c.pq
    c2 = c.verdict.cos2
    g = c.geom.inner
    p1 = _p1(c)
    tp1 = c.ops.Tmat @ p1
    x, y = c.vector(), c.vector()
    lhs = g(tp1 @ x, tp1 @ y)
    rhs = c2 * (p * g(tp1 @ x, p1 @ y) + q * g(p1 @ x, p1 @ y))
    acc.add(abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)), **c.where)


@register(CheckID.E27, settings.ALGEBRAIC_TOL, "g(NX,NY)=sin^2(p g(TX,Y)+q g(X,Y)), X,Y in D^theta",
          requires=(REQ_HEMI, REQ_DTHETA))
def _e27(c: SampleContext, acc: ResidualAccumulator) -> None:
    p, q = c.pq
    s2 = 1.0 - c.verdict.cos2
    x, y = c.in_frame(c.d1), c.in_frame(c.d1)
    lhs = float((c.ops.Nmat @ x) @ (c.ops.Nmat @ y))
    rhs = s2 * (p * c.geom.inner(c.ops.Tmat @ x, y) + q * c.geom.inner(x, y))
    acc.add(abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)), **c.where)


@register(CheckID.E28, settings.ALGEBRAIC_TOL, "(TP1)^2=cos^2(pTP1+qP1)", requires=(REQ_HEMI, REQ_DTHETA))
def _e28(c: SampleContext, acc: ResidualAccumulator) -> None:
    p, q = c.pq
    c2 = c.verdict.cos2
    p1 = _p1(c)
    tp1 = c.ops.Tmat @ p1
    x = c.vector()
    lhs = tp1 @ (tp1 @ x)
    rhs = c2 * (p * (tp1 @ x) + q * (p1 @ x))
    n = c.geom.norm
    acc.add(n(lhs - rhs) / max(1.0, n(lhs), n(rhs)), **c.where)


@register(CheckID.E28_RECOVERY, settings.ALGEBRAIC_TOL, "X=T(TX-p cos^2 X)/(q cos^2), X in D^theta",
          requires=(REQ_HEMI, REQ_DTHETA, REQ_OBLIQUE))
def _e28_recovery(c: SampleContext, acc: ResidualAccumulator) -> None:
    p, q = c.pq
    c2 = c.verdict.cos2
    t = c.ops.Tmat
    x = c.in_frame(c.d1)
    inner = t @ (t @ x - p * c2 * x)
    nx = c.geom.norm(x)
    # without the cos^2 factor in the denominator the identity only holds at theta = 0
    acc.detail("literal_form_deviation", c.geom.norm(x - inner / q) / nx)
    acc.detail("t_invariance", membership_residual(c.geom.push(t @ x), c.geom.distribution_projector(c.d1).value,
                                                   c.geom.push(x)))
    acc.add(c.geom.norm(x - inner / (q * c2)) / nx, **c.where)


@register(CheckID.E29_DERIV, settings.CONNECTION_TOL, "nabla((TP1)^2)=cos^2(p nabla(TP1)+q nabla P1)",
          requires=(REQ_HEMI, REQ_DTHETA),
          describe=lambda scn, v: "derivative of the endomorphism (TP1)o(TP1); "
                                  "omitted_q_term is the size of q cos^2 (nabla P1)")
def _e29(c: SampleContext, acc: ResidualAccumulator) -> None:
    p, q = c.pq
    c2 = c.verdict.cos2
    geom = c.geom
    p1 = geom.distribution_projector(c.d1)
    tp1 = ambient_parts(geom, c.scn.structure)["T"] @ p1
    squared = tp1 @ tp1
    x = c.vector()
    yj = c.tangent_field().ambient_jet(geom)
    dy = geom.tan_proj @ yj.along(x)

    def derivative(op: ArrayJet) -> np.ndarray:
        return geom.tan_proj @ (op @ yj).along(x) - op.value @ dy

    lhs = derivative(squared)
    d_tp1 = c2 * p * derivative(tp1)
    d_p1 = c2 * q * derivative(p1)
    acc.detail("omitted_q_term", _norm(d_p1) / max(1.0, _norm(lhs)))
    acc.add(_rel(lhs - d_tp1 - d_p1, lhs, d_tp1, d_p1), **c.where)


@register(CheckID.E30_DTHETA_CLOSED, settings.MEMBERSHIP_TOL,
          "nabla_X TY-nabla_Y TX-A_{NY}X+A_{NX}Y in D^theta", requires=(REQ_HEMI, REQ_DTHETA))
def _e30(c: SampleContext, acc: ResidualAccumulator) -> None:
    xf, yf = c.section(c.d1), c.section(c.d1)
    v, terms = _bracket_t_rhs(c, xf, yf)
    proj = c.geom.distribution_projector(c.d1).value
    acc.add(membership_residual(v, proj, *terms), **c.where)


def _bracket_membership(c: SampleContext, spec: DistributionSpec, xf: TangentField, yf: TangentField) -> float:
    geom = c.geom
    xj, yj = xf.coords_jet(geom), yf.coords_jet(geom)
    forward, backward = geom.push(yj.along(xj.value)), geom.push(xj.along(yj.value))
    return membership_residual(forward - backward, geom.distribution_projector(spec).value, forward, backward)


def _integrability_defect(c: SampleContext, spec: DistributionSpec) -> float:
    """Worst out-of-distribution part of the brackets of spanning fields."""
    fields = spec.fields
    worst = 0.0
    for a in range(len(fields)):
        for b in range(a + 1, len(fields)):
            worst = max(worst, _bracket_membership(c, spec, fields[a], fields[b]))
    return worst


@register(CheckID.DTHETA_INTEGRABLE, settings.MEMBERSHIP_TOL, "the distribution D^theta is integrable",
          requires=(REQ_HEMI, REQ_DTHETA))
def _dtheta_integrable(c: SampleContext, acc: ResidualAccumulator) -> None:
    acc.add(_bracket_membership(c, c.d1, c.section(c.d1), c.section(c.d1)), **c.where)


@register(CheckID.DPERP_INTEGRABLE, settings.MEMBERSHIP_TOL, "the distribution D^perp is integrable",
          requires=(REQ_HEMI, REQ_DPERP))
def _dperp_integrable(c: SampleContext, acc: ResidualAccumulator) -> None:
    acc.add(_bracket_membership(c, c.d2, c.section(c.d2), c.section(c.d2)), **c.where)


# --- 7. Propositions (equivalences and conditionals) ---

def _unit_pairs(c: SampleContext, spec_a: DistributionSpec, spec_b: DistributionSpec):
    """(a, b, norm product) over spanning vectors of two distributions."""
    fa, fb = c.frame(spec_a), c.frame(spec_b)
    for a in range(fa.shape[1]):
        for b in range(fb.shape[1]):
            yield a, b, c.geom.norm(fa[:, a]) * c.geom.norm(fb[:, b])


@register(CheckID.E31_ANTIINV_SHAPE, settings.EQUIVALENCE_TOL, "D^perp integrable iff A_{NZ}W=0",
          requires=(REQ_HEMI, REQ_DPERP))
def _e31(c: SampleContext, acc: ResidualAccumulator) -> None:
    z = c.frame(c.d2)
    identity = 0.0
    for a, b, scale in _unit_pairs(c, c.d2, c.d2):
        nz = c.normal_part_of_j(c.geom.push(z[:, a]))
        identity = max(identity, c.geom.norm(c.shape(nz) @ z[:, b]) / scale)
    _equivalence(acc, _integrability_defect(c, c.d2), settings.MEMBERSHIP_TOL,
                 identity, settings.EQUIVALENCE_TOL, **c.where)


@register(CheckID.E32_NABLA_SYM, settings.EQUIVALENCE_TOL, "D^perp integrable iff (nabla_Z T)W=(nabla_W T)Z",
          requires=(REQ_HEMI, REQ_DPERP))
def _e32(c: SampleContext, acc: ResidualAccumulator) -> None:
    fields = c.d2.fields
    jets = [f.ambient_jet(c.geom) for f in fields]
    z = c.frame(c.d2)
    identity = 0.0
    for a, b, scale in _unit_pairs(c, c.d2, c.d2):
        diff = c.deriv("T", z[:, a], jets[b]) - c.deriv("T", z[:, b], jets[a])
        identity = max(identity, _norm(diff) / scale)
    _equivalence(acc, _integrability_defect(c, c.d2), settings.MEMBERSHIP_TOL,
                 identity, settings.EQUIVALENCE_TOL, **c.where)


@register(CheckID.E33_SHAPE_COMM, settings.EQUIVALENCE_TOL,
          "nabla-bar N=0 and nabla t=0 iff A_{nV}X=TA_V X=A_V TX")
def _e33(c: SampleContext, acc: ResidualAccumulator) -> None:
    geom = c.geom
    k = geom.k
    basis = np.eye(k)
    normals = geom.normal.basis
    hypothesis = 0.0
    identity = 0.0
    for i in range(k):
        ni = geom.norm(basis[i])
        for jdx in range(k):
            yj = constant_tangent_field(basis[jdx], k).ambient_jet(geom)
            hypothesis = max(hypothesis, _norm(c.deriv("N", basis[i], yj)) / (ni * geom.norm(basis[jdx])))
        for nu in normals:
            vj = constant_normal_field(nu, k).ambient_jet(geom)
            hypothesis = max(hypothesis, _norm(c.deriv("t", basis[i], vj)) / ni)
            a_nv = geom.push(c.shape(c.normal_part_of_j(nu)) @ basis[i])
            a_v = c.shape(nu)
            t_av = c.tangent_part_of_j(geom.push(a_v @ basis[i]))
            av_t = geom.push(a_v @ (c.ops.Tmat @ basis[i]))
            identity = max(identity, _norm(a_nv - t_av) / ni, _norm(t_av - av_t) / ni)
    _equivalence(acc, hypothesis, settings.PARALLEL_TOL, identity, settings.EQUIVALENCE_TOL, **c.where)


def _describe_e35(scn: ImmersionScenario, verdict: Optional[HemiSlantVerdict]) -> str:
    if verdict is None or verdict.theta is None:
        return ""
    p, q = scn.structure.params.p, scn.structure.params.q
    l1, l2 = slant_eigenvalues(p, q, math.cos(verdict.theta))
    return f"eigenvalues of n on h(D^theta, D^theta): {l1:.17g}, {l2:.17g}"


@register(CheckID.E35_EIGEN, settings.ALGEBRAIC_TOL,
          "nabla-bar N=0 on D^theta: D^theta geodesic or h(X,Y) eigenvector of n", requires=(REQ_HEMI, REQ_DTHETA),
          describe=_describe_e35)
def _e35(c: SampleContext, acc: ResidualAccumulator) -> None:
    p, q = c.pq
    c2 = c.verdict.cos2
    geom = c.geom
    s = c.frame(c.d1)
    jets = [f.ambient_jet(geom) for f in c.d1.fields]
    parallel = 0.0
    for a, b, scale in _unit_pairs(c, c.d1, c.d1):
        parallel = max(parallel, _norm(c.deriv("N", s[:, a], jets[b])) / scale)
    x, y = c.in_frame(c.d1), c.in_frame(c.d1)
    h = c.h(x, y)
    nh = c.normal_part_of_j(h)
    if parallel >= settings.PARALLEL_TOL or _norm(h) <= settings.GEODESIC_TOL * geom.norm(x) * geom.norm(y):
        return
    nnh = c.normal_part_of_j(nh)
    eigen = float(nh @ h) / float(h @ h)
    acc.detail("eigen_alignment", _norm(nh - eigen * h) / _norm(h))
    acc.add(_norm(nnh - c2 * (p * nh + q * h)) / _norm(h), **c.where)


@register(CheckID.MIXED_GEODESIC, settings.CONNECTION_TOL,
          "(nabla-bar_X N)Z=0 for Z in D^perp: D^theta-D^perp mixed totally geodesic",
          requires=(REQ_HEMI, REQ_PROPER))
def _mixed_geodesic(c: SampleContext, acc: ResidualAccumulator) -> None:
    geom = c.geom
    k = geom.k
    basis = np.eye(k)
    jets = [f.ambient_jet(geom) for f in c.d2.fields]
    z = c.frame(c.d2)
    hypothesis = 0.0
    for i in range(k):
        for b, zj in enumerate(jets):
            hypothesis = max(hypothesis, _norm(c.deriv("N", basis[i], zj)) / (geom.norm(basis[i]) * geom.norm(z[:, b])))
    if hypothesis >= settings.PARALLEL_TOL:
        return
    s = c.frame(c.d1)
    mixed = max((_norm(c.h(s[:, a], z[:, b])) / scale for a, b, scale in _unit_pairs(c, c.d1, c.d2)), default=0.0)
    acc.add(mixed, **c.where)


@register(CheckID.TOTALLY_GEODESIC_VANISH, settings.TOTALLY_GEODESIC_TOL,
          "h=0: nabla T, nabla-bar N, nabla t, nabla-bar n all vanish")
def _totally_geodesic(c: SampleContext, acc: ResidualAccumulator) -> None:
    geom = c.geom
    k = geom.k
    basis = np.eye(k)
    curvature = max(
        _norm(c.h(basis[i], basis[jdx])) / (geom.norm(basis[i]) * geom.norm(basis[jdx]))
        for i in range(k) for jdx in range(k)
    )
    if curvature >= settings.GEODESIC_TOL:
        return
    x = c.vector()
    yj = c.tangent_field().ambient_jet(geom)
    vj = c.normal_field().ambient_jet(geom)
    nx = geom.norm(x)
    values = [
        _norm(c.deriv("T", x, yj)) / max(1.0, nx * _norm(yj.value)),
        _norm(c.deriv("N", x, yj)) / max(1.0, nx * _norm(yj.value)),
        _norm(c.deriv("t", x, vj)) / max(1.0, nx * _norm(vj.value)),
        _norm(c.deriv("n", x, vj)) / max(1.0, nx * _norm(vj.value)),
    ]
    acc.add(max(values), **c.where)


@register(CheckID.MIXED_SHAPE_SPLIT, settings.EQUIVALENCE_TOL,
          "mixed totally geodesic iff A_V X in D^theta and A_V Z in D^perp", requires=(REQ_HEMI, REQ_PROPER))
def _mixed_shape_split(c: SampleContext, acc: ResidualAccumulator) -> None:
    geom = c.geom
    s, z = c.frame(c.d1), c.frame(c.d2)
    hypothesis = max((_norm(c.h(s[:, a], z[:, b])) / scale for a, b, scale in _unit_pairs(c, c.d1, c.d2)),
                     default=0.0)
    p1 = geom.distribution_projector(c.d1).value
    p2 = geom.distribution_projector(c.d2).value
    identity = 0.0
    for nu in geom.normal.basis:
        a_v = c.shape(nu)
        for col in s.T:
            identity = max(identity, membership_residual(geom.push(a_v @ col), p1, geom.push(col)))
        for col in z.T:
            identity = max(identity, membership_residual(geom.push(a_v @ col), p2, geom.push(col)))
    _equivalence(acc, hypothesis, settings.EQUIVALENCE_TOL, identity, settings.EQUIVALENCE_TOL, **c.where)


# --- 8. Running checks ---

def parse_check_ids(selection: Union[str, Sequence[Union[str, CheckID]]]) -> List[CheckID]:
    """"all", a comma list, or a sequence of ids.  A bare equation tag such as
    E7 selects the unique id it prefixes."""
    if isinstance(selection, str):
        tokens = [t.strip() for t in selection.split(",") if t.strip()]
    else:
        tokens = [t.value if isinstance(t, CheckID) else str(t).strip() for t in selection]
    if any(t.lower() == "all" for t in tokens):
        return list(CheckID)
    out: List[CheckID] = []
    for token in tokens:
        try:
            cid = CheckID(token)
        except ValueError:
            matches = [c for c in CheckID if c.value.startswith(token + "_")]
            if len(matches) != 1:
                raise MetallicLabError(f"unknown check id {token!r}") from None
            cid = matches[0]
        if cid not in out:
            out.append(cid)
    return sorted(out, key=ORDER.get)


def sample_geometries(scn: ImmersionScenario, samples: int, seed: int) -> List[PointGeometry]:
    if samples < 1:
        raise MetallicLabError("samples must be positive")
    return [frame_at(scn, u) for u in sample_points(scn, samples, seed)]


def missing_precondition(spec: CheckSpec, scn: ImmersionScenario,
                         verdict: Optional[HemiSlantVerdict]) -> Optional[str]:
    for req in spec.requires:
        if req == REQ_PRODUCT and scn.structure.product is None:
            return req
        if req == REQ_HEMI and (verdict is None or not verdict.is_hemi_slant):
            return req
        if req == REQ_DTHETA and (verdict.dims[0] == 0 or verdict.theta is None):
            return req
        if req == REQ_DPERP and verdict.dims[1] == 0:
            return req
        if req == REQ_PROPER and verdict.classification != PROPER_HEMI_SLANT:
            return req
        if req == REQ_OBLIQUE and verdict.cos2 <= settings.RIGHT_ANGLE_SNAP:
            return req
    return None


def run_check(check: Union[CheckID, str], scn: ImmersionScenario, samples: int, seed: int,
              verdict: Optional[HemiSlantVerdict] = None,
              geoms: Optional[Sequence[PointGeometry]] = None) -> CheckReport:
    """Evaluate one registered check at ``samples`` seeded points.

    Raises PreconditionError when the scenario lacks what the check needs.
    """
    cid = CheckID(check)
    spec = REGISTRY[cid]
    if geoms is None:
        geoms = sample_geometries(scn, samples, seed)
    if verdict is None and spec.requires and spec.requires != (REQ_PRODUCT,):
        verdict = classify(scn, geoms=geoms)
    missing = missing_precondition(spec, scn, verdict)
    if missing is not None:
        raise PreconditionError(cid.value, missing)

    rng = np.random.default_rng((seed, ORDER[cid]))
    acc = ResidualAccumulator(cid.value, scn.name, spec.tolerance)
    for i, geom in enumerate(geoms):
        spec.evaluate(SampleContext(scn, geom, verdict, rng, i), acc)

    note = spec.anchor
    if spec.describe is not None:
        extra = spec.describe(scn, verdict)
        note = f"{note} | {extra}" if extra else note
    report = acc.finish(note)
    if report.samples == 0:
        report.note = f"{note} | no sample met the hypothesis"
    log.info(f"[Suite] {scn.name} {cid.value} {report.status} max={report.max_residual:.3g} "
             f"n={report.samples}")
    return report


def run_suite(scn: ImmersionScenario, ids: Union[str, Sequence[Union[str, CheckID]]],
              samples: int, seed: int, verdict: Optional[HemiSlantVerdict] = None,
              geoms: Optional[Sequence[PointGeometry]] = None) -> List[CheckReport]:
    """Run the selected checks in CheckID order; unmet preconditions become
    skipped reports carrying the reason."""
    wanted = parse_check_ids(ids)
    if not wanted:
        return []
    if geoms is None:
        geoms = sample_geometries(scn, samples, seed)
    if verdict is None:
        verdict = classify(scn, geoms=geoms)
    reports: List[CheckReport] = []
    for cid in wanted:
        try:
            reports.append(run_check(cid, scn, samples, seed, verdict=verdict, geoms=geoms))
        except PreconditionError as exc:
            log.info(f"[Suite] {scn.name} {cid.value} skipped ({exc.requirement})")
            reports.append(CheckReport.skipped(cid.value, scn.name, f"precondition: {exc.requirement}",
                                               REGISTRY[cid].tolerance))
    return reports

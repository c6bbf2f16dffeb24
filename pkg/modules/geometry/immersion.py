"""
MODULE: immersion.py
CLASSIFICATION: Geometry Layer (pointwise submanifold geometry)
GOAL: Scenario types, and everything an immersion f: U -> (R^m, <,>, J)
      determines at one parameter point: coordinate frame, induced metric,
      tangent/normal spaces, the induced operators T, N, t, n, the second
      fundamental form, shape operators and the induced connections.
CONTRACT ID: IO-GEOM

Conventions
-----------
* Tangent vectors are coordinate-frame coefficient vectors (length k).
* Normal coordinates refer to the orthonormal basis ``geom.normal.basis``.
* Ambient vectors are plain R^m arrays.
* Jets (ArrayJet) carry first partials along the k parameters; they are
  built from the exact second derivatives of the immersion components.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

import settings
from modules.core_numerics.exprdsl import ExprAST, eval_many, to_source
from modules.core_numerics.jets import ArrayJet
from modules.core_numerics.metallic import StructureOp
from modules.core_numerics.numlin import Subspace, complement, gram_schmidt, solve_sym
from modules.errors import ImmersionDegenerateError, NotNormalFieldError, MetallicLabError
from modules.geometry.fields import AmbientField, ExprField, TangentField

log = logging.getLogger(__name__)


# --- 1. Scenario types ---

@dataclass(frozen=True)
class DistributionSpec:
    name: str
    fields: Tuple[ExprField, ...]

    @property
    def size(self) -> int:
        return len(self.fields)


@dataclass(frozen=True)
class Sampling:
    count: int = settings.DEFAULT_SAMPLES
    seed: int = settings.DEFAULT_SEED


@dataclass(frozen=True)
class ClosedForm:
    """A published closed form for cos(theta) of one distribution, written in
    the expression language over p, q, sigma, sigma_bar and the scenario
    constants."""

    label: str
    distribution: str
    expr: ExprAST


@dataclass(frozen=True)
class ImmersionScenario:
    name: str
    param_names: Tuple[str, ...]
    extra_consts: Mapping[str, float]
    components: Tuple[ExprAST, ...]
    structure: StructureOp
    distributions: Tuple[DistributionSpec, ...]
    domain: Tuple[Tuple[float, float], ...]
    sampling: Sampling = Sampling()
    checks: Tuple[str, ...] = ("all",)
    const_domain: Mapping[str, Tuple[float, float]] = field(default_factory=dict)
    closed_forms: Tuple[ClosedForm, ...] = ()
    description: str = ""

    @property
    def k(self) -> int:
        return len(self.param_names)

    @property
    def m(self) -> int:
        return len(self.components)

    @property
    def consts(self) -> Dict[str, float]:
        """Constants bound during evaluation: sigma, sigma_bar, scenario consts."""
        return {**self.structure.params.consts(), **dict(self.extra_consts)}

    def distribution(self, name: str) -> DistributionSpec:
        for d in self.distributions:
            if d.name == name:
                return d
        raise MetallicLabError(f"scenario {self.name!r} has no distribution {name!r}")

    def document(self) -> Dict[str, Any]:
        """Canonical, JSON-ready description used for the report fingerprint."""
        params = self.structure.params
        return {
            "name": self.name,
            "ambient": {
                "dim": self.m,
                "p": params.p,
                "q": params.q,
                "kind": self.structure.kind,
                "matrix": [[float(x) for x in row] for row in self.structure.matrix],
            },
            "immersion": {
                "params": list(self.param_names),
                "consts": {k: float(v) for k, v in sorted(self.extra_consts.items())},
                "components": [to_source(c) for c in self.components],
                "domain": [[float(lo), float(hi)] for lo, hi in self.domain],
            },
            "distributions": {
                d.name: [list(f.source()) for f in d.fields] for d in self.distributions
            },
            "sampling": {"count": self.sampling.count, "seed": self.sampling.seed},
        }


def sample_points(scn: ImmersionScenario, count: int, seed: int) -> np.ndarray:
    """Uniform points of the open parameter box, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    lo = np.array([d[0] for d in scn.domain], dtype=float)
    hi = np.array([d[1] for d in scn.domain], dtype=float)
    return lo + (hi - lo) * rng.uniform(0.0, 1.0, size=(count, scn.k))


# --- 2. Pointwise geometry ---

def projector_jet(frame: ArrayJet) -> ArrayJet:
    """Jet of the orthogonal projector onto the column span of ``frame``.

    For P = B (B^T B)^-1 B^T:  dP = Q dB B+ + (Q dB B+)^T with Q = I - P and
    B+ = (B^T B)^-1 B^T.  ``frame`` must have full column rank.
    """
    b = frame.value
    m, r = b.shape
    k = frame.nparams
    if r == 0:
        return ArrayJet(np.zeros((m, m)), np.zeros((k, m, m)))
    b_plus = solve_sym(b.T @ b, b.T)
    p = b @ b_plus
    p = 0.5 * (p + p.T)
    q = np.eye(m) - p
    term = np.matmul(np.matmul(q, frame.partials), b_plus)
    return ArrayJet(p, term + np.swapaxes(term, -1, -2))


@dataclass
class PointGeometry:
    point: np.ndarray
    param_names: Tuple[str, ...]
    consts: Dict[str, float]
    position: np.ndarray
    jacobian: np.ndarray                 # (m, k)
    hessians: np.ndarray                 # (k, k, m)
    tangent: Subspace
    normal: Subspace
    induced_metric: np.ndarray           # (k, k)
    df_jet: ArrayJet
    tan_jet: ArrayJet
    perp_jet: ArrayJet
    cache: Dict[Any, Any] = field(default_factory=dict, repr=False, compare=False)

    @property
    def k(self) -> int:
        return self.jacobian.shape[1]

    @property
    def m(self) -> int:
        return self.jacobian.shape[0]

    @property
    def env(self) -> Dict[str, float]:
        return dict(zip(self.param_names, (float(x) for x in self.point)))

    @property
    def coord_frame(self) -> List[np.ndarray]:
        return [self.jacobian[:, i] for i in range(self.k)]

    @property
    def tan_proj(self) -> np.ndarray:
        return self.tan_jet.value

    @property
    def perp_proj(self) -> np.ndarray:
        return self.perp_jet.value

    def push(self, coords) -> np.ndarray:
        """Coordinate-frame coefficients -> ambient vector."""
        return self.jacobian @ np.asarray(coords, dtype=float)

    def to_coords(self, ambient) -> np.ndarray:
        """Coordinates of the tangential part of an ambient vector (or of each
        column of an ambient matrix)."""
        return solve_sym(self.induced_metric, self.jacobian.T @ np.asarray(ambient, dtype=float))

    def inner(self, x, y) -> float:
        """g(X, Y) for coordinate vectors."""
        return float(np.asarray(x) @ self.induced_metric @ np.asarray(y))

    def norm(self, x) -> float:
        return float(np.linalg.norm(self.push(x)))

    def distribution_frame(self, spec: DistributionSpec) -> ArrayJet:
        """Spanning coefficient vectors of ``spec`` as columns, shape (k, d)."""
        key = ("frame", spec.name)
        if key not in self.cache:
            jets = [f.coords_jet(self) for f in spec.fields]
            self.cache[key] = ArrayJet.stack(jets, axis=-1) if jets else ArrayJet(
                np.zeros((self.k, 0)), np.zeros((self.k, self.k, 0)))
        return self.cache[key]

    def distribution_projector(self, spec: DistributionSpec) -> ArrayJet:
        """Ambient orthogonal projector onto Df(D) with its jet; restricted to
        tangent vectors this is the g-orthogonal projection onto D."""
        key = ("proj", spec.name)
        if key not in self.cache:
            self.cache[key] = projector_jet(self.df_jet @ self.distribution_frame(spec))
        return self.cache[key]


def frame_at(scn: ImmersionScenario, point) -> PointGeometry:
    """Pointwise geometry of the immersion at ``point``."""
    u = np.asarray(point, dtype=float).reshape(-1)
    if u.shape[0] != scn.k:
        raise MetallicLabError(f"point has {u.shape[0]} coordinates, scenario has {scn.k} parameters")
    env = dict(zip(scn.param_names, (float(x) for x in u)))
    consts = scn.consts
    jets = eval_many(scn.components, env, consts, scn.param_names)
    position = np.array([j.value for j in jets])
    jacobian = np.array([j.gradient for j in jets]).reshape(scn.m, scn.k)
    hess_m = np.array([j.hessian for j in jets]).reshape(scn.m, scn.k, scn.k)

    tangent = gram_schmidt(list(jacobian.T), settings.RANK_TOL, scn.m)
    if tangent.rank < scn.k:
        log.debug(f"[Geometry] degenerate frame at {tuple(u)}: rank {tangent.rank} < {scn.k}")
        raise ImmersionDegenerateError(u, tangent.rank, scn.k)
    normal = complement(tangent)
    metric = jacobian.T @ jacobian
    metric = 0.5 * (metric + metric.T)

    # partials[i][a, j] = d_i d_j f^a
    df_jet = ArrayJet(jacobian, np.ascontiguousarray(hess_m.transpose(1, 0, 2)))
    tan_jet = projector_jet(df_jet)
    perp_jet = ArrayJet(np.eye(scn.m) - tan_jet.value, -tan_jet.partials)
    return PointGeometry(
        point=u,
        param_names=scn.param_names,
        consts=consts,
        position=position,
        jacobian=jacobian,
        hessians=np.ascontiguousarray(hess_m.transpose(1, 2, 0)),
        tangent=tangent,
        normal=normal,
        induced_metric=metric,
        df_jet=df_jet,
        tan_jet=tan_jet,
        perp_jet=perp_jet,
    )


def as_geometry(scn: ImmersionScenario, point: Union[PointGeometry, Sequence[float]]) -> PointGeometry:
    return point if isinstance(point, PointGeometry) else frame_at(scn, point)


# --- 3. Induced operators ---

@dataclass(frozen=True)
class InducedOps:
    Tmat: np.ndarray      # (k, k)      tangent -> tangent, coordinate frame
    Nmat: np.ndarray      # (r, k)      tangent -> normal basis
    tmat: np.ndarray      # (k, r)      normal basis -> tangent
    nmat: np.ndarray      # (r, r)      normal basis -> normal basis
    j: np.ndarray = field(default=None, repr=False, compare=False)


def induced_ops(geom: PointGeometry, j: StructureOp) -> InducedOps:
    """JX = TX + NX and JV = tV + nV at ``geom``."""
    if j.ambient_dim != geom.m:
        raise MetallicLabError(f"structure acts on R^{j.ambient_dim}, immersion is in R^{geom.m}")
    df = geom.jacobian
    nb = geom.normal.basis
    a = j.matrix
    return InducedOps(
        Tmat=geom.to_coords(a @ df),
        Nmat=nb @ a @ df,
        tmat=geom.to_coords(a @ nb.T) if nb.shape[0] else np.zeros((geom.k, 0)),
        nmat=nb @ a @ nb.T,
        j=a,
    )


def ambient_parts(geom: PointGeometry, j: StructureOp) -> Dict[str, ArrayJet]:
    """T = PJP, N = P_perp J P, t = PJP_perp, n = P_perp J P_perp as ambient
    operator jets (cached per structure kind on the geometry)."""
    key = ("parts", id(j))
    if key not in geom.cache:
        p, q = geom.tan_jet, geom.perp_jet
        jp = p.premul(j.matrix)
        jq = q.premul(j.matrix)
        geom.cache[key] = {"T": p @ jp, "N": q @ jp, "t": p @ jq, "n": q @ jq}
    return geom.cache[key]


# --- 4. Second fundamental form, shape operator ---

def second_fundamental_form(geom: PointGeometry, x, y) -> np.ndarray:
    """h(X, Y): normal part of sum_ij X^i Y^j d_i d_j f."""
    raw = np.einsum("i,j,ijm->m", np.asarray(x, dtype=float), np.asarray(y, dtype=float), geom.hessians)
    return geom.perp_proj @ raw


def require_normal(geom: PointGeometry, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    tangential = float(np.linalg.norm(geom.tan_proj @ v))
    if tangential > settings.NORMAL_FIELD_TOL * max(1.0, float(np.linalg.norm(v))):
        raise NotNormalFieldError(
            f"vector is not normal at {np.round(geom.point, 6).tolist()} (tangential part {tangential:.3g})"
        )
    return v


def shape_operator(geom: PointGeometry, v) -> np.ndarray:
    """A_V = G^-1 M with M_ij = <h(d_i, d_j), V>."""
    v = require_normal(geom, v)
    h_all = np.einsum("ijm,nm->ijn", geom.hessians, geom.perp_proj)
    mmat = h_all @ v
    mmat = 0.5 * (mmat + mmat.T)
    return solve_sym(geom.induced_metric, mmat)


# --- 5. Connections ---

def tangent_connection(scn: ImmersionScenario, x: TangentField, y: TangentField, point) -> np.ndarray:
    """nabla_X Y in coordinate-frame coordinates."""
    geom = as_geometry(scn, point)
    derivative = y.ambient_jet(geom).along(x.at(geom))
    return geom.to_coords(derivative)


def normal_connection(scn: ImmersionScenario, x: TangentField, v: AmbientField, point) -> np.ndarray:
    """nabla^perp_X V in normal-basis coordinates."""
    geom = as_geometry(scn, point)
    vj = v.ambient_jet(geom)
    require_normal(geom, vj.value)
    derivative = vj.along(x.at(geom))
    return geom.normal.basis @ derivative


def weingarten(geom: PointGeometry, x, v: AmbientField) -> np.ndarray:
    """-A_V X from the tangential part of the derivative of V (coordinates)."""
    derivative = v.ambient_jet(geom).along(x)
    return geom.to_coords(derivative)

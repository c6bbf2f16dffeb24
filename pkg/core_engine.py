"""
core_engine.py
CLASSIFICATION: Command Orchestrator
GOAL: Resolves scenario sources (file or builtin, with overrides), runs the
      analyze / verify / angle-sweep / builtin-list commands and turns their
      results into deterministic report documents rendered as text, JSON or
      CSV.  Optional artifacts: atomic --output, HDF5 sample archives and
      provenance records keyed by the scenario fingerprint.
"""
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import h5py
import numpy as np
import pandas as pd

import settings
from modules.core_numerics.exprdsl import eval_value, parse
from modules.errors import MetallicLabError, ScenarioError
from modules.geometry.immersion import ImmersionScenario, frame_at, sample_points
from modules.geometry.slant import UNCLASSIFIED, HemiSlantVerdict, classify, slant_report
from modules.reports import CheckReport
from modules.scenarios.builtins import BUILTINS, builtin_document, list_builtins
from modules.scenarios.loader import read_document, scenario_from_dict, with_overrides
from modules.validation.propcheck import run_suite, sample_geometries

log = logging.getLogger(__name__)


def generate_deterministic_hash(params: dict) -> str:
    param_str = json.dumps(params, sort_keys=True).encode('utf-8')
    return hashlib.sha256(param_str).hexdigest()


def _atomic_write(path, text: str) -> None:
    """Write through a temp file so readers never see a partial report."""
    path = Path(path)
    if path.parent != Path(""):
        os.makedirs(path.parent, exist_ok=True)
    tmp_path = str(path) + ".tmp"
    with open(tmp_path, 'w', encoding='utf-8', newline='') as f:
        f.write(text)
    os.replace(tmp_path, path)


# --- 1. Scenario sources ---

@dataclass
class ScenarioSource:
    """A scenario document before validation, kept so commands can rebuild it
    with different constants (angle-sweep)."""

    doc: Dict[str, Any]
    name: str
    text: Optional[str] = None

    def build(self, p: Optional[int] = None, q: Optional[int] = None,
              consts: Optional[Mapping[str, float]] = None) -> ImmersionScenario:
        doc = with_overrides(self.doc, p=p, q=q, consts=consts)
        # key locations are only meaningful in the untouched file text
        text = self.text if p is None and q is None and not consts else None
        return scenario_from_dict(doc, name=self.name, text=text)

    def overridden(self, p: Optional[int] = None, q: Optional[int] = None,
                   consts: Optional[Mapping[str, float]] = None) -> "ScenarioSource":
        if p is None and q is None and not consts:
            return self
        return ScenarioSource(with_overrides(self.doc, p=p, q=q, consts=consts), self.name)


def resolve_source(target: Optional[str] = None, scenario: Optional[str] = None,
                   builtin: Optional[str] = None, structure: str = "j") -> ScenarioSource:
    """--builtin NAME, --scenario PATH, or a bare target that is either."""
    picked = [x for x in (target, scenario, builtin) if x]
    if len(picked) != 1:
        raise MetallicLabError("give exactly one of a target, --scenario PATH or --builtin NAME")
    if builtin or (target and target in BUILTINS):
        doc = builtin_document(builtin or target, structure)
        return ScenarioSource(doc, doc["name"])
    if structure != "j":
        raise ScenarioError("--structure applies to builtin scenarios only")
    path = Path(scenario or target)
    if not path.exists() and not path.is_absolute() and (settings.CONFIG_DIR / path).exists():
        path = settings.CONFIG_DIR / path
        log.debug(f"[Scenario] resolved {scenario or target} under {settings.CONFIG_DIR}")
    doc, text = read_document(path)
    return ScenarioSource(doc, path.stem, text)


# --- 2. Report document ---

@dataclass
class ReportDocument:
    command: str
    scenario: str
    fingerprint: str = ""
    seed: Optional[int] = None
    samples: Optional[int] = None
    verdict: Optional[HemiSlantVerdict] = None
    checks: List[CheckReport] = field(default_factory=list)
    rows: List[Dict[str, Any]] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)
    exit_code: int = settings.EXIT_PASS

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "engine_version": settings.ENGINE_VERSION,
            "command": self.command,
            "scenario": self.scenario,
            "fingerprint": self.fingerprint,
            "seed": self.seed,
            "samples": self.samples,
            "exit_code": self.exit_code,
        }
        if self.verdict is not None:
            out["classification"] = self.verdict.to_dict()
        if self.checks:
            out["checks"] = [c.to_dict() for c in self.checks]
        if self.rows:
            out["rows"] = self.rows
        out.update(self.extra)
        return out

    def frame(self) -> pd.DataFrame:
        """The tabular part of the report (CSV body)."""
        if self.command == "verify":
            cols = ["check_id", "status", "samples", "max_residual", "mean_residual", "tolerance", "note"]
            return pd.DataFrame([{k: c.to_dict()[k] for k in cols} for c in self.checks], columns=cols)
        if self.command == "analyze" and self.verdict is not None:
            rows = []
            for r in self.verdict.reports:
                row = {"classification": self.verdict.classification,
                       "dims": " ".join(str(d) for d in self.verdict.dims), **r.to_dict()}
                rows.append(row)
            if not rows:
                rows.append({"classification": self.verdict.classification,
                             "dims": " ".join(str(d) for d in self.verdict.dims)})
            return pd.DataFrame(rows)
        return pd.DataFrame(self.rows)

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if fmt == "csv":
            return self.frame().to_csv(index=False, float_format=settings.CSV_FLOAT_FORMAT)
        if fmt == "text":
            return _render_text(self)
        raise MetallicLabError(f"unknown format {fmt!r}; choose from {', '.join(settings.REPORT_FORMATS)}")


def verdict_line(verdict: HemiSlantVerdict) -> str:
    dims = ",".join(str(d) for d in verdict.dims)
    if verdict.theta is None:
        return f"{verdict.classification}, theta undefined, dims ({dims})"
    if verdict.theta == 0.0:
        return f"{verdict.classification}, theta = 0, dims ({dims})"
    return f"{verdict.classification}, theta = {verdict.theta:.6f} rad, dims ({dims})"


def _render_text(report: ReportDocument) -> str:
    lines = [f"metallic-lab {settings.ENGINE_VERSION} {report.command} {report.scenario}"]
    if report.fingerprint:
        lines[0] += f" [{report.fingerprint[:16]}]"
    if report.verdict is not None:
        lines.append(verdict_line(report.verdict))
        for diag in report.verdict.diagnostics:
            lines.append(f"  note: {diag}")
    if report.command == "analyze":
        for r in report.verdict.reports if report.verdict else []:
            lines.append(f"  {r.distribution}: {r.verdict}, theta = {r.mean_theta:.12g}, cos = {r.cos_theta:.12g}, "
                         f"deviation {r.max_deviation:.3g}, lambda = {r.lambda_fit:.12g}")
        if report.verdict is not None and report.verdict.split is not None:
            s = report.verdict.split
            lines.append(f"  normal split: N(D1) {s.dim_theta}, N(D2) {s.dim_perp}, mu {s.dim_mu}")
        geometry = report.extra.get("geometry")
        if geometry:
            lines.append(f"  induced metric at {geometry['point']}: {geometry['induced_metric']}")
        for cf in report.extra.get("closed_forms", []):
            lines.append(f"  closed form [{cf['label']}] {cf['distribution']}: {cf['value']:.12g} "
                         f"(engine {cf['engine']:.12g}, deviation {cf['deviation']:.3g})")
    elif report.command == "verify":
        lines.append(f"seed {report.seed}, samples {report.samples}")
        frame = report.frame().drop(columns=["note"])
        lines.append(frame.to_string(index=False, float_format=lambda v: f"{v:.3e}"))
        for c in report.checks:
            if c.failed and c.worst:
                lines.append(f"  {c.check_id} worst: {json.dumps(c.to_dict()['worst'], sort_keys=True)}")
            if c.status == settings.STATUS_SKIPPED:
                lines.append(f"  {c.check_id}: {c.note}")
        counts = pd.Series([c.status for c in report.checks]).value_counts()
        lines.append("summary: " + ", ".join(f"{int(counts.get(s, 0))} {s}" for s in (
            settings.STATUS_PASS, settings.STATUS_FAIL, settings.STATUS_SKIPPED, settings.STATUS_NOT_APPLICABLE)))
    elif report.rows:
        lines.append(pd.DataFrame(report.rows).to_string(index=False, float_format=lambda v: f"{v:.12g}"))
    return "\n".join(lines) + "\n"


# --- 3. Commands ---

def _geometry_summary(scn: ImmersionScenario) -> Dict[str, Any]:
    centre = [(lo + hi) / 2.0 for lo, hi in scn.domain]
    geom = frame_at(scn, centre)
    norms = {
        d.name: [float(geom.push(x) @ geom.push(x)) for x in geom.distribution_frame(d).value.T]
        for d in scn.distributions
    }
    return {
        "point": [float(x) for x in centre],
        "induced_metric": [[float(x) for x in row] for row in geom.induced_metric],
        "distribution_norms_sq": norms,
    }


def cmd_analyze(scn: ImmersionScenario) -> ReportDocument:
    """Classification, slant reports, normal split and published closed forms."""
    verdict = classify(scn)
    closed = []
    by_name = {r.distribution: r for r in verdict.reports}
    for cf in scn.closed_forms:
        if cf.distribution not in by_name:
            continue
        value = eval_value(cf.expr, scn.consts)
        engine = by_name[cf.distribution].cos_theta
        # theta lies in [0, pi/2], so a closed form is only meaningful up to sign
        deviation = abs(engine - abs(value))
        closed.append({"label": cf.label, "distribution": cf.distribution, "value": value,
                       "engine": engine, "deviation": deviation})
        if deviation > settings.ANGLE_TOL:
            log.warning(f"[Analyze] closed form '{cf.label}' deviates from the computed cos(theta) "
                        f"by {deviation:.3g}")
    report = ReportDocument(
        command="analyze",
        scenario=scn.name,
        fingerprint=generate_deterministic_hash(scn.document()),
        seed=scn.sampling.seed,
        samples=scn.sampling.count,
        verdict=verdict,
        extra={"geometry": _geometry_summary(scn), "closed_forms": closed},
        exit_code=settings.EXIT_CHECK_FAILURE if verdict.classification == UNCLASSIFIED else settings.EXIT_PASS,
    )
    log.info(f"[Analyze] {scn.name}: {verdict_line(verdict)}")
    return report


def cmd_verify(scn: ImmersionScenario, checks: Optional[Sequence[str]] = None,
               samples: Optional[int] = None, seed: Optional[int] = None) -> ReportDocument:
    """Run the check suite; exit 0 iff no applicable check fails."""
    samples = scn.sampling.count if samples is None else samples
    seed = scn.sampling.seed if seed is None else seed
    ids = list(checks) if checks else list(scn.checks)
    geoms = sample_geometries(scn, samples, seed)
    verdict = classify(scn, geoms=geoms)
    reports = run_suite(scn, ids, samples, seed, verdict=verdict, geoms=geoms)
    failed = [r.check_id for r in reports if r.failed]
    if failed:
        log.warning(f"[Verify] {scn.name}: failing checks {', '.join(failed)}")
    return ReportDocument(
        command="verify",
        scenario=scn.name,
        fingerprint=generate_deterministic_hash(scn.document()),
        seed=seed,
        samples=samples,
        verdict=verdict,
        checks=reports,
        exit_code=settings.EXIT_CHECK_FAILURE if failed else settings.EXIT_PASS,
    )


def parse_grid(grid: str) -> List[float]:
    """"start:stop:count" (inclusive) or a comma list; entries may be constant
    expressions such as pi/6."""
    def value(token: str) -> float:
        return eval_value(parse(token.strip(), ()), {})

    grid = grid.strip()
    if not grid:
        raise MetallicLabError("empty grid")
    if ":" in grid:
        parts = grid.split(":")
        if len(parts) != 3:
            raise MetallicLabError(f"grid {grid!r} must be start:stop:count")
        try:
            count = int(parts[2])
        except ValueError:
            raise MetallicLabError(f"grid count {parts[2]!r} is not an integer") from None
        if count < 1:
            raise MetallicLabError("grid count must be positive")
        return [float(x) for x in np.linspace(value(parts[0]), value(parts[1]), count)]
    return [value(tok) for tok in grid.split(",") if tok.strip()]


def cmd_angle_sweep(source: ScenarioSource, var: str, grid: Sequence[float],
                    seed: Optional[int] = None, distribution: Optional[str] = None) -> ReportDocument:
    """cos(theta) of the slant distribution as the constant ``var`` runs over ``grid``."""
    base = source.build()
    if var not in base.extra_consts:
        raise MetallicLabError(f"{var!r} is not a declared constant of {base.name}")
    if not base.distributions:
        raise MetallicLabError(f"{base.name} declares no distributions")
    lo, hi = base.const_domain.get(var, (-math.inf, math.inf))
    outside = [g for g in grid if not lo < g < hi]
    if outside:
        raise MetallicLabError(f"grid values {outside} outside the domain ({lo}, {hi}) of {var}")
    seed = base.sampling.seed if seed is None else seed

    rows = []
    for g in grid:
        scn = source.build(consts={var: g})
        spec = scn.distribution(distribution) if distribution else scn.distributions[0]
        geoms = [frame_at(scn, u) for u in sample_points(scn, settings.SWEEP_POINTS, seed)]
        rep = slant_report(scn, spec, geoms, seed)
        rows.append({var: float(g), "cos_theta": rep.cos_theta, "theta": rep.mean_theta})
        log.debug(f"[Sweep] {var}={g:.12g} cos={rep.cos_theta:.12g} {rep.verdict}")
    return ReportDocument(
        command="angle-sweep",
        scenario=base.name,
        fingerprint=generate_deterministic_hash(base.document()),
        seed=seed,
        samples=settings.SWEEP_POINTS,
        rows=rows,
    )


def cmd_builtin_list() -> ReportDocument:
    rows = [{"name": name, "description": desc} for name, desc in list_builtins()]
    return ReportDocument(command="builtin-list", scenario="builtins", rows=rows)


# --- 4. Artifacts ---

def emit(report: ReportDocument, fmt: str, output: Optional[str] = None) -> str:
    text = report.render(fmt)
    if output:
        _atomic_write(output, text)
        log.info(f"[Report] written to {output}")
    return text


def save_samples(report: ReportDocument, path: str) -> None:
    """Per-sample residuals of every check, one dataset per check id."""
    path = Path(path)
    if path.parent != Path(""):
        os.makedirs(path.parent, exist_ok=True)
    tmp_path = str(path) + ".tmp"
    with h5py.File(tmp_path, "w") as f:
        f.attrs["scenario"] = report.scenario
        f.attrs["fingerprint"] = report.fingerprint
        f.attrs["seed"] = -1 if report.seed is None else int(report.seed)
        f.attrs["engine_version"] = settings.ENGINE_VERSION
        for c in report.checks:
            ds = f.create_dataset(c.check_id, data=np.asarray(c.residuals, dtype=float))
            ds.attrs["tolerance"] = c.tolerance
            ds.attrs["status"] = c.status
            ds.attrs["max_residual"] = c.max_residual
    os.replace(tmp_path, path)
    log.info(f"[Report] sample residuals archived to {path}")


def write_provenance(report: ReportDocument) -> Path:
    """Record the JSON report under the provenance directory, keyed by fingerprint."""
    path = settings.provenance_path(report.fingerprint or generate_deterministic_hash(report.to_dict()))
    _atomic_write(path, report.render("json"))
    log.info(f"[Provenance] saved {path}")
    return path

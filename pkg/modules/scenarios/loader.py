"""
MODULE: loader.py
CLASSIFICATION: Input Layer (scenario files)
GOAL: Read a scenario document (TOML or JSON), validate it against the
      scenario schema, and build a fully checked ImmersionScenario: parsed
      expressions, a verified metallic structure and a non-degenerate
      immersion at the centre of its domain.
CONTRACT ID: IO-SCENARIO

Errors carry the section and key they refer to and, for file input, the
line and column.  Everything here maps to the input-error exit code.
"""
from __future__ import annotations

import copy
import json
import logging
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import jsonschema
import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

import settings
from modules.core_numerics.exprdsl import FUNCTIONS, NAMED_CONSTANTS, eval_value, parse
from modules.core_numerics.metallic import (
    StructureOp,
    custom_structure,
    diagonal_structure,
    from_product,
    metallic_number,
    product_structure,
    verify_structure,
)
from modules.errors import MetallicLabError, ScenarioError, StructureError
from modules.geometry.fields import ExprField
from modules.geometry.immersion import ClosedForm, DistributionSpec, ImmersionScenario, Sampling, frame_at
from modules.validation.propcheck import parse_check_ids

log = logging.getLogger(__name__)

IDENT = r"^[A-Za-z_][A-Za-z0-9_]*$"
_EXPR = {"type": ["string", "number"]}
_INTERVAL = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_MATRIX = {"type": "array", "minItems": 1, "items": {"type": "array", "items": {"type": "number"}}}

SCENARIO_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["ambient", "immersion"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "ambient": {
            "type": "object",
            "additionalProperties": False,
            "required": ["dim", "p", "q"],
            "properties": {
                "dim": {"type": "integer", "minimum": 1},
                "p": {"type": "integer", "minimum": 1},
                "q": {"type": "integer", "minimum": 1},
                "pattern": {"type": "array", "minItems": 1, "items": {"enum": ["sigma", "sigma_bar"]}},
                "matrix": _MATRIX,
                "product": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["matrix"],
                    "properties": {"matrix": _MATRIX, "sign": {"enum": ["+", "-"]}},
                },
            },
        },
        "immersion": {
            "type": "object",
            "additionalProperties": False,
            "required": ["params", "components", "domain"],
            "properties": {
                "params": {"type": "array", "minItems": 1, "uniqueItems": True,
                           "items": {"type": "string", "pattern": IDENT}},
                "components": {"type": "array", "minItems": 1, "items": _EXPR},
                "domain": {"type": "array", "items": _INTERVAL},
                "consts": {"type": "object", "additionalProperties": _EXPR},
                "const_domain": {"type": "object", "additionalProperties": _INTERVAL},
            },
        },
        "distributions": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": {"type": "array", "minItems": 1, "items": _EXPR}},
        },
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "count": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "checks": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"ids": {"type": "array", "items": {"type": "string"}}},
        },
        "closed_forms": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["label", "distribution", "expr"],
                "properties": {
                    "label": {"type": "string"},
                    "distribution": {"type": "string"},
                    "expr": {"type": "string", "minLength": 1},
                },
            },
        },
    },
}

_LINE_COL = re.compile(r"line (\d+), column (\d+)")


# --- 1. Locating keys in the source text ---

def _locate(text: Optional[str], section: Optional[str], key: Optional[str]) -> Tuple[Optional[int], Optional[int]]:
    """Best-effort (line, column) of ``key`` inside ``[section]`` of a TOML
    source; (None, None) when the text is unavailable or the key is not found."""
    if not text or not key:
        return None, None
    current = None
    key_re = re.compile(rf"^\s*\"?{re.escape(key)}\"?\s*=")
    for lineno, line in enumerate(text.splitlines(), start=1):
        header = re.match(r"^\s*\[+\s*([^\]]+?)\s*\]+", line)
        if header:
            current = header.group(1)
            continue
        if (section is None or current == section or (current or "").startswith(f"{section}.")) and key_re.match(line):
            return lineno, line.index(key) + 1
    return None, None


def _fail(message: str, section: Optional[str], key: Optional[str], text: Optional[str]) -> ScenarioError:
    line, column = _locate(text, section, key)
    return ScenarioError(message, section, key, line, column)


# --- 2. Schema validation ---

def validate_document(doc: Mapping[str, Any], text: Optional[str] = None) -> None:
    """jsonschema validation; the first error (in path order) is raised."""
    validator = jsonschema.Draft7Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: [str(p) for p in e.absolute_path])
    if not errors:
        return
    err = errors[0]
    path = [str(p) for p in err.absolute_path]
    section = path[0] if path else None
    key = path[1] if len(path) > 1 else None
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extras = sorted(set(err.instance) - allowed)
        if extras:
            if section is None:
                raise _fail(f"unknown section {extras[0]!r}", None, None, text)
            key = extras[0]
            raise _fail(f"unknown key {key!r}", section, key, text)
    raise _fail(err.message, section, key, text)


# --- 3. Building the scenario ---

def _expr_text(value: Union[str, float, int]) -> str:
    return value if isinstance(value, str) else repr(float(value))


def _parse_expr(source, allowed_vars: Sequence[str], consts: Sequence[str], section: str, key: str,
                text: Optional[str]):
    try:
        return parse(_expr_text(source), allowed_vars, consts)
    except MetallicLabError as exc:
        raise _fail(f"{exc} in {_expr_text(source)!r}", section, key, text) from exc


def _build_structure(amb: Mapping[str, Any], text: Optional[str]) -> StructureOp:
    forms = [k for k in ("pattern", "matrix", "product") if k in amb]
    if len(forms) != 1:
        raise _fail("exactly one of 'pattern', 'matrix' or 'product' must be given", "ambient",
                    forms[1] if len(forms) > 1 else "pattern", text)
    form = forms[0]
    dim = amb["dim"]
    try:
        params = metallic_number(amb["p"], amb["q"])
        if form == "pattern":
            if len(amb["pattern"]) != dim:
                raise _fail(f"pattern has {len(amb['pattern'])} entries, ambient dim is {dim}", "ambient",
                            "pattern", text)
            op = diagonal_structure(amb["pattern"], params)
        elif form == "matrix":
            matrix = np.array(amb["matrix"], dtype=float)
            if matrix.shape != (dim, dim):
                raise _fail(f"matrix has shape {matrix.shape}, expected ({dim}, {dim})", "ambient", "matrix", text)
            op = custom_structure(matrix, params)
        else:
            matrix = np.array(amb["product"]["matrix"], dtype=float)
            if matrix.shape != (dim, dim):
                raise _fail(f"product matrix has shape {matrix.shape}, expected ({dim}, {dim})", "ambient",
                            "product", text)
            op = from_product(product_structure(matrix), params, amb["product"].get("sign", "+"))
    except StructureError as exc:
        raise _fail(str(exc), "ambient", form, text) from exc

    report = verify_structure(op, 32, settings.DEFAULT_SEED)
    if not report.passed:
        raise _fail(f"structure fails verification (max residual {report.max_residual:.3g})", "ambient", form, text)
    return op


def scenario_from_dict(doc: Mapping[str, Any], name: Optional[str] = None, text: Optional[str] = None) -> ImmersionScenario:
    """Validate ``doc`` and build the scenario it describes."""
    validate_document(doc, text)
    amb, imm = doc["ambient"], doc["immersion"]
    structure = _build_structure(amb, text)
    params = tuple(imm["params"])
    scenario_name = doc.get("name") or name or "scenario"

    # constants: numbers or constant expressions over pi, sigma, sigma_bar
    reserved = set(NAMED_CONSTANTS) | set(FUNCTIONS) | set(params)
    extra: Dict[str, float] = {}
    for cname, value in imm.get("consts", {}).items():
        if not re.match(IDENT, cname) or cname in reserved:
            raise _fail(f"constant name {cname!r} is reserved or invalid", "immersion.consts", cname, text)
        ast = _parse_expr(value, (), list(extra), "immersion.consts", cname, text)
        extra[cname] = eval_value(ast, {**structure.params.consts(), **extra})

    const_domain: Dict[str, Tuple[float, float]] = {}
    for cname, (lo, hi) in imm.get("const_domain", {}).items():
        if cname not in extra:
            raise _fail(f"const_domain names undeclared constant {cname!r}", "immersion.const_domain", cname, text)
        if not lo < hi:
            raise _fail(f"empty interval [{lo}, {hi}]", "immersion.const_domain", cname, text)
        if not lo < extra[cname] < hi:
            raise _fail(f"constant {cname}={extra[cname]!r} outside ({lo}, {hi})", "immersion.consts", cname, text)
        const_domain[cname] = (float(lo), float(hi))

    if len(imm["components"]) != amb["dim"]:
        raise _fail(f"{len(imm['components'])} components for ambient dim {amb['dim']}", "immersion",
                    "components", text)
    if len(params) >= amb["dim"]:
        raise _fail(f"{len(params)} params need an ambient dim above {len(params)}, got {amb['dim']}",
                    "immersion", "params", text)
    if len(imm["domain"]) != len(params):
        raise _fail(f"domain has {len(imm['domain'])} intervals for {len(params)} params", "immersion", "domain", text)
    for lo, hi in imm["domain"]:
        if not lo < hi:
            raise _fail(f"empty interval [{lo}, {hi}]", "immersion", "domain", text)

    const_names = list(extra)
    components = tuple(_parse_expr(c, params, const_names, "immersion", "components", text)
                       for c in imm["components"])

    distributions: List[DistributionSpec] = []
    for dname, vectors in doc.get("distributions", {}).items():
        fields = []
        for vec in vectors:
            if len(vec) != len(params):
                raise _fail(f"vector of length {len(vec)} in {dname!r}, expected {len(params)}",
                            "distributions", dname, text)
            fields.append(ExprField(tuple(_parse_expr(c, params, const_names, "distributions", dname, text)
                                          for c in vec)))
        distributions.append(DistributionSpec(dname, tuple(fields)))

    closed_forms = []
    names = {d.name for d in distributions}
    for entry in doc.get("closed_forms", []):
        if entry["distribution"] not in names:
            raise _fail(f"closed form names unknown distribution {entry['distribution']!r}", "closed_forms",
                        "distribution", text)
        expr = _parse_expr(entry["expr"], (), const_names, "closed_forms", "expr", text)
        closed_forms.append(ClosedForm(entry["label"], entry["distribution"], expr))

    sampling_doc = doc.get("sampling", {})
    sampling = Sampling(sampling_doc.get("count", settings.DEFAULT_SAMPLES),
                        sampling_doc.get("seed", settings.DEFAULT_SEED))

    checks = tuple(doc.get("checks", {}).get("ids", ["all"]))
    try:
        parse_check_ids(list(checks))
    except MetallicLabError as exc:
        raise _fail(str(exc), "checks", "ids", text) from exc

    scn = ImmersionScenario(
        name=scenario_name,
        param_names=params,
        extra_consts=extra,
        components=components,
        structure=structure,
        distributions=tuple(distributions),
        domain=tuple((float(lo), float(hi)) for lo, hi in imm["domain"]),
        sampling=sampling,
        checks=checks,
        const_domain=const_domain,
        closed_forms=tuple(closed_forms),
        description=doc.get("description", ""),
    )
    # the immersion must be regular where sampling starts
    frame_at(scn, [(lo + hi) / 2.0 for lo, hi in scn.domain])
    log.debug(f"[Scenario] {scn.name}: R^{scn.m} <- R^{scn.k}, {len(distributions)} distributions, "
              f"structure {structure.kind}")
    return scn


def read_document(path: Union[str, Path]) -> Tuple[Dict[str, Any], str]:
    """Raw document and its source text; parse errors carry line/column."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"scenario file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text), text
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"JSON parse error: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    try:
        return tomllib.loads(text), text
    except tomllib.TOMLDecodeError as exc:
        found = _LINE_COL.search(str(exc))
        line, column = (int(found.group(1)), int(found.group(2))) if found else (None, None)
        raise ScenarioError(f"TOML parse error: {exc}", line=line, column=column) from exc


def load(path: Union[str, Path]) -> ImmersionScenario:
    """Load and fully validate the scenario file at ``path``."""
    doc, text = read_document(path)
    scn = scenario_from_dict(doc, name=Path(path).stem, text=text)
    log.info(f"[Scenario] loaded {scn.name} from {path}")
    return scn


def with_overrides(doc: Mapping[str, Any], p: Optional[int] = None, q: Optional[int] = None,
                   consts: Optional[Mapping[str, float]] = None) -> Dict[str, Any]:
    """Copy of ``doc`` with metallic parameters and constants replaced."""
    out = copy.deepcopy(dict(doc))
    if p is not None:
        out["ambient"]["p"] = int(p)
    if q is not None:
        out["ambient"]["q"] = int(q)
    for cname, value in (consts or {}).items():
        known = out["immersion"].setdefault("consts", {})
        if cname not in known:
            raise ScenarioError(f"scenario declares no constant {cname!r}", "immersion.consts", cname)
        known[cname] = value
    return out

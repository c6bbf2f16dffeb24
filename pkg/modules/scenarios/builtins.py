"""
MODULE: builtins.py
CLASSIFICATION: Input Layer (builtin scenarios)
GOAL: The worked hemi-slant examples as ready-made scenario documents, plus
      a curved paraboloid (nonzero second fundamental form, no declared
      distributions), a curved proper hemi-slant cylinder and a curved
      semi-invariant cylinder.
CONTRACT ID: IO-SCENARIO

Every builtin is a plain scenario document run through the same validation
as a file, so ``--p``, ``--q`` and ``--const`` overrides behave identically.
q is written as -sigma*sigma_bar since sigma*sigma_bar = -q.
"""
from __future__ import annotations

import math
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from modules.errors import ScenarioError
from modules.geometry.immersion import ImmersionScenario
from modules.scenarios.loader import scenario_from_dict, with_overrides

SQRT_Q = "sqrt(-sigma*sigma_bar)"
HALF_PI = math.pi / 2

GOLDEN_PATTERN_4 = ["sigma", "sigma_bar", "sigma", "sigma_bar"]
JBAR_PATTERN_4 = ["sigma", "sigma", "sigma", "sigma_bar"]
PATTERN_7 = ["sigma", "sigma_bar", "sigma", "sigma_bar", "sigma", "sigma_bar", "sigma"]
JBAR_PATTERN_7 = ["sigma", "sigma", "sigma", "sigma_bar", "sigma", "sigma_bar", "sigma"]

EXAMPLE1_COS = "(sigma*cos(t)^2 + sigma_bar*sin(t)^2)/sqrt(sigma^2*cos(t)^2 + sigma_bar^2*sin(t)^2)"
EXAMPLE2_COS = "(sigma*(cos(t)^2 + 2) + sigma_bar*sin(t)^2)/sqrt(3*(sigma^2*(cos(t)^2 + 2) + sigma_bar^2*sin(t)^2))"


def _example1(pattern=None, product=None) -> Dict[str, Any]:
    ambient: Dict[str, Any] = {"dim": 4, "p": 1, "q": 1}
    if product is not None:
        ambient["product"] = product
    else:
        ambient["pattern"] = pattern
    return {
        "ambient": ambient,
        "immersion": {
            "params": ["u", "v"],
            "consts": {"t": math.pi / 4},
            "const_domain": {"t": [0.0, HALF_PI]},
            "components": ["u*cos(t)", "u*sin(t)", "v", f"sigma/{SQRT_Q}*v"],
            "domain": [[0.1, 2.0], [-1.0, 1.0]],
        },
        "distributions": {"D_theta": [["1", "0"]], "D_perp": [["0", "1"]]},
    }


def example1() -> Dict[str, Any]:
    doc = _example1(pattern=GOLDEN_PATTERN_4)
    doc["description"] = "surface in R^4, J = diag(s, s_bar, s, s_bar): proper hemi-slant"
    doc["closed_forms"] = [
        {"label": "general t", "distribution": "D_theta", "expr": EXAMPLE1_COS},
        # the pi/4 specialization as printed, and with the 1/2 from cos^2 = sin^2 = 1/2 kept
        {"label": "t = pi/4, printed form", "distribution": "D_theta",
         "expr": "(sigma + sigma_bar)/sqrt(sigma^2 + sigma_bar^2)"},
        {"label": "t = pi/4, sqrt(2) form", "distribution": "D_theta",
         "expr": "(sigma + sigma_bar)/sqrt(2*(sigma^2 + sigma_bar^2))"},
    ]
    return doc


def example1_jbar() -> Dict[str, Any]:
    doc = _example1(pattern=JBAR_PATTERN_4)
    doc["description"] = "surface of example1 with J = diag(s, s, s, s_bar): semi-invariant"
    doc["closed_forms"] = [{"label": "theta = 0", "distribution": "D_theta", "expr": "1"}]
    return doc


def example1_golden() -> Dict[str, Any]:
    doc = _example1(product={"matrix": [[1, 0, 0, 0], [0, -1, 0, 0], [0, 0, 1, 0], [0, 0, 0, -1]],
                             "sign": "+"})
    doc["description"] = "example1 with J induced by the product structure F = diag(1, -1, 1, -1)"
    doc["closed_forms"] = [{"label": "general t", "distribution": "D_theta", "expr": EXAMPLE1_COS}]
    return doc


def _example2(pattern) -> Dict[str, Any]:
    return {
        "ambient": {"dim": 7, "p": 1, "q": 1, "pattern": pattern},
        "immersion": {
            "params": ["u", "v", "w"],
            "consts": {"t": math.pi / 4},
            "const_domain": {"t": [0.0, HALF_PI]},
            "components": [
                "u*cos(t)/sqrt(3)",
                "u*sin(t)/sqrt(3)",
                "v",
                f"sigma/{SQRT_Q}*v",
                f"{SQRT_Q}/sigma*w",
                "w",
                "sqrt(2)/sqrt(3)*u",
            ],
            "domain": [[0.1, 2.0], [-1.0, 1.0], [-1.0, 1.0]],
        },
        "distributions": {"D_theta": [["1", "0", "0"]], "D_perp": [["0", "1", "0"], ["0", "0", "1"]]},
    }


def example2() -> Dict[str, Any]:
    doc = _example2(PATTERN_7)
    doc["description"] = "3-fold in R^7: proper hemi-slant with dims (1, 2, 1)"
    doc["closed_forms"] = [
        {"label": "general t", "distribution": "D_theta", "expr": EXAMPLE2_COS},
        # the pi/4 specialization as printed, and with the factor 2 kept under the root
        {"label": "t = pi/4, sqrt(3) form", "distribution": "D_theta",
         "expr": "(5*sigma + sigma_bar)/sqrt(3*(5*sigma^2 + sigma_bar^2))"},
        {"label": "t = pi/4, sqrt(6) form", "distribution": "D_theta",
         "expr": "(5*sigma + sigma_bar)/sqrt(6*(5*sigma^2 + sigma_bar^2))"},
    ]
    return doc


def example2_jbar() -> Dict[str, Any]:
    doc = _example2(JBAR_PATTERN_7)
    doc["description"] = "3-fold of example2 with the second structure: semi-invariant"
    doc["closed_forms"] = [{"label": "theta = 0", "distribution": "D_theta", "expr": "1"}]
    return doc


def paraboloid() -> Dict[str, Any]:
    return {
        "description": "paraboloid (u, v, u^2 + v^2, 0) in R^4: curved, no declared distributions",
        "ambient": {"dim": 4, "p": 1, "q": 1, "pattern": GOLDEN_PATTERN_4},
        "immersion": {
            "params": ["u", "v"],
            "components": ["u", "v", "u^2 + v^2", "0"],
            "domain": [[-1.0, 1.0], [-1.0, 1.0]],
        },
    }


def slant_cylinder() -> Dict[str, Any]:
    # circle of radius r in the plane of w1 = (cos a, sin a, 0, ...) and
    # w2 = (0, 0, cos a, sin a, 0, 0), times a line along an anti-invariant direction
    return {
        "description": "curved proper hemi-slant surface in R^6 (h != 0), dims (1, 1, 2)",
        "ambient": {"dim": 6, "p": 1, "q": 1, "pattern": GOLDEN_PATTERN_4 + ["sigma", "sigma_bar"]},
        "immersion": {
            "params": ["u", "v"],
            "consts": {"a": 0.6, "r": 1.5},
            "const_domain": {"a": [0.0, HALF_PI], "r": [0.0, 10.0]},
            "components": [
                "r*cos(u)*cos(a)",
                "r*cos(u)*sin(a)",
                "r*sin(u)*cos(a)",
                "r*sin(u)*sin(a)",
                "v",
                f"sigma/{SQRT_Q}*v",
            ],
            "domain": [[-3.0, 3.0], [-1.0, 1.0]],
        },
        "distributions": {"D_theta": [["1", "0"]], "D_perp": [["0", "1"]]},
        "closed_forms": [{"label": "example1 angle at t = a", "distribution": "D_theta",
                          "expr": EXAMPLE1_COS.replace("t)", "a)")}],
    }


def semi_invariant_cylinder() -> Dict[str, Any]:
    # circle in the (x1, x3) plane, where J = sigma, so D_theta is invariant and h != 0
    return {
        "description": "curved semi-invariant surface in R^6 (h != 0 on D_theta), dims (1, 1, 3)",
        "ambient": {"dim": 6, "p": 1, "q": 1, "pattern": GOLDEN_PATTERN_4 + ["sigma", "sigma_bar"]},
        "immersion": {
            "params": ["u", "v"],
            "consts": {"r": 1.5},
            "const_domain": {"r": [0.0, 10.0]},
            "components": ["r*cos(u)", "0", "r*sin(u)", "0", "v", f"sigma/{SQRT_Q}*v"],
            "domain": [[-3.0, 3.0], [-1.0, 1.0]],
        },
        "distributions": {"D_theta": [["1", "0"]], "D_perp": [["0", "1"]]},
        "closed_forms": [{"label": "theta = 0", "distribution": "D_theta", "expr": "1"}],
    }


BUILTINS: Dict[str, Tuple[Callable[[], Dict[str, Any]], Optional[str]]] = {
    # name: (document factory, name of the second-structure variant)
    "example1": (example1, "example1-jbar"),
    "example1-jbar": (example1_jbar, None),
    "example1-golden": (example1_golden, None),
    "example2": (example2, "example2-jbar"),
    "example2-jbar": (example2_jbar, None),
    "paraboloid": (paraboloid, None),
    "slant-cylinder": (slant_cylinder, None),
    "semi-invariant-cylinder": (semi_invariant_cylinder, None),
}


def list_builtins() -> List[Tuple[str, str]]:
    return [(name, factory()["description"]) for name, (factory, _) in BUILTINS.items()]


def builtin_document(name: str, structure: str = "j") -> Dict[str, Any]:
    if name not in BUILTINS:
        raise ScenarioError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}")
    if structure not in ("j", "jbar"):
        raise ScenarioError(f"structure must be 'j' or 'jbar', got {structure!r}")
    factory, jbar = BUILTINS[name]
    if structure == "jbar":
        if jbar is None:
            raise ScenarioError(f"builtin {name!r} has no second structure")
        name = jbar
        factory = BUILTINS[jbar][0]
    doc = factory()
    doc["name"] = name
    return doc


def get_builtin(name: str, p: Optional[int] = None, q: Optional[int] = None,
                consts: Optional[Mapping[str, float]] = None, structure: str = "j") -> ImmersionScenario:
    """Builtin scenario ``name`` with optional parameter and constant overrides."""
    doc = with_overrides(builtin_document(name, structure), p=p, q=q, consts=consts)
    return scenario_from_dict(doc, name=doc["name"])

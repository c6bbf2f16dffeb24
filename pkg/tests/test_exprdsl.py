import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

from modules.core_numerics.exprdsl import (
    Binary,
    Const,
    NamedConst,
    Unary,
    Var,
    eval_jet2,
    eval_value,
    parse,
    to_source,
)
from modules.errors import ExprDomainError, ExprSyntaxError, UnknownIdentifierError

UV = ("u", "v")


def test_parse_builds_the_expected_tree():
    ast = parse("u*cos(t)", ["u", "t"])
    assert ast == Binary("*", Var("u"), Unary("cos", Var("t")))


def test_parse_reports_offset_of_syntax_error():
    with pytest.raises(ExprSyntaxError) as info:
        parse("u**", ["u"])
    assert info.value.offset == 3


def test_parse_names_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("u + w", ["u", "v"])
    assert info.value.name == "w"


def test_empty_source_is_rejected():
    with pytest.raises(ExprSyntaxError):
        parse("   ", ["u"])


def test_precedence_and_right_associative_power():
    assert parse("-u^2", ["u"]) == Unary("neg", Binary("^", Var("u"), Const(2.0)))
    assert parse("2^3^2", []) == Binary("^", Const(2.0), Binary("^", Const(3.0), Const(2.0)))
    assert parse("1 + 2*u", ["u"]) == Binary("+", Const(1.0), Binary("*", Const(2.0), Var("u")))
    assert eval_value(parse("2^3^2", []), {}) == 512.0


def test_named_constants_and_scenario_consts():
    ast = parse("sigma*t + pi", [], ["t"])
    assert isinstance(ast.left.left, NamedConst)
    assert eval_value(ast, {"sigma": 2.0, "t": 3.0}) == pytest.approx(6.0 + math.pi)


def test_variable_exponent_is_rejected():
    with pytest.raises(ExprSyntaxError):
        parse("u^v", UV)


@pytest.mark.parametrize("source", [
    "u*cos(t)", "-(u + 2)^3/v", "sqrt(1 + u^2) - exp(-v)*log(2)", "u**2**0.5", "tan(0.5*u) + abs(v - 3)",
])
def test_print_then_parse_is_identity(source):
    ast = parse(source, ["u", "v", "t"])
    assert parse(to_source(ast), ["u", "v", "t"]) == ast


def test_jet_of_polynomial():
    jet = eval_jet2(parse("u^2*v", UV), {"u": 2.0, "v": 3.0})
    assert jet.value == 12.0
    np.testing.assert_allclose(jet.gradient, [12.0, 4.0], atol=1e-14)
    np.testing.assert_allclose(jet.hessian, [[6.0, 4.0], [4.0, 0.0]], atol=1e-14)


def test_jet_of_sine_at_zero():
    jet = eval_jet2(parse("sin(t)", ["t"]), {"t": 0.0})
    assert jet.value == 0.0
    np.testing.assert_allclose(jet.gradient, [1.0])
    np.testing.assert_allclose(jet.hessian, [[0.0]])


def test_jet_of_constant():
    jet = eval_jet2(parse("7", UV), {"u": 0.3, "v": -0.1})
    assert jet.value == 7.0
    assert not jet.gradient.any() and not jet.hessian.any()


def test_hessian_is_exactly_symmetric():
    jet = eval_jet2(parse("exp(u*v)*sin(u - v^2)/(2 + cos(u))", UV), {"u": 0.4, "v": -0.7})
    assert np.array_equal(jet.hessian, jet.hessian.T)


@pytest.mark.parametrize("source, point", [
    ("log(u)", {"u": 0.0}),
    ("log(u - 1)", {"u": 0.5}),
    ("sqrt(u)", {"u": -1.0}),
    ("1/(u - 1)", {"u": 1.0}),
    ("u^0.5", {"u": -2.0}),
])
def test_domain_errors_carry_the_node_offset(source, point):
    with pytest.raises(ExprDomainError) as info:
        eval_jet2(parse(source, ["u"]), point)
    assert info.value.offset >= 0


def test_large_integer_power_of_negative_base():
    jet = eval_jet2(parse("u^65", ["u"]), {"u": -1.0})
    assert jet.value == -1.0
    assert jet.gradient[0] == pytest.approx(65.0)
    assert jet.hessian[0, 0] == pytest.approx(-65.0 * 64.0)


def test_unbound_sigma_is_a_domain_error():
    with pytest.raises(ExprDomainError):
        eval_jet2(parse("sigma*u", ["u"]), {"u": 1.0})


# --- randomized finite-difference corpus ---

def _random_expression(rng: np.random.Generator, depth: int) -> str:
    if depth == 0:
        leaf = rng.integers(0, 4)
        if leaf == 0:
            return "u"
        if leaf == 1:
            return "v"
        if leaf == 2:
            return f"{rng.uniform(0.5, 2.0):.3f}"
        return "sigma"
    a = _random_expression(rng, depth - 1)
    b = _random_expression(rng, int(rng.integers(0, depth)))
    kind = rng.integers(0, 13)
    return [
        f"({a} + {b})",
        f"({a} - {b})",
        f"({a})*({b})",
        f"({a})/(2 + sin({b}))",
        f"sin({a})",
        f"cos({a})",
        f"exp(sin({a}))",
        f"log(1 + ({a})^2)",
        f"sqrt(1.5 + cos({a}))",
        f"({a})^2",
        f"(1 + 0.2*({a}))^3",
        f"(2 + sin({a}))^1.5",
        f"tan(0.5*sin({a}))",
    ][kind]


def _corpus(count: int = 200):
    rng = np.random.default_rng(20240601)
    for _ in range(count):
        source = _random_expression(rng, int(rng.integers(1, 4)))
        point = {"u": float(rng.uniform(-1, 1)), "v": float(rng.uniform(-1, 1))}
        yield source, point


def test_jets_match_finite_differences_on_random_corpus():
    consts = {"sigma": (1.0 + math.sqrt(5.0)) / 2.0}
    cases = list(_corpus())
    assert len(cases) >= 200
    for source, point in cases:
        ast = parse(source, UV)
        jet = eval_jet2(ast, point, consts)
        x0 = np.array([point["u"], point["v"]])

        def f(x):
            return eval_jet2(ast, {"u": x[0], "v": x[1]}, consts).value

        e = np.eye(2)
        h = 1e-5
        grad = np.array([(f(x0 + h * e[i]) - f(x0 - h * e[i])) / (2 * h) for i in range(2)])
        g_scale = max(1.0, abs(jet.value), float(np.linalg.norm(jet.gradient)))
        assert np.linalg.norm(grad - jet.gradient) <= 1e-6 * g_scale, source

        h2 = 1e-4
        hess = np.empty((2, 2))
        for i in range(2):
            for j in range(2):
                hess[i, j] = (f(x0 + h2 * (e[i] + e[j])) - f(x0 + h2 * (e[i] - e[j]))
                              - f(x0 - h2 * (e[i] - e[j])) + f(x0 - h2 * (e[i] + e[j]))) / (4 * h2 * h2)
        h_scale = max(1.0, abs(jet.value), float(np.linalg.norm(jet.hessian)))
        assert np.linalg.norm(hess - jet.hessian) <= 1e-4 * h_scale, source


@hsettings(max_examples=50, deadline=None)
@given(u=st.floats(-2, 2), v=st.floats(-2, 2))
def test_sum_rule_holds_exactly(u, v):
    a, b = "sin(u)*v^2", "exp(u - v)/(3 + cos(v))"
    point = {"u": u, "v": v}
    ja, jb = eval_jet2(parse(a, UV), point), eval_jet2(parse(b, UV), point)
    js = eval_jet2(parse(f"({a}) + ({b})", UV), point)
    assert js.value == ja.value + jb.value
    assert np.array_equal(js.gradient, ja.gradient + jb.gradient)
    assert np.array_equal(js.hessian, ja.hessian + jb.hessian)

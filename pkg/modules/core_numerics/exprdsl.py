"""
MODULE: exprdsl.py
CLASSIFICATION: Scenario Expression Language
GOAL: Parse scalar expressions of real variables (immersion components,
      vector-field coefficients) into an immutable AST, print them back in
      canonical form, and evaluate them as second-order jets.
CONTRACT ID: IO-EXPR

Grammar (whitespace-insensitive, precedence high to low):

    atom    := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'
    power   := atom [ ('^' | '**') unary ]        right-associative, constant exponent
    unary   := '-' unary | '+' unary | power
    term    := unary { ('*' | '/') unary }
    expr    := term { ('+' | '-') term }

FUNC is one of sin cos tan exp log sqrt abs. Named constants pi, sigma and
sigma_bar are always available; sigma and sigma_bar are bound at evaluation
time from the scenario's metallic parameters.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Set, Union

from modules.core_numerics.jets import Jet2, univariate
from modules.errors import ExprDomainError, ExprSyntaxError, UnknownIdentifierError

NAMED_CONSTANTS = ("pi", "sigma", "sigma_bar")
FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")


# --- 1. AST ---

@dataclass(frozen=True)
class Const:
    value: float
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class NamedConst:
    name: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str              # "neg" or a FUNCTIONS name
    arg: "ExprAST"
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str              # one of + - * / ^
    left: "ExprAST"
    right: "ExprAST"
    offset: int = field(default=0, compare=False)


ExprAST = Union[Const, Var, NamedConst, Unary, Binary]


def walk(ast: ExprAST) -> Iterator[ExprAST]:
    yield ast
    if isinstance(ast, Unary):
        yield from walk(ast.arg)
    elif isinstance(ast, Binary):
        yield from walk(ast.left)
        yield from walk(ast.right)


def free_variables(ast: ExprAST) -> Set[str]:
    return {node.name for node in walk(ast) if isinstance(node, Var)}


# --- 2. Tokenizer ---

class Token(NamedTuple):
    kind: str            # "num", "ident", "op", "eof"
    text: str
    offset: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^()])
    """,
    re.VERBOSE,
)


def tokenize(source: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(source)))
    return tokens


# --- 3. Recursive-descent parser ---

class _Parser:
    def __init__(self, source: str, allowed_vars: Iterable[str], allowed_consts: Iterable[str]):
        self.tokens = tokenize(source)
        self.pos = 0
        self.allowed_vars = set(allowed_vars)
        self.allowed_consts = set(NAMED_CONSTANTS) | set(allowed_consts)

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def _advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _expect(self, text: str) -> Token:
        if self.tok.kind == "op" and self.tok.text == text:
            return self._advance()
        raise self._unexpected(f"expected {text!r}")

    def _unexpected(self, hint: str = "") -> ExprSyntaxError:
        tok = self.tok
        what = "unexpected end of input" if tok.kind == "eof" else f"unexpected token {tok.text!r}"
        return ExprSyntaxError(f"{what}{'; ' + hint if hint else ''}", tok.offset)

    def parse(self) -> ExprAST:
        node = self.expr()
        if self.tok.kind != "eof":
            raise self._unexpected()
        return node

    def expr(self) -> ExprAST:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self._advance()
            node = Binary(op.text, node, self.term(), op.offset)
        return node

    def term(self) -> ExprAST:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self._advance()
            node = Binary(op.text, node, self.unary(), op.offset)
        return node

    def unary(self) -> ExprAST:
        if self.tok.kind == "op" and self.tok.text == "-":
            op = self._advance()
            return Unary("neg", self.unary(), op.offset)
        if self.tok.kind == "op" and self.tok.text == "+":
            self._advance()
            return self.unary()
        return self.power()

    def power(self) -> ExprAST:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text in ("^", "**"):
            op = self._advance()
            exp_offset = self.tok.offset
            exponent = self.unary()
            if free_variables(exponent):
                raise ExprSyntaxError("exponent must be a constant", exp_offset)
            return Binary("^", base, exponent, op.offset)
        return base

    def atom(self) -> ExprAST:
        tok = self.tok
        if tok.kind == "num":
            self._advance()
            return Const(float(tok.text), tok.offset)
        if tok.kind == "ident":
            self._advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                if tok.text not in FUNCTIONS:
                    raise UnknownIdentifierError(tok.text, tok.offset)
                self._advance()
                arg = self.expr()
                self._expect(")")
                return Unary(tok.text, arg, tok.offset)
            if tok.text in FUNCTIONS:
                raise ExprSyntaxError(f"expected '(' after {tok.text}", self.tok.offset)
            if tok.text in self.allowed_vars:
                return Var(tok.text, tok.offset)
            if tok.text in self.allowed_consts:
                return NamedConst(tok.text, tok.offset)
            raise UnknownIdentifierError(tok.text, tok.offset)
        if tok.kind == "op" and tok.text == "(":
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        raise self._unexpected()


def parse(source: str, allowed_vars: Sequence[str], allowed_consts: Iterable[str] = ()) -> ExprAST:
    """Parse ``source`` into an AST over ``allowed_vars``.

    ``allowed_consts`` extends the named constants (pi, sigma, sigma_bar) with
    scenario constants such as the fixed angle ``t`` of a family of immersions.
    """
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(source, allowed_vars, allowed_consts).parse()


# --- 4. Canonical printer ---

def to_source(ast: ExprAST) -> str:
    """Fully parenthesized form; parse(to_source(a)) == a."""
    if isinstance(ast, Const):
        return repr(float(ast.value))
    if isinstance(ast, (Var, NamedConst)):
        return ast.name
    if isinstance(ast, Unary):
        if ast.op == "neg":
            return f"(-{to_source(ast.arg)})"
        return f"{ast.op}({to_source(ast.arg)})"
    if isinstance(ast, Binary):
        return f"({to_source(ast.left)} {ast.op} {to_source(ast.right)})"
    raise TypeError(f"not an expression node: {ast!r}")


# --- 5. Jet evaluation ---

_sin = univariate(math.sin, math.cos, lambda x: -math.sin(x))
_cos = univariate(math.cos, lambda x: -math.sin(x), lambda x: -math.cos(x))
_exp = univariate(math.exp, math.exp, math.exp)


def _tan(x: Jet2, offset: int) -> Jet2:
    c = math.cos(x.value)
    if c == 0.0:
        raise ExprDomainError("tan of an odd multiple of pi/2", offset)
    t = math.tan(x.value)
    sec2 = 1.0 + t * t
    return x.compose(t, sec2, 2.0 * t * sec2)


def _log(x: Jet2, offset: int) -> Jet2:
    v = x.value
    if v <= 0.0:
        raise ExprDomainError(f"log of nonpositive value {v!r}", offset)
    return x.compose(math.log(v), 1.0 / v, -1.0 / (v * v))


def _sqrt(x: Jet2, offset: int) -> Jet2:
    v = x.value
    if v < 0.0:
        raise ExprDomainError(f"sqrt of negative value {v!r}", offset)
    if v == 0.0:
        if not x.is_constant():
            raise ExprDomainError("sqrt is not differentiable at 0", offset)
        return Jet2.constant(0.0, x.nvars)
    s = math.sqrt(v)
    return x.compose(s, 0.5 / s, -0.25 / (s * v))


def _abs(x: Jet2, offset: int) -> Jet2:
    v = x.value
    if v == 0.0:
        if not x.is_constant():
            raise ExprDomainError("abs is not differentiable at 0", offset)
        return Jet2.constant(0.0, x.nvars)
    return x if v > 0.0 else -x


_FUNCTION_TABLE = {
    "sin": lambda x, off: _sin(x),
    "cos": lambda x, off: _cos(x),
    "exp": lambda x, off: _exp(x),
    "tan": _tan,
    "log": _log,
    "sqrt": _sqrt,
    "abs": _abs,
}


def _power(base: Jet2, c: float, offset: int) -> Jet2:
    if math.isfinite(c) and float(c).is_integer():
        n = int(c)
        if n < 0 and base.value == 0.0:
            raise ExprDomainError("division by zero in negative power", offset)
        return base.ipow(n)
    if base.value <= 0.0:
        raise ExprDomainError(f"non-integer power of nonpositive base {base.value!r}", offset)
    return base.rpow(c)


class _Evaluator:
    def __init__(self, point: Mapping[str, float], consts: Mapping[str, float], variables: Sequence[str]):
        self.point = point
        self.consts = consts
        self.index = {name: i for i, name in enumerate(variables)}
        self.n = len(variables)

    def const_value(self, node: NamedConst) -> float:
        if node.name in self.consts:
            return float(self.consts[node.name])
        if node.name == "pi":
            return math.pi
        raise ExprDomainError(f"constant {node.name!r} is not bound", node.offset)

    def eval(self, node: ExprAST) -> Jet2:
        if isinstance(node, Const):
            return Jet2.constant(node.value, self.n)
        if isinstance(node, Var):
            if node.name not in self.point:
                raise ExprDomainError(f"variable {node.name!r} is not bound", node.offset)
            if node.name in self.index:
                return Jet2.variable(self.point[node.name], self.index[node.name], self.n)
            return Jet2.constant(self.point[node.name], self.n)
        if isinstance(node, NamedConst):
            return Jet2.constant(self.const_value(node), self.n)
        if isinstance(node, Unary):
            arg = self.eval(node.arg)
            if node.op == "neg":
                return -arg
            return _FUNCTION_TABLE[node.op](arg, node.offset)
        if isinstance(node, Binary):
            left = self.eval(node.left)
            if node.op == "^":
                exponent = _Evaluator({}, self.consts, ()).eval(node.right).value
                return _power(left, exponent, node.offset)
            right = self.eval(node.right)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            if node.op == "/":
                if right.value == 0.0:
                    raise ExprDomainError("division by zero", node.offset)
                return left / right
        raise TypeError(f"not an expression node: {node!r}")


def eval_jet2(
    ast: ExprAST,
    point: Mapping[str, float],
    consts: Optional[Mapping[str, float]] = None,
    variables: Optional[Sequence[str]] = None,
) -> Jet2:
    """Value, gradient and Hessian of ``ast`` at ``point``.

    ``variables`` fixes the order (and set) of active variables; it defaults to
    the keys of ``point`` in insertion order.
    """
    variables = list(point.keys()) if variables is None else list(variables)
    return _Evaluator(point, consts or {}, variables).eval(ast)


def eval_many(
    asts: Sequence[ExprAST],
    point: Mapping[str, float],
    consts: Optional[Mapping[str, float]] = None,
    variables: Optional[Sequence[str]] = None,
) -> List[Jet2]:
    variables = list(point.keys()) if variables is None else list(variables)
    evaluator = _Evaluator(point, consts or {}, variables)
    return [evaluator.eval(a) for a in asts]


def eval_value(ast: ExprAST, env: Mapping[str, float]) -> float:
    """Plain float evaluation (no active variables)."""
    return _Evaluator(env, env, ()).eval(ast).value

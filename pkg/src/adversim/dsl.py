"""Scoring DSL for attacker-identification programs.

Grammar:
    expr   = term {("+"|"-") term}
    term   = factor {("*"|"/") factor}
    factor = NUMBER | IDENT | FUNC "(" expr {"," expr} ")" | "(" expr ")" | "-" factor
    FUNC   = min | max | exp | abs | sqrt | clip
    IDENT  = one of the ten feature names

The evaluator is total: division is guarded near zero, sqrt of a negative is
0, exp arguments are capped, and every intermediate is clamped to a finite
range, so a valid program can never yield NaN or infinity.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, UnknownIdentifier
from .features import FEATURE_NAMES, FeatureVector

FUNCTIONS = {"min": 2, "max": 2, "exp": 1, "abs": 1, "sqrt": 1, "clip": 3}

_VALUE_CAP = 1e300
_DIV_EPS = 1e-9
_EXP_ARG_CAP = 700.0


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Feature:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Node", ...]


Node = Num | Feature | Neg | BinOp | Call


# ---------------------------------------------------------------------------
# tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/(),]))")


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            rest = source[pos:].lstrip()
            if not rest:
                break
            raise ParseError(f"unexpected character {rest[0]!r}", position=pos,
                             expected=("number", "identifier", "operator"))
        for kind in ("number", "ident", "op"):
            text = m.group(kind)
            if text is not None:
                tokens.append((kind, text, m.start(kind)))
                break
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _next(self):
        tok = self._peek()
        if tok is None:
            raise ParseError("unexpected end of input", position=len(self.source),
                             expected=("expression",))
        self.i += 1
        return tok

    def _expect_op(self, op: str):
        tok = self._peek()
        if tok is None or tok[0] != "op" or tok[1] != op:
            pos = tok[2] if tok else len(self.source)
            raise ParseError(f"expected {op!r}", position=pos, expected=(op,))
        self.i += 1

    def parse(self) -> Node:
        node = self._expr()
        tok = self._peek()
        if tok is not None:
            raise ParseError(f"trailing input {tok[1]!r}", position=tok[2],
                             expected=("end of input",))
        return node

    def _expr(self) -> Node:
        node = self._term()
        while True:
            tok = self._peek()
            if tok and tok[0] == "op" and tok[1] in "+-":
                self.i += 1
                node = BinOp(tok[1], node, self._term())
            else:
                return node

    def _term(self) -> Node:
        node = self._factor()
        while True:
            tok = self._peek()
            if tok and tok[0] == "op" and tok[1] in "*/":
                self.i += 1
                node = BinOp(tok[1], node, self._factor())
            else:
                return node

    def _factor(self) -> Node:
        tok = self._next()
        kind, text, pos = tok
        if kind == "number":
            return Num(float(text))
        if kind == "op" and text == "-":
            return Neg(self._factor())
        if kind == "op" and text == "(":
            node = self._expr()
            self._expect_op(")")
            return node
        if kind == "ident":
            nxt = self._peek()
            if nxt and nxt[0] == "op" and nxt[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifier(text, position=pos)
                self.i += 1
                args = [self._expr()]
                while True:
                    t2 = self._peek()
                    if t2 and t2[0] == "op" and t2[1] == ",":
                        self.i += 1
                        args.append(self._expr())
                    else:
                        break
                self._expect_op(")")
                want = FUNCTIONS[text]
                if len(args) != want:
                    raise ParseError(
                        f"{text}() takes {want} argument(s), got {len(args)}",
                        position=pos, expected=(f"{want} arguments",))
                return Call(text, tuple(args))
            if text not in FEATURE_NAMES:
                raise UnknownIdentifier(text, position=pos)
            return Feature(text)
        raise ParseError(f"unexpected token {text!r}", position=pos,
                         expected=("number", "identifier", "(", "-"))


# ---------------------------------------------------------------------------
# printing / hashing / evaluation
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def pretty_print(node: Node) -> str:
    """Canonical source text; parse(pretty_print(ast)) reproduces the AST."""
    def go(n: Node, parent_prec: int, right_side: bool) -> str:
        if isinstance(n, Num):
            return repr(n.value)
        if isinstance(n, Feature):
            return n.name
        if isinstance(n, Neg):
            inner = go(n.operand, 3, False)
            s = f"-{inner}"
            return f"({s})" if parent_prec > 0 else s
        if isinstance(n, Call):
            args = ", ".join(go(a, 0, False) for a in n.args)
            return f"{n.func}({args})"
        prec = _PREC[n.op]
        left = go(n.left, prec, False)
        # - and / are left-associative: parenthesize an equal-precedence RHS
        right = go(n.right, prec + 1, True)
        s = f"{left} {n.op} {right}"
        if parent_prec > prec or (parent_prec == prec and right_side):
            return f"({s})"
        return s

    return go(node, 0, False)


def structure_hash(node: Node) -> str:
    """Digest of the AST shape, ignoring the values of numeric literals."""
    parts: list[str] = []

    def walk(n: Node):
        if isinstance(n, Num):
            parts.append("#")
        elif isinstance(n, Feature):
            parts.append(n.name)
        elif isinstance(n, Neg):
            parts.append("(neg")
            walk(n.operand)
            parts.append(")")
        elif isinstance(n, BinOp):
            parts.append(f"({n.op}")
            walk(n.left)
            walk(n.right)
            parts.append(")")
        else:
            parts.append(f"({n.func}")
            for a in n.args:
                walk(a)
            parts.append(")")

    walk(node)
    return hashlib.sha256(" ".join(parts).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ScoreProgram:
    source: str
    ast: Node
    structure_hash: str


def parse_program(source: str) -> ScoreProgram:
    ast = _Parser(source).parse()
    return ScoreProgram(source=source, ast=ast, structure_hash=structure_hash(ast))


def program_from_ast(ast: Node) -> ScoreProgram:
    return ScoreProgram(source=pretty_print(ast), ast=ast,
                        structure_hash=structure_hash(ast))


def _clamp_value(v: float) -> float:
    if math.isnan(v):
        return 0.0
    if v > _VALUE_CAP:
        return _VALUE_CAP
    if v < -_VALUE_CAP:
        return -_VALUE_CAP
    return v


def eval_ast(node: Node, env: dict[str, float]) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Feature):
        return env[node.name]
    if isinstance(node, Neg):
        return -eval_ast(node.operand, env)
    if isinstance(node, BinOp):
        a = eval_ast(node.left, env)
        b = eval_ast(node.right, env)
        if node.op == "+":
            return _clamp_value(a + b)
        if node.op == "-":
            return _clamp_value(a - b)
        if node.op == "*":
            return _clamp_value(a * b)
        if abs(b) < _DIV_EPS:
            b = math.copysign(_DIV_EPS, b)
        return _clamp_value(a / b)
    a0 = eval_ast(node.args[0], env)
    if node.func == "exp":
        return _clamp_value(math.exp(min(a0, _EXP_ARG_CAP)))
    if node.func == "abs":
        return abs(a0)
    if node.func == "sqrt":
        return math.sqrt(a0) if a0 > 0 else 0.0
    a1 = eval_ast(node.args[1], env)
    if node.func == "min":
        return min(a0, a1)
    if node.func == "max":
        return max(a0, a1)
    # clip(x, lo, hi)
    a2 = eval_ast(node.args[2], env)
    return max(a1, min(a0, a2))


def eval_program(p: ScoreProgram, fv: FeatureVector) -> float:
    """Evaluate a program on a feature vector; the result is always finite."""
    return eval_ast(p.ast, fv.as_dict())


# ---------------------------------------------------------------------------
# random programs (used by tests and by the mock client's structural edits)
# ---------------------------------------------------------------------------

def random_expr(rng: np.random.Generator, depth: int = 0) -> Node:
    """Random well-formed AST with positive numeric literals."""
    roll = rng.random()
    if depth >= 4 or roll < 0.25:
        if rng.random() < 0.5:
            return Num(round(float(10 ** rng.uniform(-2, 2)), 4))
        return Feature(str(rng.choice(FEATURE_NAMES)))
    if roll < 0.35:
        return Neg(random_expr(rng, depth + 1))
    if roll < 0.75:
        op = str(rng.choice(["+", "-", "*", "/"]))
        return BinOp(op, random_expr(rng, depth + 1), random_expr(rng, depth + 1))
    func = str(rng.choice(list(FUNCTIONS)))
    args = tuple(random_expr(rng, depth + 1) for _ in range(FUNCTIONS[func]))
    return Call(func, args)


def iter_nodes(node: Node):
    yield node
    if isinstance(node, Neg):
        yield from iter_nodes(node.operand)
    elif isinstance(node, BinOp):
        yield from iter_nodes(node.left)
        yield from iter_nodes(node.right)
    elif isinstance(node, Call):
        for a in node.args:
            yield from iter_nodes(a)


def replace_nth_literal(node: Node, index: int, value: float) -> Node:
    """Copy of the AST with its ``index``-th Num (pre-order) replaced."""
    counter = [-1]

    def go(n: Node) -> Node:
        if isinstance(n, Num):
            counter[0] += 1
            return Num(value) if counter[0] == index else n
        if isinstance(n, Feature):
            return n
        if isinstance(n, Neg):
            return Neg(go(n.operand))
        if isinstance(n, BinOp):
            return BinOp(n.op, go(n.left), go(n.right))
        return Call(n.func, tuple(go(a) for a in n.args))

    return go(node)

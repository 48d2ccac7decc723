"""
Tiny expression language for conformal factors φ(x0..x3).

Grammar: numbers, ``x0``..``x3``, ``pi``, ``+ - * / **``, unary minus and the
functions ``sin``, ``cos``, ``exp``.  Text is screened against that vocabulary,
parsed with sympy against a closed namespace and turned into a numpy function
with ``lambdify``.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from cflow.exceptions import ExpressionError

logger = logging.getLogger(__name__)

SYMBOLS   = sympy.symbols("x0 x1 x2 x3", real=True)
VARIABLES = tuple(s.name for s in SYMBOLS)
FUNCTIONS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp}
CONSTANTS = {"pi": sympy.pi}

MAX_LENGTH  = 2000
MAX_NESTING = 32    # parentheses, or a run of signs
MAX_DEPTH   = 64    # of the parsed tree

_LOCALS  = {**{s.name: s for s in SYMBOLS}, **FUNCTIONS, **CONSTANTS}
_GLOBALS = {"Integer": sympy.Integer, "Float": sympy.Float, "Rational": sympy.Rational}

_ALLOWED_CHARS = re.compile(r"^[0-9A-Za-z_.+\-*/()\s]*$")
_NAME          = re.compile(r"(?<![\w.])[A-Za-z_]\w*")
_SIGN_RUN      = re.compile(r"[+\-](?:\s*[+\-])*")


def _screen(text: str) -> None:
    if not _ALLOWED_CHARS.match(text):
        bad = sorted(set(re.sub(r"[0-9A-Za-z_.+\-*/()\s]", "", text)))
        raise ExpressionError(f"unsupported characters {''.join(bad)!r}")

    allowed = set(_LOCALS)
    for name in _NAME.findall(text):
        if name not in allowed:
            raise ExpressionError(f"unknown name '{name}' (allowed: {', '.join(VARIABLES)}, pi, sin, cos, exp)")

    level = 0
    for ch in text:
        level += (ch == "(") - (ch == ")")
        if level > MAX_NESTING:
            raise ExpressionError(f"expression nested deeper than {MAX_NESTING} levels")
    longest_run = max((len(m.group().replace(" ", "")) for m in _SIGN_RUN.finditer(text)), default=0)
    if longest_run > MAX_NESTING:
        raise ExpressionError(f"run of {longest_run} signs exceeds {MAX_NESTING}")


def tree_depth(node: sympy.Basic) -> int:
    """Depth of the sympy tree; atoms count 1."""
    depth, stack = 0, [(node, 1)]
    while stack:
        n, d = stack.pop()
        depth = max(depth, d)
        stack.extend((a, d + 1) for a in n.args)
    return depth


@dataclass(frozen=True)
class Expression:
    text: str
    tree: sympy.Expr
    func: Callable = field(repr=False, compare=False)

    def depth(self) -> int:
        return tree_depth(self.tree)

    def evaluate(self, coords):
        return self.func(*coords)


def parse(text: str) -> Expression:
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression must be a non-empty string")
    if len(text) > MAX_LENGTH:
        raise ExpressionError(f"expression longer than {MAX_LENGTH} characters")
    text = text.strip()
    _screen(text)

    try:
        tree = parse_expr(text, local_dict=dict(_LOCALS), global_dict=dict(_GLOBALS),
                          transformations=standard_transformations)
    except Exception as e:  # SyntaxError, TokenError, RecursionError, TypeError ...
        raise ExpressionError(f"cannot parse expression: {e}") from e

    if not isinstance(tree, sympy.Expr):
        raise ExpressionError(f"expression is not a scalar term: {tree!r}")
    stray = tree.free_symbols - set(SYMBOLS)
    if stray:
        raise ExpressionError(f"unknown symbols {sorted(map(str, stray))}")
    stray = {type(f).__name__ for f in tree.atoms(sympy.Function)} - set(FUNCTIONS)
    if stray:
        raise ExpressionError(f"unsupported functions {sorted(stray)}")
    if tree.has(sympy.I, sympy.zoo, sympy.oo, -sympy.oo, sympy.nan):
        raise ExpressionError(f"expression is not real and finite: {tree}")

    depth = tree_depth(tree)
    if depth > MAX_DEPTH:
        raise ExpressionError(f"expression tree depth {depth} exceeds {MAX_DEPTH}")

    logger.debug(f"parsed φ = {tree} (depth {depth})")
    return Expression(text, tree, sympy.lambdify(SYMBOLS, tree, modules="numpy"))


def evaluate_on_grid(expr: Expression, grid) -> np.ndarray:
    """Evaluate on every node of ``grid``; result has shape ``grid.dims``."""
    coords = [grid.coordinate(i) for i in range(len(SYMBOLS))]
    with np.errstate(all="ignore"):
        out = expr.evaluate(coords)
    return np.broadcast_to(np.asarray(out, dtype=float), grid.dims).copy()

"""Constraint mini-grammar: ``<expr> <op> <const>`` over objectives and variables.

``expr`` may use numbers, the names ``f1..fk`` (objective values) and
variable names, combined with ``+ - * /`` and parentheses.  ``op`` is one of
``>=``, ``<=``, ``≥`` or ``≤``.  Parsed constraints are normalized to the
``c(x, f) <= 0`` convention used by the engine.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .problem import NonlinearConstraint

_OPS = {">=": ast.GtE, "<=": ast.LtE}
_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div)
_ALLOWED_UNARY = (ast.UAdd, ast.USub)


@dataclass(frozen=True)
class ConstraintExpr:
    expr: str  # canonical text of the left-hand side
    op: str  # ">=" or "<="
    const: float
    names: tuple[str, ...]  # identifiers referenced by ``expr``, sorted

    def __str__(self) -> str:
        return f"{self.expr} {self.op} {self.const!r}"

    def compile(
        self, objective_names: Sequence[str], variable_names: Sequence[str]
    ) -> NonlinearConstraint:
        """Build a ``c(x, f) <= 0`` constraint bound to the given name layout."""
        obj_pos = {n: i for i, n in enumerate(objective_names)}
        obj_pos.update({f"f{i + 1}": i for i in range(len(objective_names))})
        var_pos = {n: i for i, n in enumerate(variable_names)}
        slots = []
        for name in self.names:
            if name in obj_pos:
                slots.append((name, "f", obj_pos[name]))
            elif name in var_pos:
                slots.append((name, "x", var_pos[name]))
            else:
                raise ConfigError(f"constraint {self}: unknown name {name!r}")
        code = compile(ast.parse(self.expr, mode="eval"), "<constraint>", "eval")
        sign = -1.0 if self.op == ">=" else 1.0
        const = self.const

        def fn(x: np.ndarray, f: np.ndarray) -> float:
            scope = {
                name: float(f[i] if src == "f" else x[i]) for name, src, i in slots
            }
            try:
                value = eval(code, {"__builtins__": {}}, scope)
            except ZeroDivisionError:
                return math.inf
            return sign * (float(value) - const)

        uses_variables = any(src == "x" for _, src, _ in slots)
        return NonlinearConstraint(fn, label=str(self), uses_variables=uses_variables)


def _check_node(node: ast.AST, text: str) -> None:
    if isinstance(node, ast.BinOp) and isinstance(node.op, _ALLOWED_BINOPS):
        _check_node(node.left, text)
        _check_node(node.right, text)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, _ALLOWED_UNARY):
        _check_node(node.operand, text)
    elif isinstance(node, ast.Name):
        pass
    elif isinstance(node, ast.Constant) and type(node.value) in (int, float):
        pass
    else:
        raise ConfigError(f"unsupported element in constraint {text!r}: {ast.dump(node)}")


def _constant(node: ast.AST, text: str) -> float:
    sign = 1.0
    while isinstance(node, ast.UnaryOp) and isinstance(node.op, _ALLOWED_UNARY):
        if isinstance(node.op, ast.USub):
            sign = -sign
        node = node.operand
    if isinstance(node, ast.Constant) and type(node.value) in (int, float):
        value = sign * float(node.value)
        if math.isfinite(value):
            return value
    raise ConfigError(f"right-hand side of {text!r} must be a finite number")


def parse_constraint(text: str) -> ConstraintExpr:
    """Parse ``"f1 >= 0.6"`` style text; raises ConfigError on anything else."""
    source = text.replace("≥", ">=").replace("≤", "<=").strip()
    try:
        tree = ast.parse(source, mode="eval").body
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse constraint {text!r}: {exc.msg}") from None
    if not (isinstance(tree, ast.Compare) and len(tree.ops) == 1):
        raise ConfigError(f"constraint {text!r} must have the form '<expr> <op> <const>'")
    op = next((sym for sym, cls in _OPS.items() if isinstance(tree.ops[0], cls)), None)
    if op is None:
        raise ConfigError(f"constraint {text!r}: operator must be >= or <=")
    _check_node(tree.left, text)
    const = _constant(tree.comparators[0], text)
    names = sorted({n.id for n in ast.walk(tree.left) if isinstance(n, ast.Name)})
    if not names:
        raise ConfigError(f"constraint {text!r} does not reference any objective or variable")
    return ConstraintExpr(ast.unparse(tree.left), op, const, tuple(names))


def compile_constraints(
    texts: Sequence[str], objective_names: Sequence[str], variable_names: Sequence[str]
) -> list[NonlinearConstraint]:
    return [parse_constraint(t).compile(objective_names, variable_names) for t in texts]

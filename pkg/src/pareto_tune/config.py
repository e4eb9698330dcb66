"""JSON loaders for problem definitions and run configurations.

Problem document::

    {
      "name": "demo",
      "variables": [
        {"name": "x1", "kind": "continuous", "lower": 0, "upper": 1},
        {"name": "depth", "kind": "integer", "lower": 2, "upper": 7},
        {"name": "loss", "kind": "categorical", "levels": ["l1", "l2"]}
      ],
      "objectives": {"external": "mymodule:evaluate", "count": 2, "names": ["err", "size"]},
      "directions": ["min", "min"],
      "linear_constraints": [{"coeffs": [1, 1], "rhs": 6, "op": "<="}],
      "constraints": ["f1 >= 0.6"]
    }

``objectives`` may instead be a builtin tag (``"zdt1"`` or
``{"builtin": "zdt1"}``), in which case ``variables`` may be omitted.
External functions receive the point as a float array and return the
objective values.

Run config document: any ``RunConfig`` field at top level, plus optional
``"ga"`` and ``"gss"`` sections holding the solver-specific fields.
"""
from __future__ import annotations

import dataclasses
import importlib
import json
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError
from .expressions import compile_constraints
from .manager import RunConfig
from .problem import BUILTIN_PROBLEMS, LinearConstraint, ProblemSpec, VariableSpec, builtin_problem

GA_KEYS = ("population_size", "crossover_rate", "mutation_rate", "growth_fraction", "growth_per_iteration")
GSS_KEYS = ("initial_step", "min_step", "alpha", "num_centers")


def _read_json(path: str | Path) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None


def _variable(doc: Mapping) -> VariableSpec:
    if not isinstance(doc, Mapping) or "name" not in doc:
        raise ConfigError(f"variable entry needs a name: {doc!r}")
    kind = doc.get("kind", "continuous")
    if kind == "categorical":
        return VariableSpec.categorical(doc["name"], doc.get("levels", ()))
    return VariableSpec(doc["name"], kind, doc.get("lower"), doc.get("upper"))


def _linear(doc: Mapping) -> LinearConstraint:
    try:
        coeffs = [float(c) for c in doc["coeffs"]]
        rhs = float(doc["rhs"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"linear constraint needs numeric 'coeffs' and 'rhs': {doc!r}") from None
    op = doc.get("op", "<=")
    if op in (">=", "≥"):
        return LinearConstraint(tuple(-c for c in coeffs), -rhs)
    if op not in ("<=", "≤"):
        raise ConfigError(f"linear constraint operator must be <= or >=, got {op!r}")
    return LinearConstraint(tuple(coeffs), rhs)


def _external(target: str):
    module_name, _, attr = target.partition(":")
    if not module_name or not attr:
        raise ConfigError(f"external objective must look like 'module:function', got {target!r}")
    try:
        fn = getattr(importlib.import_module(module_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"cannot load external objective {target!r}: {exc}") from None
    if not callable(fn):
        raise ConfigError(f"external objective {target!r} is not callable")
    return fn


def problem_from_dict(doc: Mapping, extra_constraints=(), directions=None) -> ProblemSpec:
    """Build a ProblemSpec from a parsed problem document."""
    if not isinstance(doc, Mapping):
        raise ConfigError("problem document must be a JSON object")
    obj = doc.get("objectives")
    if isinstance(obj, str):
        obj = {"builtin": obj}
    if not isinstance(obj, Mapping):
        raise ConfigError("problem document needs an 'objectives' entry")

    if "builtin" in obj:
        base = builtin_problem(obj["builtin"])
        variables = tuple(_variable(v) for v in doc["variables"]) if "variables" in doc else base.variables
        if len(variables) != base.dim:
            raise ConfigError(f"builtin {obj['builtin']!r} expects {base.dim} variables")
        problem = dataclasses.replace(base, variables=variables, name=doc.get("name", base.name))
    elif "external" in obj:
        if "variables" not in doc:
            raise ConfigError("external objectives need an explicit 'variables' list")
        count = int(obj.get("count", 1))
        problem = ProblemSpec(
            variables=tuple(_variable(v) for v in doc["variables"]),
            num_objectives=count,
            objective_fn=_external(obj["external"]),
            name=doc.get("name", "problem"),
            objective_names=tuple(obj.get("names", ())),
        )
    else:
        raise ConfigError(f"objectives must name a builtin ({', '.join(BUILTIN_PROBLEMS)}) or an external function")

    linear = [_linear(row) for row in doc.get("linear_constraints", ())]
    texts = list(doc.get("constraints", ())) + list(extra_constraints)
    nonlinear = compile_constraints(texts, problem.objective_names, [v.name for v in problem.variables])
    problem = problem.with_constraints(linear, nonlinear)
    directions = directions or doc.get("directions")
    if directions:
        problem = problem.with_directions(list(directions))
    return problem


def load_problem(path: str | Path, extra_constraints=(), directions=None) -> ProblemSpec:
    return problem_from_dict(_read_json(path), extra_constraints, directions)


def run_config_overrides(doc: Mapping) -> dict:
    """Flatten a run config document into ``RunConfig`` keyword arguments."""
    if not isinstance(doc, Mapping):
        raise ConfigError("run config must be a JSON object")
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    out: dict = {}
    for key, value in doc.items():
        if key in ("ga", "gss"):
            allowed = GA_KEYS if key == "ga" else GSS_KEYS
            if not isinstance(value, Mapping):
                raise ConfigError(f"'{key}' section must be an object")
            for sub, v in value.items():
                if sub not in allowed:
                    raise ConfigError(f"unknown {key} setting {sub!r}")
                out[sub] = v
        elif key in fields:
            out[key] = value
        else:
            raise ConfigError(f"unknown run config key {key!r}")
    return out


def load_run_config(path: str | Path, **overrides) -> RunConfig:
    kwargs = run_config_overrides(_read_json(path))
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None

"""Problem-file schema and loader."""
from __future__ import annotations

import json

import jsonschema

from ..errors import SchemaError

SCHEMA_VERSION = "dualsolver/1"
KINDS = ("algebraic", "pde", "ellipticity", "plasticity_rd", "plasticity_ri")
SYSTEMS = {
    "algebraic": ("circle_line", "linear"),
    "pde": ("transport", "heat", "burgers"),
    "ellipticity": ("scalar_quadratic", "transport", "burgers", "heat", "zero_flux"),
    "plasticity_rd": ("single_slip", "double_slip"),
    "plasticity_ri": ("single_slip", "double_slip"),
}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer", "minimum": 1}
_vec = {"type": "array", "items": _num}
_mat = {"type": "array", "items": _vec}
_weights = {"oneOf": [_num, _vec, {"type": "object", "additionalProperties": _num}]}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


PROBLEM_SCHEMA = _obj({
    "schema": {"const": SCHEMA_VERSION},
    "kind": {"enum": list(KINDS)},
    "name": {"type": "string"},
    "system": _obj({
        "name": {"type": "string"},
        # algebraic
        "alpha": _num, "matrix": _mat, "rhs": _vec,
        # pde / ellipticity
        "c": _num, "kappa": _pos, "mode": _int, "x_min": _num, "x_max": _num,
        # material constants
        "lam": _num, "mu": _num, "h0": _num, "q_lat": _num, "rho0": _pos, "r0": _pos,
        "m_rate": _pos, "slip_angle": _num,
    }, ["name"]),
    "potential": _obj({
        "a": _weights, "b": _weights, "p": {"type": "number", "exclusiveMinimum": 2},
        "base": {"oneOf": [
            _vec,
            {"enum": ["zero", "exact", "initial"]},
            _obj({"shear": _num, "g": _pos}),
        ]},
    }),
    "solver": _obj({
        "tol_inner": _pos, "tol_outer": _pos, "max_iter": _int, "max_inner": _int,
        "continuation_rounds": _int, "z0": _vec,
    }),
    "grid": _obj({"nx": _int, "nt": _int, "x_min": _num, "x_max": _num, "T": _pos,
                  "quad_order": {"enum": [2, 3, 4]}}, ["nx", "nt", "T"]),
    "dual_bc": _obj({
        "pins": _obj({s: {"type": "array", "items": {"type": "integer", "minimum": 0}}
                      for s in ("initial", "final", "left", "right")}),
        "values": {"type": "array", "items": _obj({
            "row": {"type": "integer", "minimum": 0},
            "side": {"enum": ["initial", "final", "left", "right"]},
            "value": _num}, ["row", "side", "value"])},
    }),
    "scan": _obj({"radius": {"type": "number", "minimum": 0}, "samples": _int,
                  "base": _vec, "a": _pos}),
    "points": {"type": "array", "items": {"type": "object",
                                          "additionalProperties": {"oneOf": [_num, _vec, _mat]}}},
    "random_points": _obj({"count": _int, "scale": {"type": "number", "minimum": 0}},
                          ["count", "scale"]),
}, ["schema", "kind", "system"])

_KIND_REQUIRES = {"pde": ("grid",), "ellipticity": ("scan",)}


def _path(error):
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "required":
        missing = error.message.split("'")[1]
        parts.append(missing)
    elif error.validator == "additionalProperties":
        extra = error.message.split("'")[1]
        parts.append(extra)
    return "/".join(parts)


def validate_problem(problem):
    """Raise :class:`SchemaError` naming the first offending key path."""
    validator = jsonschema.Draft7Validator(PROBLEM_SCHEMA)
    errors = sorted(validator.iter_errors(problem), key=lambda e: (len(e.absolute_path), e.message))
    if errors:
        err = errors[0]
        msg = err.message
        if err.validator == "additionalProperties":
            msg = "unknown key"
        elif err.validator == "required":
            msg = "missing required key"
        raise SchemaError(msg, _path(err) or "(root)")
    kind = problem["kind"]
    name = problem["system"]["name"]
    if name not in SYSTEMS[kind]:
        raise SchemaError(f"unknown {kind} system {name!r}; choose from {list(SYSTEMS[kind])}",
                          "system/name")
    if kind == "algebraic" and name == "linear":
        for key in ("matrix", "rhs"):
            if key not in problem["system"]:
                raise SchemaError("missing required key", f"system/{key}")
    for key in _KIND_REQUIRES.get(kind, ()):
        if key not in problem:
            raise SchemaError(f"missing required key for kind {kind}", key)
    return problem


def load_problem(path):
    try:
        with open(path) as fh:
            problem = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read problem file: {exc.strerror}", str(path)) from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno}: {exc.msg}", str(path)) from exc
    if not isinstance(problem, dict):
        raise SchemaError("problem must be a JSON object", "(root)")
    return validate_problem(problem)

"""Run configuration: one JSON document, validated before any computation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, InvalidProblem
from .problem import CATALOG, Problem, ProblemData, Profile, flux_from_spec

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_FLUX = {"oneOf": [
    {"type": "string"},
    {"type": "object", "properties": {"poly": {"type": "array", "items": _NUM, "minItems": 2}},
     "required": ["poly"], "additionalProperties": False},
    {"type": "object", "properties": {"name": {"type": "string"}, "slope": _NUM, "delta": _NUM},
     "required": ["name"], "additionalProperties": False},
]}
_PROFILE = {"oneOf": [
    _NUM,
    {"type": "object", "properties": {
        "kind": {"enum": ["constant", "abs_power", "poly"]},
        "value": _NUM, "scale": _NUM, "center": _NUM,
        "exponent": {"type": ["number", "string"]},
        "coeffs": {"type": "array", "items": _NUM, "minItems": 1},
    }, "required": ["kind"], "additionalProperties": False},
]}
_TEST_FN = {"type": "object", "properties": {
    "kind": {"enum": ["bump", "poly_bump", "indicator_smooth"]},
    "center": _NUM, "width": _POS, "ramp": _POS,
}, "required": ["kind"], "additionalProperties": False}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "problem": {"oneOf": [
            {"enum": sorted(CATALOG)},
            {"type": "object", "properties": {
                "flux": {"type": "object", "properties": {"f": _FLUX, "g": _FLUX},
                         "required": ["f", "g"], "additionalProperties": False},
                "states": {"type": "object", "properties": {"U1": _NUM, "U0": _NUM, "V1": _NUM, "V0": _NUM},
                           "required": ["U1", "U0", "V1", "V0"], "additionalProperties": False},
                "interval": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "v0": _PROFILE,
                "A": _POS,
            }, "required": ["flux", "states", "interval"], "additionalProperties": False},
        ]},
        "eps_list": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                     "minItems": 1},
        "times": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "grid": {"type": "object", "properties": {"x_min": _NUM, "x_max": _NUM,
                                                  "n": {"type": "integer", "minimum": 2}},
                 "required": ["x_min", "x_max", "n"], "additionalProperties": False},
        "tolerances": {"type": "object", "properties": {
            "quad_n": {"type": "integer", "minimum": 200},
            "window": _POS,
            "ode_step": _POS,
        }, "additionalProperties": False},
        "output_dir": {"type": "string", "minLength": 1},
        "options": {"type": "object", "properties": {
            "test_functions": {"type": "array", "items": _TEST_FN, "minItems": 1},
            "residual_eps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                                        "exclusiveMaximum": 1}},
            "exclusion": _POS,
        }, "additionalProperties": False},
    },
    "required": ["problem", "eps_list", "times", "output_dir"],
    "additionalProperties": False,
}

DEFAULT_GRID = {"x_min": -2.0, "x_max": 2.0, "n": 2001}
DEFAULT_TEST_FUNCTIONS = [
    {"kind": "bump", "center": 0.2, "width": 0.5},
    {"kind": "bump", "center": -0.15, "width": 0.4},
    {"kind": "poly_bump", "center": 0.1, "width": 0.6},
]


@dataclass
class RunConfig:
    problem: Problem
    problem_id: str
    eps_list: list
    times: list
    grid: dict
    quad_n: int = 400
    window: float | None = None
    ode_step: float | None = None
    output_dir: Path = Path(".")
    test_functions: list = field(default_factory=lambda: list(DEFAULT_TEST_FUNCTIONS))
    residual_eps: list | None = None
    exclusion: float = 3.0
    raw: dict = field(default_factory=dict)

    @property
    def x_grid(self) -> np.ndarray:
        g = self.grid
        return np.linspace(g["x_min"], g["x_max"], g["n"])


def _line_of(text: str, path) -> int:
    """Best-effort line number of the element at ``path`` in the JSON source."""
    pos = 0
    for key in path:
        if isinstance(key, str):
            hit = text.find(f'"{key}"', pos)
            if hit < 0:
                break
            pos = hit
        else:
            # walk to the n-th element of the array that starts after pos
            start = text.find("[", pos)
            if start < 0:
                break
            depth, count, i = 0, 0, start + 1
            while i < len(text):
                ch = text[i]
                if ch in "[{":
                    depth += 1
                elif ch in "]}":
                    if depth == 0:
                        break
                    depth -= 1
                elif ch == "," and depth == 0:
                    count += 1
                    if count == key:
                        pos = i + 1
                        break
                i += 1
            else:
                break
            if key == 0:
                pos = start + 1
    return text.count("\n", 0, pos) + 1


def _build_problem(spec) -> tuple[Problem, str]:
    if isinstance(spec, str):
        return CATALOG[spec](), spec
    flux = flux_from_spec(spec["flux"]["f"], spec["flux"]["g"])
    s = spec["states"]
    a2, a1 = spec["interval"]
    v0 = Profile.from_spec(spec.get("v0", 1.0))
    data = ProblemData(U1=s["U1"], U0=s["U0"], V1=s["V1"], V0=s["V0"], a2=a2, a1=a1, v0=v0, A=spec.get("A"))
    return Problem(flux, data), "custom"


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{source}:{_line_of(text, e.absolute_path)}: "
                 f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("\n".join(lines))
    eps = [float(e) for e in raw["eps_list"]]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError(f"{source}:{_line_of(text, ['eps_list'])}: eps_list must be strictly decreasing")
    grid = dict(DEFAULT_GRID, **raw.get("grid", {}))
    if grid["x_max"] <= grid["x_min"]:
        raise ConfigError(f"{source}:{_line_of(text, ['grid'])}: grid needs x_min < x_max")
    try:
        problem, pid = _build_problem(raw["problem"])
    except (InvalidProblem, KeyError, ValueError) as exc:
        raise ConfigError(f"{source}:{_line_of(text, ['problem'])}: {exc}") from exc
    horizon = 5.0 * problem.consts.tstar
    if max(raw["times"]) > horizon:
        raise ConfigError(f"{source}:{_line_of(text, ['times'])}: times must not exceed 5 t* = {horizon:g}")
    tol = raw.get("tolerances", {})
    opts = raw.get("options", {})
    return RunConfig(
        problem=problem, problem_id=pid, eps_list=eps, times=[float(t) for t in raw["times"]],
        grid=grid, quad_n=tol.get("quad_n", 400), window=tol.get("window"), ode_step=tol.get("ode_step"),
        output_dir=Path(raw["output_dir"]),
        test_functions=opts.get("test_functions", list(DEFAULT_TEST_FUNCTIONS)),
        residual_eps=opts.get("residual_eps"), exclusion=float(opts.get("exclusion", 3.0)), raw=raw,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    cfg = parse_config(text, str(path))
    if not cfg.output_dir.is_absolute():
        cfg.output_dir = path.parent / cfg.output_dir
    return cfg

"""Run configuration: a JSON document with a fixed schema.

Unknown keys anywhere in the document are errors.  ``--set a.b=value``
overrides are applied after parsing; values are read as JSON when possible and
as plain strings otherwise.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .integrate import IntegratorSpec
from .jet import JetPoint
from .lagrangian import (
    ExpressionLagrangian,
    LagrangianModel,
    QuadraticLagrangian,
    free_particle,
    harmonic,
    pais_uhlenbeck,
)
from .potentials import PotentialModel

__all__ = ["ConfigError", "SCHEMA", "DEFAULTS", "load_config", "apply_overrides", "validate", "RunConfig"]


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the dotted key at fault."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


ANY = object()

SCHEMA: dict[str, Any] = {
    "seed": int,
    "lagrangian": {
        "kind": str,
        "coeffs": list,
        "expr": str,
        "params": dict,
        "dim": int,
    },
    "integrator": {
        "method": str,
        "step": float,
        "relTol": float,
        "absTol": float,
        "maxSteps": int,
        "tspan": list,
        "jetOrder": int,
    },
    "initial": {"derivs": list},
    "potential": {
        "kind": str,
        "G": float,
        "M": float,
        "k": float,
        "variant": str,
        "coefficients": list,
        "phi0": float,
        "kappa": float,
    },
    "table": {"radii": list, "rMin": float, "rMax": float, "count": int},
    "orbit": {"position": list, "velocity": list, "t1": float},
    "action": {"m": int, "component": int, "epsSweep": list, "residualThreshold": float, "samples": int},
    "output": {"dir": str, "prefix": str},
}

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "lagrangian": {"kind": "harmonic", "params": {"omega": 1.0}, "dim": 1},
    "integrator": {
        "method": "dopri45",
        "relTol": 1e-10,
        "absTol": 1e-12,
        "maxSteps": 1_000_000,
        "tspan": [0.0, 6.283185307179586],
    },
    "initial": {"derivs": [1.0, 0.0]},
    "potential": {"kind": "exponential", "G": 1.0, "M": 1.0, "k": 1e-3, "variant": "shifted"},
    "table": {"rMin": 1e-3, "rMax": 1.0, "count": 13},
    "orbit": {"position": [1.0, 0.0], "velocity": [0.0, 1.0], "t1": 62.83185307179586},
    "action": {"component": 0, "residualThreshold": 1e-6, "samples": 2001},
    "output": {"dir": ".", "prefix": "run"},
}


def _check(node: Any, schema: Any, path: str) -> None:
    if isinstance(schema, dict):
        if not isinstance(node, dict):
            raise ConfigError("expected a section (object)", path)
        for key, value in node.items():
            sub = f"{path}.{key}" if path else key
            if key not in schema:
                raise ConfigError(f"unknown key {key!r}", sub)
            _check(value, schema[key], sub)
        return
    if node is None:
        return
    if schema is float:
        if isinstance(node, bool) or not isinstance(node, (int, float)):
            raise ConfigError(f"expected a number, got {node!r}", path)
    elif schema is int:
        if isinstance(node, bool) or not isinstance(node, int):
            raise ConfigError(f"expected an integer, got {node!r}", path)
    elif not isinstance(node, schema):
        raise ConfigError(f"expected {schema.__name__}, got {type(node).__name__}", path)


def validate(doc: dict) -> dict:
    _check(doc, SCHEMA, "")
    return doc


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "params":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides: Iterable[str]) -> dict:
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        path, _, raw = item.partition("=")
        keys = path.strip().split(".")
        node, schema = doc, SCHEMA
        for i, key in enumerate(keys):
            sub = ".".join(keys[: i + 1])
            if not isinstance(schema, dict) or key not in schema:
                if isinstance(schema, type) and schema is dict:
                    node[key] = _parse_value(raw)
                    break
                raise ConfigError(f"unknown key {key!r}", sub)
            if i == len(keys) - 1:
                node[key] = _parse_value(raw)
            else:
                node = node.setdefault(key, {})
                schema = schema[key]
    return validate(doc)


def load_config(path: str | Path | None, overrides: Iterable[str] = ()) -> "RunConfig":
    doc: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from None
    validate(doc)
    doc = apply_overrides(doc, overrides)
    return RunConfig(_merge(DEFAULTS, doc))


class RunConfig:
    """Validated configuration with builders for the runtime objects."""

    def __init__(self, doc: dict):
        self.doc = validate(doc)

    def section(self, name: str) -> dict:
        return self.doc.get(name, {})

    @property
    def seed(self) -> int:
        return int(self.doc.get("seed", 0))

    def lagrangian(self) -> LagrangianModel:
        s = self.section("lagrangian")
        kind = s.get("kind", "harmonic")
        params = dict(s.get("params") or {})
        dim = s.get("dim") or 1
        try:
            if kind == "harmonic":
                return harmonic(float(params.get("omega", 1.0)), dim)
            if kind == "pais_uhlenbeck":
                return pais_uhlenbeck(float(params.get("omega1", 1.0)), float(params.get("omega2", 2.0)), dim)
            if kind == "free":
                return free_particle(float(params.get("mass", 1.0)), dim)
            if kind == "quadratic":
                if "coeffs" not in s:
                    raise ConfigError("quadratic Lagrangian needs coeffs", "lagrangian.coeffs")
                return QuadraticLagrangian(tuple(float(c) for c in s["coeffs"]), dim)
            if kind == "expression":
                if "expr" not in s:
                    raise ConfigError("expression Lagrangian needs expr", "lagrangian.expr")
                return ExpressionLagrangian(s["expr"], params, s.get("dim"))
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), "lagrangian") from None
        raise ConfigError(f"unknown kind {kind!r}", "lagrangian.kind")

    def integrator(self) -> IntegratorSpec:
        s = self.section("integrator")
        try:
            return IntegratorSpec(
                method=s.get("method", "dopri45"),
                step=s.get("step"),
                rel_tol=float(s.get("relTol", 1e-10)),
                abs_tol=float(s.get("absTol", 1e-12)),
                max_steps=int(s.get("maxSteps", 1_000_000)),
            )
        except ValueError as exc:
            raise ConfigError(str(exc), "integrator") from None

    def tspan(self) -> tuple[float, float]:
        ts = self.section("integrator").get("tspan", [0.0, 1.0])
        if len(ts) != 2 or not all(isinstance(v, (int, float)) for v in ts) or not ts[1] > ts[0]:
            raise ConfigError("expected [t0, t1] with t1 > t0", "integrator.tspan")
        return float(ts[0]), float(ts[1])

    def initial_jet(self, dim: int) -> JetPoint:
        derivs = self.section("initial").get("derivs")
        try:
            arr = np.asarray(derivs, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            if arr.shape[1] != dim:
                raise ValueError(f"initial jet has {arr.shape[1]} components, Lagrangian dim is {dim}")
            return JetPoint(self.tspan()[0], arr)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), "initial.derivs") from None

    def potential(self) -> PotentialModel:
        s = self.section("potential")
        try:
            return PotentialModel(
                kind=s.get("kind", "newtonian"),
                G=float(s.get("G", 1.0)),
                M=float(s.get("M", 1.0)),
                k=float(s.get("k", 1.0)),
                variant=s.get("variant", "shifted"),
                coefficients=tuple(s.get("coefficients") or ()),
                phi0=s.get("phi0"),
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), "potential") from None

    def radii(self) -> np.ndarray:
        s = self.section("table")
        if s.get("radii"):
            r = np.asarray(s["radii"], dtype=float)
        else:
            lo, hi, n = s.get("rMin"), s.get("rMax"), s.get("count")
            if lo is None or hi is None or not n:
                raise ConfigError("need radii or rMin/rMax/count", "table")
            if not (0 < lo < hi):
                raise ConfigError("need 0 < rMin < rMax", "table")
            r = np.geomspace(lo, hi, int(n))
        if np.any(r <= 0):
            raise ConfigError("radii must be positive", "table.radii")
        return r

    def output(self) -> tuple[Path, str]:
        s = self.section("output")
        return Path(s.get("dir", ".")), s.get("prefix", "run")

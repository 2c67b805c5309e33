"""Experiment configuration: JSON schema, defaults, dotted overrides, object builders."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .energy import Circle, Energy, Entropy, Perturbation, PowerP, ProxConfig, Quadratic, QuadraticForm
from .errors import ConfigError
from .flow import FlowProblem
from .partition import Partition, make_partition, uniform_partition

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 1}]}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": ["solve", "convergence", "adaptive", "properties"]},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "T": _POS,
        "u0": _VEC,
        "energy": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["quadratic", "quadratic_form", "power", "entropy", "circle"]},
                "lam": {"type": "number", "minimum": 0},
                "p": {"type": "number", "exclusiveMinimum": 1},
                "A": {"type": "array", "items": {"type": "array", "items": _NUM}},
            },
        },
        "perturbation": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "coef"],
                    "properties": {"kind": {"enum": ["linear", "sine"]}, "coef": _NUM},
                },
            ]
        },
        "forcing": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["zero", "constant", "polynomial"]},
                "value": _VEC,
                "coeffs": {"type": "array", "items": _VEC, "minItems": 1},
            },
        },
        "partition": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["uniform", "nodes", "ladder"]},
                "N": {"type": "integer", "minimum": 1},
                "nodes": {"type": "array", "items": _NUM, "minItems": 2},
                "base": _POS,
                "k_min": {"type": "integer", "minimum": 0},
                "k_max": {"type": "integer", "minimum": 0},
            },
        },
        "reference": {"enum": ["auto", "none", "mittag_leffler", "eigen"]},
        "epsilon": _POS,
        "adaptive": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tau_init": {"oneOf": [{"type": "null"}, _POS]},
                "tau_min": _POS,
                "tau_max": {"oneOf": [{"type": "null"}, _POS]},
                "growth": {"type": "number", "exclusiveMinimum": 1},
                "shrink": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "slack": {"type": "number", "minimum": 0, "maximum": 1},
                "max_steps": {"type": "integer", "minimum": 1},
            },
        },
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "m": {"type": "integer", "minimum": 2},
                "q": {"type": "integer", "minimum": 1},
                "samples": {"type": "integer", "minimum": 1},
            },
        },
        "prox": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tol": {"oneOf": [{"type": "null"}, _POS]}, "max_iter": {"type": "integer", "minimum": 1}},
        },
        "properties": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "partitions": {"type": "integer", "minimum": 1},
                "alphas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "max_N": {"type": "integer", "minimum": 2},
                "unity_samples": {"type": "integer", "minimum": 1},
                "corrupt": {"type": "boolean"},
            },
        },
        "seed": {"type": "integer"},
        "output": {"oneOf": [{"type": "null"}, {"type": "string"}]},
        "jobs": {"type": "integer", "minimum": 1},
    },
}

DEFAULTS: dict[str, Any] = {
    "command": "solve",
    "alpha": 0.5,
    "T": 1.0,
    "u0": 1.0,
    "energy": {"kind": "quadratic", "lam": 1.0},
    "perturbation": None,
    "forcing": {"kind": "zero"},
    "partition": {"kind": "uniform", "N": 20},
    "reference": "auto",
    "epsilon": 1e-4,
    "adaptive": {
        "tau_init": None,
        "tau_min": 1e-12,
        "tau_max": None,
        "growth": 2.0,
        "shrink": 0.5,
        "slack": 0.25,
        "max_steps": 1_000_000,
    },
    "sampling": {"m": 8, "q": 4, "samples": 4},
    "prox": {"tol": None, "max_iter": 100},
    "properties": {
        "partitions": 100,
        "alphas": [0.1, 0.3, 0.5, 0.7, 0.9],
        "max_N": 64,
        "unity_samples": 100,
        "corrupt": False,
    },
    "seed": 0,
    "output": None,
    "jobs": 1,
}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(text: str) -> tuple[list[str], Any]:
    """``a.b=value``; the value is read as JSON when possible, else kept as a string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    if not key:
        raise ConfigError(f"empty key in override {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def apply_override(cfg: dict, path: list[str], value: Any) -> dict:
    cfg = copy.deepcopy(cfg)
    node = cfg
    for k in path[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[path[-1]] = value
    return cfg


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    alpha: float
    T: float
    u0: Any
    energy: dict
    perturbation: dict | None
    forcing: dict
    partition: dict
    reference: str
    epsilon: float
    adaptive: dict
    sampling: dict
    prox: dict
    properties: dict
    seed: int
    output: str | None
    jobs: int
    raw: dict = field(repr=False, compare=False, default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict, overrides: list[str] = ()) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        cfg = _merge(DEFAULTS, data)
        for text in overrides:
            cfg = apply_override(cfg, *parse_override(text))
        try:
            jsonschema.validate(cfg, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid configuration at {where}: {exc.message}") from exc
        full = cfg
        inst = cls(**{k: full[k] for k in DEFAULTS}, raw=full)
        inst._check()
        return inst

    @classmethod
    def load(cls, path: str | Path | None, overrides: list[str] = ()) -> "ExperimentConfig":
        data: dict = {}
        if path is not None:
            try:
                data = json.loads(Path(path).read_text())
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data, overrides)

    def _check(self):
        e = self.energy
        if e["kind"] == "quadratic_form":
            if "A" not in e:
                raise ConfigError("energy.A is required for quadratic_form")
            A = np.asarray(e["A"], dtype=float)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise ConfigError("energy.A must be a square matrix")
            if len(self.u0_vector()) not in (1, A.shape[0]):
                raise ConfigError("u0 length must match energy.A")
        if e["kind"] == "power" and "p" not in e:
            raise ConfigError("energy.p is required for power")
        p = self.partition
        need = {"uniform": ["N"], "nodes": ["nodes"], "ladder": ["base", "k_min", "k_max"]}[p["kind"]]
        for k in need:
            if k not in p:
                raise ConfigError(f"partition.{k} is required for kind {p['kind']}")
        if p["kind"] == "ladder":
            if p["k_max"] < p["k_min"]:
                raise ConfigError("partition.k_max must be >= k_min")
            if self.command == "convergence" and p["k_max"] - p["k_min"] < 2:
                raise ConfigError("a convergence ladder needs at least three levels")
        elif self.command == "convergence":
            raise ConfigError("the convergence command needs a ladder partition")
        f = self.forcing
        if f["kind"] == "constant" and "value" not in f:
            raise ConfigError("forcing.value is required for constant forcing")
        if f["kind"] == "polynomial" and "coeffs" not in f:
            raise ConfigError("forcing.coeffs is required for polynomial forcing")
        if any(not (0 < a < 1) for a in self.properties["alphas"]):
            raise ConfigError("properties.alphas must lie in (0, 1)")

    # builders ---------------------------------------------------------
    def u0_vector(self) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.u0, dtype=float))

    def build_energy(self) -> Energy:
        e = self.energy
        lam = float(e.get("lam", 1.0))
        kind = e["kind"]
        if kind == "quadratic":
            return Quadratic(lam)
        if kind == "quadratic_form":
            try:
                return QuadraticForm(np.asarray(e["A"], dtype=float))
            except ValueError as exc:
                raise ConfigError(f"energy.A: {exc}") from exc
        if kind == "power":
            return PowerP(lam, float(e["p"]))
        if kind == "entropy":
            return Entropy(lam)
        return Circle(lam)

    def dim(self) -> int:
        if self.energy["kind"] == "quadratic_form":
            return len(self.energy["A"])
        return len(self.u0_vector())

    def build_u0(self) -> np.ndarray:
        u0 = self.u0_vector()
        d = self.dim()
        return np.full(d, u0[0]) if len(u0) == 1 and d > 1 else u0

    def build_forcing(self):
        f = self.forcing
        d = self.dim()
        if f["kind"] == "zero":
            return None
        if f["kind"] == "constant":
            val = np.broadcast_to(np.atleast_1d(np.asarray(f["value"], dtype=float)), (d,)).copy()
            return lambda t: val
        coeffs = [np.broadcast_to(np.atleast_1d(np.asarray(c, dtype=float)), (d,)).copy() for c in f["coeffs"]]

        def poly(t):
            out = np.zeros(d)
            for c in reversed(coeffs):
                out = out * t + c
            return out

        return poly

    def build_perturbation(self) -> Perturbation | None:
        p = self.perturbation
        if p is None:
            return None
        k = float(p["coef"])
        if p["kind"] == "linear":
            return Perturbation(lambda t, w: k * w, abs(k))
        return Perturbation(lambda t, w: k * np.sin(w), abs(k))

    def build_problem(self) -> FlowProblem:
        try:
            return FlowProblem(
                self.alpha,
                self.build_energy(),
                self.build_u0(),
                forcing=self.build_forcing(),
                perturbation=self.build_perturbation(),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_prox(self) -> ProxConfig:
        return ProxConfig(tol=self.prox["tol"], max_iter=self.prox["max_iter"])

    def ladder(self) -> list[tuple[float, int]]:
        """``(tau_k, N_k)`` with ``tau_k = base 2^{-k}``."""
        p = self.partition
        out = []
        for k in range(p["k_min"], p["k_max"] + 1):
            tau = p["base"] * 2.0**-k
            N = int(round(self.T / tau))
            if N < 1 or not math.isclose(N * tau, self.T, rel_tol=1e-9):
                raise ConfigError(f"ladder step {tau:g} does not divide T = {self.T:g}")
            out.append((tau, N))
        return out

    def build_partition(self) -> Partition:
        p = self.partition
        try:
            if p["kind"] == "uniform":
                return uniform_partition(self.T, p["N"])
            if p["kind"] == "nodes":
                P = make_partition(p["nodes"])
                if not math.isclose(P.T, self.T):
                    raise ConfigError(f"last node {P.T:g} differs from T = {self.T:g}")
                return P
        except ValueError as exc:
            raise ConfigError(f"partition: {exc}") from exc
        tau, N = self.ladder()[-1]
        return uniform_partition(self.T, N)

    def build_adaptive(self):
        from .adaptive import AdaptiveConfig

        return AdaptiveConfig(epsilon=self.epsilon, **self.adaptive)

"""Model files: JSON documents with ``"schema": 1``.

A model holds exactly one game source:

* ``game``: an explicit durational stochastic game,
* ``benchmark``: a built-in benchmark name with optional ``params``,
* ``abstraction``: a sampled abstraction of a built-in linear oracle.

plus an optional ``spec`` (MITL text), an optional explicit ``tba`` and
optional ``synthesis`` defaults. Structural errors are reported with the
JSON path of the offending value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import jsonschema
import numpy as np

from .bench import BENCHMARKS, benchmark_game, benchmark_spec
from .dsg import (AbstractionRequest, DurationalStochasticGame, DynamicsOracle, InputSet, LabelAtom, Partition,
                  build_abstraction, comparison_atoms, game_from_dict, game_to_dict, validate)
from .errors import SchemaError, ValidationError
from .mitl import atoms as formula_atoms
from .mitl import parse_mitl
from .tba import TimedBuchiAutomaton, tba_from_dict

SCHEMA_VERSION = 1

_NUM = {"type": "number"}
_NUMS = {"type": "array", "items": _NUM, "minItems": 1}
_MATRIX = {"type": "array", "items": _NUMS, "minItems": 1}
_PROB = {"oneOf": [{"type": "number", "minimum": 0}, {"type": "string", "pattern": r"^\s*\d+(\s*/\s*\d+)?\s*$"}]}
_INPUT = {
    "type": "object",
    "required": ["name", "lo"],
    "properties": {"name": {"type": "string"}, "lo": _NUMS, "hi": _NUMS},
    "additionalProperties": False,
}

GAME_SCHEMA = {
    "type": "object",
    "required": ["states", "initial", "durations", "transitions"],
    "properties": {
        "states": {"type": "array", "minItems": 1, "items": {
            "type": "object",
            "required": ["name", "defender_actions", "adversary_actions"],
            "properties": {
                "name": {"type": "string"},
                "labels": {"type": "array", "items": {"type": "string"}},
                "defender_actions": {"type": "array", "items": {"type": "string"}},
                "adversary_actions": {"type": "array", "items": {"type": "string"}},
                "passive": {"type": "string"},
            },
            "additionalProperties": False,
        }},
        "initial": {"type": "string"},
        "propositions": {"type": "array", "items": {"type": "string"}},
        "durations": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "clocks": {"oneOf": [{"type": "null"}, {"type": "array", "items": {"type": "string"}}]},
        "exact": {"type": "boolean"},
        "transitions": {"type": "array", "items": {
            "type": "object",
            "required": ["from", "uc", "ua", "to", "p"],
            "properties": {
                "from": {"type": "string"}, "uc": {"type": "string"}, "ua": {"type": "string"},
                "to": {"type": "string"}, "p": _PROB,
                "durations": {"type": "object", "additionalProperties": _PROB},
            },
            "additionalProperties": False,
        }},
    },
    "additionalProperties": False,
}

ABSTRACTION_SCHEMA = {
    "type": "object",
    "required": ["oracle", "box", "cells", "defender_inputs", "adversary_inputs", "initial"],
    "properties": {
        "oracle": {"enum": ["linear"]},
        "axes": {"type": "array", "items": {"type": "string"}},
        "A": _MATRIX,
        "B_control": _MATRIX,
        "B_adversary": _MATRIX,
        "noise_cov": {"oneOf": [_NUM, _MATRIX]},
        "box": {"type": "object", "required": ["lo", "hi"], "properties": {"lo": _NUMS, "hi": _NUMS},
                "additionalProperties": False},
        "cells": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "defender_inputs": {"type": "array", "items": _INPUT, "minItems": 1},
        "adversary_inputs": {"type": "array", "items": _INPUT, "minItems": 1},
        "passive": {"type": "string"},
        "samples_per_cell": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "initial": _NUMS,
        "overflow": {"enum": ["sink", "saturate", "error"]},
        "atoms": {"type": "array", "items": {
            "type": "object",
            "required": ["name", "axis", "op", "value"],
            "properties": {"name": {"type": "string"}, "axis": {"type": "string"},
                           "op": {"enum": ["<=", "<", ">=", ">"]}, "value": _NUM},
            "additionalProperties": False,
        }},
    },
    "additionalProperties": False,
}

TBA_SCHEMA = {
    "type": "object",
    "required": ["states", "initial", "accepting", "edges"],
    "properties": {
        "states": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "initial": {"type": "string"},
        "clocks": {"type": "array", "items": {"type": "string"}},
        "accepting": {"type": "array", "items": {"type": "string"}},
        "edges": {"type": "array", "items": {
            "type": "object",
            "required": ["src", "dst"],
            "properties": {"src": {"type": "string"}, "dst": {"type": "string"}, "letter": {"type": "string"},
                           "resets": {"type": "array", "items": {"type": "string"}}, "guard": {"type": "string"}},
            "additionalProperties": False,
        }},
    },
    "additionalProperties": False,
}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["schema"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "spec": {"type": "string"},
        "game": GAME_SCHEMA,
        "benchmark": {"enum": list(BENCHMARKS)},
        "params": {"type": "object"},
        "abstraction": ABSTRACTION_SCHEMA,
        "tba": TBA_SCHEMA,
        "synthesis": {
            "type": "object",
            "properties": {
                "kappa_max": {"type": "integer", "minimum": 0},
                "fsc_size": {"oneOf": [{"type": "null"}, {"type": "integer", "minimum": 1}]},
                "detect_threshold": {"oneOf": [{"type": "null"}, {"type": "integer", "minimum": 0}]},
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "targets": {"enum": ["gamec", "acc"]},
            },
            "additionalProperties": False,
        },
    },
    "oneOf": [{"required": ["game"]}, {"required": ["benchmark"]}, {"required": ["abstraction"]}],
    "additionalProperties": False,
}


def _path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def check_schema(doc) -> None:
    """Raise SchemaError at the deepest failing path."""
    validator = jsonschema.Draft202012Validator(MODEL_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (-len(e.absolute_path), str(list(e.absolute_path))))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        if err.validator == "oneOf" and not err.absolute_path:
            raise SchemaError("$", "exactly one of 'game', 'benchmark' or 'abstraction' is required")
        raise SchemaError(_path(err.absolute_path), err.message)


@dataclass
class SynthesisDefaults:
    kappa_max: int = 2
    fsc_size: Optional[int] = None
    detect_threshold: Optional[int] = 2
    eps: float = 1e-6
    targets: str = "gamec"


@dataclass
class Model:
    doc: dict
    spec_text: Optional[str] = None
    synthesis: SynthesisDefaults = field(default_factory=SynthesisDefaults)

    @property
    def name(self) -> str:
        return self.doc.get("name", self.doc.get("benchmark", "model"))

    def game(self, threads: int = 1, seed: Optional[int] = None) -> DurationalStochasticGame:
        """Build (or load) the game; ``seed`` overrides any sampling seed in the model."""
        d = self.doc
        if "game" in d:
            try:
                g = game_from_dict(d["game"])
            except ValidationError as exc:
                raise SchemaError("$.game", str(exc)) from None
        elif "benchmark" in d:
            params = dict(d.get("params", {}))
            if seed is not None:
                params["seed"] = seed
            g = benchmark_game(d["benchmark"], params, threads)
        else:
            g = linear_abstraction(d["abstraction"], self.spec_text, threads, seed)
        problems = validate(g)
        if problems:
            raise ValidationError("invalid game: " + "; ".join(str(v) for v in problems[:10]))
        return g

    def automaton(self, g: DurationalStochasticGame) -> Optional[TimedBuchiAutomaton]:
        if "tba" not in self.doc:
            return None
        return tba_from_dict(self.doc["tba"], g.props)


def parse_model(doc) -> Model:
    check_schema(doc)
    spec = doc.get("spec")
    if spec is None and "benchmark" in doc:
        spec = benchmark_spec(doc["benchmark"], doc.get("params"))
    syn = SynthesisDefaults(**doc.get("synthesis", {}))
    return Model(doc, spec, syn)


def load_model(path: str) -> Model:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc.msg} at line {exc.lineno}, column {exc.colno}") from None
    except OSError as exc:
        raise ValidationError(f"cannot read model file {path!r}: {exc.strerror}") from None
    return parse_model(doc)


def benchmark_model(name: str) -> Model:
    return parse_model({"schema": SCHEMA_VERSION, "benchmark": name})


def game_model(g: DurationalStochasticGame, spec: Optional[str] = None, name: Optional[str] = None) -> dict:
    """Model document holding an explicit game (what ``abstract`` writes)."""
    doc = {"schema": SCHEMA_VERSION, "game": game_to_dict(g)}
    if name:
        doc["name"] = name
    if spec:
        doc["spec"] = spec
    return doc


# ------------------------------------------------------------ linear oracle

class LinearOracle(DynamicsOracle):
    """x' = A x + B_c u_C + B_a u_A + w with Gaussian w; durations are one tick."""

    def __init__(self, A, Bc, Ba, cov):
        self.A = np.asarray(A, dtype=float)
        self.state_dim = self.A.shape[0]
        self.Bc = np.asarray(Bc, dtype=float)
        self.Ba = np.asarray(Ba, dtype=float)
        cov = np.asarray(cov, dtype=float)
        self.cov = cov * np.eye(self.state_dim) if cov.ndim == 0 else cov

    def step(self, x, uc, ua, w):
        return x @ self.A.T + uc @ self.Bc.T + ua @ self.Ba.T + w, np.ones(len(x))

    def sample_noise(self, rng, n):
        if not np.any(self.cov):
            return np.zeros((n, self.state_dim))
        return rng.multivariate_normal(np.zeros(self.state_dim), self.cov, size=n, method="cholesky")


def linear_abstraction(a: dict, spec_text: Optional[str], threads: int = 1, seed: Optional[int] = None) -> DurationalStochasticGame:
    lo, hi = a["box"]["lo"], a["box"]["hi"]
    dim = len(lo)
    cells = a["cells"]
    if len(hi) != dim or len(cells) != dim or len(a["initial"]) != dim:
        raise SchemaError("$.abstraction", "box, cells and initial must have one entry per axis")
    axes = a.get("axes", [f"x{i + 1}" for i in range(dim)])
    if len(axes) != dim:
        raise SchemaError("$.abstraction.axes", "one name per axis")
    A = a.get("A", np.eye(dim).tolist())
    d_in = [InputSet(u["name"], tuple(u["lo"]), tuple(u.get("hi", u["lo"]))) for u in a["defender_inputs"]]
    a_in = [InputSet(u["name"], tuple(u["lo"]), tuple(u.get("hi", u["lo"]))) for u in a["adversary_inputs"]]
    Bc = a.get("B_control", np.eye(dim, len(d_in[0].lo)).tolist())
    Ba = a.get("B_adversary", np.zeros((dim, len(a_in[0].lo))).tolist())
    try:
        oracle = LinearOracle(A, Bc, Ba, a.get("noise_cov", 0.0))
        if oracle.A.shape != (dim, dim) or oracle.Bc.shape[0] != dim or oracle.Ba.shape[0] != dim:
            raise ValueError("matrix shapes do not match the state dimension")
    except ValueError as exc:
        raise SchemaError("$.abstraction", str(exc)) from None
    atoms: list = [LabelAtom(x["name"], axes.index(x["axis"]), x["op"], float(x["value"]))
                   for x in a.get("atoms", []) if x["axis"] in axes]
    if spec_text:
        known = {x.name for x in atoms}
        atoms += [x for x in comparison_atoms(formula_atoms(parse_mitl(spec_text)), axes) if x.name not in known]
    names = [u.name for u in a_in]
    passive = names.index(a["passive"]) if "passive" in a else 0
    req = AbstractionRequest(oracle, Partition.uniform(lo, hi, cells), d_in, a_in, a.get("samples_per_cell", 100),
                             a.get("seed", 0) if seed is None else seed, a["initial"], atoms,
                             a.get("overflow", "sink"), passive, threads)
    return build_abstraction(req)

"""Durational stochastic games and the Monte-Carlo abstraction builder.

A game stores, for every state ``s``, a transition tensor ``trans[s]`` of
shape (|U_C(s)|, |U_A(s)|, |S|) and a duration tensor ``dur[s]`` of shape
(|U_C(s)|, |U_A(s)|, |S|, |Δ|). Entries are floats, or ``Fraction`` objects
in an object array when the game is exact.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DurationGridError, EmptyCellSample, OracleRange, ValidationError

TOL = 1e-9
EDGE_TOL = 1e-12
OVERFLOW = "__overflow"


@dataclass
class DurationalStochasticGame:
    states: list[str]
    initial: int
    defender_actions: list[list[str]]
    adversary_actions: list[list[str]]
    trans: list[np.ndarray]
    durations: tuple[int, ...]
    dur: list[np.ndarray]
    props: frozenset[str]
    labels: list[frozenset[str]]
    clocks: Optional[tuple[str, ...]] = None
    passive: Optional[list[int]] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.passive is None:
            self.passive = [0] * len(self.states)

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def exact(self) -> bool:
        return any(t.dtype == object for t in self.trans)

    def expected_duration(self, s: int, c: int, a: int, s2: int) -> float:
        row = np.asarray(self.dur[s][c, a, s2], dtype=float)
        return float(row @ np.asarray(self.durations, dtype=float))


@dataclass(frozen=True)
class Violation:
    kind: str
    where: tuple
    detail: str = ""

    def __str__(self) -> str:
        loc = ", ".join(str(x) for x in self.where)
        return f"{self.kind}({loc}){': ' + self.detail if self.detail else ''}"


def _sum_ok(total, exact: bool) -> bool:
    return total == 1 if exact else abs(float(total) - 1.0) <= TOL


def validate(g: DurationalStochasticGame) -> list[Violation]:
    """Every violated structural invariant; an empty list means the game is valid."""
    out: list[Violation] = []
    n = g.n
    if not 0 <= g.initial < n:
        out.append(Violation("BadInitial", (g.initial,)))
    if not g.durations:
        out.append(Violation("EmptyDurationSet", ()))
    for d in g.durations:
        if not (isinstance(d, (int, np.integer)) and d > 0):
            out.append(Violation("NonPositiveDuration", (d,)))
    if len(g.labels) != n:
        out.append(Violation("LabelCount", (len(g.labels), n)))
    for s in range(n):
        if s < len(g.labels) and not g.labels[s] <= g.props:
            out.append(Violation("UnknownLabel", (g.states[s],), ",".join(sorted(g.labels[s] - g.props))))
        C, A = len(g.defender_actions[s]), len(g.adversary_actions[s])
        if C == 0:
            out.append(Violation("EmptyActionSet", (g.states[s], "defender")))
        if A == 0:
            out.append(Violation("EmptyActionSet", (g.states[s], "adversary")))
        T, D = g.trans[s], g.dur[s]
        if T.shape != (C, A, n):
            out.append(Violation("ShapeMismatch", (g.states[s], "trans"), f"{T.shape} != {(C, A, n)}"))
            continue
        if D.shape != (C, A, n, len(g.durations)):
            out.append(Violation("ShapeMismatch", (g.states[s], "dur"), f"{D.shape}"))
            continue
        exact = T.dtype == object
        for c in range(C):
            for a in range(A):
                row = T[c, a]
                if any(x < 0 for x in row):
                    out.append(Violation("NegativeProbability", (g.states[s], g.defender_actions[s][c], g.adversary_actions[s][a])))
                total = sum(row, Fraction(0)) if exact else float(row.sum())
                if not _sum_ok(total, exact):
                    out.append(Violation("StochasticityViolation", (g.states[s], g.defender_actions[s][c], g.adversary_actions[s][a]), f"sum={float(total):.12g}"))
                for s2 in range(n):
                    if row[s2] > 0:
                        drow = D[c, a, s2]
                        dt = sum(drow, Fraction(0)) if exact else float(drow.sum())
                        if any(x < 0 for x in drow) or not _sum_ok(dt, exact):
                            out.append(Violation("DurationStochasticityViolation",
                                                 (g.states[s], g.defender_actions[s][c], g.adversary_actions[s][a], g.states[s2]),
                                                 f"sum={float(dt):.12g}"))
    return out


# ------------------------------------------------------------ partitioning

@dataclass
class Partition:
    """Axis-aligned grid. ``cuts[l]`` are the interior cut points on axis l.

    Cell boundaries belong to the lower-index cell: bins are
    [lo, c1], (c1, c2], ..., (c_k, hi].
    """

    lo: np.ndarray
    hi: np.ndarray
    cuts: list[np.ndarray]

    @classmethod
    def uniform(cls, lo: Sequence[float], hi: Sequence[float], counts: Sequence[int]) -> "Partition":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        cuts = [np.linspace(a, b, k + 1)[1:-1] for a, b, k in zip(lo, hi, counts)]
        return cls(lo, hi, cuts)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(c) + 1 for c in self.cuts)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def edges(self, axis: int) -> np.ndarray:
        return np.concatenate([[self.lo[axis]], self.cuts[axis], [self.hi[axis]]])

    def bounds(self, cell: int) -> tuple[np.ndarray, np.ndarray]:
        idx = np.unravel_index(cell, self.shape)
        lo = np.array([self.edges(l)[i] for l, i in enumerate(idx)])
        hi = np.array([self.edges(l)[i + 1] for l, i in enumerate(idx)])
        return lo, hi

    def locate(self, pts: np.ndarray) -> np.ndarray:
        """Cell index per point, -1 outside the box."""
        pts = np.atleast_2d(pts)
        inside = np.all((pts >= self.lo) & (pts <= self.hi), axis=1)
        idx = [np.searchsorted(self.cuts[l], pts[:, l], side="left") for l in range(len(self.cuts))]
        cells = np.ravel_multi_index(tuple(idx), self.shape) if idx else np.zeros(len(pts), dtype=np.int64)
        return np.where(inside, cells, -1)

    def cell_name(self, cell: int) -> str:
        return "cell_" + "_".join(str(i) for i in np.unravel_index(cell, self.shape))


@dataclass(frozen=True)
class LabelAtom:
    """Comparison atom ``x[axis] op threshold`` on partition coordinates."""

    name: str
    axis: int
    op: str
    threshold: float

    def holds_on(self, lo: float, hi: float, closed_lo: bool) -> bool:
        """Universal semantics over the cell (lo, hi] (or [lo, hi] for the first bin).

        Grid edges come from floating-point arithmetic, so equality with the
        threshold is tested with a small slack.
        """
        t = self.threshold
        if self.op == "<=":
            return hi <= t + EDGE_TOL
        if self.op == "<":
            return hi < t - EDGE_TOL
        if self.op == ">=":
            return lo >= t - EDGE_TOL
        if self.op == ">":
            return lo > t + EDGE_TOL if closed_lo else lo >= t - EDGE_TOL
        raise ValidationError(f"bad comparison {self.op!r}")


@dataclass(frozen=True)
class BandAtom:
    """Conjunction of per-axis bands ``lo_l <= x_l <= hi_l`` under universal semantics."""

    name: str
    bands: tuple[tuple[int, float, float], ...]

    def holds_cell(self, lo: np.ndarray, hi: np.ndarray, first: tuple[bool, ...]) -> bool:
        for axis, a, b in self.bands:
            if not (lo[axis] >= a - EDGE_TOL and hi[axis] <= b + EDGE_TOL):
                return False
        return True


_CMP_ATOM = re.compile(r"^(?P<var>[A-Za-z_][A-Za-z0-9_]*?)_(?P<op>le|ge|lt|gt)_(?P<num>m?[0-9]+(?:p[0-9]+)?(?:d[0-9]+)?)$")
_OPS = {"le": "<=", "ge": ">=", "lt": "<", "gt": ">"}


def comparison_atoms(names: Sequence[str], axes: Sequence[str]) -> list[LabelAtom]:
    """LabelAtoms for canonical comparison names such as ``x2_le_10`` over named axes.

    Names that do not parse, or whose variable is not an axis, are skipped.
    """
    out = []
    for name in sorted(names):
        m = _CMP_ATOM.match(name)
        if m is None or m["var"] not in axes:
            continue
        num = m["num"].replace("m", "-").replace("p", ".")
        value = float(Fraction(num.replace("d", "/"))) if "d" in num else float(num)
        out.append(LabelAtom(name, list(axes).index(m["var"]), _OPS[m["op"]], value))
    return out


def cell_labels(partition: Partition, atoms: Sequence) -> list[frozenset[str]]:
    out = []
    for cell in range(partition.n_cells):
        lo, hi = partition.bounds(cell)
        idx = np.unravel_index(cell, partition.shape)
        first = tuple(i == 0 for i in idx)
        lab = set()
        for at in atoms:
            if isinstance(at, LabelAtom):
                if at.holds_on(lo[at.axis], hi[at.axis], first[at.axis]):
                    lab.add(at.name)
            elif at.holds_cell(lo, hi, first):
                lab.add(at.name)
        out.append(frozenset(lab))
    return out


# ------------------------------------------------------------- abstraction

class DynamicsOracle:
    """Black-box sampled dynamics ``x' = f(x, u_C, u_A, w)`` with a duration.

    Subclasses implement ``step`` on batches. ``project`` maps full states to
    partition coordinates, and ``sample_state`` draws full states whose
    projection is uniform in a cell.
    """

    state_dim: int = 1

    def step(self, x: np.ndarray, uc: np.ndarray, ua: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def sample_noise(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.zeros((n, self.state_dim))

    def sample_state(self, rng: np.random.Generator, lo: np.ndarray, hi: np.ndarray, n: int) -> np.ndarray:
        return rng.uniform(lo, hi, size=(n, len(lo)))

    def project(self, x: np.ndarray) -> np.ndarray:
        return x


@dataclass(frozen=True)
class InputSet:
    """Named input box sampled uniformly; ``lo == hi`` gives a point input."""

    name: str
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if np.all(lo == hi):
            return np.tile(lo, (n, 1))
        return rng.uniform(lo, hi, size=(n, len(lo)))


@dataclass
class AbstractionRequest:
    oracle: DynamicsOracle
    partition: Partition
    defender_inputs: list[InputSet]
    adversary_inputs: list[InputSet]
    samples_per_cell: int
    seed: int
    initial_point: Sequence[float]
    atoms: list = field(default_factory=list)
    overflow: str = "sink"
    passive_input: int = 0
    threads: int = 1


def _triple_stream(seed: int, t: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(t,))))


def build_abstraction(req: AbstractionRequest) -> DurationalStochasticGame:
    """Estimate Pr_G and T_G by frequency counts over sampled successors."""
    part = req.partition
    N = int(req.samples_per_cell)
    if N < 1:
        raise ValidationError("samples_per_cell must be at least 1")
    if req.overflow not in ("sink", "saturate", "error"):
        raise ValidationError(f"unknown overflow mode {req.overflow!r}")
    nc = part.n_cells
    C, A = len(req.defender_inputs), len(req.adversary_inputs)
    triples = [(i, c, a) for i in range(nc) for c in range(C) for a in range(A)]

    def run(t: int):
        i, c, a = triples[t]
        rng = _triple_stream(req.seed, t)
        lo, hi = part.bounds(i)
        x = req.oracle.sample_state(rng, lo, hi, N)
        uc = req.defender_inputs[c].sample(rng, N)
        ua = req.adversary_inputs[a].sample(rng, N)
        w = req.oracle.sample_noise(rng, N)
        x2, d = req.oracle.step(x, uc, ua, w)
        d = np.asarray(d)
        di = np.rint(d).astype(np.int64)
        if np.any(np.abs(d - di) > 1e-9) or np.any(di < 1):
            raise DurationGridError("oracle durations must be positive integers on the tick grid")
        y = req.oracle.project(x2)
        if req.overflow == "saturate":
            y = np.clip(y, part.lo, part.hi)
        cells = part.locate(y)
        if np.any(cells < 0):
            if req.overflow == "error":
                raise OracleRange(f"successor left the box from {part.cell_name(i)}")
            cells = np.where(cells < 0, nc, cells)
        if len(cells) == 0:
            raise EmptyCellSample(f"no successors for {part.cell_name(i)}")
        return cells, di

    if req.threads > 1:
        with ThreadPoolExecutor(req.threads) as pool:
            results = list(pool.map(run, range(len(triples))))
    else:
        results = [run(t) for t in range(len(triples))]

    durations = tuple(sorted({int(x) for _, d in results for x in np.unique(d)}))
    used_overflow = any(np.any(cells == nc) for cells, _ in results)
    n = nc + (1 if used_overflow else 0)
    D = len(durations)
    dpos = {d: k for k, d in enumerate(durations)}
    trans = [np.zeros((C, A, n)) for _ in range(n)]
    dur = [np.zeros((C, A, n, D)) for _ in range(n)]
    for t, (cells, d) in enumerate(results):
        i, c, a = triples[t]
        dk = np.array([dpos[int(x)] for x in d], dtype=np.int64)
        joint = np.bincount(cells * D + dk, minlength=n * D).reshape(n, D)
        counts = joint.sum(axis=1)
        trans[i][c, a] = counts / N
        with np.errstate(invalid="ignore", divide="ignore"):
            dur[i][c, a] = np.where(counts[:, None] > 0, joint / np.maximum(counts, 1)[:, None], 0.0)
    if used_overflow:
        trans[nc][:, :, nc] = 1.0
        dur[nc][:, :, nc, 0] = 1.0
    names = [part.cell_name(i) for i in range(nc)] + ([OVERFLOW] if used_overflow else [])
    labels = cell_labels(part, req.atoms) + ([frozenset()] if used_overflow else [])
    init = int(part.locate(np.asarray(req.initial_point, dtype=float)[None, :])[0])
    if init < 0:
        raise ValidationError("initial point lies outside the partition box")
    props = frozenset(a.name for a in req.atoms)
    dnames = [u.name for u in req.defender_inputs]
    anames = [u.name for u in req.adversary_inputs]
    return DurationalStochasticGame(
        states=names, initial=init,
        defender_actions=[list(dnames) for _ in range(n)],
        adversary_actions=[list(anames) for _ in range(n)],
        trans=trans, durations=durations, dur=dur, props=props, labels=labels,
        passive=[req.passive_input] * n,
        meta={"samples_per_cell": N, "seed": req.seed, "cells": nc, "overflow": used_overflow},
    )


# ------------------------------------------------------------- utilities

def game_to_dict(g: DurationalStochasticGame) -> dict:
    """JSON form of a game; kernels are listed sparsely with float or "p/q" entries."""

    def num(x):
        if isinstance(x, Fraction):
            return str(x) if x.denominator != 1 else int(x)
        return float(x)

    trans = []
    for s in range(g.n):
        for c, uc in enumerate(g.defender_actions[s]):
            for a, ua in enumerate(g.adversary_actions[s]):
                for s2 in range(g.n):
                    p = g.trans[s][c, a, s2]
                    if p > 0:
                        trans.append({
                            "from": g.states[s], "uc": uc, "ua": ua, "to": g.states[s2], "p": num(p),
                            "durations": {str(d): num(g.dur[s][c, a, s2, k]) for k, d in enumerate(g.durations)
                                          if g.dur[s][c, a, s2, k] > 0},
                        })
    return {
        "states": [
            {"name": g.states[s], "labels": sorted(g.labels[s]), "defender_actions": g.defender_actions[s],
             "adversary_actions": g.adversary_actions[s], "passive": g.adversary_actions[s][g.passive[s]]}
            for s in range(g.n)
        ],
        "initial": g.states[g.initial],
        "propositions": sorted(g.props),
        "durations": list(g.durations),
        "clocks": None if g.clocks is None else list(g.clocks),
        "transitions": trans,
    }


def parse_number(x, exact: bool):
    if exact:
        if isinstance(x, float):
            return Fraction(str(x))
        return Fraction(x)
    if isinstance(x, str):
        return float(Fraction(x))
    return float(x)


def game_from_dict(d: dict) -> DurationalStochasticGame:
    """Explicit game from its JSON form; entries given as strings make the game exact."""
    try:
        states = [st["name"] for st in d["states"]]
        index = {name: i for i, name in enumerate(states)}
        if len(index) != len(states):
            raise ValidationError("duplicate state names")
        n = len(states)
        durations = tuple(d["durations"])
        for x in durations:
            if not isinstance(x, int) or x <= 0:
                raise DurationGridError(f"duration {x!r} must be a positive integer tick count")
        dk = {dd: k for k, dd in enumerate(durations)}
        exact = bool(d.get("exact", False)) or any(isinstance(t.get("p"), str) for t in d["transitions"])
        dtype = object if exact else float
        zero = Fraction(0) if exact else 0.0
        dact = [list(st["defender_actions"]) for st in d["states"]]
        aact = [list(st["adversary_actions"]) for st in d["states"]]
        trans = [np.full((len(dact[s]), len(aact[s]), n), zero, dtype=dtype) for s in range(n)]
        dur = [np.full((len(dact[s]), len(aact[s]), n, len(durations)), zero, dtype=dtype) for s in range(n)]
        for j, t in enumerate(d["transitions"]):
            s = index[t["from"]]
            c = dact[s].index(t["uc"])
            a = aact[s].index(t["ua"])
            s2 = index[t["to"]]
            trans[s][c, a, s2] = trans[s][c, a, s2] + parse_number(t["p"], exact)
            dist = t.get("durations")
            if dist is None:
                if len(durations) != 1:
                    raise ValidationError(f"transitions[{j}]: durations distribution required")
                dist = {str(durations[0]): 1}
            for key, pr in dist.items():
                k = dk.get(int(key))
                if k is None:
                    raise DurationGridError(f"transitions[{j}]: duration {key} not in the declared set")
                dur[s][c, a, s2, k] = parse_number(pr, exact)
        props = frozenset(d.get("propositions", []))
        labels = [frozenset(st.get("labels", [])) for st in d["states"]]
        passive = [aact[s].index(st["passive"]) if "passive" in st else 0 for s, st in enumerate(d["states"])]
        clocks = d.get("clocks")
        return DurationalStochasticGame(
            states=states, initial=index[d["initial"]], defender_actions=dact, adversary_actions=aact,
            trans=trans, durations=durations, dur=dur, props=props, labels=labels,
            clocks=None if clocks is None else tuple(clocks), passive=passive,
        )
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"malformed game: {exc}") from None


def sample_successor(g: DurationalStochasticGame, s: int, c: int, a: int, rng: np.random.Generator) -> tuple[int, int]:
    """Draw (s', δ) from Pr_G and T_G."""
    p = np.asarray(g.trans[s][c, a], dtype=float)
    s2 = int(rng.choice(g.n, p=p / p.sum()))
    q = np.asarray(g.dur[s][c, a, s2], dtype=float)
    k = int(rng.choice(len(g.durations), p=q / q.sum()))
    return s2, int(g.durations[k])


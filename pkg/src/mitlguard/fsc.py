"""Finite state controllers with clock-estimate memory and attack detection.

The controller's internal state is ``y = (λ, h)``: ``λ`` is its estimate of
the automaton clocks and ``h`` the latched detection bit. The next ``y`` is
determined by the controller's own bookkeeping, so policy rows are
distributions over defender actions only. ``μ0`` rows are keyed by
``(y, s, q, observed v)`` and ``μ1`` rows by ``(y, s, q)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, IncompletePolicy, InvalidPolicyRow, ValidationError
from .tba import TimedBuchiAutomaton, step_quantized

ROW_TOL = 1e-12


@dataclass(frozen=True)
class ControllerStructure:
    """Memory layout of a controller.

    ``tracking`` turns the clock estimate on; without it the controller is
    memoryless and detection is impossible. ``estimate_cap`` bounds the
    estimate levels (None uses the product's saturation cap).
    ``threshold`` is the detection bound e; None disables detection.
    """

    tracking: bool = True
    estimate_cap: Optional[int] = None
    threshold: Optional[int] = 2

    @classmethod
    def from_size(cls, fsc_size: Optional[int], threshold: Optional[int]) -> "ControllerStructure":
        """``fsc_size`` is the number of estimate levels per clock; 1 means memoryless."""
        if fsc_size is None:
            return cls(True, None, threshold)
        if fsc_size < 1:
            raise ValidationError("fsc size must be at least 1")
        if fsc_size == 1:
            return cls(False, None, None)
        return cls(True, fsc_size - 1, threshold)

    @property
    def detection(self) -> bool:
        return self.tracking and self.threshold is not None

    def initial_estimate(self, n_clocks: int) -> tuple:
        return tuple(0 for _ in range(n_clocks)) if self.tracking else ()


def detect(lam: Sequence[int], v: Sequence[int], e) -> int:
    """0 (H0) when the ∞-norm distance is within ``e``, else 1 (H1)."""
    if len(lam) != len(v):
        raise DimensionMismatch(f"estimate has {len(lam)} clocks, observation has {len(v)}")
    if not lam:
        return 0
    return 0 if max(abs(a - b) for a, b in zip(lam, v)) <= e else 1


def advance_estimate(lam: Sequence[int], delta: int, resets: Iterable[int], cap: int) -> tuple:
    """λ + δ with the clocks in ``resets`` (indices) zeroed, saturated at ``cap``."""
    rs = set(resets)
    return tuple(0 if i in rs else min(x + delta, cap) for i, x in enumerate(lam))


def rounded_expected_duration(durations: Sequence[int], probs: np.ndarray) -> int:
    """Expected duration rounded to the grid; the mode breaks exact ties."""
    probs = np.asarray(probs, dtype=float)
    probs = probs / probs.sum()
    mean = float(np.dot(durations, probs))
    lo = int(np.floor(mean))
    frac = mean - lo
    if abs(frac - 0.5) < 1e-12:
        mode = durations[int(np.argmax(probs))]
        out = lo if abs(mode - lo) <= abs(mode - (lo + 1)) else lo + 1
    else:
        out = int(round(mean))
    return max(out, 1)


class EstimateTracker:
    """Deterministic estimate update shared by game construction and simulation."""

    def __init__(self, dsg, tba: TimedBuchiAutomaton, ctl: ControllerStructure, cap: Optional[int] = None):
        self.dsg = dsg
        self.tba = tba
        self.ctl = ctl
        self.cap = tba.cap if cap is None else cap
        self.est_cap = self.cap if ctl.estimate_cap is None else min(ctl.estimate_cap, self.cap)
        self._dhat: dict = {}
        self._next: dict = {}

    def expected_step(self, s: int, r: int, s2: int) -> int:
        key = (s, r, s2)
        if key not in self._dhat:
            g = self.dsg
            w = np.asarray(g.trans[s][r, :, s2], dtype=float)
            pooled = (w[:, None] * np.asarray(g.dur[s][r, :, s2, :], dtype=float)).sum(axis=0)
            if pooled.sum() <= 0:
                pooled = np.ones(len(g.durations))
            self._dhat[key] = rounded_expected_duration(list(g.durations), pooled)
        return self._dhat[key]

    def update(self, lam: tuple, s: int, q: Optional[str], r: int, s2: int) -> tuple:
        if not self.ctl.tracking:
            return ()
        d = self.expected_step(s, r, s2)
        res = None if q is None else step_quantized(self.tba, q, lam, self.dsg.labels[s2], d, self.cap)
        if res is None:
            nxt = tuple(x + d for x in lam)
        else:
            nxt = res[1]
        return tuple(min(x, self.est_cap) for x in nxt)

    def next_estimate(self, lam: tuple, s: int, q: str, r: int) -> dict:
        """Map successor DSG state -> next estimate after defender row ``r``."""
        key = (lam, s, q, r)
        if key not in self._next:
            g = self.dsg
            reach = np.nonzero(np.asarray((g.trans[s][r] > 0).any(axis=0), dtype=bool))[0]
            self._next[key] = {int(s2): self.update(lam, s, q, r, int(s2)) for s2 in reach}
        return self._next[key]


def _check_row(row: Mapping[str, float], allowed: Sequence[str], key) -> None:
    bad = [u for u in row if u not in allowed]
    if bad:
        raise InvalidPolicyRow(f"row {key!r} uses actions {bad} outside {list(allowed)}")
    if any(p < -ROW_TOL for p in row.values()):
        raise InvalidPolicyRow(f"row {key!r} has negative entries")
    if abs(sum(row.values()) - 1.0) > 1e-9:
        raise InvalidPolicyRow(f"row {key!r} sums to {sum(row.values())}")


@dataclass
class FiniteStateController:
    structure: ControllerStructure
    n_clocks: int
    mu0: dict = field(default_factory=dict)
    mu1: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def y0(self) -> tuple:
        return (self.structure.initial_estimate(self.n_clocks), 0)

    def act(self, y: tuple, s: int, q: str, observed: Optional[tuple], allowed: Sequence[str]) -> dict:
        """Policy row for the current memory and observation."""
        lam, h = y
        if h == 0:
            if observed is None:
                raise ValidationError("under H0 an observed valuation is required")
            key = (tuple(lam), s, q, tuple(observed))
            table = self.mu0
        else:
            key = (tuple(lam), s, q)
            table = self.mu1
        row = table.get(key)
        if row is None:
            raise IncompletePolicy(key)
        _check_row(row, allowed, key)
        return row

    @staticmethod
    def uniform_row(allowed: Sequence[str]) -> dict:
        return {u: 1.0 / len(allowed) for u in allowed}

    def normalize(self) -> None:
        for table in (self.mu0, self.mu1):
            for key, row in table.items():
                tot = sum(row.values())
                table[key] = {u: p / tot for u, p in row.items() if p > 0}

    # serialization: keys become lists, states are written by name
    def to_dict(self, state_names: Sequence[str]) -> dict:
        def rows(table, with_obs):
            out = []
            for key in sorted(table, key=lambda k: (k[1], k[2], k[0], k[3] if with_obs else ())):
                entry = {"lambda": list(key[0]), "s": state_names[key[1]], "q": key[2]}
                if with_obs:
                    entry["observed"] = list(key[3])
                entry["row"] = {u: table[key][u] for u in sorted(table[key])}
                out.append(entry)
            return out

        st = self.structure
        return {
            "structure": {"tracking": st.tracking, "estimate_cap": st.estimate_cap, "threshold": st.threshold},
            "n_clocks": self.n_clocks,
            "mu0": rows(self.mu0, True),
            "mu1": rows(self.mu1, False),
            "info": self.info,
        }

    @classmethod
    def from_dict(cls, d: Mapping, state_names: Sequence[str]) -> "FiniteStateController":
        index = {n: i for i, n in enumerate(state_names)}
        try:
            st = d["structure"]
            ctl = cls(ControllerStructure(bool(st["tracking"]), st.get("estimate_cap"), st.get("threshold")),
                      int(d["n_clocks"]), info=dict(d.get("info", {})))
            for e in d["mu0"]:
                ctl.mu0[(tuple(e["lambda"]), index[e["s"]], e["q"], tuple(e["observed"]))] = dict(e["row"])
            for e in d["mu1"]:
                ctl.mu1[(tuple(e["lambda"]), index[e["s"]], e["q"])] = dict(e["row"])
        except KeyError as exc:
            raise ValidationError(f"policy file is missing or references unknown {exc.args[0]!r}") from None
        return ctl


def save_controller(ctl: FiniteStateController, path: str, state_names: Sequence[str]) -> None:
    with open(path, "w") as fh:
        json.dump(ctl.to_dict(state_names), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_controller(path: str, state_names: Sequence[str]) -> FiniteStateController:
    with open(path) as fh:
        return FiniteStateController.from_dict(json.load(fh), state_names)

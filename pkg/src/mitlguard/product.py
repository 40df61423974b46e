"""Product of a durational stochastic game with a timed automaton.

Product states are ``(s, q, v)`` with ``v`` a quantized valuation saturated
at the automaton's cap. Transitions whose label enables no automaton edge go
to the absorbing, non-accepting ``violation`` state (key ``None``).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .dsg import DurationalStochasticGame
from .errors import AlphabetMismatch, ClockSetMismatch
from .tba import TimedBuchiAutomaton, step_quantized

VIOLATION = None


@dataclass
class ProductGame:
    dsg: DurationalStochasticGame
    tba: TimedBuchiAutomaton
    cap: int
    keys: list
    index: dict
    succ: list[np.ndarray]
    base: list[np.ndarray]
    accepting: np.ndarray
    initial: int
    exact: bool = False
    step_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.keys)

    @property
    def v0(self) -> tuple:
        return tuple(0 for _ in self.tba.clocks)

    def dense_kernel(self, i: int) -> np.ndarray:
        C, A, _ = self.base[i].shape
        out = np.zeros((C, A, self.n), dtype=self.base[i].dtype)
        if out.dtype == object:
            out[...] = Fraction(0)
        for k, j in enumerate(self.succ[i]):
            out[:, :, j] = out[:, :, j] + self.base[i][:, :, k]
        return out

    def row_sums(self):
        """Per-state (C, A) arrays of kernel row sums."""
        if self.exact:
            return [np.array([[sum(b[c, a], Fraction(0)) for a in range(b.shape[1])] for c in range(b.shape[0])], dtype=object)
                    for b in self.base]
        return [b.sum(axis=2) for b in self.base]


def tba_move(p_or_cache: dict, tba: TimedBuchiAutomaton, q: str, v: tuple, letter: frozenset, delta: int, cap: int):
    key = (q, v, letter, delta)
    if key not in p_or_cache:
        p_or_cache[key] = step_quantized(tba, q, v, letter, delta, cap)
    return p_or_cache[key]


def build_product(g: DurationalStochasticGame, a: TimedBuchiAutomaton) -> ProductGame:
    """Reachable product game with violation completion."""
    missing = a.edge_props() - set(g.props)
    if missing:
        raise AlphabetMismatch(f"automaton propositions {sorted(missing)} are not labels of the game")
    if g.clocks is not None and tuple(sorted(g.clocks)) != tuple(sorted(a.clocks)):
        raise ClockSetMismatch(f"game clocks {list(g.clocks)} differ from automaton clocks {list(a.clocks)}")
    cap = a.cap
    exact = g.exact
    cache: dict = {}
    v0 = tuple(0 for _ in a.clocks)
    start = (g.initial, a.initial, v0)
    seen = {start}
    queue = deque([start])
    moves: dict = {}
    while queue:
        key = queue.popleft()
        if key is None:
            continue
        s, q, v = key
        T = g.trans[s]
        D = g.dur[s]
        mass = T[..., None] * D
        live = np.argwhere(np.asarray((mass > 0).any(axis=(0, 1)), dtype=bool))
        targets = []
        for s2, dk in live:
            res = tba_move(cache, a, q, v, g.labels[s2], int(g.durations[dk]), cap)
            nk = None if res is None else (int(s2), res[0], res[1])
            targets.append((int(s2), int(dk), nk))
            if nk not in seen:
                seen.add(nk)
                queue.append(nk)
        moves[key] = (mass, targets)
    order = sorted((k for k in seen if k is not None), key=lambda k: (k[0], k[1], k[2]))
    if None in seen:
        order.append(None)
    index = {k: i for i, k in enumerate(order)}
    dtype = object if exact else float
    zero = Fraction(0) if exact else 0.0
    succ, base, acc = [], [], []
    for key in order:
        if key is None:
            succ.append(np.array([index[None]], dtype=np.int64))
            b = np.full((1, 1, 1), Fraction(1) if exact else 1.0, dtype=dtype)
            base.append(b)
            acc.append(False)
            continue
        s = key[0]
        mass, targets = moves[key]
        tgt = sorted({index[nk] for _, _, nk in targets})
        pos = {t: j for j, t in enumerate(tgt)}
        C, A = g.trans[s].shape[:2]
        b = np.full((C, A, len(tgt)), zero, dtype=dtype)
        for s2, dk, nk in targets:
            j = pos[index[nk]]
            b[:, :, j] = b[:, :, j] + mass[:, :, s2, dk]
        succ.append(np.array(tgt, dtype=np.int64))
        base.append(b)
        acc.append(key[1] in a.accepting)
    return ProductGame(g, a, cap, order, index, succ, base, np.array(acc, dtype=bool),
                       index[start], exact, cache)


def untime(run: Sequence[tuple]) -> list[tuple]:
    """Drop valuations: (s, q, v) -> (s, q)."""
    return [(s, q) for s, q, _ in run]


def time_projection(run: Sequence[tuple]) -> list[tuple]:
    """Automaton configurations: (s, q, v) -> (q, v)."""
    return [(q, v) for _, q, v in run]


def product_to_dict(p: ProductGame) -> dict:
    g = p.dsg

    def num(x):
        return str(x) if isinstance(x, Fraction) else float(x)

    states = []
    for i, key in enumerate(p.keys):
        if key is None:
            states.append({"id": i, "violation": True})
            continue
        s, q, v = key
        rows = []
        for c, uc in enumerate(g.defender_actions[s]):
            for a_, ua in enumerate(g.adversary_actions[s]):
                rows.append({"uc": uc, "ua": ua, "next": [
                    [int(p.succ[i][k]), num(p.base[i][c, a_, k])] for k in range(len(p.succ[i])) if p.base[i][c, a_, k] > 0
                ]})
        states.append({"id": i, "s": g.states[s], "q": q, "v": list(v), "accepting": bool(p.accepting[i]), "rows": rows})
    return {"initial": p.initial, "cap": p.cap, "states": states}

"""Generalized accepting maximal end components of a global game.

A sub-game keeps a subset ``N`` of states and, for each, the defender rows
whose successors stay inside ``N`` under every adversary column. Components
are found by alternating SCC splits and choice pruning until nothing
changes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gdsg import GlobalGame


def strongly_connected_components(adj: Sequence[Sequence[int]]) -> list[list[int]]:
    """Iterative Tarjan. Components come out in reverse topological order, each sorted."""
    n = len(adj)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            if i < len(adj[v]):
                work[-1] = (v, i + 1)
                w = adj[v][i]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


@dataclass(frozen=True)
class SubGame:
    states: frozenset[int]
    choices: tuple[tuple[int, frozenset[int]], ...]

    def choice_map(self) -> dict[int, frozenset[int]]:
        return dict(self.choices)


@dataclass
class GamecSet:
    components: list[SubGame]

    @property
    def union(self) -> frozenset[int]:
        out: set[int] = set()
        for c in self.components:
            out |= c.states
        return frozenset(out)


class _Support:
    """Positive-probability structure of a global game."""

    def __init__(self, z: GlobalGame):
        self.z = z
        self.pos = []
        for i in range(z.n):
            used = np.unique(z.colmap[i])
            self.pos.append(np.asarray(z.base_f[i][:, used, :] > 0))

    def robust_rows(self, i: int, rows, inside: np.ndarray) -> set[int]:
        """Rows of ``rows`` whose successors stay inside under every column."""
        out_mask = ~inside[self.z.succ[i]]
        leave = (self.pos[i] & out_mask[None, None, :]).any(axis=(1, 2))
        return {r for r in rows if not leave[r]}

    def successors(self, i: int, rows) -> set[int]:
        if not rows:
            return set()
        hit = self.pos[i][sorted(rows)].any(axis=(0, 1))
        return {int(s) for s in self.z.succ[i][hit]}


def _prune(sup: _Support, states: set[int], choices: dict[int, set[int]], n: int):
    """Drop non-robust rows and states left without rows, to a fixpoint."""
    states = set(states)
    while True:
        inside = np.zeros(n, dtype=bool)
        inside[list(states)] = True
        changed = False
        for i in sorted(states):
            keep = sup.robust_rows(i, choices[i], inside)
            if keep != choices[i]:
                choices[i] = keep
                changed = True
        dead = {i for i in states if not choices[i]}
        if dead:
            states -= dead
            changed = True
        if not changed:
            return states, choices


def compute_gamecs(z: GlobalGame) -> GamecSet:
    """All maximal robust end components that meet the accepting set."""
    n = z.n
    sup = _Support(z)
    todo = [(set(range(n)), {i: set(range(z.n_rows(i))) for i in range(n)})]
    final: list[SubGame] = []
    while todo:
        states, choices = todo.pop()
        order = sorted(states)
        local = {s: k for k, s in enumerate(order)}
        adj = [[local[t] for t in sorted(sup.successors(s, choices[s])) if t in local] for s in order]
        for comp in strongly_connected_components(adj):
            S = {order[k] for k in comp}
            D = {i: set(choices[i]) for i in S}
            S2, D2 = _prune(sup, S, D, n)
            if not S2:
                continue
            if S2 == S and all(D2[i] == choices[i] for i in S):
                final.append(SubGame(frozenset(S), tuple((i, frozenset(D2[i])) for i in sorted(S))))
            else:
                todo.append((S2, {i: D2[i] for i in S2}))
    accepted = [c for c in final if any(z.accepting[i] for i in c.states)]
    accepted.sort(key=lambda c: min(c.states))
    return GamecSet(accepted)


def check_component(z: GlobalGame, c: SubGame) -> list[str]:
    """Invariant violations of one component (empty when sound)."""
    sup = _Support(z)
    problems = []
    inside = np.zeros(z.n, dtype=bool)
    inside[list(c.states)] = True
    cm = c.choice_map()
    for i in c.states:
        if not cm.get(i):
            problems.append(f"state {i} keeps no choice")
            continue
        if sup.robust_rows(i, cm[i], inside) != set(cm[i]):
            problems.append(f"state {i} keeps a choice that can leave the component")
    order = sorted(c.states)
    local = {s: k for k, s in enumerate(order)}
    adj = [[local[t] for t in sorted(sup.successors(s, cm.get(s, set()))) if t in local] for s in order]
    if len(strongly_connected_components(adj)) != 1:
        problems.append("component is not strongly connected")
    if not any(z.accepting[i] for i in c.states):
        problems.append("component misses the accepting set")
    return problems


def gamecs_to_dict(z: GlobalGame, gs: GamecSet) -> dict:
    def key(i):
        k = z.keys[i] if z.keys else i
        if k is None:
            return "violation"
        return k.as_list() if hasattr(k, "as_list") else k

    return {
        "components": [
            {"states": [key(i) for i in sorted(c.states)],
             "choices": {str(i): [z.row_labels[i][r] for r in sorted(rs)] for i, rs in c.choices}}
            for c in gs.components
        ],
        "union_size": len(gs.union),
    }

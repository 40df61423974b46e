"""Global game: product game composed with the controller's memory.

``GlobalGame`` is the solver-facing representation. For state ``i`` the
kernel under defender row ``r`` and adversary column ``c`` is

    succ[i][k] with probability base[i][r, colmap[i][c], k]

so columns that share an actuator action share one slice of ``base``. A
timing manipulation that trips detection maps to a slice that moves to the
detected twin state with probability one for every row.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .fsc import ControllerStructure, EstimateTracker, detect
from .product import ProductGame


@dataclass
class GlobalGame:
    succ: list[np.ndarray]
    base: list[np.ndarray]
    colmap: list[np.ndarray]
    accepting: np.ndarray
    initial: int = 0
    keys: list = field(default_factory=list)
    row_labels: list = field(default_factory=list)
    col_labels: list = field(default_factory=list)
    exact: bool = False
    _base_f: Optional[list] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.succ)

    def n_rows(self, i: int) -> int:
        return self.base[i].shape[0]

    def n_cols(self, i: int) -> int:
        return len(self.colmap[i])

    @property
    def base_f(self) -> list[np.ndarray]:
        if self._base_f is None:
            self._base_f = [np.asarray(b, dtype=float) for b in self.base]
        return self._base_f

    def kernel_row(self, i: int, r: int, c: int) -> tuple[np.ndarray, np.ndarray]:
        return self.succ[i], self.base[i][r, self.colmap[i][c]]

    def dense_kernel(self, i: int) -> np.ndarray:
        """(R, C, n) float tensor; for tests and small games only."""
        out = np.zeros((self.n_rows(i), self.n_cols(i), self.n))
        b = self.base_f[i][:, self.colmap[i], :]
        for k, s in enumerate(self.succ[i]):
            out[:, :, s] += b[:, :, k]
        return out

    @classmethod
    def from_dense(cls, kernels: Sequence[np.ndarray], accepting: Sequence[bool], initial: int = 0) -> "GlobalGame":
        """Build from per-state (R, C, n) tensors; every column gets its own slice."""
        succ, base, colmap = [], [], []
        for K in kernels:
            K = np.asarray(K)
            support = np.nonzero(K.reshape(-1, K.shape[-1]).sum(axis=0) != 0)[0]
            succ.append(support.astype(np.int64))
            base.append(K[:, :, support])
            colmap.append(np.arange(K.shape[1]))
        exact = any(np.asarray(K).dtype == object for K in kernels)
        return cls(succ, base, colmap, np.asarray(accepting, dtype=bool), initial,
                   keys=list(range(len(succ))),
                   row_labels=[list(range(b.shape[0])) for b in base],
                   col_labels=[list(range(len(c))) for c in colmap],
                   exact=exact)

    def row_sum_errors(self) -> float:
        """Largest deviation of any (state, row, slice) kernel sum from one."""
        worst = 0.0
        for i in range(self.n):
            b = self.base[i]
            if self.exact:
                for r in range(b.shape[0]):
                    for a in range(b.shape[1]):
                        worst = max(worst, abs(float(sum(b[r, a, :], Fraction(0)) - 1)))
            else:
                worst = max(worst, float(np.abs(b.sum(axis=2) - 1).max()))
        return worst


# ------------------------------------------------------------ construction

def enumerate_adversary_choices(v: Sequence[int], kappa_max: int, cap: int, actions: Sequence[str]) -> list[tuple[str, tuple]]:
    """All (u_A, v″) pairs with v″ within ``kappa_max`` of ``v`` on the grid.

    Observed valuations are floored at 0 and capped at ``cap``. Duplicates
    from flooring or capping are removed; the identity comes first, then
    shifts by increasing size with negative before positive.
    """
    if kappa_max < 0:
        raise ValidationError("kappa_max must be non-negative")
    shifts = range(-kappa_max, kappa_max + 1)
    combos = sorted(itertools.product(shifts, repeat=len(v)),
                    key=lambda c: (max((abs(k) for k in c), default=0), sum(abs(k) for k in c), c))
    obs = []
    seen = set()
    for combo in combos:
        o = tuple(min(max(x + k, 0), cap) for x, k in zip(v, combo))
        if o not in seen:
            seen.add(o)
            obs.append(o)
    return [(u, o) for o in obs for u in actions]


@dataclass(frozen=True)
class GlobalKey:
    s: int
    q: str
    v: tuple
    lam: tuple
    h: int

    def as_list(self):
        return [self.s, self.q, list(self.v), list(self.lam), self.h]


def build_global(p: ProductGame, ctl: ControllerStructure, kappa_max: int = 2) -> GlobalGame:
    """Reachable global game for product ``p`` and controller structure ``ctl``.

    State keys are ``GlobalKey`` values; the violation sink has key None and
    is absorbing with a single row and column.
    """
    dsg = p.dsg
    tracker = EstimateTracker(dsg, p.tba, ctl)
    cap = p.cap
    init_key = GlobalKey(dsg.initial, p.tba.initial, p.v0, ctl.initial_estimate(len(p.v0)), 0)
    index: dict = {init_key: 0}
    keys: list = [init_key]
    queue = deque([init_key])
    raw: dict = {}
    while queue:
        key = queue.popleft()
        if key is None:
            raw[key] = None
            continue
        pi = p.index[(key.s, key.q, key.v)]
        s = key.s
        uc = dsg.defender_actions[s]
        ua = dsg.adversary_actions[s]
        p_succ = p.succ[pi]
        nxt_keys = []
        K = p.base[pi]
        # product successors lifted with each row's estimate update
        lifted: dict = {}
        for r in range(len(uc)):
            for k, ps in enumerate(p_succ):
                if not (K[r, :, k] > 0).any():
                    continue
                pk = p.keys[ps]
                if pk is None:
                    nk = None
                else:
                    nk = GlobalKey(pk[0], pk[1], pk[2], tracker.update(key.lam, s, key.q, r, pk[0]), key.h)
                lifted[(r, k)] = nk
                if nk not in nxt_keys:
                    nxt_keys.append(nk)
        cols: list = []
        twin = None
        if key.h == 0:
            for u, o in enumerate_adversary_choices(key.v, kappa_max, cap, ua):
                detected = ctl.detection and detect(key.lam, o, ctl.threshold) == 1
                cols.append((u, o, detected))
            if any(c[2] for c in cols):
                twin = GlobalKey(key.s, key.q, key.v, key.lam, 1)
                if twin not in nxt_keys:
                    nxt_keys.append(twin)
        else:
            cols = [(u, key.v, False) for u in ua]
        raw[key] = (pi, lifted, nxt_keys, cols, twin)
        for nk in nxt_keys:
            if nk not in index:
                index[nk] = len(keys)
                keys.append(nk)
                queue.append(nk)
    # canonical numbering: initial first, then sorted keys, violation last
    rest = sorted((k for k in keys if k is not None and k != init_key), key=lambda k: (k.s, k.q, k.v, k.lam, k.h))
    order = [init_key] + rest + ([None] if None in index else [])
    index = {k: i for i, k in enumerate(order)}
    dtype = object if p.exact else float
    one = Fraction(1) if p.exact else 1.0
    zero = Fraction(0) if p.exact else 0.0
    succ, base, colmap, acc, row_labels, col_labels = [], [], [], [], [], []
    for key in order:
        if key is None:
            succ.append(np.array([index[None]], dtype=np.int64))
            base.append(np.full((1, 1, 1), one, dtype=dtype))
            colmap.append(np.zeros(1, dtype=np.int64))
            acc.append(False)
            row_labels.append(["-"])
            col_labels.append([("-", None, False)])
            continue
        pi, lifted, nxt_keys, cols, twin = raw[key]
        s = key.s
        uc = dsg.defender_actions[s]
        ua = dsg.adversary_actions[s]
        targets = sorted({index[k] for k in nxt_keys})
        pos = {t: j for j, t in enumerate(targets)}
        n_slices = len(ua) + (1 if twin is not None else 0)
        B = np.full((len(uc), n_slices, len(targets)), zero, dtype=dtype)
        K = p.base[pi]
        for (r, k), nk in lifted.items():
            j = pos[index[nk]]
            B[r, : len(ua), j] = B[r, : len(ua), j] + K[r, :, k]
        if twin is not None:
            B[:, len(ua), pos[index[twin]]] = one
        cm = []
        ua_index = {u: a for a, u in enumerate(ua)}
        for u, o, detected in cols:
            cm.append(len(ua) if detected else ua_index[u])
        succ.append(np.array(targets, dtype=np.int64))
        base.append(B)
        colmap.append(np.array(cm, dtype=np.int64))
        acc.append(key.q in p.tba.accepting)
        row_labels.append(list(uc))
        col_labels.append([(u, tuple(o), bool(d)) for u, o, d in cols])
    return GlobalGame(succ, base, colmap, np.array(acc, dtype=bool), 0, keys=order,
                      row_labels=row_labels, col_labels=col_labels, exact=p.exact)


def induced_chain(z: GlobalGame, rows: Sequence[np.ndarray], cols: Sequence[int]) -> np.ndarray:
    """Dense transition matrix when every state plays row distribution ``rows[i]`` and column ``cols[i]``."""
    P = np.zeros((z.n, z.n))
    for i in range(z.n):
        probs = np.asarray(rows[i], dtype=float) @ z.base_f[i][:, z.colmap[i][cols[i]], :]
        np.add.at(P[i], z.succ[i], probs)
    return P


def adversary_free(z: GlobalGame, passive: Sequence[int]) -> GlobalGame:
    """Same state space as ``z`` with every actuator slice replaced by the passive one.

    ``passive[s]`` is the passive adversary action of DSG state ``s``. Timing
    columns and detection twins are kept, so controllers extracted from the
    result have rows for every state of ``z``.
    """
    base = []
    for i, key in enumerate(z.keys):
        b = z.base[i].copy()
        if key is not None:
            n_act = len({u for u, _, _ in z.col_labels[i]})
            b[:, :n_act, :] = b[:, passive[key.s], :][:, None, :]
        base.append(b)
    return GlobalGame(list(z.succ), base, list(z.colmap), z.accepting.copy(), z.initial, keys=list(z.keys),
                      row_labels=list(z.row_labels), col_labels=list(z.col_labels), exact=z.exact)

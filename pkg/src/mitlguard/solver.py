"""Value iteration for max-min reachability on global games and policy extraction.

Targets default to the union of accepting end components; their value is
held at one. Sweeps are synchronous, so the result does not depend on the
order in which per-state matrix games are solved.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import SolverError
from .fsc import ControllerStructure, FiniteStateController
from .gamec import GamecSet, compute_gamecs
from .gdsg import GlobalGame, GlobalKey
from .lp import solve_matrix_game

MONO_TOL = 1e-12


def slice_payoffs(z: GlobalGame, i: int, Q: np.ndarray) -> np.ndarray:
    """(rows, slices) expected successor values."""
    return z.base_f[i] @ Q[z.succ[i]]


def payoff_matrix(z: GlobalGame, i: int, Q: np.ndarray) -> np.ndarray:
    """Full (rows, columns) matrix game of state ``i`` under ``Q``."""
    return slice_payoffs(z, i, Q)[:, z.colmap[i]]


def _state_game(z: GlobalGame, i: int, Q: np.ndarray):
    S = slice_payoffs(z, i, Q)
    used = np.unique(z.colmap[i])
    return solve_matrix_game(S[:, used])


def _map(threads: int, fn, items):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def surely_accepting(z: GlobalGame) -> np.ndarray:
    """Largest set of accepting states that no row or column can leave.

    Every play from such a state visits only accepting states, so its value
    is 1 whether or not the set is strongly connected.
    """
    keep = z.accepting.copy()
    preds: list[list[int]] = [[] for _ in range(z.n)]
    for i in range(z.n):
        used = np.asarray(z.base_f[i][:, z.colmap[i], :] != 0).reshape(-1, len(z.succ[i])).any(axis=0)
        for s in z.succ[i][used]:
            preds[int(s)].append(i)
    work = [i for i in range(z.n) if not keep[i]]
    while work:
        s = work.pop()
        for i in preds[s]:
            if keep[i]:
                keep[i] = False
                work.append(i)
    return keep


def target_mask(z: GlobalGame, mode: str = "gamec", gamecs: Optional[GamecSet] = None) -> np.ndarray:
    """Reachability targets: accepting states (``acc``), or GAMEC states plus surely accepting ones (``gamec``)."""
    if mode == "acc":
        return z.accepting.copy()
    if mode != "gamec":
        raise ValueError(f"unknown target mode {mode!r}")
    gs = compute_gamecs(z) if gamecs is None else gamecs
    mask = surely_accepting(z)
    mask[list(gs.union)] = True
    return mask


def bellman_update(z: GlobalGame, Q: np.ndarray, targets: np.ndarray, threads: int = 1) -> np.ndarray:
    """One synchronous sweep of the max-min operator."""
    free = [i for i in range(z.n) if not targets[i]]
    vals = _map(threads, lambda i: _state_game(z, i, Q).value, free)
    out = np.ones(z.n)
    out[free] = vals
    return np.clip(out, 0.0, 1.0)


def apply_fixed_policy(z: GlobalGame, rows: Sequence[np.ndarray], Q: np.ndarray, targets: np.ndarray,
                       cols: Optional[Sequence[int]] = None) -> np.ndarray:
    """Operator with the defender fixed to ``rows``; min over columns unless ``cols`` fixes them."""
    out = np.ones(z.n)
    for i in range(z.n):
        if targets[i]:
            continue
        vals = np.asarray(rows[i], dtype=float) @ payoff_matrix(z, i, Q)
        out[i] = vals[cols[i]] if cols is not None else vals.min()
    return out


def initial_values(targets: np.ndarray) -> np.ndarray:
    return targets.astype(float)


@dataclass
class VIResult:
    values: np.ndarray
    iterations: int
    trace: list[float] = field(default_factory=list)
    monotone: bool = True
    bounded: bool = True
    converged: bool = True
    targets: Optional[np.ndarray] = None


def value_iteration(z: GlobalGame, targets: np.ndarray, eps: float = 1e-6, init: Optional[np.ndarray] = None,
                    max_iter: Optional[int] = None, threads: int = 1) -> VIResult:
    """Iterate the max-min operator from ``init`` (default: indicator of targets).

    Stops once the sup-norm change is at most ``eps``. The cap defaults to
    10·|S|/ε sweeps; hitting it raises ``SolverError``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    Q = initial_values(targets) if init is None else np.array(init, dtype=float)
    Q[targets] = 1.0
    cap = max_iter if max_iter is not None else int(10 * max(z.n, 1) / eps)
    res = VIResult(Q, 0, targets=targets)
    for k in range(1, cap + 1):
        Q2 = bellman_update(z, Q, targets, threads)
        delta = float(np.abs(Q2 - Q).max()) if z.n else 0.0
        res.trace.append(delta)
        if np.any(Q2 < Q - MONO_TOL):
            res.monotone = False
        if np.any(Q2 < -MONO_TOL) or np.any(Q2 > 1 + MONO_TOL):
            res.bounded = False
        Q = Q2
        res.iterations = k
        if delta <= eps:
            res.values = Q
            return res
    res.values = Q
    res.converged = False
    raise SolverError(f"value iteration did not reach eps={eps} within {cap} sweeps; last change {res.trace[-1]:.3g}")


def perturbed_start(z: GlobalGame, targets: np.ndarray, shift: float = 0.1, threads: int = 1) -> np.ndarray:
    """Second admissible start: max(Q¹, M(Q¹) − shift), a sub-solution below the value."""
    q1 = initial_values(targets)
    return np.clip(np.maximum(q1, bellman_update(z, q1, targets, threads) - shift), 0.0, 1.0)


def evaluate_fixed(z: GlobalGame, rows: Sequence[np.ndarray], targets: np.ndarray, cols: Optional[Sequence[int]] = None,
                   tol: float = 1e-13, max_iter: int = 1_000_000) -> np.ndarray:
    """Least fixed point of the fixed-defender operator by iteration."""
    Q = initial_values(targets)
    for _ in range(max_iter):
        Q2 = apply_fixed_policy(z, rows, Q, targets, cols)
        if np.abs(Q2 - Q).max() <= tol:
            return Q2
        Q = Q2
    raise SolverError("fixed-policy evaluation did not converge")


def reachability_linear(P: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Reachability probabilities of a Markov chain by a direct linear solve."""
    n = len(P)
    reach = targets.copy()
    changed = True
    while changed:
        new = reach | ((P[:, reach] > 0).any(axis=1))
        changed = bool((new != reach).any())
        reach = new
    x = np.zeros(n)
    x[targets] = 1.0
    unknown = reach & ~targets
    idx = np.nonzero(unknown)[0]
    if len(idx):
        A = np.eye(len(idx)) - P[np.ix_(idx, idx)]
        b = P[np.ix_(idx, np.nonzero(targets)[0])].sum(axis=1)
        x[idx] = np.linalg.solve(A, b)
    return x


# ------------------------------------------------------------- extraction

@dataclass
class ExtractedPolicy:
    rows: list[np.ndarray]
    controller: Optional[FiniteStateController] = None
    collisions: int = 0


def extract_rows(z: GlobalGame, Q: np.ndarray, targets: np.ndarray, gamecs: Optional[GamecSet] = None,
                 threads: int = 1) -> list[np.ndarray]:
    """Per-state LP rows under ``Q``. Target states play uniformly over their retained component choices."""
    retained: dict[int, frozenset[int]] = {}
    if gamecs is not None:
        for c in gamecs.components:
            retained.update(c.choice_map())

    def row(i):
        R = z.n_rows(i)
        if targets[i]:
            keep = sorted(retained.get(i, range(R)))
            r = np.zeros(R)
            r[keep] = 1.0 / len(keep)
            return r
        return _state_game(z, i, Q).row

    return _map(threads, row, range(z.n))


def extract_policy(z: GlobalGame, Q: np.ndarray, targets: np.ndarray, structure: Optional[ControllerStructure] = None,
                   n_clocks: int = 0, gamecs: Optional[GamecSet] = None, threads: int = 1) -> ExtractedPolicy:
    """LP rows per state, written into controller tables when the game has global keys.

    Under H0 each state's row is stored for every observation that does not
    trip detection. When two states share a table key the row of the state
    whose true valuation is closest to the observation wins (ties: smaller
    valuation tuple); the number of such collisions is reported.
    """
    rows = extract_rows(z, Q, targets, gamecs, threads)
    if structure is None or not z.keys or not isinstance(z.keys[0], GlobalKey):
        return ExtractedPolicy(rows)
    ctl = FiniteStateController(structure, n_clocks)
    best0: dict = {}
    collisions = 0
    for i, key in enumerate(z.keys):
        if key is None:
            continue
        dist = {z.row_labels[i][r]: float(p) for r, p in enumerate(rows[i]) if p > 0}
        y = (key.lam, key.h)
        if key.h == 1:
            ctl.mu1[(key.lam, key.s, key.q)] = dist
            continue
        observations = sorted({o for _, o, d in z.col_labels[i] if not d})
        for o in observations:
            k = (key.lam, key.s, key.q, o)
            rank = (0 if o == key.v else 1, max((abs(a - b) for a, b in zip(o, key.v)), default=0), key.v)
            if k in best0:
                collisions += 1
                if rank >= best0[k][0]:
                    continue
            best0[k] = (rank, dist)
    for k, (_, dist) in best0.items():
        ctl.mu0[k] = dist
    ctl.info["collisions"] = collisions
    return ExtractedPolicy(rows, ctl, collisions)


def controller_rows(z: GlobalGame, ctl: FiniteStateController) -> list[np.ndarray]:
    """Per-state, per-column defender rows induced by a controller: list of (C_i, R_i) arrays.

    Under H0 the row depends on the column's observation; detected columns
    get an all-zero row (the move goes to the twin regardless).
    """
    out = []
    for i, key in enumerate(z.keys):
        R, C = z.n_rows(i), z.n_cols(i)
        mat = np.zeros((C, R))
        if key is None:
            mat[:, 0] = 1.0
            out.append(mat)
            continue
        labels = z.row_labels[i]
        pos = {u: r for r, u in enumerate(labels)}
        for c, (_, o, detected) in enumerate(z.col_labels[i]):
            if detected:
                continue
            row = ctl.act((key.lam, key.h), key.s, key.q, o if key.h == 0 else None, labels)
            for u, p in row.items():
                mat[c, pos[u]] = p
        out.append(mat)
    return out


def controller_column_values(z: GlobalGame, mats: Sequence[np.ndarray], i: int, Q: np.ndarray) -> np.ndarray:
    """Value of every column at state ``i`` when the defender plays ``mats[i]``."""
    S = slice_payoffs(z, i, Q)
    vals = np.einsum("cr,rc->c", mats[i], S[:, z.colmap[i]])
    twin_cols = np.nonzero(mats[i].sum(axis=1) == 0)[0]
    if len(twin_cols):
        # detected columns: every row moves to the twin
        vals[twin_cols] = S[0, z.colmap[i][twin_cols]]
    return vals


def evaluate_controller(z: GlobalGame, mats: Sequence[np.ndarray], targets: np.ndarray,
                        tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Value of a fixed controller against its best-response adversary."""
    Q = initial_values(targets)
    for _ in range(max_iter):
        Q2 = np.ones(z.n)
        for i in range(z.n):
            if not targets[i]:
                Q2[i] = controller_column_values(z, mats, i, Q).min()
        if np.abs(Q2 - Q).max() <= tol:
            return Q2
        Q = Q2
    raise SolverError("controller evaluation did not converge")

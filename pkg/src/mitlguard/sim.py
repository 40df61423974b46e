"""Monte-Carlo rollouts of a controller against an adversary on a game.

Each tick the adversary picks an actuator action and the valuation the
defender observes. If the observation is farther than the detection bound
from the controller's estimate, the controller latches H1 and the adversary
picks again knowing that. The defender samples an action from its table,
the game samples the successor and duration, and the automaton and the
controller's memory advance. Verdicts are computed on the true-time word.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dsg import DurationalStochasticGame, sample_successor
from .errors import HorizonTooShort, IncompletePolicy
from .fsc import EstimateTracker, FiniteStateController, detect
from .gdsg import GlobalGame, GlobalKey
from .mitl import Formula, TimedWord, Verdict, evaluate, horizon_bound
from .solver import controller_column_values, controller_rows, evaluate_controller
from .tba import TimedBuchiAutomaton, step_quantized


class Adversary:
    """Chooses (actuator action, observed valuation) at a global state."""

    def choose(self, key: GlobalKey, tick: int) -> tuple[str, tuple]:
        raise NotImplementedError


class PassiveAdversary(Adversary):
    def __init__(self, dsg: DurationalStochasticGame):
        self.dsg = dsg

    def choose(self, key, tick):
        return self.dsg.adversary_actions[key.s][self.dsg.passive[key.s]], key.v


@dataclass
class TableAdversary(Adversary):
    table: dict

    def choose(self, key, tick):
        if key not in self.table:
            raise IncompletePolicy(key)
        return self.table[key]


@dataclass
class FunctionAdversary(Adversary):
    """Wraps ``fn(key, tick) -> (u_A, observed)``."""

    fn: Callable

    def choose(self, key, tick):
        return self.fn(key, tick)


@dataclass
class ShiftAdversary(Adversary):
    """Passive actuator, observations shifted by a constant number of ticks."""

    dsg: DurationalStochasticGame
    shift: int
    cap: int

    def choose(self, key, tick):
        o = tuple(min(max(x + self.shift, 0), self.cap) for x in key.v)
        return self.dsg.adversary_actions[key.s][self.dsg.passive[key.s]], o


def best_response_adversary(z: GlobalGame, ctl: FiniteStateController, targets: np.ndarray,
                            Q: Optional[np.ndarray] = None) -> TableAdversary:
    """Per state, the first column minimizing the fixed controller's payoff.

    ``Q`` defaults to the controller's own value against its best response,
    which makes the greedy choice an optimal reply.
    """
    mats = controller_rows(z, ctl)
    if Q is None:
        Q = evaluate_controller(z, mats, targets)
    table = {}
    for i, key in enumerate(z.keys):
        if key is None:
            continue
        vals = controller_column_values(z, mats, i, Q)
        c = int(np.argmax(vals <= vals.min() + 1e-12))
        u, o, _ = z.col_labels[i][c]
        table[key] = (u, tuple(o))
    return TableAdversary(table)


@dataclass
class Step:
    tick: int
    state: int
    q: Optional[str]
    v: Optional[tuple]
    true_time: int
    observed: Optional[tuple]
    lam: tuple
    hypothesis: int
    uc: str
    ua: str


@dataclass
class Rollout:
    steps: list[Step]
    word: TimedWord
    final_state: int


def rollout(dsg: DurationalStochasticGame, tba: TimedBuchiAutomaton, ctl: FiniteStateController, adversary: Adversary,
            horizon: int, rng: np.random.Generator, tracker: Optional[EstimateTracker] = None) -> Rollout:
    """One trajectory of ``horizon`` ticks."""
    cap = tba.cap
    tracker = tracker or EstimateTracker(dsg, tba, ctl.structure, cap)
    st = ctl.structure
    s, q, v = dsg.initial, tba.initial, tuple(0 for _ in tba.clocks)
    lam, h = ctl.y0
    t = 0
    steps, letters, times = [], [], []
    for k in range(horizon):
        uc_names = dsg.defender_actions[s]
        ua_names = dsg.adversary_actions[s]
        if q is None:
            r, ua, obs = 0, ua_names[dsg.passive[s]], None
        else:
            key = GlobalKey(s, q, v, lam, h)
            ua, obs = adversary.choose(key, k)
            if h == 0 and st.detection and detect(lam, obs, st.threshold) == 1:
                h = 1
                ua, _ = adversary.choose(GlobalKey(s, q, v, lam, h), k)
            row = ctl.act((lam, h), s, q, obs if h == 0 else None, uc_names)
            probs = np.array([row.get(u, 0.0) for u in uc_names])
            r = int(rng.choice(len(uc_names), p=probs / probs.sum()))
        a = ua_names.index(ua)
        steps.append(Step(k, s, q, v, t, obs if h == 0 else None, lam, h, uc_names[r], ua))
        s2, d = sample_successor(dsg, s, r, a, rng)
        t += d
        letters.append(dsg.labels[s2])
        times.append(t)
        if q is not None:
            lam = tracker.update(lam, s, q, r, s2)
            res = step_quantized(tba, q, v, dsg.labels[s2], d, cap)
            q, v = (None, None) if res is None else res
        s = s2
    word = TimedWord(tuple(letters), tuple(times), times[-1] if times else 0)
    return Rollout(steps, word, s)


def required_horizon(spec: Formula, dsg: DurationalStochasticGame) -> int:
    """Ticks needed so every verdict of a bounded spec is definite."""
    b = horizon_bound(spec)
    if b is None:
        raise HorizonTooShort(1, 1)
    return int(math.ceil(b / min(dsg.durations))) + 1


@dataclass
class SimSummary:
    n: int
    satisfied: int
    violated: int
    inconclusive: int
    p_hat: float
    half_width: float
    ci: Optional[tuple[float, float]] = None
    rollouts: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        d = {"n": self.n, "satisfied": self.satisfied, "violated": self.violated,
             "inconclusive": self.inconclusive, "p_hat": self.p_hat, "half_width": self.half_width}
        if self.ci is not None:
            d["clopper_pearson"] = list(self.ci)
        return d


def clopper_pearson(k: int, n: int, alpha: float = 0.05) -> tuple[float, float]:
    from scipy.stats import beta

    lo = 0.0 if k == 0 else float(beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


def estimate_satisfaction(dsg: DurationalStochasticGame, tba: TimedBuchiAutomaton, ctl: FiniteStateController,
                          adversary: Adversary, spec: Formula, n: int, horizon: Optional[int] = None, seed: int = 0,
                          threads: int = 1, exact_ci: bool = False, keep: int = 0) -> SimSummary:
    """Fraction of ``n`` rollouts whose true-time word satisfies ``spec``.

    ``keep`` rollouts (the first ones) are returned for trajectory output.
    """
    if horizon is None:
        horizon = required_horizon(spec, dsg)
    tracker = EstimateTracker(dsg, tba, ctl.structure, tba.cap)
    seqs = np.random.SeedSequence(seed).spawn(n)

    def one(i):
        ro = rollout(dsg, tba, ctl, adversary, horizon, np.random.Generator(np.random.PCG64(seqs[i])), tracker)
        return evaluate(spec, ro.word, 0), (ro if i < keep else None)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, range(n)))
    else:
        results = [one(i) for i in range(n)]
    verdicts = [v for v, _ in results]
    sat = sum(v is Verdict.SATISFIED for v in verdicts)
    inc = sum(v is Verdict.INCONCLUSIVE for v in verdicts)
    if inc:
        raise HorizonTooShort(inc, n)
    p = sat / n if n else 0.0
    hw = 1.96 * math.sqrt(p * (1 - p) / n) if n else 0.0
    summary = SimSummary(n, sat, n - sat - inc, inc, p, hw, clopper_pearson(sat, n) if exact_ci else None)
    summary.rollouts = [ro for _, ro in results if ro is not None]
    return summary


TRAJECTORY_COLUMNS = ["rollout", "tick", "true_time", "state", "q", "v", "observed", "lambda", "hypothesis", "uc", "ua"]


def trajectory_rows(rollouts: Sequence[Rollout], state_names: Sequence[str]) -> list[list]:
    def vec(x):
        return "" if x is None else " ".join(str(a) for a in x)

    rows = []
    for j, ro in enumerate(rollouts):
        for st in ro.steps:
            rows.append([j, st.tick, st.true_time, state_names[st.state], st.q if st.q is not None else "violation",
                         vec(st.v), vec(st.observed), vec(st.lam), "H1" if st.hypothesis else "H0", st.uc, st.ua])
    return rows

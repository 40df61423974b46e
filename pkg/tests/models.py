"""Small hand-built games with bounded specs, shared by several test files."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from mitlguard.dsg import DurationalStochasticGame, game_from_dict


def make_game(states: dict, moves: dict, defender=("go", "wait"), adversary=("ok", "jam"), durations=(1,),
              initial: Optional[str] = None, actions: Optional[dict] = None, exact: bool = False) -> DurationalStochasticGame:
    """Game from ``{name: labels}`` and ``{(s, uc, ua): [(s2, p[, durations])]}``.

    Unlisted (state, uc, ua) triples self-loop with the first duration.
    ``actions`` overrides the action lists of single states.
    """
    actions = actions or {}
    docs, trans = [], []
    for name, labels in states.items():
        da, aa = actions.get(name, (defender, adversary))
        docs.append({"name": name, "labels": sorted(labels), "defender_actions": list(da), "adversary_actions": list(aa)})
        for uc in da:
            for ua in aa:
                for item in moves.get((name, uc, ua), [(name, 1)]):
                    t = {"from": name, "uc": uc, "ua": ua, "to": item[0], "p": str(item[1]) if exact else float_of(item[1])}
                    if len(item) > 2:
                        t["durations"] = item[2]
                    elif len(durations) > 1:
                        t["durations"] = {str(durations[0]): 1}
                    trans.append(t)
    props = sorted({p for labels in states.values() for p in labels} | {"a", "b", "g", "bad"})
    return game_from_dict({"states": docs, "initial": initial or next(iter(states)), "propositions": props,
                           "durations": list(durations), "transitions": trans, "exact": exact})


def float_of(x) -> float:
    from fractions import Fraction

    return float(Fraction(x)) if isinstance(x, str) else float(x)


@dataclass
class Case:
    name: str
    game: DurationalStochasticGame
    spec: str
    threshold: Optional[int] = 2


def small_cases() -> list[Case]:
    c: list[Case] = []
    # 1: reach a goal; jamming lowers the success rate of "go"
    c.append(Case("reach", make_game(
        {"s": set(), "g": {"g"}},
        {("s", "go", "ok"): [("g", 0.8), ("s", 0.2)], ("s", "go", "jam"): [("g", 0.3), ("s", 0.7)],
         ("s", "wait", "ok"): [("g", 0.4), ("s", 0.6)], ("s", "wait", "jam"): [("g", 0.5), ("s", 0.5)]}),
        "F[0,3] g"))
    # 2: the same structure with exact rational kernels
    c.append(Case("reach_exact", make_game(
        {"s": set(), "g": {"g"}},
        {("s", "go", "ok"): [("g", "3/4"), ("s", "1/4")], ("s", "go", "jam"): [("g", "1/3"), ("s", "2/3")],
         ("s", "wait", "ok"): [("g", "1/2"), ("s", "1/2")], ("s", "wait", "jam"): [("g", "1/2"), ("s", "1/2")]},
        exact=True), "F[0,4] g"))
    # 3: safety against a risky shortcut
    c.append(Case("safety", make_game(
        {"s": set(), "t": set(), "x": {"bad"}},
        {("s", "go", "ok"): [("t", 0.9), ("x", 0.1)], ("s", "go", "jam"): [("t", 0.6), ("x", 0.4)],
         ("s", "wait", "ok"): [("s", 0.95), ("x", 0.05)], ("s", "wait", "jam"): [("s", 0.9), ("x", 0.1)],
         ("t", "go", "jam"): [("t", 0.8), ("x", 0.2)], ("t", "wait", "jam"): [("t", 0.9), ("x", 0.1)]}),
        "G[0,4] !bad"))
    # 4: until with a safe corridor
    c.append(Case("until", make_game(
        {"s": {"a"}, "m": {"a"}, "g": {"g"}, "x": set()},
        {("s", "go", "ok"): [("m", 0.7), ("x", 0.3)], ("s", "go", "jam"): [("m", 0.4), ("x", 0.6)],
         ("s", "wait", "ok"): [("s", 0.5), ("m", 0.5)], ("s", "wait", "jam"): [("s", 0.7), ("x", 0.3)],
         ("m", "go", "ok"): [("g", 0.9), ("m", 0.1)], ("m", "go", "jam"): [("g", 0.5), ("x", 0.5)],
         ("m", "wait", "ok"): [("g", 0.3), ("m", 0.7)], ("m", "wait", "jam"): [("g", 0.3), ("m", 0.7)]}),
        "a U[0,4] g"))
    # 5: stochastic durations
    c.append(Case("durations", make_game(
        {"s": set(), "g": {"g"}},
        {("s", "go", "ok"): [("g", 0.6, {"1": 0.5, "2": 0.5}), ("s", 0.4, {"1": 1})],
         ("s", "go", "jam"): [("g", 0.6, {"2": 1}), ("s", 0.4, {"1": 1})],
         ("s", "wait", "ok"): [("g", 0.3, {"1": 1}), ("s", 0.7, {"1": 1})],
         ("s", "wait", "jam"): [("g", 0.3, {"1": 1}), ("s", 0.7, {"1": 1})]}, durations=(1, 2)),
        "F[0,3] g"))
    # 6: two deadlines, two clocks
    c.append(Case("two_goals", make_game(
        {"s": set(), "p": {"a"}, "q": {"b"}},
        {("s", "go", "ok"): [("p", 0.7), ("s", 0.3)], ("s", "go", "jam"): [("p", 0.4), ("s", 0.6)],
         ("s", "wait", "ok"): [("s", 1.0)], ("s", "wait", "jam"): [("p", 0.2), ("s", 0.8)],
         ("p", "go", "ok"): [("q", 0.8), ("p", 0.2)], ("p", "go", "jam"): [("q", 0.5), ("s", 0.5)],
         ("p", "wait", "ok"): [("p", 1.0)], ("p", "wait", "jam"): [("p", 1.0)],
         ("q", "go", "ok"): [("q", 1.0)], ("q", "wait", "jam"): [("s", 0.5), ("q", 0.5)]}),
        "F[0,3] a & F[1,5] b"))
    # 7: either of two goals
    c.append(Case("either", make_game(
        {"s": set(), "p": {"a"}, "q": {"b"}},
        {("s", "go", "ok"): [("p", 0.5), ("s", 0.5)], ("s", "go", "jam"): [("s", 1.0)],
         ("s", "wait", "ok"): [("s", 0.8), ("q", 0.2)], ("s", "wait", "jam"): [("q", 0.4), ("s", 0.6)],
         ("p", "go", "jam"): [("s", 1.0)], ("q", "wait", "ok"): [("s", 1.0)]}),
        "F[0,2] a | F[1,3] b"))
    # 8: invariant on a window that opens later
    c.append(Case("late_window", make_game(
        {"s": set(), "h": {"a"}, "x": set()},
        {("s", "go", "ok"): [("h", 0.9), ("s", 0.1)], ("s", "go", "jam"): [("h", 0.5), ("x", 0.5)],
         ("s", "wait", "ok"): [("h", 0.5), ("s", 0.5)], ("s", "wait", "jam"): [("h", 0.4), ("s", 0.6)],
         ("h", "go", "ok"): [("h", 0.9), ("x", 0.1)], ("h", "go", "jam"): [("h", 0.7), ("x", 0.3)],
         ("h", "wait", "ok"): [("h", 0.95), ("s", 0.05)], ("h", "wait", "jam"): [("h", 0.85), ("s", 0.15)]}),
        "G[2,4] a"))
    # 9: visit inside a window that does not start at zero
    c.append(Case("window_reach", make_game(
        {"s": set(), "g": {"g"}},
        {("s", "go", "ok"): [("g", 0.5), ("s", 0.5)], ("s", "go", "jam"): [("g", 0.2), ("s", 0.8)],
         ("g", "go", "ok"): [("s", 1.0)], ("g", "go", "jam"): [("s", 1.0)],
         ("g", "wait", "jam"): [("s", 0.4), ("g", 0.6)]}),
        "F[2,4] g"))
    # 10: implication between two obligations
    c.append(Case("implication", make_game(
        {"s": set(), "p": {"a"}, "q": {"b"}},
        {("s", "go", "ok"): [("p", 0.6), ("s", 0.4)], ("s", "go", "jam"): [("p", 0.8), ("s", 0.2)],
         ("s", "wait", "ok"): [("p", 0.3), ("s", 0.7)], ("s", "wait", "jam"): [("p", 0.5), ("s", 0.5)],
         ("p", "go", "ok"): [("q", 0.7), ("p", 0.3)], ("p", "go", "jam"): [("q", 0.3), ("p", 0.7)],
         ("p", "wait", "ok"): [("p", 0.5), ("q", 0.5)], ("p", "wait", "jam"): [("p", 0.6), ("q", 0.4)]}),
        "F[0,2] a -> F[0,4] b"))
    # 11: an absorbing trap next to the goal
    c.append(Case("trap", make_game(
        {"s": set(), "g": {"g"}, "x": {"bad"}},
        {("s", "go", "ok"): [("g", 0.7), ("x", 0.1), ("s", 0.2)], ("s", "go", "jam"): [("g", 0.3), ("x", 0.4), ("s", 0.3)],
         ("s", "wait", "ok"): [("g", 0.2), ("s", 0.8)], ("s", "wait", "jam"): [("g", 0.1), ("s", 0.9)]}),
        "F[0,5] g"))
    # 12: only the adversary acts in the first state
    c.append(Case("adversary_state", make_game(
        {"s": set(), "m": set(), "g": {"g"}},
        {("s", "go", "ok"): [("m", 1.0)], ("s", "go", "jam"): [("m", 0.5), ("s", 0.5)],
         ("m", "go", "ok"): [("g", 0.8), ("m", 0.2)], ("m", "go", "jam"): [("g", 0.4), ("m", 0.6)],
         ("m", "wait", "ok"): [("g", 0.5), ("s", 0.5)], ("m", "wait", "jam"): [("g", 0.6), ("s", 0.4)]},
        actions={"s": (("go",), ("ok", "jam"))}), "F[0,4] g"))
    # 13: the adversary is idle
    c.append(Case("no_adversary", make_game(
        {"s": set(), "m": set(), "g": {"g"}},
        {("s", "go", "ok"): [("m", 0.9), ("s", 0.1)], ("s", "wait", "ok"): [("g", 0.3), ("s", 0.7)],
         ("m", "go", "ok"): [("g", 0.6), ("s", 0.4)], ("m", "wait", "ok"): [("g", 0.2), ("m", 0.8)]},
        adversary=("ok",)), "F[0,4] g"))
    # 14: durations one and three
    c.append(Case("long_steps", make_game(
        {"s": set(), "m": set(), "g": {"g"}},
        {("s", "go", "ok"): [("m", 0.8, {"1": 1}), ("s", 0.2, {"1": 1})],
         ("s", "go", "jam"): [("m", 0.8, {"3": 1}), ("s", 0.2, {"1": 1})],
         ("s", "wait", "ok"): [("g", 0.3, {"3": 1}), ("s", 0.7, {"1": 1})],
         ("s", "wait", "jam"): [("g", 0.3, {"3": 1}), ("s", 0.7, {"1": 1})],
         ("m", "go", "ok"): [("g", 0.9, {"1": 1}), ("m", 0.1, {"1": 1})],
         ("m", "go", "jam"): [("g", 0.5, {"1": 1}), ("s", 0.5, {"1": 1})]}, durations=(1, 3)),
        "F[0,4] g"))
    # 15: a five-state chain with setbacks
    chain = {}
    for k in range(4):
        here, nxt, back = f"c{k}", f"c{k + 1}", f"c{max(k - 1, 0)}"
        chain[(here, "go", "ok")] = [(nxt, 0.8), (back, 0.2)]
        chain[(here, "go", "jam")] = [(nxt, 0.5), (back, 0.5)]
        chain[(here, "wait", "ok")] = [(nxt, 0.4), (here, 0.6)]
        chain[(here, "wait", "jam")] = [(nxt, 0.4), (here, 0.6)]
    c.append(Case("chain", make_game({"c0": set(), "c1": set(), "c2": set(), "c3": set(), "c4": {"g"}}, chain),
                  "F[0,6] g"))
    # 16: negated until
    c.append(Case("negated_until", make_game(
        {"s": {"a"}, "x": {"bad"}, "g": {"g"}},
        {("s", "go", "ok"): [("g", 0.4), ("s", 0.6)], ("s", "go", "jam"): [("x", 0.3), ("s", 0.7)],
         ("s", "wait", "ok"): [("s", 0.9), ("x", 0.1)], ("s", "wait", "jam"): [("s", 0.8), ("x", 0.2)]}),
        "!(a U[1,3] bad)"))
    # 17: a ring whose labels alternate
    c.append(Case("ring", make_game(
        {"r0": {"a"}, "r1": {"b"}, "r2": set()},
        {("r0", "go", "ok"): [("r1", 0.9), ("r2", 0.1)], ("r0", "go", "jam"): [("r1", 0.6), ("r2", 0.4)],
         ("r0", "wait", "ok"): [("r0", 0.8), ("r2", 0.2)], ("r0", "wait", "jam"): [("r0", 0.7), ("r2", 0.3)],
         ("r1", "go", "ok"): [("r0", 0.9), ("r2", 0.1)], ("r1", "go", "jam"): [("r0", 0.5), ("r2", 0.5)],
         ("r1", "wait", "ok"): [("r1", 0.85), ("r2", 0.15)], ("r1", "wait", "jam"): [("r1", 0.8), ("r2", 0.2)],
         ("r2", "go", "ok"): [("r0", 0.5), ("r2", 0.5)], ("r2", "go", "jam"): [("r2", 1.0)],
         ("r2", "wait", "ok"): [("r1", 0.3), ("r2", 0.7)], ("r2", "wait", "jam"): [("r1", 0.3), ("r2", 0.7)]}),
        "G[0,4] (a | b)"))
    # 18: no detection at all
    c.append(Case("no_detection", make_game(
        {"s": set(), "m": {"a"}, "g": {"g"}},
        {("s", "go", "ok"): [("m", 0.7), ("s", 0.3)], ("s", "go", "jam"): [("m", 0.4), ("s", 0.6)],
         ("s", "wait", "ok"): [("m", 0.5), ("s", 0.5)], ("s", "wait", "jam"): [("m", 0.5), ("s", 0.5)],
         ("m", "go", "ok"): [("g", 0.7), ("s", 0.3)], ("m", "go", "jam"): [("g", 0.2), ("s", 0.8)],
         ("m", "wait", "ok"): [("g", 0.4), ("m", 0.6)], ("m", "wait", "jam"): [("g", 0.4), ("m", 0.6)]}),
        "F[0,4] g", threshold=None))
    # 19: reach then hold
    c.append(Case("reach_hold", make_game(
        {"s": set(), "g": {"g"}},
        {("s", "go", "ok"): [("g", 0.7), ("s", 0.3)], ("s", "go", "jam"): [("g", 0.5), ("s", 0.5)],
         ("g", "go", "ok"): [("g", 0.9), ("s", 0.1)], ("g", "go", "jam"): [("g", 0.6), ("s", 0.4)],
         ("g", "wait", "ok"): [("g", 0.8), ("s", 0.2)], ("g", "wait", "jam"): [("g", 0.8), ("s", 0.2)]}),
        "F[0,2] g & G[3,4] g"))
    # 20: three defender actions, mixed strategies matter
    c.append(Case("three_actions", make_game(
        {"s": set(), "g": {"g"}},
        {("s", "left", "ok"): [("g", 0.9), ("s", 0.1)], ("s", "left", "jam"): [("g", 0.1), ("s", 0.9)],
         ("s", "right", "ok"): [("g", 0.1), ("s", 0.9)], ("s", "right", "jam"): [("g", 0.9), ("s", 0.1)],
         ("s", "mid", "ok"): [("g", 0.4), ("s", 0.6)], ("s", "mid", "jam"): [("g", 0.4), ("s", 0.6)]},
        defender=("left", "right", "mid")), "F[0,3] g"))
    return c

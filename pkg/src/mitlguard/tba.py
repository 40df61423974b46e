"""Timed Büchi automata, clock constraints and the bounded-fragment construction.

Edges carry a propositional formula over atoms instead of a single letter; an
edge is enabled by every letter that satisfies it. Valuations are tuples
aligned with ``TimedBuchiAutomaton.clocks``.

Two step functions exist. ``step`` is the exact rational semantics. The
analysis pipeline uses ``step_quantized``, which works on integer valuations
saturated at ``cap`` (largest guard constant plus one).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import (
    InfeasibleRun,
    NondeterministicAutomaton,
    UnknownClock,
    UnsupportedFragment,
    ValidationError,
)
from .mitl import (
    And,
    Atom,
    Formula,
    Implies,
    Interval,
    Not,
    Or,
    TimedWord,
    TrueF,
    Until,
    Verdict,
    atoms,
    conj,
    is_propositional,
    k_and,
    k_not,
    normalize,
    parse_mitl,
    to_fraction,
)

OPS = ("<=", ">=", "<", ">")


@dataclass(frozen=True)
class ClockAtom:
    clock: str
    op: str
    const: Fraction

    def __post_init__(self):
        if self.op not in OPS:
            raise ValidationError(f"bad clock relation {self.op!r}")
        if self.const < 0:
            raise ValidationError(f"clock constant {self.const} is negative")

    def holds(self, x) -> bool:
        if self.op == "<=":
            return x <= self.const
        if self.op == ">=":
            return x >= self.const
        if self.op == "<":
            return x < self.const
        return x > self.const

    def text(self) -> str:
        c = self.const
        cs = str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
        return f"{self.clock} {self.op} {cs}"


@dataclass(frozen=True)
class ClockConstraint:
    """Conjunction of clock atoms; ``is_false`` encodes the literal ⊥."""

    atoms: tuple[ClockAtom, ...] = ()
    is_false: bool = False

    def clocks(self) -> set[str]:
        return {a.clock for a in self.atoms}

    def text(self) -> str:
        if self.is_false:
            return "false"
        if not self.atoms:
            return "true"
        return " & ".join(a.text() for a in self.atoms)


TRUE_GUARD = ClockConstraint()
FALSE_GUARD = ClockConstraint((), True)

_GUARD_ATOM = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(<=|>=|<|>)\s*(\d+(?:\.\d+)?(?:/\d+)?)\s*$")


def parse_constraint(text: str) -> ClockConstraint:
    """Parse ``c1 <= 5 & c1 > 3``, ``true`` or ``false``."""
    text = text.strip()
    if text in ("", "true"):
        return TRUE_GUARD
    if text == "false":
        return FALSE_GUARD
    parts = []
    for chunk in text.split("&"):
        if chunk.strip() == "true":
            continue
        if chunk.strip() == "false":
            return FALSE_GUARD
        m = _GUARD_ATOM.match(chunk)
        if m is None:
            raise ValidationError(f"bad clock constraint {chunk.strip()!r}")
        parts.append(ClockAtom(m.group(1), m.group(2), Fraction(m.group(3))))
    return ClockConstraint(tuple(parts))


def eval_constraint(phi: ClockConstraint, v: Union[Mapping[str, Fraction], Sequence], clocks: Optional[Sequence[str]] = None) -> bool:
    """Evaluate ``phi`` on a valuation given as a mapping or as a tuple plus clock names."""
    if not isinstance(v, Mapping):
        if clocks is None:
            raise UnknownClock("tuple valuations need the clock names")
        v = dict(zip(clocks, v))
    for a in phi.atoms:
        if a.clock not in v:
            raise UnknownClock(f"unknown clock {a.clock!r}")
    if phi.is_false:
        return False
    return all(a.holds(v[a.clock]) for a in phi.atoms)


def letter_holds(f: Formula, letter: frozenset[str]) -> bool:
    """Evaluate a propositional formula on one letter."""
    if isinstance(f, TrueF):
        return True
    if isinstance(f, Atom):
        return f.name in letter
    if isinstance(f, Not):
        return not letter_holds(f.arg, letter)
    if isinstance(f, And):
        return letter_holds(f.left, letter) and letter_holds(f.right, letter)
    if isinstance(f, Or):
        return letter_holds(f.left, letter) or letter_holds(f.right, letter)
    if isinstance(f, Implies):
        return (not letter_holds(f.left, letter)) or letter_holds(f.right, letter)
    raise ValidationError(f"edge letter must be propositional, got {f}")


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    letter: Formula
    resets: frozenset[str]
    guard: ClockConstraint


@dataclass(frozen=True)
class Configuration:
    q: str
    v: tuple


@dataclass(frozen=True)
class TimedBuchiAutomaton:
    states: tuple[str, ...]
    initial: str
    clocks: tuple[str, ...]
    edges: tuple[Edge, ...]
    accepting: frozenset[str]
    props: frozenset[str] = frozenset()
    _out: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        sset = set(self.states)
        if self.initial not in sset:
            raise ValidationError(f"initial state {self.initial!r} is not declared")
        if not self.accepting <= sset:
            raise ValidationError("accepting states must be declared states")
        cset = set(self.clocks)
        used_props = set(self.props)
        for e in self.edges:
            if e.src not in sset or e.dst not in sset:
                raise ValidationError(f"edge {e.src}->{e.dst} references an undeclared state")
            if not e.guard.clocks() <= cset or not e.resets <= cset:
                raise UnknownClock(f"edge {e.src}->{e.dst} references an undeclared clock")
            if not is_propositional(e.letter):
                raise ValidationError(f"edge {e.src}->{e.dst} letter must be propositional")
            if used_props and not atoms(e.letter) <= used_props:
                raise ValidationError(f"edge {e.src}->{e.dst} uses undeclared propositions")
        out: dict[str, list[Edge]] = {q: [] for q in self.states}
        for e in self.edges:
            out[e.src].append(e)
        self._out.update({q: tuple(es) for q, es in out.items()})

    def outgoing(self, q: str) -> tuple[Edge, ...]:
        return self._out[q]

    def edge_props(self) -> set[str]:
        out = set(self.props)
        for e in self.edges:
            out |= atoms(e.letter)
        return out

    def constants(self) -> list[Fraction]:
        return sorted({a.const for e in self.edges for a in e.guard.atoms})

    @property
    def cap(self) -> int:
        """Saturation level for quantized valuations."""
        consts = self.constants()
        top = max(consts) if consts else Fraction(0)
        if top.denominator != 1:
            raise ValidationError("quantized analysis needs integer clock constants")
        return int(top) + 1

    def zero(self) -> tuple:
        return tuple(Fraction(0) for _ in self.clocks)

    def initial_configuration(self) -> Configuration:
        return Configuration(self.initial, self.zero())


def _advance(e: Edge, clocks: Sequence[str], vd: tuple, zero) -> tuple:
    return tuple(zero if c in e.resets else x for c, x in zip(clocks, vd))


def step(cfg: Configuration, a: Iterable[str], delta, A: TimedBuchiAutomaton) -> set[Configuration]:
    """Every configuration reachable by one edge after waiting ``delta``."""
    letter = frozenset(a)
    delta = to_fraction(delta)
    if delta < 0:
        raise ValueError("duration must be non-negative")
    vd = tuple(x + delta for x in cfg.v)
    env = dict(zip(A.clocks, vd))
    out = set()
    for e in A.outgoing(cfg.q):
        if letter_holds(e.letter, letter) and eval_constraint(e.guard, env):
            out.add(Configuration(e.dst, _advance(e, A.clocks, vd, Fraction(0))))
    return out


def step_quantized(A: TimedBuchiAutomaton, q: str, v: tuple[int, ...], letter: frozenset[str], delta: int, cap: int):
    """Deterministic quantized step; returns (q', v') or None when no edge is enabled."""
    vd = tuple(x + delta for x in v)
    env = dict(zip(A.clocks, vd))
    for e in A.outgoing(q):
        if letter_holds(e.letter, letter) and eval_constraint(e.guard, env):
            nv = _advance(e, A.clocks, vd, 0)
            return e.dst, tuple(min(x, cap) for x in nv)
    return None


def saturate(v: tuple, cap) -> tuple:
    return tuple(min(x, cap) for x in v)


def is_accepting(stem: Sequence[tuple], cycle: Sequence[tuple], A: TimedBuchiAutomaton, cap=None) -> bool:
    """Büchi acceptance of a lasso run.

    Each entry is ``(configuration, letter, duration)``: from that
    configuration the automaton reads ``letter`` after ``duration`` and must
    arrive at the next entry's configuration. The last cycle entry must lead
    back to the first cycle entry. When ``cap`` is given valuations are
    compared after saturation at ``cap``.
    """
    seq = list(stem) + list(cycle)
    if not cycle:
        raise InfeasibleRun(len(seq), "lasso needs a non-empty cycle")
    first = seq[0][0]
    if first.q != A.initial or any(x != 0 for x in first.v):
        raise InfeasibleRun(0, "run must start in the initial configuration")
    for i, (cfg, letter, delta) in enumerate(seq):
        target = seq[i + 1][0] if i + 1 < len(seq) else cycle[0][0]
        succ = step(cfg, letter, delta, A)
        if cap is not None:
            succ = {Configuration(c.q, saturate(c.v, cap)) for c in succ}
            target = Configuration(target.q, saturate(target.v, cap))
        if target not in succ:
            raise InfeasibleRun(i)
    return any(cfg.q in A.accepting for cfg, _, _ in cycle)


# ------------------------------------------------------------- determinism

def _region_points(consts: list[Fraction]) -> list[Fraction]:
    pts = [Fraction(0)]
    prev = Fraction(0)
    for c in consts:
        if c > prev:
            pts.append((prev + c) / 2)
        pts.append(c)
        prev = max(prev, c)
    pts.append(prev + 1)
    return sorted(set(pts))


def all_letters(props: Iterable[str]) -> list[frozenset[str]]:
    props = sorted(props)
    return [frozenset(p for p, bit in zip(props, bits) if bit) for bits in itertools.product((0, 1), repeat=len(props))]


def check_deterministic(A: TimedBuchiAutomaton) -> None:
    """Raise if some state, letter and valuation region enables two different moves."""
    pts = _region_points(A.constants())
    letters = all_letters(A.edge_props())
    for q in A.states:
        edges = A.outgoing(q)
        if len(edges) < 2:
            continue
        for letter in letters:
            live = [e for e in edges if letter_holds(e.letter, letter)]
            if len(live) < 2:
                continue
            for v in itertools.product(pts, repeat=len(A.clocks)):
                env = dict(zip(A.clocks, v))
                moves = {(e.dst, e.resets) for e in live if eval_constraint(e.guard, env)}
                if len(moves) > 1:
                    raise NondeterministicAutomaton(
                        f"state {q!r} has several enabled edges on letter {sorted(letter)} at clocks {[str(x) for x in v]}"
                    )


# ---------------------------------------------------- fragment construction

@dataclass(frozen=True)
class _Leaf:
    interval: Interval
    left: Formula
    right: Formula


def _skeleton(f: Formula, leaves: list[_Leaf]):
    """Replace until-leaves by indices; reject anything outside the fragment."""
    if isinstance(f, TrueF):
        return ("true",)
    if isinstance(f, Not):
        return ("not", _skeleton(f.arg, leaves))
    if isinstance(f, And):
        return ("and", _skeleton(f.left, leaves), _skeleton(f.right, leaves))
    if isinstance(f, Until):
        if not (is_propositional(f.left) and is_propositional(f.right)):
            raise UnsupportedFragment(f"nested temporal operators are outside the supported fragment: {f}")
        leaves.append(_Leaf(f.interval, f.left, f.right))
        return ("leaf", len(leaves) - 1)
    if isinstance(f, Atom):
        raise UnsupportedFragment(f"atom {f.name!r} outside any temporal operator is not supported")
    raise UnsupportedFragment(f"unsupported node {f.kind}")


def _kleene(node, status: tuple) -> Optional[bool]:
    tag = node[0]
    if tag == "true":
        return True
    if tag == "not":
        return k_not(_kleene(node[1], status))
    if tag == "and":
        return k_and(_kleene(node[1], status), _kleene(node[2], status))
    s = status[node[1]]
    return None if s == "w" else s == "a"


def _and(a: Formula, b: Formula) -> Formula:
    """Conjunction that drops ``true`` operands."""
    if isinstance(a, TrueF):
        return b
    if isinstance(b, TrueF):
        return a
    return And(a, b)


def _leaf_moves(leaf: _Leaf, clock: str):
    """(letter, guard atoms, next status, late) for a waiting leaf.

    The moves partition letters × clock values. ``late`` marks the
    "right operand holds after the deadline" case.
    """
    p1, p2 = leaf.left, leaf.right
    lo, hi = leaf.interval.lo, leaf.interval.hi
    ge_lo = [ClockAtom(clock, ">=", lo)] if lo > 0 else []
    le_hi = [ClockAtom(clock, "<=", hi)] if hi is not None else []
    moves = [(p2, ge_lo + le_hi, "a", False)]
    moves.append((_and(p1, Not(p2)), le_hi, "w", False))
    moves.append((_and(Not(p1), Not(p2)), [], "r", False))
    if lo > 0:
        moves.append((_and(p1, p2), [ClockAtom(clock, "<", lo)], "w", False))
        moves.append((_and(Not(p1), p2), [ClockAtom(clock, "<", lo)], "r", False))
    if hi is not None:
        moves.append((_and(p1, Not(p2)), [ClockAtom(clock, ">", hi)], "r", False))
        moves.append((p2, [ClockAtom(clock, ">", hi)], "r", True))
    return moves


def _time_feasible(guard: list[ClockAtom]) -> bool:
    """All fragment clocks equal elapsed time, so a conjunction is one interval."""
    lo, lo_strict, hi, hi_strict = Fraction(0), False, None, False
    for a in guard:
        if a.op in (">=", ">"):
            if a.const > lo or (a.const == lo and a.op == ">"):
                lo, lo_strict = a.const, a.op == ">"
        else:
            if hi is None or a.const < hi or (a.const == hi and a.op == "<"):
                hi, hi_strict = a.const, a.op == "<"
    if hi is None:
        return True
    if lo < hi:
        return True
    return lo == hi and not lo_strict and not hi_strict


def _letter_satisfiable(f: Formula) -> bool:
    names = sorted(atoms(f))
    return any(letter_holds(f, letter) for letter in all_letters(names))


def tba_from_fragment(f: Formula, props: Optional[Iterable[str]] = None) -> TimedBuchiAutomaton:
    """Deterministic TBA for a Boolean combination of bounded until-leaves.

    After normalization the formula must be a Boolean combination of ``true``
    and ``φ1 U[a,b] φ2`` with propositional operands. Each leaf gets a fresh
    clock that is never reset. The automaton tracks each leaf as waiting,
    accepted or rejected and collapses into the ``acc``/``rej`` sinks as soon
    as the Boolean verdict is decided.
    """
    leaves: list[_Leaf] = []
    skel = _skeleton(normalize(f), leaves)
    clocks = tuple(f"c{i + 1}" for i in range(len(leaves)))
    prop_set = frozenset(props) if props is not None else frozenset(atoms(f))

    def name(status: tuple) -> str:
        verdict = _kleene(skel, status)
        if verdict is True:
            return "acc"
        if verdict is False:
            return "rej"
        if all(s == "w" for s in status):
            return "q0"
        return "q_" + "".join(status)

    start = tuple("w" for _ in leaves)
    init = name(start)
    edges: list[Edge] = []
    seen = {init}
    order = [init]
    queue = [start] if init not in ("acc", "rej") else []
    while queue:
        status = queue.pop(0)
        src = name(status)
        waiting = [i for i, s in enumerate(status) if s == "w"]
        per_leaf = [_leaf_moves(leaves[i], clocks[i]) for i in waiting]
        for combo in itertools.product(*per_leaf):
            guard = [a for m in combo for a in m[1]]
            if not _time_feasible(guard):
                continue
            letter = conj(m[0] for m in combo if not isinstance(m[0], TrueF))
            if not _letter_satisfiable(letter):
                continue
            nxt = list(status)
            for i, m in zip(waiting, combo):
                nxt[i] = m[2]
            nxt = tuple(nxt)
            dst = name(nxt)
            if dst == "rej" and any(m[3] for m in combo):
                continue
            edges.append(Edge(src, dst, letter, frozenset(), ClockConstraint(tuple(guard))))
            if dst not in seen:
                seen.add(dst)
                order.append(dst)
                if dst not in ("acc", "rej"):
                    queue.append(nxt)
    for sink in ("acc", "rej"):
        if sink not in seen:
            order.append(sink)
        edges.append(Edge(sink, sink, TrueF(), frozenset(), TRUE_GUARD))
    return TimedBuchiAutomaton(
        states=tuple(order), initial=init, clocks=clocks, edges=tuple(edges),
        accepting=frozenset({"acc"}), props=prop_set | frozenset(a for lf in leaves for a in atoms(lf.left) | atoms(lf.right)),
    )


# ------------------------------------------------------- explicit automata

def tba_from_dict(d: Mapping, props: Optional[Iterable[str]] = None) -> TimedBuchiAutomaton:
    """Build an explicit automaton from its model-file form and check determinism."""
    try:
        edges = tuple(
            Edge(
                str(e["src"]), str(e["dst"]),
                parse_mitl(str(e.get("letter", "true")), props),
                frozenset(e.get("resets", [])),
                parse_constraint(str(e.get("guard", "true"))),
            )
            for e in d["edges"]
        )
        A = TimedBuchiAutomaton(
            states=tuple(d["states"]), initial=str(d["initial"]), clocks=tuple(d.get("clocks", [])),
            edges=edges, accepting=frozenset(d["accepting"]),
            props=frozenset(props) if props is not None else frozenset(),
        )
    except KeyError as exc:
        raise ValidationError(f"explicit automaton is missing field {exc.args[0]!r}") from None
    check_deterministic(A)
    return A


def tba_to_dict(A: TimedBuchiAutomaton) -> dict:
    from .mitl import to_text

    return {
        "states": list(A.states),
        "initial": A.initial,
        "clocks": list(A.clocks),
        "accepting": sorted(A.accepting),
        "edges": [
            {"src": e.src, "dst": e.dst, "letter": to_text(e.letter), "resets": sorted(e.resets), "guard": e.guard.text()}
            for e in A.edges
        ],
    }


# ---------------------------------------------------- finite-word verdicts

def run_word(A: TimedBuchiAutomaton, w: TimedWord) -> Optional[Configuration]:
    """Exact run over the prefix; None when the run gets stuck."""
    cfg = A.initial_configuration()
    prev = Fraction(0)
    for letter, t in zip(w.letters, w.times):
        succ = step(cfg, letter, t - prev, A)
        if not succ:
            return None
        if len(succ) > 1:
            raise NondeterministicAutomaton("run_word needs a deterministic automaton")
        (cfg,) = succ
        prev = t
    return cfg


def word_verdict(A: TimedBuchiAutomaton, w: TimedWord) -> Verdict:
    """Acceptance verdict stable under all extensions of ``w`` past its horizon.

    The run is replayed exactly, then continuations are explored on the
    region graph of elapsed time. This is exact for automata whose clocks are
    never reset, which covers every fragment automaton.
    """
    if any(e.resets for e in A.edges):
        raise ValidationError("word_verdict supports automata without clock resets")
    cfg = run_word(A, w)
    if cfg is None:
        return Verdict.VIOLATED
    points = sorted({Fraction(0)} | set(A.constants()))
    # regions of elapsed time alternate between constants and open gaps
    regions: list[tuple[str, Fraction]] = []
    for i, p in enumerate(points):
        regions.append(("pt", p))
        nxt = points[i + 1] if i + 1 < len(points) else p + 2
        regions.append(("open", (p + nxt) / 2))
    last = len(regions) - 1

    def region_of(t: Fraction) -> int:
        for i, p in enumerate(points):
            if t == p:
                return 2 * i
            if i + 1 == len(points) or t < points[i + 1]:
                return 2 * i + 1
        raise AssertionError("region lookup failed")

    letters = all_letters(A.edge_props())
    start = (cfg.q, region_of(w.horizon))
    graph: dict = {}
    stuck = set()
    todo = [start]
    while todo:
        node = todo.pop()
        if node in graph:
            continue
        q, r = node
        succ = set()
        nxt_regions = [r] if regions[r][0] == "open" else []
        nxt_regions += list(range(r + 1, len(regions)))
        for r2 in nxt_regions:
            rep = regions[r2][1]
            env = {c: rep for c in A.clocks}
            for letter in letters:
                dests = [e.dst for e in A.outgoing(q) if letter_holds(e.letter, letter) and eval_constraint(e.guard, env)]
                if not dests:
                    stuck.add(node)
                for d in dests:
                    succ.add((d, r2))
        graph[node] = succ
        todo.extend(s for s in succ if s not in graph)

    def on_cycle(nodes: set) -> set:
        """Nodes lying on a cycle inside ``nodes``."""
        from .gamec import strongly_connected_components

        order = sorted(nodes, key=repr)
        idx = {n: i for i, n in enumerate(order)}
        adj = [[idx[s] for s in sorted(graph[n], key=repr) if s in idx] for n in order]
        out = set()
        for comp in strongly_connected_components(adj):
            if len(comp) > 1 or comp[0] in adj[comp[0]]:
                out |= {order[i] for i in comp}
        return out

    # progressive continuations spend forever in the unbounded last region
    tail = {n for n in graph if n[1] == last}
    tail_acc = {n for n in tail if n[0] in A.accepting}
    can_accept = bool(tail_acc & on_cycle(tail))
    can_reject = bool(stuck) or bool(on_cycle(tail - tail_acc))
    if can_accept and not can_reject:
        return Verdict.SATISFIED
    if can_reject and not can_accept:
        return Verdict.VIOLATED
    return Verdict.INCONCLUSIVE

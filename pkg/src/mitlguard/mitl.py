"""MITL formulas: parsing, printing, normalization and finite-prefix evaluation.

Formulas are immutable trees of frozen dataclasses. Interval endpoints and
timestamps are exact ``Fraction`` values, so interval membership never needs
a tolerance.

Evaluation follows the point-based semantics over a finite prefix of a timed
word and returns one of three verdicts. ``SATISFIED`` and ``VIOLATED`` are
stable under every extension of the word beyond its horizon; ``INCONCLUSIVE``
means the horizon is too short to decide.
"""

from __future__ import annotations

import enum
import re
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Union

from .errors import EmptyInterval, MitlSyntaxError, UndeclaredAtom

Number = Union[int, Fraction, str]


def to_fraction(x: Number) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi]; ``hi is None`` means unbounded."""

    lo: Fraction
    hi: Optional[Fraction]

    def __post_init__(self):
        if self.lo < 0:
            raise EmptyInterval(f"interval lower bound {self.lo} is negative")
        if self.hi is not None and not self.lo < self.hi:
            raise EmptyInterval(f"interval [{self.lo},{self.hi}] needs lower < upper")

    @classmethod
    def of(cls, lo: Number, hi: Optional[Number]) -> "Interval":
        return cls(to_fraction(lo), None if hi is None else to_fraction(hi))

    def contains(self, d: Fraction) -> bool:
        return d >= self.lo and (self.hi is None or d <= self.hi)

    def text(self) -> str:
        hi = "inf" if self.hi is None else _num_text(self.hi)
        return f"[{_num_text(self.lo)},{hi}]"


class Formula:
    """Base class for formula nodes."""

    kind: str = ""

    @property
    def children(self) -> tuple["Formula", ...]:
        return ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class TrueF(Formula):
    kind = "True"


@dataclass(frozen=True)
class Atom(Formula):
    name: str
    kind = "Atom"


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula
    kind = "Not"

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula
    kind = "And"

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula
    kind = "Or"

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula
    kind = "Implies"

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Until(Formula):
    interval: Interval
    left: Formula
    right: Formula
    kind = "Until"

    @property
    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Eventually(Formula):
    interval: Interval
    arg: Formula
    kind = "Eventually"

    @property
    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Always(Formula):
    interval: Interval
    arg: Formula
    kind = "Always"

    @property
    def children(self):
        return (self.arg,)


TEMPORAL = (Until, Eventually, Always)


def false() -> Formula:
    return Not(TrueF())


def conj(parts: Iterable[Formula]) -> Formula:
    out = None
    for p in parts:
        out = p if out is None else And(out, p)
    return TrueF() if out is None else out


def disj(parts: Iterable[Formula]) -> Formula:
    out = None
    for p in parts:
        out = p if out is None else Or(out, p)
    return false() if out is None else out


def atoms(f: Formula) -> set[str]:
    if isinstance(f, Atom):
        return {f.name}
    out: set[str] = set()
    for c in f.children:
        out |= atoms(c)
    return out


def is_propositional(f: Formula) -> bool:
    if isinstance(f, TEMPORAL):
        return False
    return all(is_propositional(c) for c in f.children)


def horizon_bound(f: Formula) -> Optional[Fraction]:
    """Largest nesting sum of interval upper bounds; None if unbounded."""
    sub = Fraction(0)
    for c in f.children:
        h = horizon_bound(c)
        if h is None:
            return None
        sub = max(sub, h)
    if isinstance(f, TEMPORAL):
        if f.interval.hi is None:
            return None
        return sub + f.interval.hi
    return sub


# ---------------------------------------------------------------- printing

def _num_text(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _wrapped(f: Formula) -> str:
    s = to_text(f)
    return s if isinstance(f, (Atom, TrueF)) else f"({s})"


def to_text(f: Formula) -> str:
    """Concrete syntax accepted by ``parse_mitl``; binary nodes are parenthesized."""
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Not):
        return "!" + _wrapped(f.arg)
    if isinstance(f, And):
        return f"{_wrapped(f.left)} & {_wrapped(f.right)}"
    if isinstance(f, Or):
        return f"{_wrapped(f.left)} | {_wrapped(f.right)}"
    if isinstance(f, Implies):
        return f"{_wrapped(f.left)} -> {_wrapped(f.right)}"
    if isinstance(f, Until):
        return f"{_wrapped(f.left)} U{f.interval.text()} {_wrapped(f.right)}"
    if isinstance(f, Eventually):
        return f"F{f.interval.text()} {_wrapped(f.arg)}"
    if isinstance(f, Always):
        return f"G{f.interval.text()} {_wrapped(f.arg)}"
    raise TypeError(f"not a formula: {f!r}")


# ----------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>\d+(?:\.\d+)?(?:/\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>->|<=|>=|[()!&|\[\],<>-])"
)

_CMP_NAMES = {"<=": "le", ">=": "ge", "<": "lt", ">": "gt"}
KEYWORDS = {"U", "F", "G", "true", "false", "inf"}


def comparison_atom_name(var: str, op: str, value: str) -> str:
    """Canonical atom name for a comparison such as ``x2 <= 10``."""
    v = value.replace(".", "p").replace("/", "d").replace("-", "m")
    return f"{var}_{_CMP_NAMES[op]}_{v}"


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise MitlSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        else:
            for i, ch in enumerate(m.group()):
                if ch == "\n":
                    line += 1
                    line_start = pos + i + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


@dataclass
class _Parser:
    toks: list[_Tok]
    props: Optional[frozenset[str]]
    i: int = 0
    seen: list[str] = field(default_factory=list)

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.peek()
        raise MitlSyntaxError(msg, tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if t.text != text:
            self.fail(f"expected {text!r}, found {t.text or 'end of input'!r}")
        return self.next()

    def formula(self) -> Formula:
        f = self.implies()
        if self.peek().kind != "eof":
            self.fail(f"unexpected {self.peek().text!r}")
        return f

    def implies(self) -> Formula:
        left = self.disj()
        if self.peek().text == "->":
            self.next()
            return Implies(left, self.implies())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek().text == "|":
            self.next()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.until()
        while self.peek().text == "&":
            self.next()
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        left = self.unary()
        if self.peek().text == "U":
            self.next()
            iv = self.interval()
            return Until(iv, left, self.until())
        return left

    def unary(self) -> Formula:
        t = self.peek()
        if t.text == "!":
            self.next()
            return Not(self.unary())
        if t.text in ("F", "G"):
            self.next()
            iv = self.interval()
            arg = self.unary()
            return Eventually(iv, arg) if t.text == "F" else Always(iv, arg)
        return self.primary()

    def number(self) -> Fraction:
        t = self.peek()
        if t.kind != "num":
            self.fail(f"expected a number, found {t.text or 'end of input'!r}")
        self.next()
        return Fraction(t.text)

    def interval(self) -> Interval:
        start = self.expect("[")
        lo = self.number()
        self.expect(",")
        if self.peek().text == "inf":
            self.next()
            hi = None
        else:
            hi = self.number()
        self.expect("]")
        if hi is not None and not lo < hi:
            raise EmptyInterval(
                f"empty interval [{_num_text(lo)},{_num_text(hi)}] at line {start.line}, column {start.col}"
            )
        return Interval(lo, hi)

    def primary(self) -> Formula:
        t = self.peek()
        if t.text == "(":
            self.next()
            f = self.implies()
            self.expect(")")
            return f
        if t.text == "true":
            self.next()
            return TrueF()
        if t.text == "false":
            self.next()
            return false()
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.next()
            name = t.text
            if self.peek().text in _CMP_NAMES:
                op = self.next().text
                neg = ""
                if self.peek().text == "-":
                    self.next()
                    neg = "-"
                name = comparison_atom_name(name, op, neg + self.number_text())
            if self.props is not None and name not in self.props:
                raise UndeclaredAtom(f"undeclared atom {name!r} at line {t.line}, column {t.col}")
            return Atom(name)
        self.fail(f"unexpected {t.text or 'end of input'!r}")

    def number_text(self) -> str:
        t = self.peek()
        if t.kind != "num":
            self.fail("expected a number after comparison")
        self.next()
        return t.text


def parse_mitl(text: str, propositions: Optional[Iterable[str]] = None) -> Formula:
    """Parse concrete syntax into a formula tree.

    ``propositions`` restricts which atom names are accepted; pass None to
    accept any identifier.
    """
    props = None if propositions is None else frozenset(propositions)
    return _Parser(_tokenize(text), props).formula()


# ----------------------------------------------------------- normalization

def normalize(f: Formula) -> Formula:
    """Rewrite into the core grammar {true, atom, !, &, U}."""
    if isinstance(f, (TrueF, Atom)):
        return f
    if isinstance(f, Not):
        return Not(normalize(f.arg))
    if isinstance(f, And):
        return And(normalize(f.left), normalize(f.right))
    if isinstance(f, Or):
        return Not(And(Not(normalize(f.left)), Not(normalize(f.right))))
    if isinstance(f, Implies):
        return Not(And(normalize(f.left), Not(normalize(f.right))))
    if isinstance(f, Until):
        return Until(f.interval, normalize(f.left), normalize(f.right))
    if isinstance(f, Eventually):
        return Until(f.interval, TrueF(), normalize(f.arg))
    if isinstance(f, Always):
        return Not(Until(f.interval, TrueF(), Not(normalize(f.arg))))
    raise TypeError(f"not a formula: {f!r}")


# -------------------------------------------------------------- evaluation

class Verdict(enum.Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    INCONCLUSIVE = "inconclusive"

    @classmethod
    def of(cls, b: Optional[bool]) -> "Verdict":
        if b is None:
            return cls.INCONCLUSIVE
        return cls.SATISFIED if b else cls.VIOLATED


def k_not(a: Optional[bool]) -> Optional[bool]:
    return None if a is None else not a


def k_and(a: Optional[bool], b: Optional[bool]) -> Optional[bool]:
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def k_or(a: Optional[bool], b: Optional[bool]) -> Optional[bool]:
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


@dataclass(frozen=True)
class TimedWord:
    """Finite prefix of a timed word.

    ``horizon`` is the last time covered by the prefix: any extension only
    adds positions strictly after it. It defaults to the last timestamp.
    """

    letters: tuple[frozenset[str], ...]
    times: tuple[Fraction, ...]
    horizon: Fraction

    @classmethod
    def make(cls, pairs: Iterable[tuple[Iterable[str], Number]], horizon: Optional[Number] = None) -> "TimedWord":
        letters, times = [], []
        for letter, t in pairs:
            letters.append(frozenset(letter))
            times.append(to_fraction(t))
        for i, t in enumerate(times):
            if t < 0:
                raise ValueError(f"timestamp {t} at position {i} is negative")
            if i and not t > times[i - 1]:
                raise ValueError(f"timestamps must strictly increase (position {i})")
        if horizon is None:
            h = times[-1] if times else Fraction(0)
        else:
            h = to_fraction(horizon)
            if times and h < times[-1]:
                raise ValueError("horizon precedes the last timestamp")
        return cls(tuple(letters), tuple(times), h)

    def __len__(self) -> int:
        return len(self.times)

    def extend(self, pairs: Iterable[tuple[Iterable[str], Number]], horizon: Optional[Number] = None) -> "TimedWord":
        pairs = list(pairs)
        for _, t in pairs:
            if to_fraction(t) <= self.horizon:
                raise ValueError("extensions may only add positions after the horizon")
        return TimedWord.make(list(zip(self.letters, self.times)) + pairs, horizon)


class _Evaluator:
    def __init__(self, w: TimedWord):
        self.w = w
        self.memo: dict[tuple[int, Fraction], Optional[bool]] = {}

    def ev(self, f: Formula, t: Fraction) -> Optional[bool]:
        key = (id(f), t)
        if key in self.memo:
            return self.memo[key]
        r = self._ev(f, t)
        self.memo[key] = r
        return r

    def _ev(self, f: Formula, t: Fraction) -> Optional[bool]:
        w = self.w
        if isinstance(f, TrueF):
            return True
        if isinstance(f, Atom):
            i = bisect_left(w.times, t)
            if i < len(w.times) and w.times[i] == t:
                return f.name in w.letters[i]
            return False if t <= w.horizon else None
        if isinstance(f, Not):
            return k_not(self.ev(f.arg, t))
        if isinstance(f, And):
            return k_and(self.ev(f.left, t), self.ev(f.right, t))
        if isinstance(f, Or):
            return k_or(self.ev(f.left, t), self.ev(f.right, t))
        if isinstance(f, Implies):
            return k_or(k_not(self.ev(f.left, t)), self.ev(f.right, t))
        if isinstance(f, Until):
            return self._until(f.interval, f.left, f.right, t)
        if isinstance(f, Eventually):
            return self._until(f.interval, None, f.arg, t)
        if isinstance(f, Always):
            return self._always(f.interval, f.arg, t)
        raise TypeError(f"not a formula: {f!r}")

    def _until(self, iv: Interval, left, right, t: Fraction) -> Optional[bool]:
        w = self.w
        res: Optional[bool] = False
        prefix: Optional[bool] = True
        closed = False
        for j in range(bisect_left(w.times, t), len(w.times)):
            tj = w.times[j]
            d = tj - t
            if iv.hi is not None and d > iv.hi:
                closed = True
                break
            if d >= iv.lo:
                res = k_or(res, k_and(prefix, self.ev(right, tj)))
                if res is True:
                    return True
            if left is not None:
                prefix = k_and(prefix, self.ev(left, tj))
                if prefix is False:
                    closed = True
                    break
        if not closed and (iv.hi is None or t + iv.hi > w.horizon):
            res = k_or(res, k_and(prefix, None))
        return res

    def _always(self, iv: Interval, arg: Formula, t: Fraction) -> Optional[bool]:
        w = self.w
        res: Optional[bool] = True
        for j in range(bisect_left(w.times, t), len(w.times)):
            d = w.times[j] - t
            if iv.hi is not None and d > iv.hi:
                break
            if d >= iv.lo:
                res = k_and(res, self.ev(arg, w.times[j]))
                if res is False:
                    return False
        if iv.hi is None or t + iv.hi > w.horizon:
            res = k_and(res, None)
        return res


def evaluate(f: Formula, w: TimedWord, t: Number = 0) -> Verdict:
    """Three-valued verdict of ``f`` at time ``t`` over the prefix ``w``."""
    t = to_fraction(t)
    if t < 0:
        raise ValueError("reference time must be non-negative")
    return Verdict.of(_Evaluator(w).ev(f, t))

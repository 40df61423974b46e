"""End-to-end synthesis: automaton, product, global game, components, values, policy."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dsg import DurationalStochasticGame
from .fsc import ControllerStructure, FiniteStateController
from .gamec import GamecSet, compute_gamecs
from .gdsg import GlobalGame, adversary_free, build_global
from .mitl import Formula
from .product import ProductGame, build_product
from .solver import ExtractedPolicy, VIResult, extract_policy, perturbed_start, target_mask, value_iteration
from .tba import TimedBuchiAutomaton, tba_from_fragment


@dataclass
class Synthesis:
    spec: Formula
    tba: TimedBuchiAutomaton
    product: ProductGame
    structure: ControllerStructure
    kappa_max: int
    game: GlobalGame
    gamecs: GamecSet
    targets: np.ndarray
    vi: VIResult
    policy: ExtractedPolicy
    timings: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return float(self.vi.values[self.game.initial])

    @property
    def controller(self) -> FiniteStateController:
        return self.policy.controller


class _Clock:
    def __init__(self):
        self.timings: dict = {}
        self._t = time.perf_counter()

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        self.timings[name] = round(now - self._t, 6)
        self._t = now


@dataclass
class Prepared:
    spec: Formula
    tba: TimedBuchiAutomaton
    product: ProductGame
    structure: ControllerStructure
    kappa_max: int
    game: GlobalGame
    gamecs: GamecSet
    targets: np.ndarray
    timings: dict = field(default_factory=dict)


def prepare(g: DurationalStochasticGame, spec: Formula, fsc_size: Optional[int] = None, threshold: Optional[int] = 2,
            kappa_max: int = 2, targets: str = "gamec", tba: Optional[TimedBuchiAutomaton] = None,
            clock: Optional[_Clock] = None) -> Prepared:
    """Automaton, product, global game, components and target set.

    ``tba`` overrides the automaton built from the formula fragment.
    """
    clock = clock or _Clock()
    A = tba if tba is not None else tba_from_fragment(spec, g.props)
    clock.lap("automaton")
    p = build_product(g, A)
    clock.lap("product")
    st = ControllerStructure.from_size(fsc_size, threshold)
    z = build_global(p, st, kappa_max)
    clock.lap("global")
    gs = compute_gamecs(z)
    mask = target_mask(z, targets, gs)
    clock.lap("gamecs")
    return Prepared(spec, A, p, st, kappa_max, z, gs, mask, clock.timings)


def synthesize(g: DurationalStochasticGame, spec: Formula, fsc_size: Optional[int] = None, threshold: Optional[int] = 2,
               kappa_max: int = 2, eps: float = 1e-6, targets: str = "gamec", threads: int = 1,
               tba: Optional[TimedBuchiAutomaton] = None) -> Synthesis:
    """Run the full pipeline on ``g`` for ``spec``."""
    clock = _Clock()
    pr = prepare(g, spec, fsc_size, threshold, kappa_max, targets, tba, clock)
    vi = value_iteration(pr.game, pr.targets, eps, threads=threads)
    clock.lap("value_iteration")
    pol = extract_policy(pr.game, vi.values, pr.targets, pr.structure, len(pr.tba.clocks), pr.gamecs, threads)
    clock.lap("extraction")
    return Synthesis(spec, pr.tba, pr.product, pr.structure, kappa_max, pr.game, pr.gamecs, pr.targets, vi, pol,
                     clock.timings)


def uniqueness_gap(syn: Synthesis, eps: float, threads: int = 1) -> float:
    """Sup-norm distance between runs from the default start and a second admissible start."""
    init = perturbed_start(syn.game, syn.targets, threads=threads)
    other = value_iteration(syn.game, syn.targets, eps, init=init, threads=threads)
    return float(np.abs(other.values - syn.vi.values).max())


def oblivious_policy(syn: "Prepared | Synthesis", eps: float = 1e-6, threads: int = 1) -> ExtractedPolicy:
    """Controller synthesized as if the adversary never touched the actuators.

    The tables cover every state of the attack-aware game, so the result can
    be replayed against any adversary on the real game.
    """
    zf = adversary_free(syn.game, syn.product.dsg.passive)
    gs = compute_gamecs(zf)
    mask = target_mask(zf, "gamec", gs)
    vi = value_iteration(zf, mask, eps, threads=threads)
    return extract_policy(zf, vi.values, mask, syn.structure, len(syn.tba.clocks), gs, threads)

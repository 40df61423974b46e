"""Built-in benchmark models: a signalized traffic network and a two-tank system.

Traffic: ten queue-bearing links feed four intersections. Each intersection
actuates one of two link subsets per tick (phase A holds the link with the
intersection's number). An actuator attack on an intersection swaps the
actuated subset, so the TMC's choice is not the one realized. Only links 2,
3 and 4 are tracked by the abstraction; the other links are resampled
within their capacity at every sample.

Two-tank: x(k+1) = A x(k) + B (u_C + s_A u_A) + w(k), with tank 1 pumped and
draining into tank 2. A and B are calibration values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dsg import (AbstractionRequest, DurationalStochasticGame, DynamicsOracle, InputSet, LabelAtom, Partition,
                  build_abstraction)
from .errors import ValidationError
from .fsc import FiniteStateController
from .gdsg import GlobalGame, GlobalKey
from .mitl import Formula, parse_mitl
from .sim import Adversary, Rollout

REFERENCE_TRAFFIC_VALUES = {"phi1": 0.723, "phi2": 0.371, "phi3": 0.333}


# ---------------------------------------------------------------- traffic

@dataclass
class TrafficNetworkConfig:
    capacities: list[float] = field(default_factory=lambda: [30.0] * 5 + [40.0] * 5)
    flow_rates: list[float] = field(default_factory=lambda: [10.0] * 4 + [5.0] * 6)
    # (from link, to link) -> turn ratio; links are numbered from 1
    turn_ratios: dict = field(default_factory=lambda: {
        (1, 2): 0.3, (2, 3): 0.5, (3, 4): 0.5, (5, 2): 0.5, (6, 2): 0.5, (7, 3): 0.5, (8, 4): 0.5})
    supply_ratio: float = 1.0
    arrival_means: list[float] = field(default_factory=lambda: [5.0, 0, 0, 0, 5.0, 5.0, 0, 0, 5.0, 5.0])
    # per intersection: (phase A links, phase B links)
    intersections: list = field(default_factory=lambda: [([1], [5, 6]), ([2], [7]), ([3], [8]), ([4], [9, 10])])
    horizon: int = 5
    tracked: list[int] = field(default_factory=lambda: [2, 3, 4])
    bins: int = 3
    initial_levels: list[float] = field(default_factory=lambda: [15.0, 15.0, 15.0])
    threshold: float = 10.0
    samples_per_cell: int = 400
    seed: int = 0

    def validate(self) -> None:
        L = len(self.capacities)
        if len(self.flow_rates) != L or len(self.arrival_means) != L:
            raise ValidationError("traffic: capacities, flow_rates and arrival_means need one entry per link")
        if any(c <= 0 for c in self.capacities):
            raise ValidationError("traffic: capacities must be positive")
        if not 0 <= self.supply_ratio <= 1:
            raise ValidationError("traffic: supply_ratio must lie in [0, 1]")
        for (a, b), g in self.turn_ratios.items():
            if not (1 <= a <= L and 1 <= b <= L) or not 0 <= g <= 1:
                raise ValidationError(f"traffic: bad turn ratio {(a, b)}: {g}")
        for n, (pa, pb) in enumerate(self.intersections):
            if not pa or not pb or set(pa) & set(pb):
                raise ValidationError(f"traffic: intersection {n + 1} needs two disjoint non-empty phases")
        if len(self.initial_levels) != len(self.tracked):
            raise ValidationError("traffic: one initial level per tracked link")

    @property
    def n_links(self) -> int:
        return len(self.capacities)

    @property
    def axes(self) -> list[str]:
        return [f"x{l}" for l in self.tracked]


def _phase_code(bits: Sequence[int]) -> str:
    return "".join("AB"[b] for b in bits)


def _attack_code(bits: Sequence[int]) -> str:
    return "".join(str(b) for b in bits)


def traffic_actions(cfg: TrafficNetworkConfig) -> tuple[list[str], list[str]]:
    """Defender actions are phase strings ("ABAA"), adversary actions attack masks ("0100")."""
    n = len(cfg.intersections)
    combos = list(itertools.product((0, 1), repeat=n))
    return [_phase_code(c) for c in combos], [_attack_code(c) for c in combos]


def realized_phases(uc: str, ua: str) -> str:
    """An attacked intersection actuates the phase the TMC did not choose."""
    return "".join(("B" if p == "A" else "A") if a == "1" else p for p, a in zip(uc, ua))


class TrafficOracle(DynamicsOracle):
    """Queue dynamics of the network on the full link state.

    An actuated link discharges min(x_l, c_l, α(x̄_l′ − x_l′)/γ_ll′ over
    downstream l′). A fraction γ_ll′ of the discharge joins l′, the rest
    leaves the network. Poisson arrivals are then added and truncated at
    the residual capacity.
    """

    def __init__(self, cfg: TrafficNetworkConfig):
        cfg.validate()
        self.cfg = cfg
        L = cfg.n_links
        self.state_dim = L
        self.cap = np.asarray(cfg.capacities, dtype=float)
        self.rate = np.asarray(cfg.flow_rates, dtype=float)
        self.gamma = np.zeros((L, L))
        for (a, b), g in cfg.turn_ratios.items():
            self.gamma[a - 1, b - 1] = g
        self.means = np.asarray(cfg.arrival_means, dtype=float)
        self.tracked = np.asarray(cfg.tracked, dtype=int) - 1
        n = len(cfg.intersections)
        # phase_links[n, phase] -> boolean mask over links
        self.phase_links = np.zeros((n, 2, L), dtype=bool)
        for k, (pa, pb) in enumerate(cfg.intersections):
            self.phase_links[k, 0, np.asarray(pa) - 1] = True
            self.phase_links[k, 1, np.asarray(pb) - 1] = True

    def actuated(self, phases: np.ndarray) -> np.ndarray:
        """(N, L) mask of actuated links from (N, intersections) realized phase bits (0 = A)."""
        n = phases.shape[1]
        out = np.zeros((len(phases), self.state_dim), dtype=bool)
        for k in range(n):
            out |= self.phase_links[k, phases[:, k].astype(int)]
        return out

    def flows(self, x: np.ndarray, act: np.ndarray) -> np.ndarray:
        """Discharge of every link under the actuation mask."""
        room = self.cfg.supply_ratio * (self.cap - x)
        with np.errstate(divide="ignore", invalid="ignore"):
            lim = np.where(self.gamma[None, :, :] > 0, room[:, None, :] / self.gamma[None, :, :], np.inf)
        supply = lim.min(axis=2)
        out = np.minimum(np.minimum(x, self.rate), supply)
        return np.where(act, np.maximum(out, 0.0), 0.0)

    def advance(self, x: np.ndarray, act: np.ndarray, arrivals: np.ndarray) -> np.ndarray:
        out = self.flows(x, act)
        x2 = x - out + out @ self.gamma
        x2 = np.clip(x2, 0.0, self.cap)
        return np.minimum(x2 + arrivals, self.cap)

    def step(self, x, uc, ua, w):
        # uc, ua carry phase bits and attack bits per intersection
        phases = np.logical_xor(uc > 0.5, ua > 0.5)
        return self.advance(x, self.actuated(phases), w), np.ones(len(x))

    def sample_noise(self, rng, n):
        return rng.poisson(self.means, size=(n, self.state_dim)).astype(float)

    def sample_state(self, rng, lo, hi, n):
        x = rng.uniform(0.0, self.cap, size=(n, self.state_dim))
        x[:, self.tracked] = rng.uniform(lo, hi, size=(n, len(lo)))
        return x

    def project(self, x):
        return x[:, self.tracked]


def traffic_oracle(cfg: TrafficNetworkConfig) -> TrafficOracle:
    return TrafficOracle(cfg)


def traffic_atoms(cfg: TrafficNetworkConfig) -> list[LabelAtom]:
    th = cfg.threshold
    name = f"{th:g}".replace(".", "p")
    return [LabelAtom(f"x{l}_le_{name}", k, "<=", th) for k, l in enumerate(cfg.tracked)]


def traffic_request(cfg: TrafficNetworkConfig, threads: int = 1) -> AbstractionRequest:
    oracle = traffic_oracle(cfg)
    cap = oracle.cap[oracle.tracked]
    part = Partition.uniform(np.zeros(len(cap)), cap, [cfg.bins] * len(cap))
    dnames, anames = traffic_actions(cfg)
    d_in = [InputSet(u, tuple(float(c == "B") for c in u), tuple(float(c == "B") for c in u)) for u in dnames]
    a_in = [InputSet(u, tuple(float(c) for c in u), tuple(float(c) for c in u)) for u in anames]
    return AbstractionRequest(oracle, part, d_in, a_in, cfg.samples_per_cell, cfg.seed, cfg.initial_levels,
                              traffic_atoms(cfg), overflow="saturate", passive_input=0, threads=threads)


def traffic_game(cfg: Optional[TrafficNetworkConfig] = None, threads: int = 1) -> DurationalStochasticGame:
    cfg = cfg or TrafficNetworkConfig()
    g = build_abstraction(traffic_request(cfg, threads))
    g.meta["benchmark"] = "traffic"
    return g


# ------------------------------------------------------- traffic baselines

def tabulate_controller(z: GlobalGame, structure, n_clocks: int, rule: Callable[[GlobalKey, Optional[tuple]], dict]) -> FiniteStateController:
    """Controller whose rows come from ``rule(key, observed)`` on every state of ``z``.

    Under H1 ``observed`` is None.
    """
    ctl = FiniteStateController(structure, n_clocks)
    for i, key in enumerate(z.keys):
        if key is None:
            continue
        if key.h == 1:
            ctl.mu1[(key.lam, key.s, key.q)] = rule(key, None)
            continue
        for _, o, detected in z.col_labels[i]:
            if not detected:
                ctl.mu0[(key.lam, key.s, key.q, tuple(o))] = rule(key, tuple(o))
    return ctl


def baseline_action(kind: str, elapsed: int, n_intersections: int = 4) -> str:
    """Baseline 1 alternates green for links 1-4 (even ticks) and the cross phase; baseline 2 stays green."""
    if kind == "periodic":
        return ("A" if elapsed % 2 == 0 else "B") * n_intersections
    if kind == "always":
        return "A" * n_intersections
    raise ValidationError(f"unknown baseline {kind!r}")


def traffic_baseline(z: GlobalGame, structure, n_clocks: int, kind: str) -> FiniteStateController:
    """Deterministic baseline keyed on the controller's elapsed-time estimate."""
    if not structure.tracking:
        raise ValidationError("baselines need a controller that tracks elapsed time")

    def rule(key, observed):
        return {baseline_action(kind, key.lam[0]): 1.0}

    return tabulate_controller(z, structure, n_clocks, rule)


@dataclass
class CounterStrategy(Adversary):
    """Attack every intersection where the committed deterministic policy issues green for its numbered link."""

    dsg: DurationalStochasticGame
    ctl: FiniteStateController

    def choose(self, key, tick):
        y = (key.lam, key.h)
        row = self.ctl.act(y, key.s, key.q, key.v if key.h == 0 else None, self.dsg.defender_actions[key.s])
        uc = max(row, key=row.get)
        return "".join("1" if p == "A" else "0" for p in uc), key.v


def signal_table(ro: Rollout, ticks: Optional[int] = None) -> list[list[str]]:
    """Realized R/G per tick and intersection; G means the numbered link was actuated."""
    rows = []
    for st in ro.steps[: ticks if ticks is not None else len(ro.steps)]:
        rows.append(["G" if p == "A" else "R" for p in realized_phases(st.uc, st.ua)])
    return rows


# ---------------------------------------------------------------- two-tank

@dataclass
class TwoTankConfig:
    leak: float = 0.02
    gain: float = 500.0
    adversary_sign: float = -1.0
    A: Optional[list] = None
    B: Optional[list] = None
    x0: list[float] = field(default_factory=lambda: [0.11, 0.35])
    control_range: tuple[float, float] = (0.0, 5e-4)
    adversary_range: tuple[float, float] = (0.0, 2e-4)
    control_levels: int = 5
    adversary_levels: int = 3
    noise_var: float = 1.5e-5
    lo: float = 0.0
    hi: float = 0.7
    cells: int = 7
    bands: list[float] = field(default_factory=lambda: [0.3, 0.4, 0.5, 0.6])
    band_width: float = 0.1
    deadline: int = 5
    samples_per_cell: int = 400
    seed: int = 0

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        a = self.leak
        A = np.array(self.A, dtype=float) if self.A is not None else np.array([[1 - a, 0.0], [a, 1 - a]])
        B = np.array(self.B, dtype=float).reshape(2) if self.B is not None else np.array([self.gain, 0.0])
        return A, B

    def validate(self) -> None:
        A, B = self.matrices()
        if A.shape != (2, 2):
            raise ValidationError("twotank: A must be 2x2")
        for name, (lo, hi) in (("control_range", self.control_range), ("adversary_range", self.adversary_range)):
            if hi < lo:
                raise ValidationError(f"twotank: {name} is empty")
        if self.control_levels < 1 or self.adversary_levels < 1:
            raise ValidationError("twotank: at least one input level per player")
        if self.noise_var < 0:
            raise ValidationError("twotank: noise variance must be non-negative")
        if not self.lo < self.hi or self.cells < 1:
            raise ValidationError("twotank: bad partition box")


class TwoTankOracle(DynamicsOracle):
    state_dim = 2

    def __init__(self, cfg: TwoTankConfig):
        cfg.validate()
        self.cfg = cfg
        self.A, self.B = cfg.matrices()

    def step(self, x, uc, ua, w):
        u = uc[:, 0] + self.cfg.adversary_sign * ua[:, 0]
        x2 = x @ self.A.T + u[:, None] * self.B[None, :] + w
        return np.clip(x2, self.cfg.lo, self.cfg.hi), np.ones(len(x))

    def sample_noise(self, rng, n):
        if self.cfg.noise_var == 0:
            return np.zeros((n, 2))
        return rng.normal(0.0, np.sqrt(self.cfg.noise_var), size=(n, 2))


def twotank_oracle(cfg: TwoTankConfig) -> TwoTankOracle:
    return TwoTankOracle(cfg)


def _num_name(x: float) -> str:
    return f"{x:g}".replace(".", "p")


def twotank_atoms(cfg: TwoTankConfig) -> list[LabelAtom]:
    out = []
    for z in cfg.bands:
        for axis in range(2):
            out.append(LabelAtom(f"x{axis + 1}_ge_{_num_name(z)}", axis, ">=", z))
            out.append(LabelAtom(f"x{axis + 1}_le_{_num_name(round(z + cfg.band_width, 10))}", axis, "<=", z + cfg.band_width))
    unique = {a.name: a for a in out}
    return [unique[k] for k in sorted(unique)]


def _input_levels(prefix: str, rng_: tuple[float, float], k: int) -> list[InputSet]:
    vals = np.linspace(rng_[0], rng_[1], k) if k > 1 else np.array([rng_[0]])
    return [InputSet(f"{prefix}{j}", (float(v),), (float(v),)) for j, v in enumerate(vals)]


def twotank_request(cfg: TwoTankConfig, threads: int = 1) -> AbstractionRequest:
    oracle = twotank_oracle(cfg)
    part = Partition.uniform([cfg.lo, cfg.lo], [cfg.hi, cfg.hi], [cfg.cells, cfg.cells])
    return AbstractionRequest(oracle, part, _input_levels("uc", cfg.control_range, cfg.control_levels),
                              _input_levels("ua", cfg.adversary_range, cfg.adversary_levels), cfg.samples_per_cell,
                              cfg.seed, cfg.x0, twotank_atoms(cfg), overflow="saturate", passive_input=0,
                              threads=threads)


def twotank_game(cfg: Optional[TwoTankConfig] = None, threads: int = 1) -> DurationalStochasticGame:
    cfg = cfg or TwoTankConfig()
    g = build_abstraction(twotank_request(cfg, threads))
    g.meta["benchmark"] = "twotank"
    return g


# ------------------------------------------------------------------ specs

def twotank_spec_text(cfg: Optional[TwoTankConfig] = None) -> str:
    cfg = cfg or TwoTankConfig()
    parts = []
    for z in cfg.bands:
        a, b = f"{z:g}", f"{round(z + cfg.band_width, 10):g}"
        parts.append(f"(x1 >= {a} & x1 <= {b} & x2 >= {a} & x2 <= {b})")
    return f"F[0,{cfg.deadline}] (" + " | ".join(parts) + ")"


SPEC_TEXT = {
    "phi1": "F[0,5] (x2 <= 10)",
    "phi2": "F[0,5] (x2 <= 10 & x3 <= 10)",
    "phi3": "F[0,5] (x2 <= 10 & x3 <= 10 & x4 <= 10)",
}


def builtin_specs(twotank: Optional[TwoTankConfig] = None) -> dict[str, Formula]:
    """Traffic objectives phi1-phi3 and the two-tank objective, atoms pre-resolved."""
    out = {k: parse_mitl(v) for k, v in SPEC_TEXT.items()}
    out["twotank"] = parse_mitl(twotank_spec_text(twotank))
    return out


BENCHMARKS = ("traffic", "twotank")


def benchmark_game(name: str, params: Optional[dict] = None, threads: int = 1) -> DurationalStochasticGame:
    params = dict(params or {})
    if name == "traffic":
        if "turn_ratios" in params:
            params["turn_ratios"] = {tuple(int(x) for x in k.split("-")) if isinstance(k, str) else tuple(k): v
                                     for k, v in _pairs(params["turn_ratios"])}
        return traffic_game(_make(TrafficNetworkConfig, params), threads)
    if name == "twotank":
        return twotank_game(_make(TwoTankConfig, params), threads)
    raise ValidationError(f"unknown benchmark {name!r}; choose from {', '.join(BENCHMARKS)}")


def benchmark_spec(name: str, params: Optional[dict] = None) -> str:
    if name == "traffic":
        return SPEC_TEXT["phi1"]
    return twotank_spec_text(_make(TwoTankConfig, dict(params or {})))


def _pairs(obj):
    if isinstance(obj, dict):
        return obj.items()
    return [((e["from"], e["to"]), e["ratio"]) for e in obj]


def _make(cls, params: dict):
    names = set(cls.__dataclass_fields__)
    bad = sorted(set(params) - names)
    if bad:
        raise ValidationError(f"{cls.__name__}: unknown parameters {bad}")
    try:
        return cls(**params)
    except TypeError as exc:
        raise ValidationError(f"{cls.__name__}: {exc}") from None

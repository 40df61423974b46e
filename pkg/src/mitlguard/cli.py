"""Command-line entry point: ``mitlguard abstract|synthesize|simulate|gamecs|check-spec``.

Every command writes its artifacts into ``--out`` together with a
``manifest.json`` listing each file's SHA-256. Wall-clock timings only
appear in the manifest and on stdout, so all other files are byte-identical
across re-runs and thread counts.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
import time
from typing import Optional

import numpy as np

from . import __version__
from .bench import REFERENCE_TRAFFIC_VALUES, CounterStrategy, signal_table, traffic_baseline
from .dsg import DurationalStochasticGame, game_to_dict
from .errors import MitlGuardError, SchemaError, UnsupportedFragment, ValidationError
from .fsc import FiniteStateController
from .gamec import gamecs_to_dict
from .gdsg import GlobalGame, GlobalKey
from .mitl import atoms, horizon_bound, normalize, parse_mitl, to_text
from .modelio import Model, benchmark_model, game_model, load_model
from .pipeline import Prepared, oblivious_policy, prepare, synthesize, uniqueness_gap
from .product import product_to_dict
from .sim import (PassiveAdversary, TableAdversary, TRAJECTORY_COLUMNS, best_response_adversary,
                  estimate_satisfaction, trajectory_rows)
from .solver import controller_rows, evaluate_controller
from .tba import tba_from_fragment, tba_to_dict

POLICY_SCHEMA = 1


# ------------------------------------------------------------------ output

class Outputs:
    """Collects written files for the manifest."""

    def __init__(self, out_dir: str):
        self.dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.files: list[dict] = []

    def _write(self, name: str, data: bytes) -> str:
        path = os.path.join(self.dir, name)
        with open(path, "wb") as fh:
            fh.write(data)
        self.files.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
        return path

    def json(self, name: str, obj) -> str:
        return self._write(name, (json.dumps(obj, indent=1, sort_keys=True) + "\n").encode())

    def csv(self, name: str, header: list, rows) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)
        return self._write(name, buf.getvalue().encode())

    def manifest(self, command: str, argv: list, config: dict, timings: dict) -> None:
        doc = {
            "command": command,
            "argv": argv,
            "config": config,
            "versions": {"mitlguard": __version__, "python": platform.python_version(), "numpy": np.__version__},
            "outputs": self.files,
            "timings": timings,
        }
        path = os.path.join(self.dir, "manifest.json")
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")


def _fmt(x: float) -> str:
    return repr(float(x))


def key_text(z: GlobalGame, i: int, names) -> list:
    k = z.keys[i]
    if k is None:
        return ["violation", "", "", "", ""]
    if isinstance(k, GlobalKey):
        return [names[k.s], k.q, " ".join(map(str, k.v)), " ".join(map(str, k.lam)), "H1" if k.h else "H0"]
    return [str(k), "", "", "", ""]


# ------------------------------------------------------------------ models

def _model(args) -> Model:
    if args.benchmark:
        if args.model:
            raise ValidationError("give either a model file or --benchmark, not both")
        return benchmark_model(args.benchmark)
    if not args.model:
        raise ValidationError("a model file or --benchmark is required")
    return load_model(args.model)


def _spec_text(args, model: Model) -> str:
    text = args.spec or model.spec_text
    if not text:
        raise ValidationError("no objective: pass --spec or add a 'spec' field to the model")
    return text


def _settings(args, model: Model) -> dict:
    d = model.synthesis
    pick = lambda a, b: b if a is None else a  # noqa: E731
    thr = pick(args.detect_threshold, d.detect_threshold)
    return {
        "kappa_max": pick(args.kappa_max, d.kappa_max),
        "fsc_size": pick(args.fsc_size, d.fsc_size),
        "detect_threshold": None if thr is not None and thr < 0 else thr,
        "eps": pick(args.eps, d.eps),
        "targets": pick(args.targets, d.targets),
    }


def _build(args, model: Model, timings: dict) -> DurationalStochasticGame:
    t = time.perf_counter()
    g = model.game(args.threads, args.seed)
    timings["abstraction"] = round(time.perf_counter() - t, 6)
    return g


def _prepare(g, spec_text: str, model: Model, st: dict) -> Prepared:
    spec = parse_mitl(spec_text, g.props)
    return prepare(g, spec, st["fsc_size"], st["detect_threshold"], st["kappa_max"], st["targets"], model.automaton(g))


def _warn_empty(pr) -> None:
    if not pr.gamecs.components:
        print("warning: no accepting end component; every value is 0", file=sys.stderr)


# ---------------------------------------------------------------- commands

def cmd_abstract(args) -> int:
    model = _model(args)
    timings: dict = {}
    g = _build(args, model, timings)
    out = Outputs(args.out)
    out.json("dsg.json", game_model(g, args.spec or model.spec_text, model.name))
    out.manifest("abstract", args.argv, {"model": args.model, "benchmark": args.benchmark, "seed": args.seed,
                                         "threads": args.threads, "meta": g.meta}, timings)
    print(f"{g.n} states, {sum(len(a) for a in g.defender_actions)} defender actions, durations {list(g.durations)}")
    return 0


def game_fingerprint(g: DurationalStochasticGame) -> str:
    return hashlib.sha256(json.dumps(game_to_dict(g), sort_keys=True).encode()).hexdigest()


def _policy_doc(ctl: FiniteStateController, g: DurationalStochasticGame, spec_text: str, st: dict, kind: str,
                value: float, seed: Optional[int]) -> dict:
    return {"schema": POLICY_SCHEMA, "kind": kind, "spec": spec_text, "settings": st, "value": value,
            "abstraction_seed": seed, "game_sha256": game_fingerprint(g), "controller": ctl.to_dict(g.states)}


def cmd_synthesize(args) -> int:
    model = _model(args)
    timings: dict = {}
    g = _build(args, model, timings)
    spec_text = _spec_text(args, model)
    st = _settings(args, model)
    spec = parse_mitl(spec_text, g.props)
    syn = synthesize(g, spec, st["fsc_size"], st["detect_threshold"], st["kappa_max"], st["eps"], st["targets"],
                     args.threads, model.automaton(g))
    timings.update(syn.timings)
    _warn_empty(syn)
    z = syn.game
    out = Outputs(args.out)
    ctl, kind, value = syn.controller, "synthesized", syn.value
    if args.baseline:
        if args.baseline == "oblivious":
            ctl = oblivious_policy(syn, st["eps"], args.threads).controller
        else:
            ctl = traffic_baseline(z, syn.structure, len(syn.tba.clocks), args.baseline)
        kind = f"baseline-{args.baseline}"
        value = float(evaluate_controller(z, controller_rows(z, ctl), syn.targets)[z.initial])
    out.json(os.path.basename(args.policy_out) if args.policy_out else "policy.json",
             _policy_doc(ctl, g, spec_text, st, kind, value, args.seed))
    out.csv("values.csv", ["state", "q", "v", "lambda", "hypothesis", "value"],
            [key_text(z, i, g.states) + [_fmt(q)] for i, q in enumerate(syn.vi.values)])
    out.csv("trace.csv", ["iteration", "delta"], [[k + 1, _fmt(d)] for k, d in enumerate(syn.vi.trace)])
    report = {
        "spec": to_text(spec),
        "value": syn.value,
        "policy_kind": kind,
        "policy_value": value,
        "iterations": syn.vi.iterations,
        "monotone": syn.vi.monotone,
        "bounded": syn.vi.bounded,
        "states": {"dsg": g.n, "product": syn.product.n, "global": z.n},
        "gamecs": len(syn.gamecs.components),
        "target_states": int(syn.targets.sum()),
        "collisions": syn.policy.collisions,
        "settings": st,
    }
    if args.check_uniqueness:
        report["uniqueness_gap"] = uniqueness_gap(syn, st["eps"], args.threads)
    if model.doc.get("benchmark") == "traffic":
        report["reference_values"] = REFERENCE_TRAFFIC_VALUES
    out.json("report.json", report)
    if args.emit_product:
        out.json("product.json", product_to_dict(syn.product))
    if args.emit_gamecs:
        out.json("gamecs.json", gamecs_to_dict(z, syn.gamecs))
    if args.emit_tba:
        out.json("tba.json", tba_to_dict(syn.tba))
    out.manifest("synthesize", args.argv, {"model": args.model, "benchmark": args.benchmark, "seed": args.seed,
                                           "threads": args.threads, "spec": spec_text, **st}, timings)
    print(f"Q*(initial) = {syn.value:.6f}  iterations = {syn.vi.iterations}  global states = {z.n}")
    if args.baseline:
        print(f"{kind} value against its best response = {value:.6f}")
    for k, v in timings.items():
        print(f"  {k}: {v:.3f} s")
    return 0


def _read_policy(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"policy file is not valid JSON: {exc.msg}") from None
    except OSError as exc:
        raise ValidationError(f"cannot read policy file {path!r}: {exc.strerror}") from None
    if doc.get("schema") != POLICY_SCHEMA or "controller" not in doc:
        raise SchemaError("$.schema", f"expected a policy file with schema {POLICY_SCHEMA}")
    return doc


def _adversary_from_file(path: str, g: DurationalStochasticGame) -> TableAdversary:
    index = {n: i for i, n in enumerate(g.states)}
    with open(path) as fh:
        rows = json.load(fh)
    table = {}
    try:
        for j, r in enumerate(rows):
            key = GlobalKey(index[r["s"]], r["q"], tuple(r["v"]), tuple(r["lambda"]), int(r["h"]))
            table[key] = (r["ua"], tuple(r.get("observed", r["v"])))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"$[{j}]", f"bad adversary entry: {exc}") from None
    return TableAdversary(table)


def cmd_simulate(args) -> int:
    model = _model(args)
    timings: dict = {}
    pdoc = _read_policy(args.policy_in)
    # the game is rebuilt with the sampling seed the policy was synthesized on
    t = time.perf_counter()
    g = model.game(args.threads, pdoc.get("abstraction_seed"))
    timings["abstraction"] = round(time.perf_counter() - t, 6)
    if pdoc.get("game_sha256") not in (None, game_fingerprint(g)):
        raise ValidationError("the policy was synthesized on a different game than this model produces")
    ctl = FiniteStateController.from_dict(pdoc["controller"], g.states)
    spec_text = args.spec or pdoc.get("spec") or _spec_text(args, model)
    st = dict(pdoc.get("settings", {}))
    st.update({k: v for k, v in _settings(args, model).items() if getattr(args, k, None) is not None})
    spec = parse_mitl(spec_text, g.props)
    t = time.perf_counter()
    pr = _prepare(g, spec_text, model, st)
    if args.adversary == "passive":
        adv = PassiveAdversary(g)
    elif args.adversary == "best-response":
        adv = best_response_adversary(pr.game, ctl, pr.targets)
    elif args.adversary == "counter":
        adv = CounterStrategy(g, ctl)
    else:
        if not args.adversary_file:
            raise ValidationError("--adversary file needs --adversary-file")
        adv = _adversary_from_file(args.adversary_file, g)
    timings["setup"] = round(time.perf_counter() - t, 6)
    t = time.perf_counter()
    keep = min(args.n, args.trajectories)
    summary = estimate_satisfaction(g, pr.tba, ctl, adv, spec, args.n, args.horizon, args.seed or 0, args.threads,
                                    args.exact_ci, keep)
    timings["rollouts"] = round(time.perf_counter() - t, 6)
    out = Outputs(args.out)
    doc = summary.to_dict()
    doc.update({"spec": to_text(spec), "adversary": args.adversary, "seed": args.seed or 0,
                "policy_kind": pdoc.get("kind"), "solver_value": pdoc.get("value")})
    if model.doc.get("benchmark") == "traffic" and summary.rollouts:
        bound = horizon_bound(spec)
        ticks = int(bound) if bound is not None else None
        doc["signal_table"] = ["".join(r) for r in signal_table(summary.rollouts[0], ticks)]
    out.json("summary.json", doc)
    out.csv("trajectories.csv", TRAJECTORY_COLUMNS, trajectory_rows(summary.rollouts, g.states))
    out.manifest("simulate", args.argv, {"model": args.model, "benchmark": args.benchmark, "seed": args.seed or 0,
                                         "threads": args.threads, "spec": spec_text, "n": args.n,
                                         "adversary": args.adversary, "policy": args.policy_in, **st}, timings)
    print(f"p_hat = {summary.p_hat:.4f} ± {summary.half_width:.4f} (n = {summary.n}, inconclusive = {summary.inconclusive})")
    return 0


def cmd_gamecs(args) -> int:
    model = _model(args)
    timings: dict = {}
    g = _build(args, model, timings)
    spec_text = _spec_text(args, model)
    st = _settings(args, model)
    pr = _prepare(g, spec_text, model, st)
    timings.update(pr.timings)
    _warn_empty(pr)
    out = Outputs(args.out)
    out.json("gamecs.json", gamecs_to_dict(pr.game, pr.gamecs))
    out.manifest("gamecs", args.argv, {"model": args.model, "benchmark": args.benchmark, "seed": args.seed,
                                       "threads": args.threads, "spec": spec_text, **st}, timings)
    print(f"{len(pr.gamecs.components)} accepting end components covering {len(pr.gamecs.union)} of {pr.game.n} states")
    return 0


def cmd_check_spec(args) -> int:
    props = None
    if args.props:
        props = [p.strip() for p in args.props.split(",") if p.strip()]
    elif args.model or args.benchmark:
        model = _model(args)
        props = model.game(args.threads, args.seed).props
    f = parse_mitl(args.formula, props)
    print(f"parsed:     {to_text(f)}")
    print(f"normalized: {to_text(normalize(f))}")
    print(f"atoms:      {', '.join(sorted(atoms(f))) or '(none)'}")
    A = tba_from_fragment(f, props)
    print(f"automaton:  {len(A.states)} states, clocks {list(A.clocks)}, accepting {sorted(A.accepting)}")
    return 0


# -------------------------------------------------------------------- main

def _common(p: argparse.ArgumentParser, model_arg: bool = True) -> None:
    if model_arg:
        p.add_argument("model", nargs="?", help="model file (JSON, schema 1)")
    p.add_argument("--benchmark", choices=["traffic", "twotank"], help="use a built-in benchmark instead of a model file")
    p.add_argument("--seed", type=int, default=None, help="seed for abstraction sampling and rollouts")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--out", default=".", help="output directory")


def _synthesis_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--spec", help="MITL objective (overrides the model's spec)")
    p.add_argument("--kappa-max", type=int, dest="kappa_max", help="timing-manipulation budget in ticks")
    p.add_argument("--fsc-size", type=int, dest="fsc_size", help="estimate levels per clock; 1 = memoryless")
    p.add_argument("--detect-threshold", type=int, dest="detect_threshold", help="detection bound e; negative disables")
    p.add_argument("--eps", type=float, help="value-iteration stopping threshold")
    p.add_argument("--targets", choices=["gamec", "acc"], help="reachability targets for value iteration")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mitlguard", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("abstract", help="build and validate the game abstraction")
    _common(p)
    p.add_argument("--spec", help="objective stored alongside the game")
    p.set_defaults(fn=cmd_abstract)

    p = sub.add_parser("synthesize", help="compute values and a controller")
    _common(p)
    _synthesis_flags(p)
    p.add_argument("--policy-out", help="policy file name inside --out (default policy.json)")
    p.add_argument("--baseline", choices=["oblivious", "periodic", "always"],
                   help="write a baseline controller instead of the synthesized one")
    p.add_argument("--check-uniqueness", action="store_true", help="rerun from a second start and report the gap")
    p.add_argument("--emit-product", action="store_true")
    p.add_argument("--emit-gamecs", action="store_true")
    p.add_argument("--emit-tba", action="store_true")
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("simulate", help="Monte-Carlo rollouts of a controller")
    _common(p)
    _synthesis_flags(p)
    p.add_argument("--policy-in", required=True, help="policy file from synthesize")
    p.add_argument("-n", "--rollouts", type=int, default=1000, dest="n")
    p.add_argument("--horizon", type=int, help="ticks per rollout (default: enough for a definite verdict)")
    p.add_argument("--adversary", choices=["best-response", "passive", "counter", "file"], default="best-response")
    p.add_argument("--adversary-file", help="JSON adversary table for --adversary file")
    p.add_argument("--exact-ci", action="store_true", help="also report a Clopper-Pearson interval")
    p.add_argument("--trajectories", type=int, default=10, help="rollouts written to trajectories.csv")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("gamecs", help="list accepting end components of the global game")
    _common(p)
    _synthesis_flags(p)
    p.set_defaults(fn=cmd_gamecs)

    p = sub.add_parser("check-spec", help="parse a formula and build its automaton")
    p.add_argument("formula")
    p.add_argument("--props", help="comma-separated declared propositions")
    p.add_argument("--model", help="take propositions from this model")
    p.add_argument("--benchmark", choices=["traffic", "twotank"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(fn=cmd_check_spec)
    return ap


def main(argv: Optional[list] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except MitlGuardError as exc:
        label = "unsupported" if isinstance(exc, UnsupportedFragment) else "error"
        print(f"{label}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: internal failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

from __future__ import annotations

import numpy as np
import pytest

from mitlguard.errors import DimensionMismatch, IncompletePolicy, InvalidPolicyRow, ValidationError
from mitlguard.fsc import (
    ControllerStructure, EstimateTracker, FiniteStateController, advance_estimate, detect, load_controller,
    rounded_expected_duration, save_controller,
)
from mitlguard.mitl import parse_mitl
from mitlguard.pipeline import synthesize
from mitlguard.sim import ShiftAdversary, rollout
from mitlguard.tba import tba_from_fragment
from models import small_cases


def test_detect_examples():
    assert detect([3], [4], 2) == 0
    assert detect([3], [6], 2) == 1
    for e in (0, 1, 5):
        assert detect([2, 7], [2, 7], e) == 0


def test_detect_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        detect([1], [1, 2], 2)


def test_advance_estimate_examples():
    assert advance_estimate([2], 1, [], 6) == (3,)
    assert advance_estimate([2], 1, [0], 6) == (0,)
    assert advance_estimate([6], 1, [], 6) == (6,)


def test_uniform_row():
    ctl = FiniteStateController(ControllerStructure(), 1)
    ctl.mu0[((0,), 0, "q0", (0,))] = FiniteStateController.uniform_row(["a", "b", "c"])
    row = ctl.act(((0,), 0), 0, "q0", (0,), ["a", "b", "c"])
    assert row == pytest.approx({"a": 1 / 3, "b": 1 / 3, "c": 1 / 3})


def test_deterministic_row_and_h1_table():
    ctl = FiniteStateController(ControllerStructure(), 1)
    ctl.mu1[((2,), 1, "q0")] = {"b": 1.0}
    assert ctl.act(((2,), 1), 1, "q0", None, ["a", "b"]) == {"b": 1.0}


def test_row_outside_action_set():
    ctl = FiniteStateController(ControllerStructure(), 1)
    ctl.mu0[((0,), 0, "q0", (0,))] = {"z": 1.0}
    with pytest.raises(InvalidPolicyRow):
        ctl.act(((0,), 0), 0, "q0", (0,), ["a", "b"])


def test_missing_row():
    ctl = FiniteStateController(ControllerStructure(), 1)
    with pytest.raises(IncompletePolicy):
        ctl.act(((0,), 0), 0, "q0", (0,), ["a"])
    with pytest.raises(ValidationError):
        ctl.act(((0,), 0), 0, "q0", None, ["a"])


def test_structure_from_size():
    assert ControllerStructure.from_size(None, 2) == ControllerStructure(True, None, 2)
    assert ControllerStructure.from_size(1, 2) == ControllerStructure(False, None, None)
    assert ControllerStructure.from_size(5, 2).estimate_cap == 4
    assert not ControllerStructure.from_size(1, 2).detection
    with pytest.raises(ValidationError):
        ControllerStructure.from_size(0, 2)


def test_rounded_expected_duration():
    assert rounded_expected_duration([1, 2], np.array([0.7, 0.3])) == 1
    assert rounded_expected_duration([1, 2], np.array([0.3, 0.7])) == 2
    # exact tie goes to the mode
    assert rounded_expected_duration([1, 2], np.array([0.5, 0.5])) == 1
    assert rounded_expected_duration([1, 3], np.array([0.5, 0.5])) == 2


def test_estimate_tracker_is_exact_for_deterministic_durations():
    case = small_cases()[0]
    A = tba_from_fragment(parse_mitl(case.spec, case.game.props), case.game.props)
    tr = EstimateTracker(case.game, A, ControllerStructure())
    assert tr.update((0,), 0, "q0", 0, 0) == (1,)
    assert tr.update((A.cap,), 0, "q0", 0, 0) == (A.cap,)


def test_h1_latches():
    case = small_cases()[3]
    # shifts beyond the threshold must be in the game for the H1 tables to exist
    syn = synthesize(case.game, parse_mitl(case.spec, case.game.props), kappa_max=3)
    cap = syn.tba.cap
    rng = np.random.default_rng(0)
    for _ in range(50):
        ro = rollout(case.game, syn.tba, syn.controller, ShiftAdversary(case.game, 3, cap), 5, rng)
        hyps = [st.hypothesis for st in ro.steps]
        assert hyps == sorted(hyps)
        assert hyps[0] == 1  # the very first manipulated observation trips detection


def test_save_and_load(tmp_path):
    case = small_cases()[0]
    syn = synthesize(case.game, parse_mitl(case.spec, case.game.props))
    path = tmp_path / "ctl.json"
    save_controller(syn.controller, str(path), case.game.states)
    back = load_controller(str(path), case.game.states)
    assert back.mu0 == syn.controller.mu0 and back.mu1 == syn.controller.mu1
    assert back.structure == syn.controller.structure

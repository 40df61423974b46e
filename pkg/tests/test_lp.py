from __future__ import annotations

import numpy as np
import pytest

from mitlguard.errors import SolverError
from mitlguard.lp import column_value, solve_matrix_game
from oracles import guaranteed, lp_value


def test_matching_pennies():
    sol = solve_matrix_game([[1, 0], [0, 1]])
    assert sol.value == pytest.approx(0.5, abs=1e-9)
    assert sol.row == pytest.approx([0.5, 0.5], abs=1e-9)


def test_dominant_row():
    sol = solve_matrix_game([[0.9, 0.8], [0.1, 0.2]])
    assert sol.value == pytest.approx(0.8, abs=1e-9)
    assert list(sol.row) == [1.0, 0.0]


def test_one_by_one():
    assert solve_matrix_game([[0.3]]).value == pytest.approx(0.3)


def test_rejects_bad_input():
    with pytest.raises(SolverError):
        solve_matrix_game(np.zeros((0, 2)))
    with pytest.raises(SolverError):
        solve_matrix_game([[np.nan]])


def test_random_against_linprog():
    rng = np.random.default_rng(0)
    for _ in range(400):
        R, C = rng.integers(1, 7, size=2)
        M = rng.random((R, C))
        if rng.random() < 0.3:
            M = np.round(M * 3) / 3  # ties and degenerate pivots
        sol = solve_matrix_game(M)
        ref = lp_value(M)
        assert sol.value == pytest.approx(ref, abs=1e-9)
        assert guaranteed(M, sol.row) == pytest.approx(ref, abs=1e-9)
        assert sol.row.min() >= 0 and sol.row.sum() == pytest.approx(1.0)
        # the column strategy holds the row player to the value
        assert (M @ sol.col).max() == pytest.approx(ref, abs=1e-9)


def test_dual_value_agrees():
    rng = np.random.default_rng(1)
    for _ in range(100):
        M = rng.random((3, 4))
        assert column_value(M) == pytest.approx(solve_matrix_game(M).value, abs=1e-9)


def test_deterministic_tie_break():
    M = np.array([[0.5, 0.5], [0.5, 0.5], [0.2, 0.9]])
    assert list(solve_matrix_game(M).row) == [1.0, 0.0, 0.0]

from __future__ import annotations

import numpy as np

from mitlguard.gamec import check_component, compute_gamecs, gamecs_to_dict, strongly_connected_components
from mitlguard.gdsg import GlobalGame
from oracles import brute_gamecs, gamecs_as_set, random_global_game, scc_partition


def _kernel(R, C, n, moves):
    """(R, C, n) tensor from {(r, c): {succ: p}}."""
    K = np.zeros((R, C, n))
    for (r, c), dist in moves.items():
        for s, p in dist.items():
            K[r, c, s] = p
    return K


def test_scc_two_cycle():
    assert strongly_connected_components([[1], [0]]) == [[0, 1]]


def test_scc_dag():
    assert sorted(strongly_connected_components([[1], [2], []])) == [[0], [1], [2]]


def test_scc_random_against_closure():
    rng = np.random.default_rng(0)
    for _ in range(20):
        adj = rng.random((50, 50)) < 0.04
        got = {frozenset(c) for c in strongly_connected_components([list(np.nonzero(r)[0]) for r in adj])}
        assert got == scc_partition(adj)


def test_scc_deep_chain_is_not_recursive():
    n = 20000
    adj = [[i + 1] for i in range(n - 1)] + [[0]]
    assert len(strongly_connected_components(adj)) == 1


def test_single_robust_accepting_state():
    z = GlobalGame.from_dense([_kernel(1, 2, 1, {(0, 0): {0: 1}, (0, 1): {0: 1}})], [True])
    gs = compute_gamecs(z)
    assert [c.states for c in gs.components] == [frozenset({0})]


def test_escapable_cycle_dissolves():
    # 0 <-> 1 accepting cycle; at state 1 the adversary's column 1 escapes to the trap 2
    k0 = _kernel(1, 2, 3, {(0, 0): {1: 1}, (0, 1): {1: 1}})
    k1 = _kernel(1, 2, 3, {(0, 0): {0: 1}, (0, 1): {2: 1}})
    k2 = _kernel(1, 2, 3, {(0, 0): {2: 1}, (0, 1): {2: 1}})
    z = GlobalGame.from_dense([k0, k1, k2], [True, False, False])
    assert compute_gamecs(z).components == []
    assert brute_gamecs(z) == set()


def test_escape_avoidable_by_defender_choice():
    # the defender's row 1 at state 1 returns to 0 regardless of the column
    k0 = _kernel(1, 2, 3, {(0, 0): {1: 1}, (0, 1): {1: 1}})
    k1 = _kernel(2, 2, 3, {(0, 0): {0: 1}, (0, 1): {2: 1}, (1, 0): {0: 1}, (1, 1): {0: 1}})
    k2 = _kernel(1, 2, 3, {(0, 0): {2: 1}, (0, 1): {2: 1}})
    z = GlobalGame.from_dense([k0, k1, k2], [True, False, False])
    (c,) = compute_gamecs(z).components
    assert c.states == {0, 1}
    assert c.choice_map() == {0: frozenset({0}), 1: frozenset({1})}


def test_two_disjoint_cycles():
    ks = [_kernel(1, 1, 4, {(0, 0): {1: 1}}), _kernel(1, 1, 4, {(0, 0): {0: 1}}),
          _kernel(1, 1, 4, {(0, 0): {3: 1}}), _kernel(1, 1, 4, {(0, 0): {2: 1}})]
    z = GlobalGame.from_dense(ks, [True, False, False, True])
    gs = compute_gamecs(z)
    assert [c.states for c in gs.components] == [frozenset({0, 1}), frozenset({2, 3})]
    assert gamecs_as_set(gs) == brute_gamecs(z)


def test_random_games_match_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(60):
        z = random_global_game(rng, int(rng.integers(1, 8)), max_succ=3)
        gs = compute_gamecs(z)
        assert gamecs_as_set(gs) == brute_gamecs(z)
        for c in gs.components:
            assert check_component(z, c) == []


def test_components_are_disjoint():
    rng = np.random.default_rng(12)
    for _ in range(40):
        z = random_global_game(rng, 8, p_acc=0.6)
        seen: set = set()
        for c in compute_gamecs(z).components:
            assert not (seen & c.states)
            seen |= c.states


def test_dict_form():
    z = GlobalGame.from_dense([_kernel(1, 1, 1, {(0, 0): {0: 1}})], [True])
    d = gamecs_to_dict(z, compute_gamecs(z))
    assert len(d["components"]) == 1

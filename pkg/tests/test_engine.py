import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from g2048 import engine
from g2048.engine import Action, apply_move, from_cells, legal_actions, to_cells
from g2048.rng import Rng

from conftest import random_board


def naive_slide(row):
    """Compact, merge left-to-right once, compact again."""
    cells = [e for e in row if e]
    cells += [0] * (4 - len(cells))
    reward = 0
    for i in range(3):
        if cells[i] and cells[i] == cells[i + 1]:
            cells[i] = min(cells[i] + 1, 15)
            reward += 2 ** cells[i]
            cells[i + 1] = 0
    cells = [e for e in cells if e]
    cells += [0] * (4 - len(cells))
    return tuple(cells), reward


def board_of_rows(*rows):
    rows = [list(r) + [0] * (4 - len(r)) for r in rows] + [[0, 0, 0, 0]] * (4 - len(rows))
    return from_cells(rows)


CHECKERBOARD = from_cells([[1 if (r + c) % 2 else 2 for c in range(4)] for r in range(4)])
# 15 distinct exponents plus a repeat of 1 placed away from the other 1
DEAD_DISTINCT = from_cells([[1, 2, 3, 4], [5, 6, 7, 8], [9, 10, 11, 12], [13, 14, 15, 1]])


@pytest.mark.parametrize(
    "row, expected",
    [
        ([1, 1, 2, 0], ((2, 2, 0, 0), 4)),
        ([1, 1, 1, 1], ((2, 2, 0, 0), 8)),
        ([2, 1, 1, 0], ((2, 2, 0, 0), 4)),
        ([0, 0, 0, 0], ((0, 0, 0, 0), 0)),
        ([0, 1, 0, 1], ((2, 0, 0, 0), 4)),
        ([1, 1, 1, 0], ((2, 1, 0, 0), 4)),
        ([15, 15, 0, 0], ((15, 0, 0, 0), 2**15)),
    ],
)
def test_slide_and_merge_row(row, expected):
    assert engine.slide_and_merge_row(row) == expected


def test_slide_rejects_bad_rows():
    with pytest.raises(ValueError):
        engine.slide_and_merge_row([16, 0, 0, 0])
    with pytest.raises(ValueError):
        engine.slide_and_merge_row([1, 2, 3])


def test_row_tables_match_naive_reference_exhaustively():
    for row in itertools.product(range(16), repeat=4):
        assert engine.slide_and_merge_row(row) == naive_slide(row), row


def test_reward_counts_every_merge():
    out = apply_move(board_of_rows([3, 3, 1, 1]), Action.LEFT)
    assert to_cells(out.board)[:4] == (4, 2, 0, 0)
    assert out.reward == 20
    assert out.changed


def test_directions_move_toward_their_edge():
    b = board_of_rows([0, 0, 0, 0], [0, 1, 0, 0])
    assert engine.to_grid(apply_move(b, Action.LEFT).board)[1, 0] == 1
    assert engine.to_grid(apply_move(b, Action.RIGHT).board)[1, 3] == 1
    assert engine.to_grid(apply_move(b, Action.UP).board)[0, 1] == 1
    assert engine.to_grid(apply_move(b, Action.DOWN).board)[3, 1] == 1


def test_unchanged_move_reports_no_reward():
    b = board_of_rows([1, 2, 0, 0])
    out = apply_move(b, Action.LEFT)
    assert out == engine.MoveOutcome(b, 0, False)


def test_full_board_without_pairs_is_stuck():
    for a in Action:
        assert not apply_move(CHECKERBOARD, a).changed


def test_legal_actions_corner_stack():
    # tiles flush against the bottom-left corner
    b = board_of_rows([0, 0, 0, 0], [0, 0, 0, 0], [1, 0, 0, 0], [2, 3, 0, 0])
    assert legal_actions(b) == [Action.UP, Action.RIGHT]
    # actions are 1-based in the usual numbering
    assert [a + 1 for a in legal_actions(b)] == [2, 3]


def test_legal_actions_single_centre_tile():
    b = board_of_rows([0, 0, 0, 0], [0, 1, 0, 0])
    assert legal_actions(b) == list(Action)


def test_checkerboard_brute_force():
    assert all(not apply_move(CHECKERBOARD, a).changed for a in Action)
    assert legal_actions(CHECKERBOARD) == []
    assert engine.is_terminal(CHECKERBOARD)


def test_is_terminal_cases():
    assert not engine.is_terminal(board_of_rows([1]))
    almost = list(to_cells(CHECKERBOARD))
    almost[5] = 0
    assert not engine.is_terminal(from_cells(almost))
    pair = list(to_cells(CHECKERBOARD))
    pair[0] = pair[1]
    assert not engine.is_terminal(from_cells(pair))
    assert all(not apply_move(DEAD_DISTINCT, a).changed for a in Action)
    assert engine.is_terminal(DEAD_DISTINCT)


def test_is_terminal_agrees_with_legal_actions(gen):
    for _ in range(5000):
        b = random_board(gen, max_exponent=4, fill=gen.uniform(0.8, 1.0))
        assert engine.is_terminal(b) == (legal_actions(b) == [])


def test_legal_actions_are_exactly_changing_moves(gen):
    for _ in range(2000):
        b = random_board(gen)
        assert legal_actions(b) == [a for a in Action if apply_move(b, a).changed]


def test_spawn_single_empty_cell():
    cells = list(to_cells(CHECKERBOARD))
    cells[7] = 0
    b = from_cells(cells)
    rng = Rng(0)
    # find a seed whose value draw gives a 2-tile
    while True:
        probe = rng.copy()
        probe.randbelow(1)
        if not probe.bernoulli(engine.FOUR_PROBABILITY):
            break
        rng.next_u64()
    out, cell, exponent = engine.spawn_tile_at(b, rng)
    assert (cell, exponent) == (7, 1)
    assert to_cells(out)[7] == 1
    assert [x for i, x in enumerate(to_cells(out)) if i != 7] == [x for i, x in enumerate(cells) if i != 7]


def test_spawn_on_full_board_raises():
    with pytest.raises(engine.BoardFullError):
        engine.spawn_tile(CHECKERBOARD, Rng(1))


def test_spawn_statistics():
    b = board_of_rows([0, 3, 0, 1], [2, 0, 0, 0], [0, 0, 5, 0])
    empties = [i for i, e in enumerate(to_cells(b)) if e == 0]
    rng = Rng(123)
    counts = np.zeros(16, dtype=int)
    fours = 0
    n = 100_000
    for _ in range(n):
        _, cell, exponent = engine.spawn_tile_at(b, rng)
        counts[cell] += 1
        fours += exponent == 2
    assert 0.094 <= fours / n <= 0.106
    assert counts[[i for i in range(16) if i not in empties]].sum() == 0
    assert stats.chisquare(counts[empties]).pvalue > 0.001


def test_new_game():
    state = engine.new_game(Rng(4))
    cells = to_cells(state.board)
    nonzero = [e for e in cells if e]
    assert len(nonzero) == 2 and set(nonzero) <= {1, 2}
    assert (state.score, state.moves) == (0, 0)
    assert engine.new_game(Rng(4)) == state


def test_step_updates_score_and_moves():
    b = board_of_rows([1, 1, 2, 3], [4, 5, 6, 7], [8, 9, 10, 11], [12, 13, 14, 15])
    assert legal_actions(b) == [Action.LEFT, Action.RIGHT]
    state = engine.GameState(b, score=10, moves=3)
    nxt, reward, terminal = engine.step(state, Action.LEFT, Rng(0))
    assert reward == 4
    assert (nxt.score, nxt.moves) == (14, 4)
    assert terminal == (legal_actions(nxt.board) == [])


def test_step_rejects_illegal_action():
    b = board_of_rows([1, 2, 0, 0])
    with pytest.raises(engine.IllegalActionError, match="left"):
        engine.step(engine.GameState(b), Action.LEFT, Rng(0))


def test_terminal_flag_matches_legal_actions():
    rng = Rng(8)
    pick = Rng(9)
    state = engine.new_game(rng)
    terminal = False
    while not terminal:
        legal = legal_actions(state.board)
        state, _, terminal = engine.step(state, legal[pick.randbelow(len(legal))], rng)
    assert legal_actions(state.board) == []


def _transcript(seed):
    rng, pick = Rng(seed), Rng(seed + 1)
    state = engine.new_game(rng)
    out = [state]
    while legal := legal_actions(state.board):
        state, _, _ = engine.step(state, legal[pick.randbelow(len(legal))], rng)
        out.append(state)
    return out


def test_seeded_game_is_reproducible():
    assert _transcript(77) == _transcript(77)
    assert _transcript(77) != _transcript(78)


def test_max_tile():
    assert engine.max_tile(board_of_rows([1])) == 2
    assert engine.max_tile(0) == 0
    assert engine.max_tile(board_of_rows([1, 5, 3])) == 32


def test_onehot_layout_example():
    b = board_of_rows([0] * 4, [0] * 4, [0] * 4, [0, 0, 1, 0])
    vec = engine.encode_onehot(b)
    assert vec.shape == (256,)
    assert vec[30] == 1.0
    planes = vec.reshape(16, 4, 4)
    assert planes[1, 3, 2] == 1.0
    assert planes[0].sum() == 15 and planes[0, 3, 2] == 0
    assert vec.sum() == 16


def test_onehot_roundtrip(gen):
    for _ in range(10_000):
        b = random_board(gen, max_exponent=15)
        vec = engine.encode_onehot(b)
        np.testing.assert_array_equal(vec.reshape(16, 16).sum(axis=0), np.ones(16))
        assert engine.decode_onehot(vec) == b


def test_symmetries_act_as_d4():
    b = from_cells(range(16))
    assert engine.transform(b, "identity") == b
    r = b
    for _ in range(4):
        r = engine.transform(r, "rot90")
    assert r == b
    images = {engine.transform(b, s) for s in engine.SYMMETRIES}
    assert len(images) == 8
    grid = engine.to_grid(b)
    np.testing.assert_array_equal(engine.to_grid(engine.transform(b, "rot90")), np.rot90(grid))
    np.testing.assert_array_equal(engine.to_grid(engine.transform(b, "flip_lr")), np.fliplr(grid))
    np.testing.assert_array_equal(engine.to_grid(engine.transform(b, "transpose")), grid.T)
    for s in engine.SYMMETRIES:
        assert sorted(engine.act_transform(a, s) for a in Action) == list(Action)


def test_move_equivariance(gen):
    for _ in range(2000):
        b = random_board(gen)
        for s in engine.SYMMETRIES:
            tb = engine.transform(b, s)
            assert legal_actions(tb) == sorted(engine.act_transform(a, s) for a in legal_actions(b))
            for a in Action:
                out = apply_move(b, a)
                tout = apply_move(tb, engine.act_transform(a, s))
                assert tout.board == engine.transform(out.board, s)
                assert tout.reward == out.reward


boards = st.lists(st.integers(0, 14), min_size=16, max_size=16).map(from_cells)
actions = st.sampled_from(list(Action))


@settings(max_examples=500, deadline=None)
@given(boards, actions)
def test_move_conserves_tile_sum(b, a):
    out = apply_move(b, a)
    assert engine.tile_sum(out.board) == engine.tile_sum(b)
    assert engine.count_empty(out.board) >= engine.count_empty(b)
    if not out.changed:
        assert out.board == b and out.reward == 0
        assert not apply_move(out.board, a).changed


@settings(max_examples=500, deadline=None)
@given(boards, actions)
def test_reward_is_sum_of_merged_tiles(b, a):
    out = apply_move(b, a)
    merges = engine.count_empty(out.board) - engine.count_empty(b)
    assert (merges == 0) == (out.reward == 0)
    expected = 0
    for line_idx in range(4):
        if a in (Action.LEFT, Action.RIGHT):
            line = list(engine.to_grid(b)[line_idx])
        else:
            line = list(engine.to_grid(b)[:, line_idx])
        if a in (Action.RIGHT, Action.DOWN):
            line = line[::-1]
        expected += naive_slide(line)[1]
    assert out.reward == expected


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 14), min_size=15, max_size=15), st.integers(0, 2**63))
def test_spawn_adds_two_or_four(cells, seed):
    b = from_cells(cells + [0])
    out = engine.spawn_tile(b, Rng(seed))
    assert engine.tile_sum(out) - engine.tile_sum(b) in (2, 4)
    assert engine.count_empty(out) == engine.count_empty(b) - 1

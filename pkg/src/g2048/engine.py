"""2048 mechanics on packed 64-bit boards.

A board is a plain ``int`` holding 16 four-bit exponents. Cell ``(row, col)``
(0-based, row 0 at the top, col 0 at the left) lives in bits
``4*(4*row + col)`` to ``4*(4*row + col) + 3``. Exponent 0 is an empty cell and
exponent ``e >= 1`` is a tile of value ``2**e``.

Moves go through 65,536-entry line tables. A "line" is 16 bits holding four
cells, nibble 0 first; rows use nibble = column, columns use nibble = row.
The hot paths are numba kernels that take and return ``uint64`` boards; the
Python functions below are thin wrappers around them.

Randomness is only drawn in :func:`spawn_tile`: first ``randbelow(n_empty)``
picks the k-th empty cell in row-major order, then ``random() < 0.1`` decides
between exponent 2 (a 4-tile) and exponent 1 (a 2-tile).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numba as nb
import numpy as np

from g2048.rng import Rng, randbelow, random01

N_CELLS = 16
MAX_EXPONENT = 15
FOUR_PROBABILITY = 0.1

Board = int


class Action(enum.IntEnum):
    LEFT = 0
    UP = 1
    RIGHT = 2
    DOWN = 3

    def __str__(self) -> str:
        return self.name.lower()


ACTIONS = tuple(Action)


class GameError(ValueError):
    """Base class for rule violations raised by the engine."""


class IllegalActionError(GameError):
    def __init__(self, action, board: Board):
        self.action = action
        self.board = board
        name = Action(action).name.lower() if 0 <= int(action) < 4 else repr(action)
        super().__init__(f"action {name} ({int(action)}) is not legal on board 0x{board:016x}")


class BoardFullError(GameError):
    pass


# ---------------------------------------------------------------------------
# line tables


def merge_line(cells: Sequence[int]) -> tuple[tuple[int, int, int, int], int]:
    """Slide four exponents toward index 0 and merge equal neighbours once."""
    out = []
    reward = 0
    pending = 0
    for e in cells:
        if e == 0:
            continue
        if pending == e:
            merged = min(e + 1, MAX_EXPONENT)
            out.append(merged)
            reward += 1 << merged
            pending = 0
        else:
            if pending:
                out.append(pending)
            pending = e
    if pending:
        out.append(pending)
    out.extend([0] * (4 - len(out)))
    return tuple(out), reward


def _pack_line(cells: Iterable[int]) -> int:
    line = 0
    for i, e in enumerate(cells):
        line |= e << (4 * i)
    return line


def _unpack_line(line: int) -> tuple[int, int, int, int]:
    return (line & 0xF, (line >> 4) & 0xF, (line >> 8) & 0xF, (line >> 12) & 0xF)


def _reverse_line(line: int) -> int:
    return ((line & 0xF) << 12) | ((line & 0xF0) << 4) | ((line >> 4) & 0xF0) | (line >> 12)


def _build_tables():
    left = np.empty(65536, dtype=np.uint64)
    right = np.empty(65536, dtype=np.uint64)
    reward = np.empty(65536, dtype=np.int64)
    for line in range(65536):
        out, r = merge_line(_unpack_line(line))
        packed = _pack_line(out)
        left[line] = packed
        right[_reverse_line(line)] = _reverse_line(packed)
        reward[line] = r
    return left, right, reward


# a line earns the same reward whichever way it slides, so one reward table
LINE_LEFT, LINE_RIGHT, LINE_REWARD = _build_tables()

_M16 = np.uint64(0xFFFF)
_M4 = np.uint64(0xF)
_U4 = np.uint64(4)
_ZERO = np.uint64(0)


# ---------------------------------------------------------------------------
# kernels


@nb.njit(cache=True, inline="always")
def get_row(b, r):
    return (b >> np.uint64(16 * r)) & _M16


@nb.njit(cache=True, inline="always")
def get_col(b, c):
    s = np.uint64(4 * c)
    return (
        ((b >> s) & _M4)
        | (((b >> (s + np.uint64(16))) & _M4) << np.uint64(4))
        | (((b >> (s + np.uint64(32))) & _M4) << np.uint64(8))
        | (((b >> (s + np.uint64(48))) & _M4) << np.uint64(12))
    )


@nb.njit(cache=True, inline="always")
def put_col(line, c):
    s = np.uint64(4 * c)
    return (
        ((line & _M4) << s)
        | (((line >> np.uint64(4)) & _M4) << (s + np.uint64(16)))
        | (((line >> np.uint64(8)) & _M4) << (s + np.uint64(32)))
        | (((line >> np.uint64(12)) & _M4) << (s + np.uint64(48)))
    )


@nb.njit(cache=True)
def move_kernel(b, action, left, right, reward_tab):
    """Return ``(new_board, reward)`` for one action on a ``uint64`` board."""
    out = _ZERO
    reward = 0
    if action == 0 or action == 2:
        tab = left if action == 0 else right
        for r in range(4):
            line = get_row(b, r)
            out |= tab[line] << np.uint64(16 * r)
            reward += reward_tab[line]
    else:
        tab = left if action == 1 else right
        for c in range(4):
            line = get_col(b, c)
            out |= put_col(tab[line], c)
            reward += reward_tab[line]
    return out, reward


@nb.njit(cache=True)
def count_empty_kernel(b):
    n = 0
    for i in range(16):
        if (b >> np.uint64(4 * i)) & _M4 == _ZERO:
            n += 1
    return n


@nb.njit(cache=True)
def is_terminal_kernel(b, left):
    for i in range(16):
        if (b >> np.uint64(4 * i)) & _M4 == _ZERO:
            return False
    # a full line moves iff it contains an equal adjacent pair
    for k in range(4):
        line = get_row(b, k)
        if left[line] != line:
            return False
        line = get_col(b, k)
        if left[line] != line:
            return False
    return True


@nb.njit(cache=True)
def legal_mask_kernel(b, left, right, reward_tab):
    mask = 0
    for a in range(4):
        nb_, _ = move_kernel(b, a, left, right, reward_tab)
        if nb_ != b:
            mask |= 1 << a
    return mask


@nb.njit(cache=True)
def spawn_kernel(b, state):
    """Place one tile; returns ``(board, cell, exponent)``, cell -1 if full."""
    n = count_empty_kernel(b)
    if n == 0:
        return b, -1, 0
    k = randbelow(state, n)
    cell = -1
    for i in range(16):
        if (b >> np.uint64(4 * i)) & _M4 == _ZERO:
            if k == 0:
                cell = i
                break
            k -= 1
    e = 2 if random01(state) < FOUR_PROBABILITY else 1
    return b | (np.uint64(e) << np.uint64(4 * cell)), cell, e


# ---------------------------------------------------------------------------
# board helpers


def from_cells(cells: Sequence[int]) -> Board:
    """Pack 16 row-major exponents (or a 4x4 nested sequence) into a board."""
    flat = np.asarray(cells, dtype=np.int64).reshape(-1)
    if flat.size != N_CELLS:
        raise ValueError(f"expected 16 cells, got {flat.size}")
    if flat.min() < 0 or flat.max() > MAX_EXPONENT:
        raise ValueError("exponents must lie in [0, 15]")
    b = 0
    for i, e in enumerate(flat.tolist()):
        b |= e << (4 * i)
    return b


def to_cells(board: Board) -> tuple[int, ...]:
    return tuple((board >> (4 * i)) & 0xF for i in range(N_CELLS))


def to_grid(board: Board) -> np.ndarray:
    return np.array(to_cells(board), dtype=np.int64).reshape(4, 4)


def format_board(board: Board) -> str:
    rows = []
    for r in range(4):
        vals = [(board >> (4 * (4 * r + c))) & 0xF for c in range(4)]
        rows.append(" ".join(f"{(1 << e) if e else '.':>5}" for e in vals))
    return "\n".join(rows)


def max_tile(board: Board) -> int:
    e = max(to_cells(board))
    return 1 << e if e else 0


def count_empty(board: Board) -> int:
    return int(count_empty_kernel(np.uint64(board)))


def tile_sum(board: Board) -> int:
    return sum(1 << e for e in to_cells(board) if e)


# ---------------------------------------------------------------------------
# moves


@dataclass(frozen=True)
class MoveOutcome:
    board: Board
    reward: int
    changed: bool


def slide_and_merge_row(row: Sequence[int]) -> tuple[tuple[int, int, int, int], int]:
    """Slide one line toward index 0; returns ``(new_line, reward)``."""
    if len(row) != 4 or any(not 0 <= e <= MAX_EXPONENT for e in row):
        raise ValueError(f"invalid row {row!r}")
    line = _pack_line(row)
    return _unpack_line(int(LINE_LEFT[line])), int(LINE_REWARD[line])


def apply_move(board: Board, action: int) -> MoveOutcome:
    out, reward = move_kernel(np.uint64(board), int(action), LINE_LEFT, LINE_RIGHT, LINE_REWARD)
    out = int(out)
    changed = out != board
    return MoveOutcome(out, int(reward) if changed else 0, changed)


def legal_actions(board: Board) -> list[Action]:
    mask = legal_mask_kernel(np.uint64(board), LINE_LEFT, LINE_RIGHT, LINE_REWARD)
    return [a for a in ACTIONS if mask >> a & 1]


def is_terminal(board: Board) -> bool:
    return bool(is_terminal_kernel(np.uint64(board), LINE_LEFT))


def spawn_tile_at(board: Board, rng: Rng) -> tuple[Board, int, int]:
    """Like :func:`spawn_tile` but also reports the chosen cell and exponent."""
    out, cell, e = spawn_kernel(np.uint64(board), rng.state)
    if cell < 0:
        raise BoardFullError("cannot spawn a tile on a full board")
    return int(out), int(cell), int(e)


def spawn_tile(board: Board, rng: Rng) -> Board:
    return spawn_tile_at(board, rng)[0]


# ---------------------------------------------------------------------------
# game state


@dataclass(frozen=True)
class GameState:
    board: Board
    score: int = 0
    moves: int = 0


def new_game(rng: Rng) -> GameState:
    board = spawn_tile(spawn_tile(0, rng), rng)
    return GameState(board)


def step(state: GameState, action: int, rng: Rng) -> tuple[GameState, int, bool]:
    outcome = apply_move(state.board, action)
    if not outcome.changed:
        raise IllegalActionError(action, state.board)
    board = spawn_tile(outcome.board, rng)
    nxt = GameState(board, state.score + outcome.reward, state.moves + 1)
    return nxt, outcome.reward, is_terminal(board)


# ---------------------------------------------------------------------------
# encoding


def encode_onehot(board: Board) -> np.ndarray:
    """256-vector, flat index ``channel*16 + row*4 + col`` (all 0-based).

    Channel ``c`` marks cells holding exponent ``c``; channel 0 marks empties,
    so each cell sets exactly one entry.
    """
    cells = np.array(to_cells(board), dtype=np.int64)
    out = np.zeros(256, dtype=np.float64)
    out[cells * 16 + np.arange(16)] = 1.0
    return out


def decode_onehot(vec: np.ndarray) -> Board:
    planes = np.asarray(vec).reshape(16, 16)
    if not np.all(planes.sum(axis=0) == 1):
        raise ValueError("not a one-hot board encoding")
    return from_cells(planes.argmax(axis=0))


# ---------------------------------------------------------------------------
# dihedral symmetries
#
# Each symmetry is a signed permutation matrix acting on centred (row, col)
# coordinates. A board maps as out[M p] = in[p]; a direction vector d maps to
# M d, which keeps apply_move equivariant.

SYMMETRIES: dict[str, tuple[tuple[int, int], tuple[int, int]]] = {
    "identity": ((1, 0), (0, 1)),
    "rot90": ((0, -1), (1, 0)),  # counter-clockwise, same as np.rot90
    "rot180": ((-1, 0), (0, -1)),
    "rot270": ((0, 1), (-1, 0)),
    "flip_lr": ((1, 0), (0, -1)),
    "flip_ud": ((-1, 0), (0, 1)),
    "transpose": ((0, 1), (1, 0)),
    "antitranspose": ((0, -1), (-1, 0)),
}

_DIRECTIONS = {Action.LEFT: (0, -1), Action.UP: (-1, 0), Action.RIGHT: (0, 1), Action.DOWN: (1, 0)}
_DIRECTION_TO_ACTION = {v: k for k, v in _DIRECTIONS.items()}


def _apply_matrix(m, v):
    return (m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1])


def _permutation(m) -> np.ndarray:
    perm = np.empty(16, dtype=np.int64)  # perm[dst] = src
    for r in range(4):
        for c in range(4):
            r2, c2 = _apply_matrix(m, (2 * r - 3, 2 * c - 3))
            perm[(r2 + 3) // 2 * 4 + (c2 + 3) // 2] = 4 * r + c
    return perm


_PERMS = {name: _permutation(m) for name, m in SYMMETRIES.items()}


def transform(board: Board, sym: str) -> Board:
    cells = np.array(to_cells(board), dtype=np.int64)
    return from_cells(cells[_PERMS[sym]])


def act_transform(action: int, sym: str) -> Action:
    d = _apply_matrix(SYMMETRIES[sym], _DIRECTIONS[Action(action)])
    return _DIRECTION_TO_ACTION[d]

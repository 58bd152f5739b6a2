"""Board evaluation: empty cells, largest exponent, smoothness, monotonicity.

All four factors work on exponents (log2 of tile values).

* smoothness: ``-sum |e_i - e_j|`` over horizontally and vertically adjacent
  pairs where both cells are occupied.
* monotonicity: per row and per column, ``inc = -sum max(0, e[i+1] - e[i])``
  and ``dec = -sum max(0, e[i] - e[i+1])`` with empties counted as 0; the line
  scores ``max(inc, dec)`` and the board sums its eight lines.

Terminal boards score ``death_penalty`` outright.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numba as nb
import numpy as np

from g2048.engine import (
    LINE_LEFT,
    Board,
    _unpack_line,
    get_col,
    get_row,
    is_terminal,
    is_terminal_kernel,
    to_grid,
)


@dataclass(frozen=True)
class HeuristicWeights:
    w_empty: float = 2.7
    w_max: float = 1.0
    w_smooth: float = 0.1
    w_mono: float = 1.0
    death_penalty: float = -1e6

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError(f"heuristic weights must be finite: {self}")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.w_empty, self.w_max, self.w_smooth, self.w_mono, self.death_penalty],
            dtype=np.float64,
        )

    def scaled(self, c: float) -> "HeuristicWeights":
        return HeuristicWeights(**{k: v * c for k, v in asdict(self).items()})


DEFAULT_WEIGHTS = HeuristicWeights()


# ---------------------------------------------------------------------------
# reference factor definitions on a 4x4 grid


def _lines(board: Board) -> list[np.ndarray]:
    g = to_grid(board)
    return [g[i] for i in range(4)] + [g[:, j] for j in range(4)]


def count_empty(board: Board) -> int:
    return int(np.count_nonzero(to_grid(board) == 0))


def max_exponent(board: Board) -> int:
    return int(to_grid(board).max())


def _line_smoothness(line) -> int:
    return -sum(
        abs(int(a) - int(b)) for a, b in zip(line[:-1], line[1:]) if a and b
    )


def _line_monotonicity(line) -> int:
    inc = dec = 0
    for a, b in zip(line[:-1], line[1:]):
        inc -= max(0, int(b) - int(a))
        dec -= max(0, int(a) - int(b))
    return max(inc, dec)


def smoothness(board: Board) -> float:
    return float(sum(_line_smoothness(line) for line in _lines(board)))


def monotonicity(board: Board) -> float:
    return float(sum(_line_monotonicity(line) for line in _lines(board)))


def goodness(board: Board, weights: HeuristicWeights = DEFAULT_WEIGHTS) -> float:
    return float(goodness_kernel(np.uint64(board), weights.as_array(), *TABLES))


# ---------------------------------------------------------------------------
# per-line tables used by the compiled evaluator


def _build_tables():
    smooth = np.empty(65536, dtype=np.float64)
    mono = np.empty(65536, dtype=np.float64)
    empty = np.empty(65536, dtype=np.int64)
    top = np.empty(65536, dtype=np.int64)
    for line in range(65536):
        cells = _unpack_line(line)
        smooth[line] = _line_smoothness(cells)
        mono[line] = _line_monotonicity(cells)
        empty[line] = cells.count(0)
        top[line] = max(cells)
    return smooth, mono, empty, top


LINE_SMOOTH, LINE_MONO, LINE_EMPTY, LINE_MAX = _build_tables()
TABLES = (LINE_LEFT, LINE_SMOOTH, LINE_MONO, LINE_EMPTY, LINE_MAX)


@nb.njit(cache=True)
def goodness_kernel(b, w, left, smooth, mono, empty, top):
    """``w`` is ``[w_empty, w_max, w_smooth, w_mono, death_penalty]``."""
    if is_terminal_kernel(b, left):
        return w[4]
    n_empty = 0
    e_max = 0
    s = 0.0
    m = 0.0
    for k in range(4):
        row = get_row(b, k)
        col = get_col(b, k)
        n_empty += empty[row]
        if top[row] > e_max:
            e_max = top[row]
        s += smooth[row] + smooth[col]
        m += mono[row] + mono[col]
    return w[0] * n_empty + w[1] * e_max + w[2] * s + w[3] * m


def factors(board: Board) -> dict[str, float]:
    return {
        "empty": count_empty(board),
        "max": max_exponent(board),
        "smoothness": smoothness(board),
        "monotonicity": monotonicity(board),
        "terminal": is_terminal(board),
    }

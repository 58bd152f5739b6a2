"""Determinized beam search over sampled successors.

Every expansion applies each legal action to a node and draws exactly one
random spawn for it, so the tree never branches on chance. After each level
the ``width`` best nodes survive; after ``depth`` levels (the root expansion
counts as level 1) the agent plays the root action that the best surviving
node descends from.

Nodes that die (no legal move) score ``death_penalty`` and are carried
forward unchanged, so the beam is never empty. Ties in score go to the node
created first.

Random draws happen in a fixed order: nodes in list order, and for each node
its legal actions in index order, one spawn (cell draw, then value draw) per
child. The compiled :func:`choose_action` and the step-by-step
:func:`root_expand` / :func:`expand_level` / :func:`prune` route consume the
stream identically and return the same action.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numba as nb
import numpy as np

from g2048 import engine
from g2048.engine import (
    LINE_LEFT,
    LINE_REWARD,
    LINE_RIGHT,
    Action,
    Board,
    GameError,
    is_terminal_kernel,
    move_kernel,
    spawn_kernel,
)
from g2048.heuristic import DEFAULT_WEIGHTS, TABLES, HeuristicWeights, goodness, goodness_kernel
from g2048.rng import Rng


@dataclass(frozen=True)
class BeamConfig:
    depth: int = 20
    width: int = 10

    def __post_init__(self):
        if self.depth < 1 or self.width < 1:
            raise ValueError(f"beam depth and width must be >= 1, got {self}")


@dataclass(frozen=True)
class BeamNode:
    board: Board
    initial_action: Action
    score: float
    alive: bool
    birth_index: int


def _make_node(board, initial_action, weights, birth) -> BeamNode:
    return BeamNode(
        board=board,
        initial_action=Action(initial_action),
        score=goodness(board, weights),
        alive=not engine.is_terminal(board),
        birth_index=birth,
    )


def root_expand(
    board: Board,
    weights: HeuristicWeights = DEFAULT_WEIGHTS,
    rng: Rng | None = None,
    births: Iterator[int] | None = None,
) -> list[BeamNode]:
    legal = engine.legal_actions(board)
    if not legal:
        raise GameError("cannot search from a terminal board")
    rng = rng if rng is not None else Rng()
    births = births if births is not None else itertools.count()
    nodes = []
    for a in legal:
        child = engine.spawn_tile(engine.apply_move(board, a).board, rng)
        nodes.append(_make_node(child, a, weights, next(births)))
    return nodes


def expand_level(
    nodes: list[BeamNode],
    weights: HeuristicWeights = DEFAULT_WEIGHTS,
    rng: Rng | None = None,
    births: Iterator[int] | None = None,
) -> list[BeamNode]:
    if not nodes:
        raise ValueError("expand_level needs at least one node")
    rng = rng if rng is not None else Rng()
    if births is None:
        births = itertools.count(max(n.birth_index for n in nodes) + 1)
    children, dead = [], []
    for node in nodes:
        if not node.alive:
            dead.append(node)
            continue
        for a in engine.legal_actions(node.board):
            child = engine.spawn_tile(engine.apply_move(node.board, a).board, rng)
            children.append(_make_node(child, node.initial_action, weights, next(births)))
    return children + dead


def prune(nodes: list[BeamNode], k: int) -> list[BeamNode]:
    """Keep the ``k`` best nodes, best first; equal scores favour earlier births."""
    return sorted(nodes, key=lambda n: (-n.score, n.birth_index))[:k]


def choose_action_reference(
    board: Board,
    config: BeamConfig = BeamConfig(),
    weights: HeuristicWeights = DEFAULT_WEIGHTS,
    rng: Rng | None = None,
) -> Action:
    """Plain-Python search; same result and rng consumption as the kernel."""
    rng = rng if rng is not None else Rng()
    births = itertools.count()
    beam = prune(root_expand(board, weights, rng, births), config.width)
    for _ in range(config.depth - 1):
        beam = prune(expand_level(beam, weights, rng, births), config.width)
    return beam[0].initial_action


# ---------------------------------------------------------------------------
# compiled search


@nb.njit(cache=True)
def _select_top(boards, acts, scores, alive, births, n, k, out_b, out_a, out_s, out_alive, out_birth):
    taken = np.zeros(n, dtype=np.bool_)
    m = min(n, k)
    for j in range(m):
        best = -1
        for i in range(n):
            if taken[i]:
                continue
            if best < 0 or scores[i] > scores[best] or (
                scores[i] == scores[best] and births[i] < births[best]
            ):
                best = i
        taken[best] = True
        out_b[j] = boards[best]
        out_a[j] = acts[best]
        out_s[j] = scores[best]
        out_alive[j] = alive[best]
        out_birth[j] = births[best]
    return m


@nb.njit(cache=True)
def beam_kernel(board, depth, width, w, state, left, right, rtab, smooth, mono, empty, top):
    cap = 4 * max(width, 4) + max(width, 4)
    cb = np.empty(cap, dtype=np.uint64)
    ca = np.empty(cap, dtype=np.int64)
    cs = np.empty(cap, dtype=np.float64)
    cl = np.empty(cap, dtype=np.bool_)
    cn = np.empty(cap, dtype=np.int64)
    bb = np.empty(cap, dtype=np.uint64)
    ba = np.empty(cap, dtype=np.int64)
    bs = np.empty(cap, dtype=np.float64)
    bl = np.empty(cap, dtype=np.bool_)
    bn = np.empty(cap, dtype=np.int64)
    birth = 0

    # root expansion: the root behaves like one alive node
    n = 0
    for a in range(4):
        moved, _ = move_kernel(board, a, left, right, rtab)
        if moved == board:
            continue
        child, _, _ = spawn_kernel(moved, state)
        cb[n] = child
        ca[n] = a
        cs[n] = goodness_kernel(child, w, left, smooth, mono, empty, top)
        cl[n] = not is_terminal_kernel(child, left)
        cn[n] = birth
        birth += 1
        n += 1
    if n == 0:
        return -1
    m = _select_top(cb, ca, cs, cl, cn, n, width, bb, ba, bs, bl, bn)

    for _ in range(depth - 1):
        n = 0
        for i in range(m):
            if not bl[i]:
                continue
            parent = bb[i]
            for a in range(4):
                moved, _ = move_kernel(parent, a, left, right, rtab)
                if moved == parent:
                    continue
                child, _, _ = spawn_kernel(moved, state)
                cb[n] = child
                ca[n] = ba[i]
                cs[n] = goodness_kernel(child, w, left, smooth, mono, empty, top)
                cl[n] = not is_terminal_kernel(child, left)
                cn[n] = birth
                birth += 1
                n += 1
        for i in range(m):
            if not bl[i]:
                cb[n] = bb[i]
                ca[n] = ba[i]
                cs[n] = bs[i]
                cl[n] = False
                cn[n] = bn[i]
                n += 1
        m = _select_top(cb, ca, cs, cl, cn, n, width, bb, ba, bs, bl, bn)
    return ba[0]


def choose_action(
    board: Board,
    config: BeamConfig = BeamConfig(),
    weights: HeuristicWeights = DEFAULT_WEIGHTS,
    rng: Rng | None = None,
) -> Action:
    rng = rng if rng is not None else Rng()
    a = beam_kernel(
        np.uint64(board),
        config.depth,
        config.width,
        weights.as_array(),
        rng.state,
        LINE_LEFT,
        LINE_RIGHT,
        LINE_REWARD,
        *TABLES[1:],
    )
    if a < 0:
        raise GameError("cannot search from a terminal board")
    return Action(int(a))


class BeamAgent:
    name = "beam"

    def __init__(self, config: BeamConfig = BeamConfig(), weights: HeuristicWeights = DEFAULT_WEIGHTS):
        self.config = config
        self.weights = weights

    def act(self, board: Board, legal: list[Action], rng: Rng) -> Action:
        if len(legal) == 1:
            return legal[0]
        return choose_action(board, self.config, self.weights, rng)

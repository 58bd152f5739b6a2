"""Single-game driver shared by every agent.

Each game gets two independent streams from its seed: role 0 drives tile
spawns, role 1 is handed to the agent. An agent's lookahead therefore never
shifts the spawns the real game sees.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Protocol

from g2048 import engine
from g2048.engine import Action, Board
from g2048.rng import Rng, derive_seed

ENV_STREAM = 0
AGENT_STREAM = 1


class Agent(Protocol):
    name: str

    def act(self, board: Board, legal: list[Action], rng: Rng) -> Action: ...


@dataclass(frozen=True)
class GameResult:
    seed: int
    max_tile: int
    score: int
    moves: int
    duration: float = 0.0

    def as_record(self) -> dict:
        # duration is wall-clock and stays out of transcripts so they are reproducible
        return {"seed": self.seed, "max_tile": self.max_tile, "score": self.score, "moves": self.moves}


class RandomAgent:
    name = "random"

    def act(self, board: Board, legal: list[Action], rng: Rng) -> Action:
        return legal[rng.randbelow(len(legal))]


MoveHook = Callable[[dict], None]


def play_game(agent: Agent, seed: int, on_move: MoveHook | None = None) -> GameResult:
    """Play until no legal move remains.

    ``on_move`` receives a record per move with the post-spawn board, the
    action, the merge reward and the spawn placement; a ``start`` record with
    the initial board comes first.
    """
    t0 = time.perf_counter()
    env_rng = Rng(derive_seed(seed, ENV_STREAM))
    agent_rng = Rng(derive_seed(seed, AGENT_STREAM))
    state = engine.new_game(env_rng)
    if on_move is not None:
        on_move({"type": "start", "seed": seed, "board": list(engine.to_cells(state.board))})
    while True:
        legal = engine.legal_actions(state.board)
        if not legal:
            break
        action = agent.act(state.board, legal, agent_rng)
        outcome = engine.apply_move(state.board, action)
        if not outcome.changed:
            raise engine.IllegalActionError(action, state.board)
        board, cell, exponent = engine.spawn_tile_at(outcome.board, env_rng)
        state = engine.GameState(board, state.score + outcome.reward, state.moves + 1)
        if on_move is not None:
            on_move(
                {
                    "type": "move",
                    "move": state.moves,
                    "board": list(engine.to_cells(board)),
                    "action": Action(action).name.lower(),
                    "reward": outcome.reward,
                    "spawn_cell": cell,
                    "spawn_exponent": exponent,
                }
            )
    return GameResult(
        seed=seed,
        max_tile=engine.max_tile(state.board),
        score=state.score,
        moves=state.moves,
        duration=time.perf_counter() - t0,
    )

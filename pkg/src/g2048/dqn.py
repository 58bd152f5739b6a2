"""Deep Q-learning with epsilon-greedy play and invalid-action masking.

Transitions from the games being played collect in an on-policy buffer. When
it reaches ``batch_size`` or the current game ends, the buffer is turned into
one gradient step and cleared. TD targets are ``r`` for terminal transitions
and ``r + gamma * max Q(s', a')`` over the legal actions of ``s'`` otherwise,
computed with the network as it stood before the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from g2048 import engine
from g2048.engine import Action, Board
from g2048.neuralnet import Mode, OptimizerState, QNetwork, backward, forward, optimizer_step
from g2048.play import AGENT_STREAM, ENV_STREAM, GameResult, play_game
from g2048.rng import Rng, derive_seed

# sub-streams of TrainConfig.seed
_INIT_STREAM = 0
_DROPOUT_STREAM = 1
_GAMES_STREAM = 2


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: Action
    r: float
    s_next: np.ndarray
    terminal: bool
    legal_next: tuple[Action, ...] = ()

    def __post_init__(self):
        if self.terminal != (len(self.legal_next) == 0):
            raise ValueError("legal_next must be empty exactly when the transition is terminal")


@dataclass(frozen=True)
class TrainConfig:
    games: int = 1000
    epsilon: float = 0.3
    batch_size: int = 128
    gamma: float = 1.0
    lr: float = 5e-4
    dropout_rate: float = 0.2
    seed: int = 0
    log_rewards: bool = False  # train on log2(1 + r) instead of raw merge sums

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.games < 0:
            raise ValueError(f"games must be >= 0, got {self.games}")


def masked_q(net: QNetwork, state_vec: np.ndarray, legal: Sequence[int]) -> dict[Action, float]:
    if not legal:
        raise ValueError("masked_q needs at least one legal action")
    q, _ = forward(net, state_vec, Mode.EVAL)
    return {Action(a): float(q[a]) for a in legal}


def _argmax(qs: dict[Action, float]) -> Action:
    # ties go to the lowest action index
    best = None
    for a in sorted(qs):
        if best is None or qs[a] > qs[best]:
            best = a
    return best


def select_action(net: QNetwork, state_vec: np.ndarray, legal: Sequence[int], epsilon: float, rng: Rng) -> Action:
    if not legal:
        raise ValueError("select_action needs at least one legal action")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return Action(legal[rng.randbelow(len(legal))])
    return _argmax(masked_q(net, state_vec, legal))


def td_target(t: Transition, net: QNetwork, gamma: float) -> float:
    if t.terminal or gamma == 0.0:
        return float(t.r)
    return float(t.r) + gamma * max(masked_q(net, t.s_next, t.legal_next).values())


def _batch_targets(batch: Sequence[Transition], net: QNetwork, gamma: float) -> np.ndarray:
    rewards = np.array([t.r for t in batch], dtype=np.float64)
    live = [i for i, t in enumerate(batch) if not t.terminal]
    if not live or gamma == 0.0:
        return rewards
    q_next, _ = forward(net, np.stack([batch[i].s_next for i in live]), Mode.EVAL)
    for row, i in zip(q_next, live):
        rewards[i] += gamma * max(row[a] for a in batch[i].legal_next)
    return rewards


def train_step(
    net: QNetwork,
    opt: OptimizerState,
    batch: Sequence[Transition],
    gamma: float,
    lr: float,
    rng: Rng | None = None,
) -> float:
    """One Adam step on the mean squared TD error of ``batch``; returns that mean.

    Targets are frozen before any parameter moves. Dropout masks are drawn
    transition by transition from ``rng``.
    """
    if not batch:
        raise ValueError("train_step needs a non-empty batch")
    targets = _batch_targets(batch, net, gamma)
    states = np.stack([t.s for t in batch])
    actions = np.array([int(t.a) for t in batch])
    q, cache = forward(net, states, Mode.TRAIN, rng)
    rows = np.arange(len(batch))
    diff = targets - q[rows, actions]
    grad_q = np.zeros_like(q)
    grad_q[rows, actions] = -2.0 * diff / len(batch)
    optimizer_step(net, opt, backward(net, cache, grad_q), lr)
    return float(np.mean(diff * diff))


class DQNAgent:
    name = "dqn"

    def __init__(self, net: QNetwork, epsilon: float = 0.0):
        self.net = net
        self.epsilon = epsilon

    def act(self, board: Board, legal: list[Action], rng: Rng) -> Action:
        if len(legal) == 1 and self.epsilon == 0.0:
            return legal[0]
        return select_action(self.net, engine.encode_onehot(board), legal, self.epsilon, rng)


@dataclass
class TrainingRun:
    net: QNetwork
    log: list[dict] = field(default_factory=list)
    updates: int = 0


def train(config: TrainConfig = TrainConfig(), on_game: Callable[[dict], None] | None = None) -> TrainingRun:
    """Train a fresh network for ``config.games`` games.

    Returns the network and one log record per game
    (``index, score, max_tile, moves, mean_loss, updates``).
    """
    net = QNetwork.init(Rng(derive_seed(config.seed, _INIT_STREAM)), config.dropout_rate)
    opt = OptimizerState.for_network(net)
    dropout_rng = Rng(derive_seed(config.seed, _DROPOUT_STREAM))
    games_seed = derive_seed(config.seed, _GAMES_STREAM)
    run = TrainingRun(net)

    for index in range(config.games):
        game_seed = derive_seed(games_seed, index)
        env_rng = Rng(derive_seed(game_seed, ENV_STREAM))
        agent_rng = Rng(derive_seed(game_seed, AGENT_STREAM))
        state = engine.new_game(env_rng)
        s_vec = engine.encode_onehot(state.board)
        legal = engine.legal_actions(state.board)
        batch: list[Transition] = []
        losses = []
        updates = 0
        while legal:
            a = select_action(net, s_vec, legal, config.epsilon, agent_rng)
            state, reward, terminal = engine.step(state, a, env_rng)
            next_vec = engine.encode_onehot(state.board)
            legal_next = engine.legal_actions(state.board)
            r = math.log2(1 + reward) if config.log_rewards else float(reward)
            batch.append(Transition(s_vec, a, r, next_vec, terminal, tuple(legal_next)))
            if len(batch) >= config.batch_size or terminal:
                losses.append(train_step(net, opt, batch, config.gamma, config.lr, dropout_rng))
                updates += 1
                batch = []
            s_vec, legal = next_vec, legal_next
        run.updates += updates
        record = {
            "index": index,
            "score": state.score,
            "max_tile": engine.max_tile(state.board),
            "moves": state.moves,
            "mean_loss": float(np.mean(losses)) if losses else 0.0,
            "updates": updates,
        }
        run.log.append(record)
        if on_game is not None:
            on_game(record)
    return run


def evaluate(net: QNetwork, games: int, seed: int) -> list[GameResult]:
    """Greedy (epsilon = 0), eval-mode play; game ``i`` uses ``derive_seed(seed, i)``."""
    agent = DQNAgent(net, epsilon=0.0)
    return [play_game(agent, derive_seed(seed, i)) for i in range(games)]

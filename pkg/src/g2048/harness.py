"""Seeded game batches, max-tile distributions, config files and transcripts."""

from __future__ import annotations

import json
import multiprocessing
import os
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

from g2048 import engine
from g2048.beam_search import BeamAgent, BeamConfig
from g2048.dqn import DQNAgent, TrainConfig
from g2048.heuristic import DEFAULT_WEIGHTS, HeuristicWeights
from g2048.neuralnet import load as load_model
from g2048.play import ENV_STREAM, GameResult, RandomAgent, play_game
from g2048.rng import Rng, derive_seed

AGENT_KINDS = ("random", "beam", "dqn")
COLUMN_TITLES = {"random": "Random Play", "beam": "Beam Search", "dqn": "Deep Q-learning"}


class ConfigError(ValueError):
    pass


class TranscriptError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config file


@dataclass(frozen=True)
class Config:
    heuristic: HeuristicWeights = DEFAULT_WEIGHTS
    beam: BeamConfig = BeamConfig()
    dqn: TrainConfig = TrainConfig()


_SECTIONS = {"heuristic": HeuristicWeights, "beam": BeamConfig, "dqn": TrainConfig}


def _coerce(raw: str, kind: type, key: str):
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return lowered in ("true", "1", "yes")
        if kind is int:
            return int(raw, 0)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config(text: str, base: Config = Config()) -> Config:
    """Parse flat ``section.key = value`` lines; ``#`` starts a comment."""
    updates: dict[str, dict] = {name: {} for name in _SECTIONS}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        section, _, name = key.partition(".")
        if section not in _SECTIONS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        types = {f.name: f.type for f in fields(_SECTIONS[section])}
        if name not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        kind = {"int": int, "float": float, "bool": bool}[str(types[name])]
        updates[section][name] = _coerce(value, kind, key)
    try:
        return Config(**{s: replace(getattr(base, s), **kw) for s, kw in updates.items()})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | os.PathLike | None) -> Config:
    if path is None:
        return Config()
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())


# ---------------------------------------------------------------------------
# agents


@dataclass(frozen=True)
class AgentSpec:
    kind: str
    beam: BeamConfig = BeamConfig()
    weights: HeuristicWeights = DEFAULT_WEIGHTS
    model_path: str | None = None

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}; expected one of {AGENT_KINDS}")
        if self.kind == "dqn":
            if self.model_path is None:
                raise ValueError("a dqn agent needs a model file")
            if not os.path.isfile(self.model_path):
                raise FileNotFoundError(f"model file not found: {self.model_path}")


def build_agent(spec: AgentSpec):
    if spec.kind == "random":
        return RandomAgent()
    if spec.kind == "beam":
        return BeamAgent(spec.beam, spec.weights)
    return DQNAgent(load_model(spec.model_path), epsilon=0.0)


_WORKER_AGENTS: dict[AgentSpec, object] = {}


def _play_one(job):
    spec, index, seed, record = job
    agent = _WORKER_AGENTS.get(spec)
    if agent is None:
        agent = _WORKER_AGENTS[spec] = build_agent(spec)
    records: list[dict] = []

    def hook(rec):
        records.append({"agent": spec.kind, "game": index, **rec})

    result = play_game(agent, seed, hook if record else None)
    if record:
        records.append({"agent": spec.kind, "game": index, "type": "result", **result.as_record()})
    return result, records


def run_games(
    agent: AgentSpec,
    n: int,
    master_seed: int,
    workers: int = 1,
    transcript: list[dict] | None = None,
) -> list[GameResult]:
    """Play ``n`` games; game ``i`` is seeded with ``derive_seed(master_seed, i)``.

    Results come back in game order whatever the worker count. Transcript
    records, if requested, are appended to ``transcript`` in game order too.
    """
    if n < 1:
        raise ValueError(f"need at least one game, got {n}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    record = transcript is not None
    jobs = [(agent, i, derive_seed(master_seed, i), record) for i in range(n)]
    _WORKER_AGENTS.pop(agent, None)  # the model file may have changed since the last call
    if workers == 1:
        outputs = [_play_one(job) for job in jobs]
    else:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(workers) as pool:
            outputs = pool.map(_play_one, jobs, chunksize=max(1, n // (4 * workers)))
    results = []
    for result, records in outputs:
        results.append(result)
        if record:
            transcript.extend(records)
    return results


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class DistributionTable:
    counts: dict[int, int]
    games: int
    percentages: dict[int, float] = field(init=False)

    def __post_init__(self):
        pct = {tile: 100.0 * c / self.games for tile, c in sorted(self.counts.items())}
        object.__setattr__(self, "percentages", pct)

    def rounded(self) -> dict[int, float]:
        """Percentages at two decimals, largest-remainder rounded so they total 100.00."""
        total = 10_000
        exact = {t: c * total / self.games for t, c in sorted(self.counts.items())}
        floors = {t: int(v) for t, v in exact.items()}
        short = total - sum(floors.values())
        for t in sorted(exact, key=lambda t: (floors[t] - exact[t], t))[:short]:
            floors[t] += 1
        return {t: v / 100 for t, v in floors.items()}

    def fraction_at_least(self, tile: int) -> float:
        return sum(c for t, c in self.counts.items() if t >= tile) / self.games

    def to_json(self) -> dict:
        return {
            "games": self.games,
            "percentages": {str(t): p for t, p in self.rounded().items()},
            "counts": {str(t): c for t, c in sorted(self.counts.items())},
        }


def tile_distribution(results: Sequence[GameResult]) -> DistributionTable:
    if not results:
        raise ValueError("tile_distribution needs at least one result")
    return DistributionTable(dict(Counter(r.max_tile for r in results)), len(results))


def render_table(tables: dict[str, DistributionTable]) -> str:
    """Aligned text table, one column per agent, percentages to two decimals."""
    tiles = sorted(set().union(*(t.counts for t in tables.values())))
    shown = {name: t.rounded() for name, t in tables.items()}
    titles = [COLUMN_TITLES.get(name, name) for name in tables]
    widths = [max(len(title), 8) for title in titles]
    head = f"{'Max Tile':>8}  " + "  ".join(f"{t:>{w}}" for t, w in zip(titles, widths))
    lines = [head, "-" * len(head)]
    for tile in tiles:
        cells = [f"{pct.get(tile, 0.0):.2f} %" for pct in shown.values()]
        lines.append(f"{tile:>8}  " + "  ".join(f"{c:>{w}}" for c, w in zip(cells, widths)))
    games = "  ".join(f"{t.games:>{w}}" for t, w in zip(tables.values(), widths))
    lines.append(f"{'games':>8}  {games}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# transcripts


def write_transcript(records: Iterable[dict], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")


def read_transcript(path: str | os.PathLike) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def replay(records: Sequence[dict]) -> list[GameResult]:
    """Re-simulate transcript records and check every board, reward and result.

    Spawns are regenerated from each game's seed, so a transcript passes only
    if the recorded placements are the ones the engine would draw. Raises
    :class:`TranscriptError` on the first mismatch.
    """
    results = []
    state = rng = key = None
    for rec in records:
        kind = rec.get("type")
        where = f"{rec.get('agent')} game {rec.get('game')}"
        if kind == "start":
            key = (rec.get("agent"), rec.get("game"))
            rng = Rng(derive_seed(rec["seed"], ENV_STREAM))
            state = engine.new_game(rng)
            if list(engine.to_cells(state.board)) != rec["board"]:
                raise TranscriptError(f"{where}: initial board differs from seed {rec['seed']}")
            seed = rec["seed"]
            continue
        if state is None or (rec.get("agent"), rec.get("game")) != key:
            raise TranscriptError(f"{where}: record without a matching start record")
        if kind == "move":
            action = engine.Action[rec["action"].upper()]
            outcome = engine.apply_move(state.board, action)
            if not outcome.changed:
                raise TranscriptError(f"{where} move {rec['move']}: {rec['action']} is illegal")
            if outcome.reward != rec["reward"]:
                raise TranscriptError(f"{where} move {rec['move']}: reward {outcome.reward} != {rec['reward']}")
            board, cell, exponent = engine.spawn_tile_at(outcome.board, rng)
            if (cell, exponent) != (rec["spawn_cell"], rec["spawn_exponent"]):
                raise TranscriptError(f"{where} move {rec['move']}: spawn differs")
            if list(engine.to_cells(board)) != rec["board"]:
                raise TranscriptError(f"{where} move {rec['move']}: board differs")
            state = engine.GameState(board, state.score + outcome.reward, state.moves + 1)
            if state.moves != rec["move"]:
                raise TranscriptError(f"{where}: move counter {rec['move']} out of sequence")
        elif kind == "result":
            if not engine.is_terminal(state.board):
                raise TranscriptError(f"{where}: transcript ends before the game does")
            result = GameResult(seed, engine.max_tile(state.board), state.score, state.moves)
            if result.as_record() != {k: rec[k] for k in ("seed", "max_tile", "score", "moves")}:
                raise TranscriptError(f"{where}: final result {rec} != replayed {result.as_record()}")
            results.append(result)
            state = None
        else:
            raise TranscriptError(f"unknown record type {kind!r}")
    if state is not None:
        raise TranscriptError("transcript ends in the middle of a game")
    return results

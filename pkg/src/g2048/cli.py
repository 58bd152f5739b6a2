"""Command-line entry point.

    g2048 play  --agent {random,beam,dqn} --games N --seed S [--config F] [--model F] [--transcripts F]
    g2048 train [--config F] --out MODEL [--log F] [--games N] [--seed S]
    g2048 eval  --model F --games N --seed S [--transcripts F]
    g2048 bench --games N --seed S [--config F] [--model F] [--transcripts F]

Tables go to stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import replace

from g2048 import dqn, harness, neuralnet
from g2048.engine import GameError

log = logging.getLogger("g2048")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--games", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--transcripts", help="write a JSON-lines move transcript here")
    p.add_argument("--json", dest="json_out", help="also write the distribution as JSON here")
    p.add_argument("--workers", type=int, default=1, help="parallel game workers (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="g2048", description="2048 agents and benchmark harness")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    play = sub.add_parser("play", help="play seeded games with one agent")
    play.add_argument("--agent", choices=harness.AGENT_KINDS, required=True)
    play.add_argument("--model", help="model file for --agent dqn")
    _add_common(play)

    train = sub.add_parser("train", help="train a deep Q-network")
    train.add_argument("--config")
    train.add_argument("--out", required=True, help="model file to write")
    train.add_argument("--log", help="JSON-lines training log")
    train.add_argument("--games", type=int, help="override dqn.games")
    train.add_argument("--seed", type=int, help="override dqn.seed")

    ev = sub.add_parser("eval", help="greedy evaluation of a trained model")
    ev.add_argument("--model", required=True)
    _add_common(ev)

    bench = sub.add_parser("bench", help="all three agents on the same seeds")
    bench.add_argument("--model", help="trained model; trained from the config when omitted")
    _add_common(bench)
    return parser


def _emit(tables: dict[str, harness.DistributionTable], args) -> None:
    sys.stdout.write(harness.render_table(tables))
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as f:
            json.dump({name: t.to_json() for name, t in tables.items()}, f, indent=2, sort_keys=True)
            f.write("\n")


def _run(kinds_models, config: harness.Config, args) -> int:
    transcript = [] if args.transcripts else None
    tables = {}
    for kind, model in kinds_models:
        spec = harness.AgentSpec(kind, config.beam, config.heuristic, model)
        results = harness.run_games(spec, args.games, args.seed, args.workers, transcript)
        tables[kind] = harness.tile_distribution(results)
    if transcript is not None:
        harness.write_transcript(transcript, args.transcripts)
    _emit(tables, args)
    return 0


def _train(config: harness.Config, out: str, log_path: str | None) -> None:
    log_file = open(log_path, "w", encoding="utf-8") if log_path else None
    try:

        def on_game(rec):
            if log_file:
                log_file.write(json.dumps(rec) + "\n")
            if rec["index"] % 100 == 99:
                log.info("game %d: max tile %d, mean loss %.3g", rec["index"] + 1, rec["max_tile"], rec["mean_loss"])

        run = dqn.train(config.dqn, on_game)
    finally:
        if log_file:
            log_file.close()
    neuralnet.save(run.net, out)


def cmd_play(args) -> int:
    config = harness.load_config(args.config)
    return _run([(args.agent, args.model)], config, args)


def cmd_train(args) -> int:
    config = harness.load_config(args.config)
    overrides = {k: v for k, v in (("games", args.games), ("seed", args.seed)) if v is not None}
    config = replace(config, dqn=replace(config.dqn, **overrides))
    _train(config, args.out, args.log)
    return 0


def cmd_eval(args) -> int:
    config = harness.load_config(args.config)
    return _run([("dqn", args.model)], config, args)


def cmd_bench(args) -> int:
    config = harness.load_config(args.config)
    if args.model:
        return _run([("random", None), ("beam", None), ("dqn", args.model)], config, args)
    log.warning("no --model given; training one from the config (%d games)", config.dqn.games)
    with tempfile.TemporaryDirectory() as tmp:
        model = os.path.join(tmp, "bench-model.txt")
        _train(config, model, None)
        return _run([("random", None), ("beam", None), ("dqn", model)], config, args)


COMMANDS = {"play": cmd_play, "train": cmd_train, "eval": cmd_eval, "bench": cmd_bench}


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, GameError) as exc:
        print(f"g2048 {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())

import json

import pytest

from g2048 import harness, neuralnet
from g2048.cli import cli_main
from g2048.rng import Rng


def run(capsys, *argv):
    code = cli_main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def model(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "net.txt"
    neuralnet.save(neuralnet.QNetwork.init(Rng(5)), path)
    return str(path)


def test_play_is_byte_identical(capsys):
    first = run(capsys, "play", "--agent", "random", "--games", "10", "--seed", "7")
    second = run(capsys, "play", "--agent", "random", "--games", "10", "--seed", "7")
    assert first[0] == 0 and first == second
    assert "Random Play" in first[1]
    other = run(capsys, "play", "--agent", "random", "--games", "10", "--seed", "8")
    assert other[1] != first[1]


def test_play_writes_transcript_and_json(capsys, tmp_path):
    t, j = tmp_path / "t.jsonl", tmp_path / "d.json"
    code, out, _ = run(
        capsys, "play", "--agent", "beam", "--games", "2", "--seed", "3", "--transcripts", str(t), "--json", str(j)
    )
    assert code == 0
    data = json.loads(j.read_text())
    assert data["beam"]["games"] == 2
    assert len(harness.replay(harness.read_transcript(t))) == 2


def test_train_then_eval(capsys, tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("dqn.games = 3\ndqn.batch_size = 32\n")
    out_model, log = tmp_path / "m.txt", tmp_path / "log.jsonl"
    code, _, err = run(capsys, "train", "--config", str(cfg), "--out", str(out_model), "--log", str(log))
    assert code == 0, err
    assert len(log.read_text().splitlines()) == 3
    neuralnet.load(out_model)
    code, out, _ = run(capsys, "eval", "--model", str(out_model), "--games", "3", "--seed", "1")
    assert code == 0 and "Deep Q-learning" in out


def test_train_flag_overrides_config(capsys, tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("dqn.games = 50\n")
    log = tmp_path / "log.jsonl"
    code, _, _ = run(capsys, "train", "--config", str(cfg), "--games", "2", "--out", str(tmp_path / "m"), "--log", str(log))
    assert code == 0 and len(log.read_text().splitlines()) == 2


def test_bench_has_one_column_per_agent(capsys, model):
    code, out, _ = run(capsys, "bench", "--games", "4", "--seed", "1", "--model", model)
    assert code == 0
    header = out.splitlines()[0]
    assert header.split("  ")[0].strip() == "Max Tile"
    for title in ("Random Play", "Beam Search", "Deep Q-learning"):
        assert header.count(title) == 1
    assert out.splitlines()[-1].split() == ["games", "4", "4", "4"]


@pytest.mark.parametrize(
    "argv",
    [
        ["play", "--agent", "random", "--games", "1", "--seed", "1", "--bogus"],
        ["play", "--agent", "greedy", "--games", "1", "--seed", "1"],
        ["fly"],
        [],
    ],
)
def test_bad_arguments(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code != 0 and err


def test_missing_files(capsys, tmp_path):
    missing = str(tmp_path / "nope.txt")
    for argv in (
        ["eval", "--model", missing, "--games", "1", "--seed", "1"],
        ["play", "--agent", "random", "--games", "1", "--seed", "1", "--config", missing],
        ["play", "--agent", "dqn", "--games", "1", "--seed", "1"],
    ):
        code, _, err = run(capsys, *argv)
        assert code == 1 and "error" in err


def test_malformed_config_and_model(capsys, tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("beam.depth = deep\n")
    code, _, err = run(capsys, "play", "--agent", "beam", "--games", "1", "--seed", "1", "--config", str(cfg))
    assert code == 1 and "beam.depth" in err
    bad = tmp_path / "bad.txt"
    bad.write_text("garbage\n")
    code, _, err = run(capsys, "eval", "--model", str(bad), "--games", "1", "--seed", "1")
    assert code == 1 and err


def test_nonpositive_games(capsys):
    code, _, err = run(capsys, "play", "--agent", "random", "--games", "0", "--seed", "1")
    assert code == 1 and err

"""2048 engine, beam-search and deep Q-learning agents, and a benchmark harness."""

__version__ = "0.1.0"

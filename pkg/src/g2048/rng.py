"""Seeded SplitMix64 generator shared by Python code and numba kernels.

The whole state is one unsigned 64-bit word kept in a length-1 ``uint64``
array, so compiled kernels can advance the very same stream that Python code
draws from. Every draw is defined purely in 64-bit integer arithmetic, which
makes streams identical on every platform.

Algorithm (Steele, Lea & Flood, SplitMix64)::

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

Derived draws:

* ``randbelow(n)``: ``((next() >> 32) * n) >> 32`` for ``1 <= n <= 2**32``
* ``random()``: ``(next() >> 11) * 2**-53``, a double in ``[0, 1)``
* ``bernoulli(p)``: ``random() < p``
"""

from __future__ import annotations

import numba as nb
import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

MASK64 = (1 << 64) - 1


@nb.njit(cache=True)
def mix64(z):
    """SplitMix64 output finalizer applied to a ``uint64``."""
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


@nb.njit(cache=True)
def next_u64(state):
    state[0] += _GAMMA
    return mix64(state[0])


@nb.njit(cache=True)
def randbelow(state, n):
    return np.int64(((next_u64(state) >> _S32) * np.uint64(n)) >> _S32)


@nb.njit(cache=True)
def random01(state):
    return np.float64(next_u64(state) >> _S11) * _INV53


@nb.njit(cache=True)
def fill_random(state, out):
    flat = out.reshape(-1)
    for i in range(flat.size):
        flat[i] = np.float64(next_u64(state) >> _S11) * _INV53


def _mix_py(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Seed of sub-stream ``index`` under ``master_seed``.

    ``mix(mix(master_seed) ^ (index * 0x9E3779B97F4A7C15))`` with all
    arithmetic modulo 2**64. Used for per-game and per-role streams so that a
    game's randomness does not depend on which games ran before it.
    """
    a = _mix_py(master_seed & MASK64)
    b = (index * 0x9E3779B97F4A7C15) & MASK64
    return _mix_py(a ^ b)


class Rng:
    """Deterministic generator; see the module docstring for the exact draws."""

    __slots__ = ("state",)

    def __init__(self, seed: int = 0):
        self.state = np.array([seed & MASK64], dtype=np.uint64)

    @property
    def seed_state(self) -> int:
        return int(self.state[0])

    def next_u64(self) -> int:
        return int(next_u64(self.state))

    def randbelow(self, n: int) -> int:
        if not 1 <= n <= 1 << 32:
            raise ValueError(f"randbelow bound out of range: {n}")
        return int(randbelow(self.state, n))

    def random(self) -> float:
        return float(random01(self.state))

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        out = np.empty(size, dtype=np.float64)
        fill_random(self.state, out)
        return low + (high - low) * out

    def random_array(self, size) -> np.ndarray:
        out = np.empty(size, dtype=np.float64)
        fill_random(self.state, out)
        return out

    def spawn(self, index: int) -> "Rng":
        """Independent child stream keyed by ``index``; does not advance self."""
        return Rng(derive_seed(self.seed_state, index))

    def copy(self) -> "Rng":
        other = Rng()
        other.state[0] = self.state[0]
        return other

    def __repr__(self) -> str:
        return f"Rng(state=0x{self.seed_state:016x})"

"""Seed derivation and the counter-based process-noise stream."""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _as_key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    part = int(part)
    if part < 0:
        raise ValueError(f"seed components must be non-negative, got {part}")
    return part


def derive_seed(seed: int, *labels: int | str) -> int:
    """Derive an independent 64-bit seed from ``seed`` and a path of labels.

    Labels may be integers (iteration, episode index) or short strings
    (stage names). The mapping is a pure function of its arguments.
    """
    words: list[int] = []
    for part in (seed, *labels):
        key = _as_key(part)
        # SeedSequence takes 32-bit words; split wide integers explicitly.
        words.extend([key & 0xFFFFFFFF, (key >> 32) & 0xFFFFFFFF, (key >> 64) & 0xFFFFFFFF])
    state = np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)
    return int(state[0]) & _MASK64


def generator(seed: int, *labels: int | str) -> np.random.Generator:
    """A numpy Generator keyed on ``derive_seed(seed, *labels)``."""
    return np.random.Generator(np.random.Philox(key=derive_seed(seed, *labels)))


def standard_noise(seed: int, horizon: int, n_s: int) -> np.ndarray:
    """Unit Gaussian noise block of shape (horizon, n_s) for one episode.

    Row ``h`` is the draw for step ``h``. Philox is counter based, so the
    block is the same regardless of the parameters the episode is simulated
    under: replays at different theta see the identical realisation.
    """
    gen = np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))
    return gen.standard_normal((horizon, n_s))

"""Counter-based sampling of Rayleigh power gains.

Every trial owns a fixed block range of a Philox4x64 stream keyed by the
stream seed, so a draw is addressable by ``(seed, trial_index)`` alone and
any batching or worker split reproduces the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

_WORDS_PER_BLOCK = 4
_DOUBLE_SCALE = 2.0 ** -53


@dataclass(frozen=True)
class ChannelDraw:
    storage_gains: tuple[float, ...]
    recovery_gains: tuple[float, ...]

    @property
    def K(self) -> int:
        return len(self.storage_gains)


def uniforms(stream_seed: int, start: int, stop: int, width: int) -> np.ndarray:
    """Return a ``(stop - start, width)`` array of u in [0, 1).

    Row ``i`` depends only on ``(stream_seed, start + i, width)``.
    """
    if width < 1:
        raise InvalidParameterError("width must be >= 1")
    if stop < start or start < 0:
        raise InvalidParameterError(f"bad trial range [{start}, {stop})")
    n = stop - start
    blocks = -(-width // _WORDS_PER_BLOCK)
    words = blocks * _WORDS_PER_BLOCK
    if n == 0:
        return np.empty((0, width))
    key = int(stream_seed) & (2**64 - 1)
    bitgen = np.random.Philox(key=[key, 0], counter=[start * blocks, 0, 0, 0])
    raw = bitgen.random_raw(n * words).reshape(n, words)[:, :width]
    # 53 high bits -> exactly representable doubles in [0, 1)
    return (raw >> np.uint64(11)).astype(np.float64) * _DOUBLE_SCALE


def exponential_gains(u: np.ndarray) -> np.ndarray:
    """Inverse CDF of the unit-mean exponential; finite because u < 1."""
    return -np.log1p(-u)


def sample_batch(stream_seed: int, start: int, stop: int, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Storage and recovery gains for trials ``start..stop-1``, each ``(n, K)``."""
    if K < 1:
        raise InvalidParameterError(f"K must be >= 1, got {K}")
    g = exponential_gains(uniforms(stream_seed, start, stop, 2 * K))
    return g[:, :K], g[:, K:]


def sample_draw(stream_seed: int, trial_index: int, K: int) -> ChannelDraw:
    storage, recovery = sample_batch(stream_seed, trial_index, trial_index + 1, K)
    return ChannelDraw(tuple(storage[0].tolist()), tuple(recovery[0].tolist()))

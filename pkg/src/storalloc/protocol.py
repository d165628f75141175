"""One store/recover trial: decoding set, greedy time split, rate test.

Scalar functions follow the protocol step by step; ``evaluate_batch`` is the
vectorised equivalent used by the Monte Carlo engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .allocation import AllocationVector
from .channel import ChannelDraw, sample_batch, sample_draw
from .config import UNIT_TOL, SystemConfig
from .errors import InfeasibleError, InvalidParameterError


@dataclass(frozen=True)
class DecodingSet:
    members: frozenset[int]

    def __contains__(self, i):
        return i in self.members

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class TimeAllocation:
    """``(node, t)`` pairs in descending recovery-gain order."""

    fractions: tuple[tuple[int, float], ...]

    @property
    def nodes(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.fractions)

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(t for _, t in self.fractions)

    def as_dict(self) -> dict[int, float]:
        return dict(self.fractions)


@dataclass(frozen=True)
class TrialOutcome:
    decoded: DecodingSet
    storable: bool
    recovered: bool
    accumulated_rate: float


def stored_fraction(alloc, decoding_set: DecodingSet) -> float:
    sizes = alloc.sizes if isinstance(alloc, AllocationVector) else alloc
    return math.fsum(sizes[i] for i in decoding_set.members)


def form_decoding_set(draw: ChannelDraw, rho: float, Q: float) -> DecodingSet:
    """Nodes whose source link supports rate Q: log2(1 + rho*g) >= Q."""
    if not rho > 0:
        raise InvalidParameterError("rho must be positive")
    return DecodingSet(frozenset(
        i for i, g in enumerate(draw.storage_gains) if math.log2(1.0 + rho * g) >= Q
    ))


def allocate_time(alloc, decoding_set: DecodingSet, recovery_gains) -> TimeAllocation | None:
    """Greedy time split over the decoding set; None when the object is not storable.

    Members are visited by descending recovery gain (ties: lower index first)
    and each takes its full stored share until the shares reach one.
    """
    sizes = alloc.sizes if isinstance(alloc, AllocationVector) else tuple(alloc)
    if stored_fraction(sizes, decoding_set) < 1.0 - UNIT_TOL:
        return None
    order = sorted(decoding_set.members, key=lambda i: (-recovery_gains[i], i))
    fractions = []
    running = 0.0
    for i in order:
        if running >= 1.0:
            t = 0.0
        elif running + sizes[i] <= 1.0:
            t = sizes[i]
        else:
            t = 1.0 - running
        running += sizes[i]
        fractions.append((i, t))
    return TimeAllocation(tuple(fractions))


def lp_oracle_time(caps, gains, rho: float) -> TimeAllocation:
    """Maximise sum t_i log2(1 + rho g_i) s.t. sum t = 1, 0 <= t_i <= caps_i.

    Exchange argument: saturate caps in decreasing order of the objective
    coefficient. Kept separate from ``allocate_time`` so the two can be
    checked against each other.
    """
    caps = [float(c) for c in caps]
    if math.fsum(caps) < 1.0 - UNIT_TOL:
        raise InfeasibleError("caps sum below one")
    coeff = [math.log2(1.0 + rho * g) for g in gains]
    ranked = sorted(range(len(caps)), key=lambda i: coeff[i], reverse=True)
    left = 1.0
    out = []
    for i in ranked:
        t = min(caps[i], max(left, 0.0))
        left -= t
        out.append((i, t))
    return TimeAllocation(tuple(out))


def lp_objective(time_alloc: TimeAllocation, gains, rho: float) -> float:
    return math.fsum(t * math.log2(1.0 + rho * gains[i]) for i, t in time_alloc.fractions)


def recovery_test(time_alloc: TimeAllocation | None, recovery_gains, rho: float, Q: float) -> tuple[bool, float]:
    """Strict test: recovered iff accumulated rate > Q."""
    if time_alloc is None:
        return False, 0.0
    rate = lp_objective(time_alloc, recovery_gains, rho)
    return rate > Q, rate


def run_trial(config: SystemConfig, alloc: AllocationVector, trial_index: int) -> TrialOutcome:
    if alloc.K != config.K:
        raise InvalidParameterError(f"allocation has {alloc.K} nodes, config K={config.K}")
    draw = sample_draw(config.seed, trial_index, config.K)
    decoded = form_decoding_set(draw, config.rho, config.Q)
    time_alloc = allocate_time(alloc, decoded, draw.recovery_gains)
    recovered, rate = recovery_test(time_alloc, draw.recovery_gains, config.rho, config.Q)
    return TrialOutcome(decoded, time_alloc is not None, recovered, rate)


# ---------------------------------------------------------------------------
# vectorised path


def recovery_order(recovery: np.ndarray) -> np.ndarray:
    """Per-row node order by descending gain, ties by ascending index."""
    return np.argsort(-recovery, axis=1, kind="stable")


def decoded_mask(storage: np.ndarray, rho: float, Q: float) -> np.ndarray:
    return np.log2(1.0 + rho * storage) >= Q


def recover_batch(sizes: np.ndarray, decoded: np.ndarray, sorted_rates: np.ndarray,
                  order: np.ndarray, Q: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(storable, recovered)`` for each row.

    ``sorted_rates`` are per-node log2(1 + rho g) already permuted by ``order``.
    """
    held = np.where(decoded, sizes, 0.0)
    storable = held.sum(axis=1) >= 1.0 - UNIT_TOL
    held_sorted = np.take_along_axis(held, order, axis=1)
    before = np.cumsum(held_sorted, axis=1) - held_sorted
    t = np.clip(1.0 - before, 0.0, held_sorted)
    rate = np.einsum("ij,ij->i", t, sorted_rates)
    return storable, storable & (rate > Q)


def evaluate_batch(storage: np.ndarray, recovery: np.ndarray, sizes, rho: float, Q: float):
    """Vectorised ``run_trial`` over rows of pre-drawn gains -> (storable, recovered)."""
    sizes = np.asarray(sizes, dtype=float)
    order = recovery_order(recovery)
    rates = np.log2(1.0 + rho * np.take_along_axis(recovery, order, axis=1))
    return recover_batch(sizes, decoded_mask(storage, rho, Q), rates, order, Q)


def run_trials(config: SystemConfig, alloc: AllocationVector, start: int, stop: int):
    storage, recovery = sample_batch(config.seed, start, stop, config.K)
    return evaluate_batch(storage, recovery, alloc.sizes, config.rho, config.Q)

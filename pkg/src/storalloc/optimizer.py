"""Grid search over the allocation simplex at a fixed SNR."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .allocation import AllocationVector
from .analytic import order_upper_bound
from .config import SystemConfig
from .errors import InvalidParameterError, SizeLimitError
from .montecarlo import FailureEstimate, count_failures, paired_std_err

MAX_CANDIDATES = 10 ** 6


class IntractableGridError(SizeLimitError):
    pass


def _grid_units(T: float, step: float) -> int:
    if not step > 0:
        raise InvalidParameterError("step must be positive")
    units = round(T / step)
    if abs(units * step - T) > 1e-9 * max(1.0, T):
        raise InvalidParameterError(f"step {step} does not divide T={T}")
    return units


@lru_cache(maxsize=None)
def _count(parts: int, total: int, cap: int) -> int:
    """Non-increasing sequences of ``parts`` integers in [0, cap] with sum <= total."""
    if parts == 0:
        return 1
    return sum(_count(parts - 1, total - v, v) for v in range(min(cap, total) + 1))


def count_allocations(K: int, T: float, step: float) -> int:
    units = _grid_units(T, step)
    return _count(K, units, units)


def enumerate_allocations(K: int, T: float, step: float) -> list[AllocationVector]:
    """Every allocation of K multiples of ``step`` summing to at most T, one per
    permutation class (sorted descending), in descending lexicographic order."""
    if K < 1:
        raise InvalidParameterError("K must be >= 1")
    units = _grid_units(T, step)
    n = _count(K, units, units)
    if n > MAX_CANDIDATES:
        raise IntractableGridError(f"{n} candidates exceed the limit of {MAX_CANDIDATES}")
    out = []

    def walk(prefix, left, cap):
        if len(prefix) == K:
            out.append(AllocationVector(tuple(u * step for u in prefix), T))
            return
        for v in range(min(cap, left), -1, -1):
            walk(prefix + [v], left - v, v)

    walk([], units, units)
    return out


@dataclass(frozen=True)
class RankedCandidate:
    allocation: AllocationVector
    estimate: FailureEstimate
    order_upper: int
    diff_vs_best: float
    std_err_vs_best: float

    def as_dict(self) -> dict:
        d = {"allocation": list(self.allocation.sizes), "order_upper_bound": self.order_upper}
        d.update(self.estimate.as_dict())
        d["diff_vs_best"] = self.diff_vs_best
        d["std_err_vs_best"] = self.std_err_vs_best
        return d


def rank_allocations(candidates, config: SystemConfig, trials: int,
                     workers: int = 1) -> list[RankedCandidate]:
    """Evaluate candidates on shared trial draws and rank them.

    The winner is the lowest estimate, except that candidates within one
    paired standard error of it count as tied; ties go to the larger
    exponential-order upper bound, then the lexicographically smallest
    vector. The rest follow by (estimate, -order bound, vector).
    """
    candidates = list(candidates)
    if not candidates:
        raise InvalidParameterError("no candidates")
    sizes = np.array([c.sizes for c in candidates], dtype=float)
    fails, _ = count_failures(config.seed, trials, config.K, sizes, [config.rho], config.Q,
                           workers=workers)
    fails = fails[:, 0]
    leader = int(np.argmin(fails))
    # second pass on the same draws for discordance against the leader
    _, disc = count_failures(config.seed, trials, config.K, sizes, [config.rho], config.Q,
                          ref=leader, workers=workers)
    a_only, b_only = disc[0, :, 0], disc[1, :, 0]
    bounds = [order_upper_bound(c) for c in candidates]
    diffs = (fails - fails[leader]) / trials
    ses = [paired_std_err(trials, int(a_only[i]), int(b_only[i])) for i in range(len(candidates))]

    tied = [i for i in range(len(candidates)) if diffs[i] <= ses[i]]
    winner = min(tied, key=lambda i: (-bounds[i], candidates[i].sizes))

    # re-centre the pairwise statistics on the chosen winner
    if winner != leader:
        _, disc = count_failures(config.seed, trials, config.K, sizes, [config.rho], config.Q,
                              ref=winner, workers=workers)
        a_only, b_only = disc[0, :, 0], disc[1, :, 0]
        diffs = (fails - fails[winner]) / trials
        ses = [paired_std_err(trials, int(a_only[i]), int(b_only[i]))
               for i in range(len(candidates))]

    rest = sorted((i for i in range(len(candidates)) if i != winner),
                  key=lambda i: (fails[i], -bounds[i], candidates[i].sizes))
    return [RankedCandidate(candidates[i], FailureEstimate.from_counts(trials, int(fails[i])),
                            bounds[i], float(diffs[i]), ses[i])
            for i in [winner] + rest]


def best_allocation(K: int, T: float, step: float, config: SystemConfig, trials: int,
                    workers: int = 1) -> tuple[AllocationVector, FailureEstimate]:
    if config.K != K:
        raise InvalidParameterError(f"config has K={config.K}, asked for K={K}")
    ranked = rank_allocations(enumerate_allocations(K, T, step), config, trials, workers)
    return ranked[0].allocation, ranked[0].estimate


def ranked_json(ranked: list[RankedCandidate], metadata: dict | None = None) -> str:
    doc = {"metadata": metadata or {}, "ranking": [r.as_dict() for r in ranked]}
    return json.dumps(doc, indent=2)


def winner_margin(ranked: list[RankedCandidate]) -> float:
    """Runner-up minus winner, in paired standard errors (inf when no discordant trials)."""
    if len(ranked) < 2:
        return math.inf
    r = ranked[1]
    if r.std_err_vs_best == 0:
        return math.inf if r.diff_vs_best > 0 else 0.0
    return r.diff_vs_best / r.std_err_vs_best

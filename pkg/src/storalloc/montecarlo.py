"""Monte Carlo failure estimation, SNR sweeps and order/crossing read-outs.

All strategies and SNR points of a sweep see the same per-trial channel
draws (common random numbers). Work is split into fixed trial chunks whose
integer counts are summed, so results do not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .allocation import AllocationVector
from .analytic import (ConditionedEstimate, conditioned_failure_estimate,
                       high_snr_failure_raw, minimal_exact_failure)
from .channel import sample_batch
from .config import UNIT_TOL, SystemConfig, db_to_linear
from .errors import InsufficientPointsError, InvalidParameterError
from .protocol import decoded_mask, recover_batch, recovery_order

CHUNK = 1 << 16
Z95 = 1.959963984540054
# below this many failures the normal-approximation interval is unreliable
FEW_FAILURES = 20

CSV_COLUMNS = ["snr_db", "strategy", "trials", "failures", "p_fail", "ci_low", "ci_high",
               "high_snr_approx", "minimal_exact"]
CONDITIONED_COLUMNS = ["p_cond", "p_cond_se"]


@dataclass(frozen=True)
class FailureEstimate:
    trials: int
    failures: int
    p_hat: float
    std_err: float
    ci95: tuple[float, float]

    @classmethod
    def from_counts(cls, trials: int, failures: int) -> "FailureEstimate":
        if trials < 1:
            raise InvalidParameterError("trials must be >= 1")
        p = failures / trials
        se = math.sqrt(p * (1.0 - p) / trials)
        if failures == 0:
            ci = (0.0, min(1.0, 3.0 / trials))  # rule of three
        else:
            ci = (max(0.0, p - Z95 * se), min(1.0, p + Z95 * se))
        return cls(trials, failures, p, se, ci)

    @property
    def few_failures(self) -> bool:
        return self.failures < FEW_FAILURES

    def as_dict(self) -> dict:
        return {"trials": self.trials, "failures": self.failures, "p_fail": self.p_hat,
                "std_err": self.std_err, "ci_low": self.ci95[0], "ci_high": self.ci95[1]}


def paired_std_err(trials: int, a_only: int, b_only: int) -> float:
    """Standard error of p_a - p_b from paired trials.

    ``a_only`` counts trials where only A failed, ``b_only`` where only B did.
    """
    n = trials
    diff = (a_only - b_only) / n
    var = (a_only + b_only) / n - diff * diff
    return math.sqrt(max(var, 0.0) / n)


# ---------------------------------------------------------------------------
# chunk kernel


def _chunk_counts(seed, start, stop, K, sizes, rhos, Q, ref):
    """Failure counts for every (strategy, rho) on trials [start, stop).

    ``ref`` selects discordance bookkeeping: "all" -> (S, S, G) matrix of
    trials where row failed and column succeeded, an int -> (2, S, G) against
    that single strategy, None -> nothing.
    """
    storage, recovery = sample_batch(seed, start, stop, K)
    order = recovery_order(recovery)
    sorted_gain = np.take_along_axis(recovery, order, axis=1)
    S, G = sizes.shape[0], len(rhos)
    failures = np.zeros((S, G), dtype=np.int64)
    discord = None
    if ref == "all":
        discord = np.zeros((S, S, G), dtype=np.int64)
    elif ref is not None:
        discord = np.zeros((2, S, G), dtype=np.int64)
    for g, rho in enumerate(rhos):
        decoded = decoded_mask(storage, rho, Q)
        rates = np.log2(1.0 + rho * sorted_gain)
        fail = np.empty((S, stop - start), dtype=bool)
        for s in range(S):
            _, ok = recover_batch(sizes[s], decoded, rates, order, Q)
            fail[s] = ~ok
        failures[:, g] = fail.sum(axis=1)
        if ref == "all":
            f = fail.astype(np.float32)
            discord[:, :, g] = np.rint(f @ (1.0 - f).T).astype(np.int64)
        elif ref is not None:
            discord[0, :, g] = (fail & ~fail[ref]).sum(axis=1)
            discord[1, :, g] = (~fail & fail[ref]).sum(axis=1)
    return failures, discord


def _chunk_task(args):
    return _chunk_counts(*args)


def count_failures(seed, trials, K, sizes, rhos, Q, ref=None, workers=1, chunk=CHUNK, start=0):
    sizes = np.atleast_2d(np.asarray(sizes, dtype=float))
    rhos = [float(r) for r in rhos]
    stop = start + trials
    tasks = [(seed, s, min(stop, s + chunk), K, sizes, rhos, Q, ref)
             for s in range(start, stop, chunk)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_chunk_task, tasks))
    else:
        results = [_chunk_task(t) for t in tasks]
    failures = sum(r[0] for r in results)
    discord = None if ref is None else sum(r[1] for r in results)
    return failures, discord


# ---------------------------------------------------------------------------
# estimates


def estimate_failure(config: SystemConfig, alloc: AllocationVector, trials: int,
                     workers: int = 1, start: int = 0) -> FailureEstimate:
    """Run trials ``start .. start+trials-1`` and count failures."""
    if trials < 1:
        raise InvalidParameterError("trials must be >= 1")
    if alloc.K != config.K:
        raise InvalidParameterError(f"allocation has {alloc.K} nodes, config K={config.K}")
    if alloc.total < 1.0 - UNIT_TOL:
        return FailureEstimate.from_counts(trials, trials)
    f, _ = count_failures(config.seed, trials, config.K, [alloc.sizes], [config.rho], config.Q,
                       workers=workers, start=start)
    return FailureEstimate.from_counts(trials, int(f[0, 0]))


@dataclass(frozen=True)
class PairedComparison:
    trials: int
    a: FailureEstimate
    b: FailureEstimate
    a_only: int
    b_only: int

    @property
    def diff(self) -> float:
        return self.a.p_hat - self.b.p_hat

    @property
    def std_err(self) -> float:
        return paired_std_err(self.trials, self.a_only, self.b_only)

    @property
    def z(self) -> float:
        se = self.std_err
        if se == 0:
            return 0.0 if self.diff == 0 else math.copysign(math.inf, self.diff)
        return self.diff / se


def compare_paired(config: SystemConfig, alloc_a: AllocationVector, alloc_b: AllocationVector,
                   trials: int, workers: int = 1) -> PairedComparison:
    f, d = count_failures(config.seed, trials, config.K, [alloc_a.sizes, alloc_b.sizes],
                       [config.rho], config.Q, ref="all", workers=workers)
    return PairedComparison(trials, FailureEstimate.from_counts(trials, int(f[0, 0])),
                            FailureEstimate.from_counts(trials, int(f[1, 0])),
                            int(d[0, 1, 0]), int(d[1, 0, 0]))


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    snr_db: list[float]
    strategies: list[str]
    allocations: dict[str, AllocationVector]
    estimates: dict[str, list[FailureEstimate]]
    discord: np.ndarray  # (S, S, G): trials where row strategy failed and column succeeded
    metadata: dict
    conditioned: dict[str, list[ConditionedEstimate]] = field(default_factory=dict)

    @property
    def rho(self) -> list[float]:
        return [db_to_linear(d) for d in self.snr_db]

    def p_fail(self, strategy: str) -> np.ndarray:
        return np.array([e.p_hat for e in self.estimates[strategy]])

    def paired(self, a: str, b: str, index: int) -> PairedComparison:
        ia, ib = self.strategies.index(a), self.strategies.index(b)
        n = self.metadata["trials"]
        return PairedComparison(n, self.estimates[a][index], self.estimates[b][index],
                                int(self.discord[ia, ib, index]), int(self.discord[ib, ia, index]))

    def overlays(self, strategy: str, index: int) -> tuple[float | None, float | None]:
        """Analytic curves that apply to this strategy: high-SNR approximation for
        the symmetric allocation (T > 1), exact form for integer-T minimal."""
        K, T, Q = self.metadata["K"], self.metadata["T"], self.metadata["Q"]
        rho = self.rho[index]
        alloc = self.allocations[strategy]
        approx = exact = None
        if T > 1 and _is_symmetric(alloc, K, T):
            approx = high_snr_failure_raw(K, T, Q, rho)
        if float(T).is_integer() and _is_minimal(alloc, T):
            exact = minimal_exact_failure(int(T), Q, rho)
        return approx, exact

    def rows(self) -> list[dict]:
        out = []
        for g, snr in enumerate(self.snr_db):
            for s in self.strategies:
                e = self.estimates[s][g]
                approx, exact = self.overlays(s, g)
                row = {"snr_db": snr, "strategy": s, "trials": e.trials, "failures": e.failures,
                       "p_fail": e.p_hat, "ci_low": e.ci95[0], "ci_high": e.ci95[1],
                       "high_snr_approx": approx, "minimal_exact": exact}
                if self.conditioned:
                    c = self.conditioned[s][g]
                    row["p_cond"] = c.p_fail
                    row["p_cond_se"] = c.std_err
                out.append(row)
        return out

    def to_csv(self) -> str:
        cols = CSV_COLUMNS + (CONDITIONED_COLUMNS if self.conditioned else [])
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({k: _fmt(row[k]) for k in cols})
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "metadata": self.metadata,
            "strategies": {s: list(self.allocations[s].sizes) for s in self.strategies},
            "rows": self.rows(),
        }
        return json.dumps(doc, indent=2)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _is_symmetric(alloc, K, T):
    return all(abs(a - T / K) <= 1e-12 * max(1.0, T) for a in alloc.sizes)


def _is_minimal(alloc, T):
    s = sorted(alloc.sizes, reverse=True)
    whole = math.floor(T)
    return (all(abs(a - 1.0) <= UNIT_TOL for a in s[:whole])
            and all(abs(a) <= UNIT_TOL for a in s[whole:]))


def _check_grid(snr_db_grid):
    grid = [float(x) for x in snr_db_grid]
    if not grid:
        raise InvalidParameterError("empty SNR grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidParameterError("SNR grid must be strictly increasing")
    return grid


def sweep(config: SystemConfig, strategies, snr_db_grid, trials: int, workers: int = 1,
          conditioned: bool = False, trials_per_set: int = 100_000) -> SweepResult:
    """Evaluate each (strategy, SNR) cell on the same trial draws.

    ``strategies`` is a mapping label -> AllocationVector or a sequence of
    ``(label, AllocationVector)``. ``config.rho`` is ignored; the grid is in dB.
    """
    items = list(strategies.items()) if isinstance(strategies, dict) else list(strategies)
    if not items:
        raise InvalidParameterError("no strategies given")
    labels = [label for label, _ in items]
    if len(set(labels)) != len(labels):
        raise InvalidParameterError("duplicate strategy labels")
    for label, alloc in items:
        if alloc.K != config.K:
            raise InvalidParameterError(f"strategy {label} has {alloc.K} nodes, K={config.K}")
    grid = _check_grid(snr_db_grid)
    rhos = [db_to_linear(d) for d in grid]
    sizes = np.array([alloc.sizes for _, alloc in items], dtype=float)
    failures, discord = count_failures(config.seed, trials, config.K, sizes, rhos, config.Q,
                                    ref="all", workers=workers)
    estimates = {label: [FailureEstimate.from_counts(trials, int(failures[s, g]))
                         for g in range(len(grid))]
                 for s, label in enumerate(labels)}
    cond = {}
    if conditioned:
        cond = {label: [conditioned_failure_estimate(alloc, config.Q, rho, trials_per_set,
                                                     seed=config.seed)
                        for rho in rhos]
                for label, alloc in items}
    meta = {"K": config.K, "T": config.T, "Q": config.Q, "seed": config.seed, "trials": trials,
            "conditioned": conditioned, "trials_per_set": trials_per_set if conditioned else None}
    return SweepResult(grid, labels, dict(items), estimates, discord, meta, cond)


# ---------------------------------------------------------------------------
# read-outs


def fit_order(snr_db, p_fail) -> float:
    """Least-squares slope of -log10 p against log10 rho (= dB / 10)."""
    x = np.asarray(snr_db, dtype=float) / 10.0
    y = -np.log10(np.asarray(p_fail, dtype=float))
    if len(x) < 3:
        raise InsufficientPointsError(f"need >= 3 points with p > 0, got {len(x)}")
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def empirical_order(result: SweepResult, strategy: str, window_db: tuple[float, float],
                    source: str = "auto") -> float:
    """Exponential order read off a sweep over ``window_db`` (inclusive).

    ``source``: "plain" uses the simulated p_hat, "conditioned" the
    decoding-set-conditioned estimates, "auto" the plain value unless it has
    no failures and a conditioned value exists.
    """
    lo, hi = window_db
    xs, ys = [], []
    for g, snr in enumerate(result.snr_db):
        if not lo - 1e-9 <= snr <= hi + 1e-9:
            continue
        plain = result.estimates[strategy][g]
        cond = result.conditioned.get(strategy, [None] * len(result.snr_db))[g]
        if source == "plain":
            p = plain.p_hat
        elif source == "conditioned":
            if cond is None:
                raise InvalidParameterError("sweep has no conditioned estimates")
            p = cond.p_fail
        elif source == "auto":
            p = plain.p_hat if plain.failures > 0 or cond is None else cond.p_fail
        else:
            raise InvalidParameterError(f"unknown source {source!r}")
        if p > 0:
            xs.append(snr)
            ys.append(p)
    return fit_order(xs, ys)


def find_crossing(result: SweepResult, strategy_a: str, strategy_b: str) -> float | None:
    """First SNR (dB) where p_a - p_b changes sign, interpolated in (dB, log p).

    Grid points with equal estimates are skipped rather than treated as a
    change of sign.
    """
    pa, pb = result.p_fail(strategy_a), result.p_fail(strategy_b)
    grid = result.snr_db
    prev = None
    for g in range(len(grid)):
        d = pa[g] - pb[g]
        if d == 0:
            continue
        if prev is not None and np.sign(d) != np.sign(pa[prev] - pb[prev]):
            return _interpolate_zero(grid[prev], grid[g], pa[prev], pb[prev], pa[g], pb[g])
        prev = g
    return None


def _interpolate_zero(x0, x1, a0, b0, a1, b1):
    if min(a0, b0, a1, b1) > 0:
        d0 = math.log(a0) - math.log(b0)
        d1 = math.log(a1) - math.log(b1)
    else:
        d0, d1 = a0 - b0, a1 - b1
    return x0 + (x1 - x0) * d0 / (d0 - d1)

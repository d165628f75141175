"""Closed-form results: exponential-order bounds, the high-SNR approximation,
the exact failure probability of the minimal allocation, low-SNR bounds,
f_prob, and a decoding-set-conditioned failure estimator.
"""

from __future__ import annotations

import itertools
import math
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .allocation import AllocationVector
from .channel import sample_batch
from .config import UNIT_TOL, SystemConfig
from .errors import OutOfDomainError, SizeLimitError
from .protocol import recover_batch, recovery_order

__all__ = [
    "OrderReport", "SystemConfig", "optimal_order", "order_upper_bound",
    "order_lower_bound", "order_report", "slope_bounds", "high_snr_failure_approx", "high_snr_failure_raw",
    "minimal_exact_failure", "minimal_exact_failure_product", "largest_deficient_subset", "maxmin_times", "low_snr_bound_incomplete",
    "f_prob", "f_prob_half_limit", "f_prob_bruteforce", "ConditionedEstimate", "conditioned_failure_estimate",
    "conditioned_failure_probability",
]

MAX_SUBSETS = 2 ** 20
_CEIL_TOL = 1e-9


def _ceil(x: float) -> int:
    # K/T computed in floating point can land a hair above an integer
    return max(1, math.ceil(x - _CEIL_TOL))


@dataclass(frozen=True)
class OrderReport:
    lower: float
    upper: int
    d_star: int | None


def optimal_order(K: int, T: float) -> int:
    """Best achievable exponential order, K - ceil(K/T) + 1 (requires T > 1)."""
    if not T > 1:
        raise OutOfDomainError(f"optimal order needs T > 1, got T={T}")
    return K - _ceil(K / T) + 1


def _sizes(alloc) -> tuple[float, ...]:
    return alloc.sizes if isinstance(alloc, AllocationVector) else tuple(float(a) for a in alloc)


def largest_deficient_subset(alloc) -> int:
    """Size of the largest node set whose stored fractions sum below one."""
    count = 0
    running = 0.0
    for a in sorted(_sizes(alloc)):
        if running + a >= 1.0 - UNIT_TOL:
            break
        running += a
        count += 1
    return count


def order_upper_bound(alloc) -> int:
    """min over D of K - |D| + |D| 1[sum_D a >= 1], via the ascending greedy count."""
    return len(_sizes(alloc)) - largest_deficient_subset(alloc)


def maxmin_times(caps) -> list[float]:
    """Water-fill one unit of time: t_i = min(cap_i, level) with sum t = 1."""
    caps = list(caps)
    order = sorted(range(len(caps)), key=lambda i: caps[i])
    t = [0.0] * len(caps)
    left = 1.0
    for pos, i in enumerate(order):
        level = left / (len(caps) - pos)
        t[i] = min(caps[i], level)
        left -= t[i]
    return t


def _multiset_subsets(sizes):
    """Yield ``(subset_sizes, multiplicity)`` over all subsets, grouped by the
    multiset of sizes they contain (both bound terms depend only on that)."""
    groups = sorted(Counter(sizes).items())
    n_classes = math.prod(c + 1 for _, c in groups)
    if n_classes > MAX_SUBSETS:
        raise SizeLimitError(f"{n_classes} subset classes exceed the enumeration guard")
    for counts in itertools.product(*(range(c + 1) for _, c in groups)):
        members = []
        mult = 1
        for (value, avail), take in zip(groups, counts):
            members += [value] * take
            mult *= math.comb(avail, take)
        yield members, mult


def order_lower_bound(alloc) -> float:
    """min over D of K - |D| + min_i 1/t_i 1[sum_D a >= 1] with max-min times.

    Nodes with zero time carry no rate and are left out of the inner min.
    Subsets are enumerated up to permutation of equal sizes.
    """
    sizes = _sizes(alloc)
    K = len(sizes)
    best = math.inf
    for members, _ in _multiset_subsets(sizes):
        value = float(K - len(members))
        if math.fsum(members) >= 1.0 - UNIT_TOL:
            t = [x for x in maxmin_times(members) if x > 0]
            value += 1.0 / min(t)
        best = min(best, value)
    return best


def order_report(alloc, T: float | None = None) -> OrderReport:
    sizes = _sizes(alloc)
    if T is None:
        T = alloc.budget if isinstance(alloc, AllocationVector) else math.fsum(sizes)
    d_star = optimal_order(len(sizes), T) if T > 1 else None
    return OrderReport(order_lower_bound(sizes), order_upper_bound(sizes), d_star)


def slope_bounds(K: int, T: float) -> tuple[float, float]:
    """(1 - 1/T) K <= d*(K, T) <= (1 - 1/T) K + 1."""
    if not T > 1:
        raise OutOfDomainError(f"slope bounds need T > 1, got T={T}")
    low = (1.0 - 1.0 / T) * K
    return low, low + 1.0


def high_snr_failure_raw(K: int, T: float, Q: float, rho: float) -> float:
    """Unclamped high-SNR approximation (may exceed one at low SNR)."""
    if not T > 1:
        raise OutOfDomainError(f"approximation needs T > 1, got T={T}")
    m = _ceil(K / T) - 1
    return math.comb(K, m) * ((2.0 ** Q - 1.0) / rho) ** (K - m)


def high_snr_failure_approx(K: int, T: float, Q: float, rho: float) -> tuple[float, bool]:
    """C(K, ceil(K/T)-1) (2^Q - 1)^d rho^-d with d = K - ceil(K/T) + 1.

    Returns ``(probability, in_regime)``; a raw value above one is clamped
    and flagged instead of raising so sweeps can still draw the curve.
    """
    raw = high_snr_failure_raw(K, T, Q, rho)
    if raw > 1.0:
        warnings.warn(f"high-SNR approximation {raw:.3g} > 1 at rho={rho:g}; outside its regime",
                      RuntimeWarning, stacklevel=2)
        return 1.0, False
    return raw, True


def _link_outage(Q: float, rho: float) -> float:
    return (2.0 ** Q - 1.0) / rho


def minimal_exact_failure(T: int, Q: float, rho: float) -> float:
    """Failure probability of T complete nodes (integer T), as the sum over |D| = k
    of Pr[|D| = k] times the chance that the best of the k recovery links fails."""
    if int(T) != T or T < 1:
        raise OutOfDomainError(f"exact form needs integer T >= 1, got {T}")
    T = int(T)
    x = _link_outage(Q, rho)
    up = math.exp(-x)
    down = -math.expm1(-x)
    return math.fsum(math.comb(T, k) * up ** k * down ** (T - k) * down ** k for k in range(T + 1))


def minimal_exact_failure_product(T: int, Q: float, rho: float) -> float:
    """Collapsed form (1 - e^{-2x})^T, used as a cross-check."""
    x = _link_outage(Q, rho)
    return (-math.expm1(-2.0 * x)) ** int(T)


def low_snr_bound_incomplete(K: int, Q: float, rho: float) -> float:
    """Upper bound e^{-2x} on the recovery probability when no node is complete."""
    return math.exp(-2.0 * _link_outage(Q, rho))


_HALF_WINDOW = 1e-5


def _f_prob_direct(a: float, q: float) -> float:
    if a == 0.0:
        return math.exp(-q)
    return math.exp(-q) + a / (2.0 * (1.0 - 2.0 * a)) * (math.exp(-2.0 * q) - math.exp(-q / a))


def f_prob(a: float, Q: float, rho: float) -> float:
    """Two-node low-SNR recovery probability as a function of the incomplete
    share ``a``; q = Q/rho.

    a = 1/2 is a removable singularity: inside +-1e-5 of it the value is
    interpolated between the two sides (error well under 1e-9).
    """
    if not 0.0 <= a <= 1.0:
        raise OutOfDomainError(f"a must lie in [0, 1], got {a}")
    q = Q / rho
    if abs(a - 0.5) < _HALF_WINDOW:
        lo = _f_prob_direct(0.5 - _HALF_WINDOW, q)
        hi = _f_prob_direct(0.5 + _HALF_WINDOW, q)
        w = (a - (0.5 - _HALF_WINDOW)) / (2 * _HALF_WINDOW)
        return lo + w * (hi - lo)
    return _f_prob_direct(a, q)


def f_prob_half_limit(Q: float, rho: float) -> float:
    """Analytic value at a = 1/2: e^{-q} + (q/2) e^{-2q}."""
    q = Q / rho
    return math.exp(-q) + 0.5 * q * math.exp(-2.0 * q)


def f_prob_bruteforce(a: float, Q: float, rho: float) -> float:
    """Pr[(1-a) X + a max(X, Y) > q] for independent unit exponentials, by quadrature.

    Conditioning on X = s <= q, the event fails iff Y <= (q - (1-a) s)/a.
    """
    q = Q / rho
    if a == 0.0:
        return math.exp(-q)

    def fail_density(s):
        return -math.expm1(-(q - (1.0 - a) * s) / a) * math.exp(-s)

    fail, _ = integrate.quad(fail_density, 0.0, q, epsabs=1e-13, epsrel=1e-12)
    return 1.0 - fail


@dataclass(frozen=True)
class ConditionedEstimate:
    p_fail: float
    std_err: float
    deficient_mass: float
    trials_per_set: int

    def __float__(self):
        return self.p_fail


def _class_seed(seed: int, members: tuple[float, ...]) -> int:
    key = [int(round(a * 2**40)) & (2**32 - 1) for a in members]
    return int(np.random.SeedSequence([int(seed) & (2**64 - 1), len(members), *key]).generate_state(1, np.uint64)[0])


def conditioned_failure_estimate(alloc, Q: float, rho: float, trials_per_set: int = 100_000,
                                 seed: int = 0, batch: int = 1 << 16) -> ConditionedEstimate:
    """Failure probability as sum_D Pr[D] Pr_f[Q | D].

    Pr[D] is exact (each storage link succeeds with e^{-x}); subsets that
    cannot hold the object contribute their full mass; when every holder in
    D is complete the conditional failure is (1 - e^{-x})^m exactly; otherwise
    it is simulated over recovery gains only. Subsets with the same multiset
    of sizes share one estimate.
    """
    sizes = _sizes(alloc)
    K = len(sizes)
    if K > 20:
        raise SizeLimitError(f"conditioned estimator enumerates 2^K subsets; K={K} > 20")
    x = _link_outage(Q, rho)
    log_up = -x
    log_down = math.log(-math.expm1(-x)) if x > 0 else -math.inf
    deficient = 0.0
    p = 0.0
    var = 0.0
    for members, mult in _multiset_subsets(sizes):
        k = len(members)
        log_w = k * log_up + (K - k) * log_down if k < K else k * log_up
        weight = mult * math.exp(log_w)
        if weight == 0.0:
            continue
        if math.fsum(members) < 1.0 - UNIT_TOL:
            deficient += weight
            continue
        holders = [a for a in members if a > 0]
        if all(a >= 1.0 - UNIT_TOL for a in holders):
            # the strongest holder gets the whole period: fails iff every link is below x
            p += weight * (-math.expm1(-x)) ** len(holders)
            continue
        fails = _conditional_failures(tuple(members), Q, rho, trials_per_set,
                                      _class_seed(seed, tuple(members)), batch)
        pc = fails / trials_per_set
        p += weight * pc
        var += weight ** 2 * pc * (1.0 - pc) / trials_per_set
    return ConditionedEstimate(deficient + p, math.sqrt(var), deficient, trials_per_set)


def conditioned_failure_probability(alloc, Q: float, rho: float, trials_per_set: int = 100_000,
                                    seed: int = 0) -> float:
    return conditioned_failure_estimate(alloc, Q, rho, trials_per_set, seed).p_fail


def _conditional_failures(members, Q, rho, trials, stream_seed, batch) -> int:
    k = len(members)
    sizes = np.asarray(members, dtype=float)
    fails = 0
    for start in range(0, trials, batch):
        stop = min(trials, start + batch)
        _, recovery = sample_batch(stream_seed, start, stop, k)
        order = recovery_order(recovery)
        rates = np.log2(1.0 + rho * np.take_along_axis(recovery, order, axis=1))
        decoded = np.ones_like(recovery, dtype=bool)
        _, ok = recover_batch(sizes, decoded, rates, order, Q)
        fails += int((~ok).sum())
    return fails

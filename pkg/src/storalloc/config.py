"""Fixed experiment parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import InvalidParameterError

# Tolerance for "sum of stored fractions reaches one" and completeness tests.
UNIT_TOL = 1e-12

DEFAULT_SEED = 20160401


def db_to_linear(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def linear_to_db(rho: float) -> float:
    return 10.0 * math.log10(rho)


@dataclass(frozen=True)
class SystemConfig:
    """K storage nodes, sum budget T, rate threshold Q (bits), linear SNR rho."""

    K: int
    T: float
    Q: float
    rho: float
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise InvalidParameterError(f"K must be a positive integer, got {self.K!r}")
        if not self.T > 0:
            raise InvalidParameterError(f"T must be positive, got {self.T!r}")
        if not self.Q > 0:
            raise InvalidParameterError(f"Q must be positive, got {self.Q!r}")
        if not self.rho > 0:
            raise InvalidParameterError(f"rho must be positive, got {self.rho!r}")
        if not 0 <= self.seed < 2**64:
            raise InvalidParameterError("seed must fit in 64 unsigned bits")

    @classmethod
    def from_db(cls, K: int, T: float, Q: float, snr_db: float, seed: int = DEFAULT_SEED):
        return cls(K=K, T=T, Q=Q, rho=db_to_linear(snr_db), seed=seed)

    @property
    def snr_db(self) -> float:
        return linear_to_db(self.rho)

    @property
    def outage_threshold(self) -> float:
        """Gain below which a single link misses the rate Q: (2^Q - 1) / rho."""
        return (2.0 ** self.Q - 1.0) / self.rho

    def with_rho(self, rho: float) -> "SystemConfig":
        return replace(self, rho=rho)

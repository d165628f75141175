"""Storage allocation vectors and the named strategies."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .config import UNIT_TOL
from .errors import InvalidParameterError

BUDGET_TOL = 1e-12


@dataclass(frozen=True)
class AllocationVector:
    """Per-node stored fractions ``sizes`` of a unit object under budget ``budget``."""

    sizes: tuple[float, ...]
    budget: float

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(float(a) for a in self.sizes))
        problems = validate(self, len(self.sizes), self.budget)
        if problems:
            raise InvalidParameterError("; ".join(problems))

    @property
    def K(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> float:
        return math.fsum(self.sizes)

    @property
    def complete_nodes(self) -> int:
        return sum(1 for a in self.sizes if a >= 1.0 - UNIT_TOL)

    def canonical(self) -> "AllocationVector":
        """Sorted descending; failure probability is label-invariant under i.i.d. links."""
        return AllocationVector(tuple(sorted(self.sizes, reverse=True)), self.budget)

    def to_json(self) -> str:
        return json.dumps(list(self.sizes))

    @classmethod
    def from_json(cls, text: str, budget: float | None = None) -> "AllocationVector":
        try:
            sizes = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParameterError(f"allocation is not valid JSON: {exc}") from None
        if not isinstance(sizes, list) or not all(isinstance(a, (int, float)) for a in sizes):
            raise InvalidParameterError("allocation JSON must be an array of numbers")
        if budget is None:
            budget = math.fsum(sizes)
        return cls(tuple(sizes), budget)

    def __str__(self):
        return "(" + ", ".join(f"{a:g}" for a in self.sizes) + ")"


def validate(alloc, K: int, T: float) -> list[str]:
    """List every violated invariant; empty means valid. Never raises."""
    sizes = alloc.sizes if isinstance(alloc, AllocationVector) else tuple(alloc)
    problems = []
    if len(sizes) != K:
        problems.append(f"wrong length: expected {K}, got {len(sizes)}")
    if not T > 0:
        problems.append(f"budget must be positive, got {T}")
    if any(not math.isfinite(a) for a in sizes):
        problems.append("non-finite entry")
        return problems
    if any(a < 0 for a in sizes):
        problems.append("negative entry")
    if math.fsum(sizes) > T + BUDGET_TOL:
        problems.append(f"sum exceeds budget: {math.fsum(sizes):g} > {T:g}")
    if any(a > T + BUDGET_TOL for a in sizes):
        problems.append("entry exceeds budget")
    return problems


def make_symmetric(K: int, T: float) -> AllocationVector:
    if K < 1:
        raise InvalidParameterError(f"K must be >= 1, got {K}")
    if not T > 0:
        raise InvalidParameterError(f"T must be positive, got {T}")
    share = T / K
    sizes = [share] * K
    sizes[-1] = T - (K - 1) * share
    return AllocationVector(tuple(sizes), T)


def make_minimal(K: int, T: float) -> AllocationVector:
    """floor(T) complete nodes plus one node holding the fractional remainder."""
    if not T > 0:
        raise InvalidParameterError(f"T must be positive, got {T}")
    whole = math.floor(T)
    rest = T - whole
    if K < math.ceil(T):
        raise InvalidParameterError(f"K={K} cannot host minimal allocation of T={T}")
    sizes = [1.0] * whole
    if rest > 0:
        sizes.append(rest)
    sizes += [0.0] * (K - len(sizes))
    return AllocationVector(tuple(sizes), T)


def make_custom(sizes, T: float | None = None) -> AllocationVector:
    sizes = tuple(float(a) for a in sizes)
    return AllocationVector(sizes, math.fsum(sizes) if T is None else T)


def parse_strategy(text: str, K: int, T: float) -> tuple[str, AllocationVector]:
    """Build ``(label, allocation)`` from ``symmetric``, ``minimal`` or ``custom=<json>``."""
    text = text.strip()
    if text == "symmetric":
        return "symmetric", make_symmetric(K, T)
    if text == "minimal":
        return "minimal", make_minimal(K, T)
    if text.startswith("custom="):
        alloc = AllocationVector.from_json(text[len("custom="):], budget=T)
        if alloc.K != K:
            raise InvalidParameterError(f"custom allocation has {alloc.K} entries, expected K={K}")
        return "custom[" + ",".join(f"{a:.12g}" for a in alloc.sizes) + "]", alloc
    raise InvalidParameterError(f"unknown strategy {text!r}")

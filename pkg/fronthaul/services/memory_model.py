"""
Per-AP bit budget from the daisy-chain storage arithmetic.

AP l holds (l-1)*F received vectors while it waits for the estimates of
AP l-1, so its memory pool is shared by that many vectors. AP 1 never
stores anything and is left uncompressed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .errors import ConfigurationError
from .network_config import MemoryPolicy

logger = logging.getLogger(__name__)

BITS_PER_BYTE = 8


@dataclass(frozen=True)
class BitBudget:
    # bits per stored complex N-vector at each AP; None means unlimited
    per_ap: Tuple[Optional[float], ...]

    @property
    def L(self) -> int:
        return len(self.per_ap)

    def is_unlimited(self, l: int) -> bool:
        """``l`` is the 1-based AP index."""
        return self.per_ap[l - 1] is None

    def bottleneck(self) -> Optional[float]:
        finite = [c for c in self.per_ap if c is not None]
        return min(finite) if finite else None


def stored_vectors(l: int, F: int) -> int:
    return (l - 1) * F


def per_ap_bytes(policy: MemoryPolicy, L: int) -> List[Optional[float]]:
    """Memory available to each AP; None under infinite memory."""
    if L < 1:
        raise ConfigurationError(f"L must be >= 1, got {L}")
    if policy.is_infinite:
        return [None] * L
    if policy.kind == 'fap':
        return [float(policy.capacity_bytes)] * L
    return [policy.capacity_bytes / L] * L


def per_vector_bits(policy: MemoryPolicy, L: int, F: int) -> BitBudget:
    if L < 1:
        raise ConfigurationError(f"L must be >= 1, got {L}")
    if F < 1:
        raise ConfigurationError(f"F must be >= 1, got {F}")
    if policy.is_infinite:
        return BitBudget(per_ap=(None,) * L)
    if not policy.capacity_bytes > 0:
        raise ConfigurationError(f"Memory kind '{policy.kind}' needs a positive capacity")

    pools = per_ap_bytes(policy, L)
    budget: List[Optional[float]] = [None]
    for l in range(2, L + 1):
        budget.append(BITS_PER_BYTE * pools[l - 1] / stored_vectors(l, F))

    if policy.allocation_rule == 'uniform-worst-case' and L >= 2:
        worst = budget[-1]
        budget = [None] + [worst] * (L - 1)
    logger.debug(f"{policy.label}: L={L} F={F} bottleneck={budget[-1]}")
    return BitBudget(per_ap=tuple(budget))

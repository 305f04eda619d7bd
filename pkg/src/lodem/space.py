"""Finite discrete product spaces with mixed-radix flat indexing.

The flat layout is row-major with the LAST variable varying fastest
(the first variable is the most significant digit). Every dense table in
the package, and the on-disk JSON layout, depends on this convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError

# Dense tables only; anything larger than this is a usage error.
MAX_TOTAL = 16_777_216


@dataclass(frozen=True)
class StateSpace:
    """Cardinalities of a tuple of finite discrete variables.

    Parameters
    ----------
    cards : tuple of int
        Number of states of each variable, in order.
    """

    cards: tuple[int, ...]

    def __init__(self, cards: Sequence[int]):
        cards = tuple(int(c) for c in cards)
        if len(cards) == 0:
            raise DomainError("a state space needs at least one variable")
        if any(c < 1 for c in cards):
            raise DomainError(f"every cardinality must be >= 1, got {cards}")
        total = math.prod(cards)
        if total > MAX_TOTAL:
            raise DomainError(
                f"dense space too large: {total} states exceeds limit {MAX_TOTAL}"
            )
        object.__setattr__(self, "cards", cards)

    @property
    def n_vars(self) -> int:
        return len(self.cards)

    @property
    def total(self) -> int:
        """Number of joint states (product of cardinalities)."""
        return math.prod(self.cards)

    def index(self, state: Sequence[int]) -> int:
        """Flat index of a joint state (last variable fastest)."""
        if len(state) != self.n_vars:
            raise DomainError(
                f"state has {len(state)} values, space has {self.n_vars} variables"
            )
        flat = 0
        for value, card in zip(state, self.cards):
            if not 0 <= value < card:
                raise DomainError(f"value {value} out of range for cardinality {card}")
            flat = flat * card + int(value)
        return flat

    def unindex(self, flat: int) -> tuple[int, ...]:
        """Joint state for a flat index; inverse of :meth:`index`."""
        if not 0 <= flat < self.total:
            raise DomainError(f"flat index {flat} out of range for total {self.total}")
        out = [0] * self.n_vars
        rem = int(flat)
        for pos in range(self.n_vars - 1, -1, -1):
            rem, out[pos] = divmod(rem, self.cards[pos])
        return tuple(out)

    def states(self) -> Iterator[tuple[int, ...]]:
        """Iterate all joint states in flat-index order."""
        for flat in range(self.total):
            yield self.unindex(flat)

    @cached_property
    def digits(self) -> np.ndarray:
        """(total, n_vars) array: row ``i`` is ``unindex(i)``. Read-only."""
        rem = np.arange(self.total, dtype=np.int64)
        out = np.empty((self.total, self.n_vars), dtype=np.int64)
        for pos in range(self.n_vars - 1, -1, -1):
            rem, out[:, pos] = np.divmod(rem, self.cards[pos])
        out.setflags(write=False)
        return out

    def concat(self, other: "StateSpace") -> "StateSpace":
        """Product space with this space's variables first."""
        return StateSpace(self.cards + other.cards)

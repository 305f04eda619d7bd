"""Dense probability tables over small discrete product spaces.

All information quantities are in nats. Probabilities entering a log are
clamped to ``FLOOR`` unless strict mode is requested, in which case a
:class:`~lodem.errors.SupportError` is raised instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, SupportError, UndefinedRowError
from .space import StateSpace

# Smoothing floor: no stored probability is ever logged below this value.
FLOOR = 1e-12

_SUM_TOL = 1e-9


def _frozen_array(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function as a dense table over a :class:`StateSpace`.

    Entries are non-negative and sum to 1 within ``1e-9``; pass
    ``normalize=True`` to rescale raw non-negative weights.
    """

    space: StateSpace
    probs: np.ndarray

    def __init__(self, space: StateSpace, probs, *, normalize: bool = False):
        probs = _frozen_array(probs).ravel()
        if probs.shape != (space.total,):
            raise DomainError(
                f"probs has length {probs.size}, space has {space.total} states"
            )
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise DomainError("probabilities must be finite and non-negative")
        total = float(probs.sum())
        if normalize:
            if total <= 0:
                raise DomainError("cannot normalize an all-zero table")
            probs = _frozen_array(probs / total)
        elif abs(total - 1.0) > _SUM_TOL:
            raise DomainError(f"probabilities sum to {total!r}, expected 1 +/- 1e-9")
        probs.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, space: StateSpace) -> "Pmf":
        return cls(space, np.full(space.total, 1.0 / space.total))

    @classmethod
    def point_mass(cls, space: StateSpace, state: Sequence[int]) -> "Pmf":
        probs = np.zeros(space.total)
        probs[space.index(state)] = 1.0
        return cls(space, probs)

    def __getitem__(self, state: Sequence[int]) -> float:
        return float(self.probs[self.space.index(state)])

    def flattened(self) -> "Pmf":
        """The same distribution over a single variable with ``total`` states."""
        return Pmf(StateSpace((self.space.total,)), self.probs)

    def support(self) -> np.ndarray:
        """Flat indices with strictly positive probability."""
        return np.flatnonzero(self.probs > 0)

    def allclose(self, other: "Pmf", atol: float = 1e-12) -> bool:
        return self.space.cards == other.space.cards and np.allclose(
            self.probs, other.probs, atol=atol, rtol=0.0
        )


@dataclass(frozen=True, eq=False)
class Cpt:
    """Conditional probability table: one child distribution per parent state.

    ``table`` has shape ``(parent_space.total, child_space.total)``. Rows with
    no defined conditional (zero parent mass) are marked in ``defined`` and
    stored as NaN so they cannot be consumed silently.
    """

    child_space: StateSpace
    parent_space: StateSpace
    table: np.ndarray
    defined: np.ndarray

    def __init__(self, child_space, parent_space, table, defined=None):
        table = _frozen_array(table, (parent_space.total, child_space.total))
        if defined is None:
            defined = np.ones(parent_space.total, dtype=bool)
        else:
            defined = np.array(defined, dtype=bool, copy=True)
            if defined.shape != (parent_space.total,):
                raise DomainError("defined mask must have one entry per parent state")
        live = table[defined]
        if live.size:
            if np.any(live < 0) or not np.all(np.isfinite(live)):
                raise DomainError("conditional rows must be finite and non-negative")
            sums = live.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > _SUM_TOL):
                raise DomainError("every defined conditional row must sum to 1 +/- 1e-9")
        if not np.all(defined):
            masked = np.array(table)
            masked[~defined] = np.nan
            table = _frozen_array(masked)
        defined.setflags(write=False)
        object.__setattr__(self, "child_space", child_space)
        object.__setattr__(self, "parent_space", parent_space)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "defined", defined)

    def row(self, parent_index: int) -> np.ndarray:
        """Conditional distribution for one parent configuration."""
        if not self.defined[parent_index]:
            raise UndefinedRowError(
                f"conditional undefined for parent state {parent_index} "
                "(zero parent mass)",
                parent_index,
            )
        return self.table[parent_index]

    def rows_or_uniform(self) -> np.ndarray:
        """Dense rows with undefined ones replaced by the uniform distribution.

        This is the smoothing-mode reading of an undefined row: clamping an
        all-zero parent slice to the floor and renormalizing yields uniform.
        """
        if np.all(self.defined):
            return self.table
        out = np.array(self.table)
        out[~self.defined] = 1.0 / self.child_space.total
        return out

    def allclose(self, other: "Cpt", atol: float = 1e-12) -> bool:
        if self.child_space.cards != other.child_space.cards:
            return False
        if self.parent_space.cards != other.parent_space.cards:
            return False
        if not np.array_equal(self.defined, other.defined):
            return False
        d = self.defined
        return np.allclose(self.table[d], other.table[d], atol=atol, rtol=0.0)


def entropy(p: Pmf) -> float:
    """Shannon entropy in nats, with 0 ln 0 := 0."""
    probs = p.probs
    mask = probs > 0
    return float(-np.sum(probs[mask] * np.log(probs[mask])))


def kl_divergence(p: Pmf, q: Pmf, *, strict: bool = False) -> float:
    """KL divergence D(p || q) in nats.

    Terms with p(i) = 0 contribute nothing. In smoothing mode (default) q is
    clamped to ``FLOOR`` before the log; in strict mode a zero q(i) on the
    support of p raises :class:`SupportError` naming the state.
    """
    if p.space.cards != q.space.cards:
        raise DomainError("kl_divergence requires a shared state space")
    mask = p.probs > 0
    qm = q.probs[mask]
    if strict:
        bad = np.flatnonzero(qm == 0.0)
        if bad.size:
            idx = int(np.flatnonzero(mask)[bad[0]])
            raise SupportError(
                f"q is zero at state {idx} where p is positive", idx
            )
    else:
        qm = np.maximum(qm, FLOOR)
    pm = p.probs[mask]
    # float cancellation can leave a tiny negative sum when p ~ q
    return max(float(np.sum(pm * (np.log(pm) - np.log(qm)))), 0.0)


def _check_subset(space: StateSpace, subset: Sequence[int], name: str) -> tuple[int, ...]:
    subset = tuple(int(v) for v in subset)
    if len(subset) == 0:
        raise DomainError(f"{name} must name at least one variable")
    if len(set(subset)) != len(subset):
        raise DomainError(f"{name} contains duplicate variables: {subset}")
    if any(not 0 <= v < space.n_vars for v in subset):
        raise DomainError(f"{name} out of range for {space.n_vars} variables")
    return tuple(sorted(subset))


def marginalize(p: Pmf, keep: Sequence[int]) -> Pmf:
    """Marginal of ``p`` onto the variables in ``keep``.

    Kept variables retain their original relative order regardless of the
    order they are named in.
    """
    keep = _check_subset(p.space, keep, "keep")
    drop = tuple(i for i in range(p.space.n_vars) if i not in keep)
    arr = p.probs.reshape(p.space.cards)
    if drop:
        arr = arr.sum(axis=drop)
    kept_space = StateSpace(tuple(p.space.cards[i] for i in keep))
    return Pmf(kept_space, arr.ravel(), normalize=True)


def condition(p: Pmf, given: Sequence[int]) -> Cpt:
    """Conditional of the remaining variables given those in ``given``.

    Parent configurations with zero marginal mass get undefined rows.
    """
    given = _check_subset(p.space, given, "given")
    child = tuple(i for i in range(p.space.n_vars) if i not in given)
    if not child:
        raise DomainError("conditioning on every variable leaves no child")
    arr = p.probs.reshape(p.space.cards)
    arr = np.transpose(arr, given + child)
    parent_space = StateSpace(tuple(p.space.cards[i] for i in given))
    child_space = StateSpace(tuple(p.space.cards[i] for i in child))
    flat = arr.reshape(parent_space.total, child_space.total)
    sums = flat.sum(axis=1)
    defined = sums > 0
    rows = np.zeros_like(flat)
    rows[defined] = flat[defined] / sums[defined, None]
    return Cpt(child_space, parent_space, rows, defined)

"""Offset removal and correlation analysis for experiment result tables.

The p-value machinery (regularized incomplete beta via a continued fraction,
Student-t tail) is self-contained so the package needs no statistics
dependency at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

from .errors import DomainError

__all__ = [
    "CorrelationResult",
    "pearson",
    "pearson_p_value",
    "offset_removal",
    "student_t_cdf",
    "regularized_incomplete_beta",
]

_BETA_TOL = 1e-14
_BETA_MAX_ITER = 500


@dataclass(frozen=True)
class CorrelationResult:
    """Pearson coefficient with its two-tailed p-value."""

    r: float
    p_value: float
    n: int

    def __post_init__(self):
        if not -1.0 <= self.r <= 1.0 + 1e-12:
            raise DomainError(f"correlation {self.r} outside [-1, 1]")
        if not 0.0 <= self.p_value <= 1.0:
            raise DomainError(f"p-value {self.p_value} outside [0, 1]")
        if self.n < 3:
            raise DomainError("correlation needs at least 3 samples")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by the Lentz continued fraction, accurate to ~1e-14."""
    if not (a > 0 and b > 0):
        raise DomainError("incomplete beta needs positive shape parameters")
    if x < 0.0 or x > 1.0:
        raise DomainError(f"x={x} outside [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    # use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) where the fraction converges fast
    if x > (a + 1.0) / (a + b + 2.0):
        return 1.0 - regularized_incomplete_beta(b, a, 1.0 - x)
    log_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # modified Lentz algorithm for the standard continued fraction
    tiny = 1e-300
    c = 1.0
    d = 1.0 - (a + b) * x / (a + 1.0)
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2))
        d = 1.0 + num * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + num / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0))
        d = 1.0 + num * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + num / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_TOL:
            break
    return front * h / a


def student_t_cdf(t: float, df: int) -> float:
    """CDF of Student's t with ``df`` degrees of freedom."""
    if df < 1:
        raise DomainError("degrees of freedom must be >= 1")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def pearson_p_value(r: float, n: int) -> float:
    """Two-tailed p-value of a Pearson coefficient via the Student-t tail."""
    if n < 3:
        raise DomainError("correlation needs at least 3 samples")
    if not -1.0 <= r <= 1.0:
        raise DomainError(f"correlation {r} outside [-1, 1]")
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    t = abs(r) * math.sqrt(df / (1.0 - r * r))
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def pearson(xs: Sequence[float], ys: Sequence[float]) -> CorrelationResult:
    """Pearson correlation with a two-tailed Student-t p-value."""
    n = len(xs)
    if len(ys) != n:
        raise DomainError("xs and ys must have the same length")
    if n < 3:
        raise DomainError("correlation needs at least 3 samples")
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    dx = [x - mean_x for x in xs]
    dy = [y - mean_y for y in ys]
    var_x = sum(v * v for v in dx)
    var_y = sum(v * v for v in dy)
    if var_x <= 0.0 or var_y <= 0.0:
        raise DomainError("correlation undefined: an input has zero variance")
    r = sum(a * b for a, b in zip(dx, dy)) / math.sqrt(var_x * var_y)
    r = max(-1.0, min(1.0, r))
    return CorrelationResult(r=r, p_value=pearson_p_value(r, n), n=n)


def offset_removal(
    values: Mapping[tuple[Hashable, float, Hashable], float]
) -> dict[tuple[Hashable, float, Hashable], float]:
    """Remove per-run-set level deviations from a score table.

    Keys are ``(model, size, set)``. For each model, the score of its
    smallest size is subtracted within every set and the cross-set mean of
    that smallest-size score is added back, so sets share a common baseline
    while within-set differences between sizes are preserved. Every
    ``(model, set)`` pair must include an entry at the model's smallest size.
    """
    if not values:
        return {}
    by_model: dict[Hashable, list[tuple[float, Hashable]]] = {}
    for model, size, run_set in values:
        by_model.setdefault(model, []).append((size, run_set))
    adjusted: dict[tuple[Hashable, float, Hashable], float] = {}
    for model, entries in by_model.items():
        smallest = min(size for size, _ in entries)
        sets = sorted({run_set for _, run_set in entries}, key=repr)
        base = {}
        for run_set in sets:
            key = (model, smallest, run_set)
            if key not in values:
                raise DomainError(
                    f"missing smallest-size entry for model={model!r} set={run_set!r}"
                )
            base[run_set] = values[key]
        mean_base = sum(base.values()) / len(base)
        for size, run_set in entries:
            key = (model, size, run_set)
            adjusted[key] = mean_base + values[key] - base[run_set]
    return adjusted

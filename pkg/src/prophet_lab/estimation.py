"""Sample-based thresholds for the i.i.d. rule.

Each target probability is rounded down to a power of ``1/(1+eps)``, shaded by a
further ``1/(1+eps)``, and turned into an order statistic of a sample pool. The
intent is to overestimate the explicit quantile threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rules import Schedule, ThresholdPolicy
from .values import NEVER, Distribution, TaggedValue

CEIL = "ceil"
FLOOR = "floor"


@dataclass(frozen=True)
class RoundedQuantile:
    original: float
    rounded: float
    shaded: float
    exponent: int  # rounded == (1+eps)**-exponent; 0 when original == 0


def _power(epsilon: float, k: int) -> float:
    return (1.0 + epsilon) ** (-k)


def round_down_power(p: float, epsilon: float) -> RoundedQuantile:
    """Largest ``(1+eps)**-k`` with ``k >= 1`` not above ``p``; 0 passes through."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if p == 0.0:
        return RoundedQuantile(0.0, 0.0, 0.0, 0)
    k = max(1, math.ceil(-math.log(p) / math.log1p(epsilon)))
    # the log estimate can be off by one either way near exact powers
    while k > 1 and _power(epsilon, k - 1) <= p:
        k -= 1
    while _power(epsilon, k) > p:
        k += 1
    rounded = _power(epsilon, k)
    return RoundedQuantile(p, rounded, rounded / (1.0 + epsilon), k)


@dataclass(frozen=True)
class SamplePool:
    """``m`` tagged samples sorted strictly descending."""

    values: np.ndarray
    ties: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        t = np.asarray(self.ties, dtype=float)
        order = np.lexsort((-t, -v))
        v, t = v[order], t[order]
        if len(v) and np.any((v[1:] == v[:-1]) & (t[1:] == t[:-1])):
            raise ValueError("pool contains duplicate tagged samples")
        v.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "ties", t)

    @property
    def m(self) -> int:
        return len(self.values)

    @classmethod
    def draw(cls, dist: Distribution, m: int, rng: np.random.Generator) -> "SamplePool":
        values, ties = dist.draw_many(rng, m)
        return cls(values, ties)

    @classmethod
    def from_tagged(cls, samples: Sequence[TaggedValue]) -> "SamplePool":
        return cls(np.array([s[0] for s in samples], dtype=float), np.array([s[1] for s in samples], dtype=float))

    def kth_highest(self, k: int) -> TaggedValue:
        if not 1 <= k <= self.m:
            raise ValueError(f"rank {k} outside 1..{self.m}")
        return TaggedValue(float(self.values[k - 1]), float(self.ties[k - 1]))


def sample_rank(shaded: float, m: int, rank_rounding: str = CEIL) -> int:
    """Order-statistic rank ``shaded*m``, rounded per ``rank_rounding``; 0 means no threshold.

    Floor mode never returns 0 for a positive ``shaded``: rank 1 is the smallest usable.
    """
    if shaded == 0.0:
        return 0
    x = shaded * m
    nearest = round(x)
    if abs(x - nearest) <= 1e-9 * max(1.0, x):
        k = int(nearest)
    elif rank_rounding == CEIL:
        k = math.ceil(x)
    elif rank_rounding == FLOOR:
        k = math.floor(x)
    else:
        raise ValueError(f"unknown rank rounding {rank_rounding!r}")
    k = max(k, 1)
    if k > m:
        raise ValueError(f"rank {k} exceeds pool size {m}")
    return k


def order_statistic_threshold(pool: SamplePool, shaded: float, rank_rounding: str = CEIL) -> TaggedValue:
    k = sample_rank(shaded, pool.m, rank_rounding)
    if k == 0:
        return NEVER
    return pool.kth_highest(k)


def required_samples(n: int, epsilon: float) -> int:
    """Pool size ``12 ln(1/eps) / (eps^3 * delta)`` with ``delta = eps^2/n``, rounded up."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    delta = epsilon**2 / n
    return math.ceil(12.0 * math.log(1.0 / epsilon) / (epsilon**3 * delta))


def schedule_ranks(s: Schedule, m: int, epsilon: float, rank_rounding: str = CEIL) -> list[int]:
    """Pool rank used at each step (0 where the step never accepts)."""
    return [sample_rank(round_down_power(p, epsilon).shaded, m, rank_rounding) for p in s.p]


def samples_cfhov_policy(pool: SamplePool, s: Schedule, epsilon: float, rank_rounding: str = CEIL) -> ThresholdPolicy:
    ranks = schedule_ranks(s, pool.m, epsilon, rank_rounding)
    return ThresholdPolicy(tuple(NEVER if k == 0 else pool.kth_highest(k) for k in ranks))


def draw_order_statistics(dist: Distribution, m: int, ranks: Sequence[int], rng: np.random.Generator,
                          size: int) -> tuple[np.ndarray, np.ndarray]:
    """Jointly draw the given ranks (k-th highest) of ``size`` independent pools of ``m``.

    Exact in distribution: the tagged tail mass of the k-th highest sample is the
    k-th smallest of ``m`` uniforms, ``G_k / G_{m+1}`` for Gamma partial sums ``G``.
    Returns ``(values, ties)`` of shape ``(size, len(ranks))`` in the order given.
    """
    ranks = list(ranks)
    uniq = sorted(set(ranks))
    if uniq and (uniq[0] < 1 or uniq[-1] > m):
        raise ValueError(f"ranks must lie in 1..{m}")
    shapes = np.diff([0] + uniq + [m + 1]).astype(float)
    gam = rng.standard_gamma(shapes, size=(size, len(shapes)))
    partial = np.cumsum(gam, axis=1)
    u = partial[:, :-1] / partial[:, -1:]
    values, ties = dist.quantile_from_tail(u.ravel())
    values = values.reshape(u.shape)
    ties = ties.reshape(u.shape)
    col = {k: c for c, k in enumerate(uniq)}
    pick = [col[k] for k in ranks]
    return values[:, pick], ties[:, pick]


@dataclass(frozen=True)
class Goodness:
    steps: tuple[bool, ...]
    tails: tuple[float, ...]

    @property
    def overall(self) -> bool:
        return all(self.steps)

    def __bool__(self):
        return self.overall


#: relative slack absorbing floating-point rounding in exact tails
GOODNESS_RTOL = 1e-12


def goodness_bounds(p, epsilon: float):
    p = np.asarray(p, dtype=float)
    return p / (1.0 + epsilon) ** 3 * (1.0 - GOODNESS_RTOL), p * (1.0 + GOODNESS_RTOL)


def goodness_check(dist: Distribution, policy: ThresholdPolicy, s: Schedule, epsilon: float) -> Goodness:
    """Per step: ``p_i/(1+eps)^3 <= Pr[x > tau_i] <= p_i`` (non-strict on both sides)."""
    if len(policy) != s.n:
        raise ValueError("policy and schedule lengths differ")
    tails = tuple(dist.tail(t) for t in policy.thresholds)
    lo, hi = goodness_bounds(s.p, epsilon)
    steps = tuple(bool(l <= q <= h) for l, q, h in zip(lo, tails, hi))
    return Goodness(steps, tails)


def goodness_batch(dist: Distribution, thr_values: np.ndarray, thr_ties: np.ndarray, p, epsilon: float) -> np.ndarray:
    """Overall goodness per row of a ``(trials, n)`` threshold array."""
    tails = dist.tail_many(thr_values.ravel(), thr_ties.ravel()).reshape(thr_values.shape)
    lo, hi = goodness_bounds(p, epsilon)
    return np.all((tails >= lo) & (tails <= hi), axis=1)

"""Exact deferred-decisions analysis of the single-sample rule.

Draw two values per origin, keep the larger as ``Y`` and the smaller as ``Z``,
then a fair coin per origin decides which one arrives as the real value (heads:
``Y``) and which one is the offline sample. For a fixed pair of draws every
quantity of interest is an average over the ``2**n`` coin outcomes, which
:func:`enumerate_exact` computes exhaustively.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .values import Instance, TaggedValue

MAX_ENUMERATION_N = 24
MAX_PERMUTATION_N = 6


@dataclass(frozen=True)
class World:
    """Merged descending order of the 2n draws.

    ``index[j]`` is the 1-based origin of ``W[j]`` (so ``index`` is 0-indexed by
    position while positions are reported 1-based, as is ``jstar``).
    """

    n: int
    W: tuple[TaggedValue, ...]
    index: tuple[int, ...]
    jstar: int

    @property
    def values(self) -> np.ndarray:
        return np.array([w.value for w in self.W])

    @property
    def is_y(self) -> tuple[bool, ...]:
        seen: set[int] = set()
        flags = []
        for i in self.index:
            flags.append(i not in seen)
            seen.add(i)
        return tuple(flags)

    def pairs(self) -> tuple[list[TaggedValue], list[TaggedValue]]:
        """The relabelled ``(Y, Z)`` lists in origin order."""
        Y: list = [None] * self.n
        Z: list = [None] * self.n
        for w, i, y in zip(self.W, self.index, self.is_y):
            (Y if y else Z)[i - 1] = w
        return Y, Z


def _tag(x) -> TaggedValue:
    if isinstance(x, TaggedValue):
        return x
    if isinstance(x, tuple):
        return TaggedValue(*x)
    return TaggedValue(float(x), 0.5)


def build_world(Y: Sequence, Z: Sequence) -> World:
    """Relabel each pair so ``Y_i > Z_i``, merge, sort descending, locate the pivot.

    Plain reals are accepted and tagged with tiebreak 0.5.
    """
    if len(Y) != len(Z):
        raise ValueError("Y and Z must have equal length")
    if not Y:
        raise ValueError("a world needs n >= 1")
    Y = [_tag(y) for y in Y]
    Z = [_tag(z) for z in Z]
    entries = []
    for i, (y, z) in enumerate(zip(Y, Z), start=1):
        hi, lo = (y, z) if y > z else (z, y)
        entries += [(hi, i), (lo, i)]
    entries.sort(key=lambda e: e[0], reverse=True)
    W = tuple(e[0] for e in entries)
    if any(a == b for a, b in zip(W, W[1:])):
        raise ValueError("duplicate tagged values; the merged order must be strict")
    index = tuple(e[1] for e in entries)
    return World(len(Y), W, index, _first_repeat(index))


def _first_repeat(index: Sequence[int]) -> int:
    seen: set[int] = set()
    for pos, i in enumerate(index, start=1):
        if i in seen:
            return pos
        seen.add(i)
    raise ValueError("index map must contain every origin twice")


def pivotal_index(world: World) -> int:
    """1-based position of the largest Z: the first position whose origin already appeared."""
    return _first_repeat(world.index)


def prophet_formula(world: World) -> float:
    w = world.values
    j = pivotal_index(world)
    terms = [w[k - 1] / 2.0**k for k in range(1, j)]
    terms.append(w[j - 1] / 2.0 ** (j - 1))
    return math.fsum(terms)


def gambler_bound_formula(world: World) -> float:
    w = world.values
    j = pivotal_index(world)
    terms = [w[k - 1] / 2.0 ** (k + 1) for k in range(1, j - 1)]
    terms.append(w[j - 2] / 2.0 ** (j - 1))
    return math.fsum(terms)


def _kernel_inputs(world: World):
    origin = np.array(world.index, dtype=np.int64) - 1
    return world.values, origin, np.array(world.is_y, dtype=np.uint8)


def _ranks(arrivals, n: int) -> np.ndarray:
    ranks = np.empty((len(arrivals), n), dtype=np.int64)
    for p, order in enumerate(arrivals):
        if sorted(order) != list(range(1, n + 1)):
            raise ValueError(f"arrival order {order!r} is not a permutation of 1..{n}")
        for r, i in enumerate(order):
            ranks[p, i - 1] = r
    return ranks


def _check_size(world: World):
    if world.n > MAX_ENUMERATION_N:
        raise ValueError(f"n = {world.n} exceeds the enumeration bound {MAX_ENUMERATION_N}")


def enumerate_exact(world: World, arrival: Optional[Sequence[int]] = None, backend=None) -> tuple[float, float]:
    """Exact ``(prophet, gambler)`` rewards averaged over all coin outcomes.

    ``arrival`` lists origins (1-based) in the order their real values are revealed;
    defaults to ``1..n``.
    """
    _check_size(world)
    if arrival is None:
        arrival = range(1, world.n + 1)
    prophet, gambler, _ = enumerate_orders(world, [tuple(arrival)], backend=backend)
    return prophet, float(gambler[0])


def enumerate_orders(world: World, arrivals, backend=None) -> tuple[float, np.ndarray, float]:
    """Exact prophet reward, gambler reward per arrival order, and almighty-adversary reward."""
    _check_size(world)
    w, origin, is_y = _kernel_inputs(world)
    prophet, gambler, adversary = kernels.enumerate_outcomes(
        w, origin, is_y, _ranks(list(arrivals), world.n), backend=backend)
    scale = 2.0 ** -world.n
    return prophet * scale, np.asarray(gambler) * scale, adversary * scale


def all_orders(n: int):
    if n > MAX_PERMUTATION_N:
        raise ValueError(f"permutation sweep is capped at n = {MAX_PERMUTATION_N}")
    return list(itertools.permutations(range(1, n + 1)))


def adversarial_gambler_exact(world: World, backend=None) -> float:
    """Reward when each outcome's values arrive in the worst order for the gambler.

    Per outcome that is the smallest real value above the largest sample, or 0.
    """
    _check_size(world)
    w, origin, is_y = _kernel_inputs(world)
    _, _, adversary = kernels.enumerate_outcomes(w, origin, is_y, _ranks([range(1, world.n + 1)], world.n),
                                                 backend=backend)
    return adversary * 2.0 ** -world.n


def assign_by_coins(world: World, heads: Sequence[bool]) -> tuple[list[TaggedValue], list[TaggedValue]]:
    """Step three of the procedure: returns ``(samples, reals)`` in origin order."""
    Y, Z = world.pairs()
    samples = [z if h else y for y, z, h in zip(Y, Z, heads)]
    reals = [y if h else z for y, z, h in zip(Y, Z, heads)]
    return samples, reals


def deferred_decisions_draw(instance: Instance, rng: np.random.Generator):
    """Draw ``(samples, reals)`` via two draws per distribution and a fair coin each."""
    Y, Z = [], []
    for d in instance.distributions:
        a, b = d.draw(rng), d.draw(rng)
        Y.append(max(a, b))
        Z.append(min(a, b))
    heads = rng.random(instance.n) < 0.5
    samples = [z if h else y for y, z, h in zip(Y, Z, heads)]
    reals = [y if h else z for y, z, h in zip(Y, Z, heads)]
    return samples, reals


def deferred_decisions_batch(instance: Instance, rng: np.random.Generator, trials: int):
    """Vectorized draw: ``(sample_values, sample_ties, real_values, real_ties)``, each ``(trials, n)``."""
    shape = (trials, instance.n)
    yv, yt, zv, zt = (np.empty(shape) for _ in range(4))
    for i, d in enumerate(instance.distributions):
        av, at = d.draw_many(rng, trials)
        bv, bt = d.draw_many(rng, trials)
        a_big = (av > bv) | ((av == bv) & (at > bt))
        yv[:, i] = np.where(a_big, av, bv)
        yt[:, i] = np.where(a_big, at, bt)
        zv[:, i] = np.where(a_big, bv, av)
        zt[:, i] = np.where(a_big, bt, at)
    heads = rng.random(shape) < 0.5
    return (np.where(heads, zv, yv), np.where(heads, zt, yt),
            np.where(heads, yv, zv), np.where(heads, yt, zt))


def random_world(rng: np.random.Generator, n: int) -> World:
    """World from 2n i.i.d. Uniform(0,1) draws."""
    vals = rng.random(2 * n)
    ties = rng.random(2 * n)
    tagged = [TaggedValue(float(v), float(t)) for v, t in zip(vals, ties)]
    return build_world(tagged[:n], tagged[n:])

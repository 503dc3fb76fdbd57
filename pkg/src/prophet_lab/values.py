"""Tagged values and the distribution families used by every rule.

A draw from a distribution is a pair ``(value, tiebreak)`` with the tiebreak
uniform on [0, 1). Pairs compare lexicographically, so point masses behave like
continuous distributions: two independent draws are equal with probability 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np


class TaggedValue(NamedTuple):
    value: float
    tiebreak: float

    @property
    def is_never(self) -> bool:
        return self.value == math.inf and self.tiebreak == math.inf


#: Threshold that nothing exceeds. Used for steps whose acceptance probability is 0.
NEVER = TaggedValue(math.inf, math.inf)


def compare_tagged(a: TaggedValue, b: TaggedValue) -> int:
    """Return -1, 0 or 1 as ``a`` is below, equal to, or above ``b``."""
    if a.value != b.value:
        return 1 if a.value > b.value else -1
    if a.tiebreak != b.tiebreak:
        return 1 if a.tiebreak > b.tiebreak else -1
    return 0


def _check_probability(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p!r}")
    return p


class Distribution:
    """Base class. Subclasses implement the untagged pieces; tagging lives here.

    ``rng`` arguments are :class:`numpy.random.Generator` instances; no module
    level random state is kept.
    """

    #: atoms of the distribution, ascending (empty for continuous families)
    atoms: tuple[float, ...] = ()

    def draw(self, rng: np.random.Generator) -> TaggedValue:
        values, ties = self.draw_many(rng, 1)
        return TaggedValue(float(values[0]), float(ties[0]))

    def draw_many(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        values = self._draw_values(rng, size)
        ties = rng.random(size)
        return values, ties

    def tail(self, threshold: TaggedValue) -> float:
        """Probability that a tagged draw strictly exceeds ``threshold``."""
        v, s = threshold
        if v == math.inf:
            return 0.0
        above = self.survival(v)
        mass = self.mass_at(v)
        if mass == 0.0:
            return above
        return above + mass * (1.0 - s)

    def tail_many(self, values: np.ndarray, ties: np.ndarray) -> np.ndarray:
        return np.array([self.tail(TaggedValue(v, t)) for v, t in zip(values, ties)])

    def upper_quantile(self, p: float) -> TaggedValue:
        """Tagged threshold exceeded with probability exactly ``p``; ``NEVER`` for ``p = 0``."""
        p = _check_probability(p)
        if p == 0.0:
            return NEVER
        return self._upper_quantile(p)

    def quantile_from_tail(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized :meth:`upper_quantile`; returns (values, tiebreaks)."""
        pairs = [self.upper_quantile(float(x)) for x in np.asarray(u)]
        return np.array([a for a, _ in pairs]), np.array([b for _, b in pairs])

    # untagged pieces
    def survival(self, v: float) -> float:
        """Pr[X > v] for the untagged value."""
        raise NotImplementedError

    def mass_at(self, v: float) -> float:
        return 0.0

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def _draw_values(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def _upper_quantile(self, p: float) -> TaggedValue:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(Distribution):
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not self.high > self.low:
            raise ValueError("uniform requires low < high")

    def survival(self, v):
        if v <= self.low:
            return 1.0
        if v >= self.high:
            return 0.0
        return (self.high - v) / (self.high - self.low)

    def support(self):
        return (self.low, self.high)

    def _draw_values(self, rng, size):
        return rng.uniform(self.low, self.high, size)

    def _upper_quantile(self, p):
        return TaggedValue(self.high - p * (self.high - self.low), 0.0)

    def tail_many(self, values, ties):
        out = np.clip((self.high - values) / (self.high - self.low), 0.0, 1.0)
        out[np.isinf(values)] = 0.0
        return out

    def quantile_from_tail(self, u):
        u = np.asarray(u, dtype=float)
        never = u <= 0.0
        return (np.where(never, np.inf, self.high - u * (self.high - self.low)),
                np.where(never, np.inf, 0.0))

    def __str__(self):
        return f"uniform({self.low!r},{self.high!r})"


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be positive")

    def survival(self, v):
        if v <= 0.0:
            return 1.0
        return math.exp(-self.rate * v)

    def support(self):
        return (0.0, math.inf)

    def _draw_values(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    def _upper_quantile(self, p):
        return TaggedValue(-math.log(p) / self.rate, 0.0)

    def tail_many(self, values, ties):
        with np.errstate(over="ignore"):
            out = np.exp(-self.rate * np.maximum(values, 0.0))
        out[np.isinf(values)] = 0.0
        return out

    def quantile_from_tail(self, u):
        u = np.asarray(u, dtype=float)
        never = u <= 0.0
        with np.errstate(divide="ignore"):
            values = -np.log(u) / self.rate
        return np.where(never, np.inf, values), np.where(never, np.inf, 0.0)

    def __str__(self):
        return f"exp({self.rate!r})"


@dataclass(frozen=True)
class FiniteDiscrete(Distribution):
    """Finitely many atoms. Probabilities must sum to 1 within 1e-12."""

    values: tuple[float, ...]
    probabilities: tuple[float, ...]
    atoms: tuple[float, ...] = field(init=False, repr=False)
    _masses: tuple[float, ...] = field(init=False, repr=False, compare=False)
    _above: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.values) != len(self.probabilities) or not self.values:
            raise ValueError("discrete distribution needs matching, non-empty values and probabilities")
        if any(q < 0 for q in self.probabilities):
            raise ValueError("probabilities must be nonnegative")
        if abs(math.fsum(self.probabilities) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {math.fsum(self.probabilities)!r}, not 1")
        merged: dict[float, float] = {}
        for v, q in zip(self.values, self.probabilities):
            if q > 0:
                merged[float(v)] = merged.get(float(v), 0.0) + float(q)
        atoms = tuple(sorted(merged))
        masses = tuple(merged[a] for a in atoms)
        # mass strictly above each atom, summed from the top so small tails stay exact
        above, acc = [], []
        for q in reversed(masses):
            above.append(math.fsum(acc))
            acc.append(q)
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probabilities", tuple(float(q) for q in self.probabilities))
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "_masses", masses)
        object.__setattr__(self, "_above", tuple(reversed(above)))

    def _atom_index(self, v: float) -> int:
        return int(np.searchsorted(self.atoms, v, side="left"))

    def survival(self, v):
        i = int(np.searchsorted(self.atoms, v, side="right"))
        if i >= len(self.atoms):
            return 0.0
        return self._above[i] + self._masses[i]

    def mass_at(self, v):
        i = self._atom_index(v)
        if i < len(self.atoms) and self.atoms[i] == v:
            return self._masses[i]
        return 0.0

    def support(self):
        return (self.atoms[0], self.atoms[-1])

    def _draw_values(self, rng, size):
        idx = rng.choice(len(self.atoms), size=size, p=np.asarray(self._masses) / math.fsum(self._masses))
        return np.asarray(self.atoms)[idx]

    def _upper_quantile(self, p):
        # top-most atom whose closed upper tail reaches p, then place the tiebreak
        for i in range(len(self.atoms) - 1, -1, -1):
            above, mass = self._above[i], self._masses[i]
            if above + mass >= p:
                s = 1.0 - (p - above) / mass
                return TaggedValue(self.atoms[i], min(max(s, 0.0), 1.0))
        return TaggedValue(self.atoms[0], 0.0)

    def tail_many(self, values, ties):
        atoms = np.asarray(self.atoms)
        masses = np.asarray(self._masses)
        above = np.asarray(self._above)
        closed = np.append(above + masses, 0.0)
        out = closed[np.searchsorted(atoms, values, side="right")]
        left = np.searchsorted(atoms, values, side="left")
        idx = np.minimum(left, len(atoms) - 1)
        hit = (left < len(atoms)) & (atoms[idx] == values)
        out = out + np.where(hit, masses[idx] * (1.0 - ties), 0.0)
        out[np.isinf(values)] = 0.0
        return out

    def quantile_from_tail(self, u):
        u = np.asarray(u, dtype=float)
        masses = np.asarray(self._masses)
        above = np.asarray(self._above)
        rising = (above + masses)[::-1]
        k = len(self.atoms)
        i = k - 1 - np.minimum(np.searchsorted(rising, u, side="left"), k - 1)
        ties = np.clip(1.0 - (u - above[i]) / masses[i], 0.0, 1.0)
        values = np.asarray(self.atoms)[i]
        never = u <= 0.0
        return np.where(never, np.inf, values), np.where(never, np.inf, ties)

    def __str__(self):
        return f"discrete({list(self.values)!r},{list(self.probabilities)!r})"


class PointMass(FiniteDiscrete):
    def __init__(self, value: float):
        super().__init__((float(value),), (1.0,))

    @property
    def value(self) -> float:
        return self.atoms[0]

    def __repr__(self):
        return f"PointMass({self.value!r})"

    def __str__(self):
        return f"point({self.value!r})"


class Empirical(FiniteDiscrete):
    """Uniform resampling, with replacement, from a stored list of reals."""

    def __init__(self, data: Sequence[float]):
        data = [float(x) for x in data]
        if not data:
            raise ValueError("empirical distribution needs at least one value")
        counts: dict[float, int] = {}
        for x in data:
            counts[x] = counts.get(x, 0) + 1
        keys = sorted(counts)
        super().__init__(tuple(keys), tuple(counts[k] / len(data) for k in keys))
        object.__setattr__(self, "data", tuple(data))

    def __repr__(self):
        return f"Empirical({list(self.data)!r})"

    def __str__(self):
        return f"empirical({list(self.data)!r})"


FIXED_ORDER = "fixed-order"
ALMIGHTY = "almighty"


@dataclass(frozen=True)
class Instance:
    distributions: tuple[Distribution, ...]
    adversary: str = FIXED_ORDER

    def __post_init__(self):
        object.__setattr__(self, "distributions", tuple(self.distributions))
        if not self.distributions:
            raise ValueError("an instance needs at least one distribution")
        if self.adversary not in (FIXED_ORDER, ALMIGHTY):
            raise ValueError(f"unknown adversary {self.adversary!r}")

    @property
    def n(self) -> int:
        return len(self.distributions)

    def __len__(self):
        return len(self.distributions)

    @property
    def is_iid(self) -> bool:
        first = self.distributions[0]
        return all(d == first for d in self.distributions[1:])

    @classmethod
    def iid(cls, dist: Distribution, n: int, adversary: str = FIXED_ORDER) -> "Instance":
        if n < 1:
            raise ValueError("n must be at least 1")
        return cls((dist,) * n, adversary)

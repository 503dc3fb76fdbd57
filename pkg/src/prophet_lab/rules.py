"""Threshold stopping rules and acceptance-probability schedules.

Every rule reduces to a :class:`ThresholdPolicy`, one tagged threshold per step,
and every policy is executed by :func:`run_policy` (or its batched twin
:func:`run_policy_batch`).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from . import kernels
from .values import NEVER, Distribution, FiniteDiscrete, Instance, TaggedValue


@dataclass(frozen=True)
class Schedule:
    n: int
    p: tuple[float, ...]
    epsilon: float
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(x) for x in self.p))
        if len(self.p) != self.n:
            raise ValueError(f"schedule has {len(self.p)} entries, expected n = {self.n}")
        if any(not 0.0 <= x <= 1.0 for x in self.p):
            raise ValueError("schedule probabilities must lie in [0, 1]")
        if any(a > b for a, b in zip(self.p, self.p[1:])):
            raise ValueError("schedule is non-monotone: probabilities must be ascending")

    @property
    def is_clipped(self) -> bool:
        return all(x == 0.0 or x > self.delta for x in self.p)


@dataclass(frozen=True)
class ThresholdPolicy:
    thresholds: tuple[TaggedValue, ...]

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(TaggedValue(*t) for t in self.thresholds))

    def __len__(self):
        return len(self.thresholds)

    @classmethod
    def constant(cls, threshold: TaggedValue, n: int) -> "ThresholdPolicy":
        return cls((threshold,) * n)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([t.value for t in self.thresholds], dtype=float),
                np.array([t.tiebreak for t in self.thresholds], dtype=float))


@dataclass(frozen=True)
class RunOutcome:
    reward: float
    stop_index: Optional[int]  # 1-based; None when nothing was accepted


def single_sample_threshold(samples: Sequence[TaggedValue], n: Optional[int] = None) -> ThresholdPolicy:
    """Constant policy at the largest offline sample."""
    if not samples:
        raise ValueError("single-sample rule needs at least one sample")
    top = max(TaggedValue(*s) for s in samples)
    return ThresholdPolicy.constant(top, len(samples) if n is None else n)


def run_policy(policy: ThresholdPolicy, realized: Sequence[TaggedValue]) -> RunOutcome:
    if len(policy) != len(realized):
        raise ValueError(f"policy has {len(policy)} thresholds but {len(realized)} values arrived")
    for i, (x, t) in enumerate(zip(realized, policy.thresholds), start=1):
        if TaggedValue(*x) > t:
            return RunOutcome(float(x[0]), i)
    return RunOutcome(0.0, None)


def run_policy_batch(thr_values, thr_ties, values, ties, backend=None):
    """Run many sequences at once.

    Returns ``(rewards, stops)`` where ``stops`` is 0-based with -1 for no acceptance.
    Thresholds may be shared ``(n,)`` or per trial ``(trials, n)``.
    """
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != np.shape(thr_values)[-1]:
        raise ValueError("threshold and value lengths differ")
    stops = kernels.first_exceed(values, ties, thr_values, thr_ties, backend=backend)
    rows = np.arange(len(stops))
    rewards = np.where(stops >= 0, values[rows, np.maximum(stops, 0)], 0.0)
    return rewards, stops


_CONSTANT = re.compile(r"^constant\(\s*([^)]*)\s*\)$")
_FILE = re.compile(r"^file\(\s*(.+?)\s*\)$")


def build_schedule(n: int, kind: str = "constant(1)", epsilon: float = 0.1) -> Schedule:
    """Monotone schedule ``constant(c)`` (every p_i = c/n) or ``file(path)``; delta = eps^2/n."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    kind = kind.strip()
    if m := _CONSTANT.match(kind):
        c = float(m.group(1) or 1.0)
        p = [c / n] * n
    elif m := _FILE.match(kind):
        p = load_schedule_file(m.group(1))
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return Schedule(n, tuple(p), epsilon, epsilon**2 / n)


def load_schedule_file(path) -> list[float]:
    """One probability per line, ascending. Blank lines and ``#`` comments are skipped."""
    path = Path(path)
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(float(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not a probability: {line!r}") from None
    if any(not 0.0 <= x <= 1.0 for x in out):
        raise ValueError(f"{path}: probabilities must lie in [0, 1]")
    if any(a > b for a, b in zip(out, out[1:])):
        raise ValueError(f"{path}: schedule is non-monotone")
    return out


def write_schedule_file(path, p: Sequence[float]) -> None:
    Path(path).write_text("".join(f"{x:.17g}\n" for x in p))


def clip_schedule(s: Schedule) -> Schedule:
    """Zero every p_i <= delta (the boundary is clipped too)."""
    return Schedule(s.n, tuple(0.0 if x <= s.delta else x for x in s.p), s.epsilon, s.delta)


def explicit_cfhov_policy(dist: Distribution, s: Schedule) -> ThresholdPolicy:
    return ThresholdPolicy(tuple(dist.upper_quantile(p) for p in s.p))


# baselines


class UnsupportedDistribution(TypeError):
    pass


def _check_exact(instance: Instance):
    for d in instance.distributions:
        if not isinstance(d, Distribution):
            raise UnsupportedDistribution(f"{d!r} has no exact tail capability")
        try:
            d.support()
        except NotImplementedError:
            raise UnsupportedDistribution(f"{type(d).__name__} has no support bounds") from None


def max_tail(instance: Instance, threshold: TaggedValue) -> float:
    """Pr[max_i X_i > threshold] in the tagged order."""
    below = 1.0
    for d in instance.distributions:
        below *= 1.0 - d.tail(threshold)
    return 1.0 - below


def median_of_max(instance: Instance) -> TaggedValue:
    """Tagged threshold exceeded by the maximum with probability one half."""
    _check_exact(instance)
    target = 0.5
    atoms = sorted({a for d in instance.distributions for a in d.atoms})
    for a in atoms:
        hi = max_tail(instance, TaggedValue(a, 0.0))
        lo = max_tail(instance, TaggedValue(a, 1.0))
        if lo <= target <= hi:
            return TaggedValue(a, _bisect(lambda s: max_tail(instance, TaggedValue(a, s)), 0.0, 1.0, target))
    lows, highs = zip(*(d.support() for d in instance.distributions))
    lo = min(lows)
    hi = max(d.upper_quantile(target / instance.n).value for d in instance.distributions)
    v = _bisect(lambda x: max_tail(instance, TaggedValue(x, 0.0)), lo, hi, target)
    return TaggedValue(v, 0.0)


def _bisect(f, lo, hi, target, iters=200):
    """Point where the non-increasing ``f`` crosses ``target``."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def expected_max(instance: Instance) -> float:
    """E[max_i X_i]: exact for all-discrete instances, quadrature otherwise."""
    _check_exact(instance)
    dists = instance.distributions
    if all(isinstance(d, FiniteDiscrete) for d in dists):
        atoms = sorted({a for d in dists for a in d.atoms})
        total, prev_cdf = [], 0.0
        for a in atoms:
            cdf = math.prod(1.0 - d.survival(a) for d in dists)
            total.append(a * (cdf - prev_cdf))
            prev_cdf = cdf
        return math.fsum(total)

    def exceed(v):
        return 1.0 - math.prod(1.0 - d.survival(v) for d in dists)

    lows, highs = zip(*(d.support() for d in dists))
    base = min(lows)
    finite_top = max([h for h in highs if math.isfinite(h)] + [base])
    atoms = sorted({a for d in dists for a in d.atoms if base < a < finite_top})
    area = 0.0
    if finite_top > base:
        area += integrate.quad(exceed, base, finite_top, points=atoms or None, limit=500,
                               epsabs=1e-13, epsrel=1e-12)[0]
    if any(math.isinf(h) for h in highs):
        area += integrate.quad(exceed, finite_top, math.inf, limit=500, epsabs=1e-13, epsrel=1e-12)[0]
    return base + area


def baseline_policy(kind: str, instance: Instance) -> ThresholdPolicy:
    """Constant policy at the median of the max, or at half the expected max."""
    if kind == "median-of-max":
        threshold = median_of_max(instance)
    elif kind == "half-expected-max":
        threshold = TaggedValue(expected_max(instance) / 2.0, 0.0)
    else:
        raise ValueError(f"unknown baseline {kind!r}")
    return ThresholdPolicy.constant(threshold, instance.n)


__all__ = [
    "NEVER",
    "RunOutcome",
    "Schedule",
    "ThresholdPolicy",
    "UnsupportedDistribution",
    "baseline_policy",
    "build_schedule",
    "clip_schedule",
    "expected_max",
    "explicit_cfhov_policy",
    "load_schedule_file",
    "max_tail",
    "median_of_max",
    "run_policy",
    "run_policy_batch",
    "single_sample_threshold",
    "write_schedule_file",
]

"""Seeded Monte Carlo engine for the stopping rules.

Trials are processed in fixed blocks of :data:`BLOCK` trials. Block ``b`` draws
from streams seeded by ``(seed, b, stream)`` only, so results do not depend on
the worker count or on scheduling. Realized values always come from stream 0;
offline samples and pools from stream 1. A rule and the prophet therefore see
the same realized sequences for the same seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Optional

import numpy as np
from scipy import stats

from .estimation import CEIL, draw_order_statistics, goodness_batch, required_samples, schedule_ranks
from .rules import (Schedule, baseline_policy, build_schedule, clip_schedule, explicit_cfhov_policy,
                    run_policy_batch)
from .values import (ALMIGHTY, Distribution, Exponential, FiniteDiscrete, Instance, PointMass, Uniform)

BLOCK = 8192
Z99 = float(stats.norm.ppf(0.995))
SLACK_SE = 4.0
FULL_POOL_LIMIT = 10_000

RULES = ("single-sample", "explicit-cfhov", "samples-cfhov", "median-of-max", "half-expected-max")
_REAL, _OFFLINE = 0, 1


def block_rng(seed: int, block: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block, stream)))


def _blocks(trials: int):
    return [(b, b * BLOCK, min(BLOCK, trials - b * BLOCK)) for b in range(math.ceil(trials / BLOCK))]


def map_blocks(fn: Callable, trials: int, workers: int = 1) -> list:
    """Apply ``fn(block, size)`` to every block; results come back in block order."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    jobs = _blocks(trials)
    if workers <= 1 or len(jobs) == 1:
        return [fn(b, size) for b, _, size in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(job[0], job[2]), jobs))


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float  # 99% normal-approximation half-width
    trials: int
    seed: int
    std_error: float = 0.0

    def __post_init__(self):
        if self.half_width < 0 or self.trials < 1:
            raise ValueError("invalid estimate")

    @classmethod
    def from_samples(cls, x: np.ndarray, seed: int) -> "Estimate":
        x = np.asarray(x, dtype=float)
        se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
        return cls(float(x.mean()), Z99 * se, len(x), seed, se)

    def as_dict(self) -> dict:
        return {"mean": self.mean, "half_width": self.half_width, "std_error": self.std_error,
                "trials": self.trials, "seed": self.seed}


def draw_realized(instance: Instance, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
    values = np.empty((size, instance.n))
    ties = np.empty((size, instance.n))
    if instance.is_iid:
        v, t = instance.distributions[0].draw_many(rng, size * instance.n)
        return v.reshape(size, instance.n), t.reshape(size, instance.n)
    for i, d in enumerate(instance.distributions):
        values[:, i], ties[:, i] = d.draw_many(rng, size)
    return values, ties


def tagged_row_max(values: np.ndarray, ties: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    top = values.max(axis=1)
    top_ties = np.where(values == top[:, None], ties, -np.inf).max(axis=1)
    return top, top_ties


@dataclass(frozen=True)
class RuleSpec:
    name: str
    schedule: str = "constant(1)"
    epsilon: float = 0.1
    m: Optional[int] = None
    rank_rounding: str = CEIL
    pool_mode: str = "auto"  # auto | full | order-stats

    def __post_init__(self):
        if self.name not in RULES:
            raise ValueError(f"unknown rule {self.name!r}; expected one of {', '.join(RULES)}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if self.m is not None and self.m < 1:
            raise ValueError("pool size m must be at least 1")
        if self.pool_mode not in ("auto", "full", "order-stats"):
            raise ValueError(f"unknown pool mode {self.pool_mode!r}")

    def pool_size(self, n: int) -> int:
        return self.m if self.m is not None else required_samples(n, self.epsilon)

    def clipped_schedule(self, n: int) -> Schedule:
        return clip_schedule(build_schedule(n, self.schedule, self.epsilon))


def _use_full_pool(mode: str, m: int) -> bool:
    return mode == "full" or (mode == "auto" and m <= FULL_POOL_LIMIT)


def pool_thresholds(dist: Distribution, m: int, ranks, rng: np.random.Generator, size: int,
                    mode: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Per-trial Samples-CFHOV thresholds ``(size, n)``; rank 0 means never accept."""
    ranks = list(ranks)
    live = [k for k in ranks if k > 0]
    thr_v = np.full((size, len(ranks)), np.inf)
    thr_t = np.full((size, len(ranks)), np.inf)
    if not live:
        return thr_v, thr_t
    cols = [c for c, k in enumerate(ranks) if k > 0]
    if _use_full_pool(mode, m):
        idx = np.array(live) - 1
        for row in range(size):
            v, t = dist.draw_many(rng, m)
            order = np.lexsort((-t, -v))[: max(live)]
            thr_v[row, cols] = v[order][idx]
            thr_t[row, cols] = t[order][idx]
    else:
        v, t = draw_order_statistics(dist, m, live, rng, size)
        thr_v[:, cols] = v
        thr_t[:, cols] = t
    return thr_v, thr_t


@dataclass
class Simulation:
    rewards: np.ndarray
    stops: np.ndarray  # 0-based, -1 for no acceptance
    prophet: np.ndarray
    seed: int


def simulate_rule(rule: RuleSpec, instance: Instance, trials: int, seed: int, workers: int = 1) -> Simulation:
    """Run ``rule`` on ``trials`` fresh draws of ``instance``; keeps the per-trial record."""
    if isinstance(rule, str):
        rule = RuleSpec(rule)
    if instance.adversary == ALMIGHTY:
        raise ValueError("the almighty adversary is evaluated exactly (oracle module), not by simulation")
    n = instance.n
    fixed = None
    if rule.name in ("explicit-cfhov", "samples-cfhov"):
        if not instance.is_iid:
            raise ValueError(f"{rule.name} needs an i.i.d. instance")
        schedule = rule.clipped_schedule(n)
        dist = instance.distributions[0]
        if rule.name == "explicit-cfhov":
            fixed = explicit_cfhov_policy(dist, schedule).arrays()
        else:
            m = rule.pool_size(n)
            ranks = schedule_ranks(schedule, m, rule.epsilon, rule.rank_rounding)
    elif rule.name in ("median-of-max", "half-expected-max"):
        fixed = baseline_policy(rule.name, instance).arrays()

    def run_block(b, size):
        values, ties = draw_realized(instance, block_rng(seed, b, _REAL), size)
        if fixed is not None:
            thr_v, thr_t = fixed
        elif rule.name == "single-sample":
            sv, st = draw_realized(instance, block_rng(seed, b, _OFFLINE), size)
            top, top_t = tagged_row_max(sv, st)
            thr_v, thr_t = top[:, None], top_t[:, None]
        else:
            thr_v, thr_t = pool_thresholds(dist, m, ranks, block_rng(seed, b, _OFFLINE), size, rule.pool_mode)
        thr_v = np.broadcast_to(thr_v, values.shape)
        thr_t = np.broadcast_to(thr_t, values.shape)
        rewards, stops = run_policy_batch(thr_v, thr_t, values, ties)
        return rewards, stops, values.max(axis=1)

    parts = map_blocks(run_block, trials, workers)
    return Simulation(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                      np.concatenate([p[2] for p in parts]), seed)


def mc_prophet(instance: Instance, trials: int, seed: int, workers: int = 1) -> Estimate:
    """Monte Carlo estimate of E[max_i X_i]."""
    parts = map_blocks(lambda b, size: draw_realized(instance, block_rng(seed, b, _REAL), size)[0].max(axis=1),
                       trials, workers)
    return Estimate.from_samples(np.concatenate(parts), seed)


def mc_rule(rule, instance: Instance, trials: int, seed: int, workers: int = 1) -> Estimate:
    sim = simulate_rule(rule, instance, trials, seed, workers)
    return Estimate.from_samples(sim.rewards, seed)


def ratio_of_means(num: np.ndarray, den: np.ndarray, seed: int) -> Estimate:
    """Ratio of paired means with a delta-method standard error."""
    a, b = float(num.mean()), float(den.mean())
    if b == 0.0:
        raise ZeroDivisionError("prophet mean is 0; the ratio is undefined")
    r = a / b
    n = len(num)
    if n > 1:
        cov = np.cov(num, den, ddof=1)
        var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / (b * b)
        se = math.sqrt(max(var, 0.0) / n)
    else:
        se = 0.0
    return Estimate(r, Z99 * se, n, seed, se)


def ratio_report(rule, instance: Instance, trials: int, seed: int, workers: int = 1) -> Estimate:
    """Rule reward over prophet reward, on common realized sequences."""
    sim = simulate_rule(rule, instance, trials, seed, workers)
    return ratio_of_means(sim.rewards, sim.prophet, seed)


# coupled Explicit-vs-Samples runs


@dataclass(frozen=True)
class CoupledTrial:
    t1: Optional[int]  # 1-based stop of the explicit rule, None if it never stops
    t2: Optional[int]
    reward1: float
    reward2: float
    good: bool


@dataclass
class CoupledRun:
    epsilon: float
    m: int
    schedule: Schedule
    seed: int
    stop1: np.ndarray  # 0-based, -1 when no acceptance
    stop2: np.ndarray
    reward1: np.ndarray
    reward2: np.ndarray
    good: np.ndarray
    grid_points: int = 200
    summary: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.good)

    def trial(self, k: int) -> CoupledTrial:
        def one(s):
            return None if s < 0 else int(s) + 1

        return CoupledTrial(one(self.stop1[k]), one(self.stop2[k]), float(self.reward1[k]),
                            float(self.reward2[k]), bool(self.good[k]))

    def trials(self) -> Iterator[CoupledTrial]:
        return (self.trial(k) for k in range(len(self)))

    @property
    def factor(self) -> float:
        return (1.0 + self.epsilon) ** 3

    def early_stops(self) -> int:
        """Good trials where the sample-based rule stopped strictly before the explicit one."""
        n = self.schedule.n
        t1 = np.where(self.stop1 < 0, n, self.stop1)
        t2 = np.where(self.stop2 < 0, n, self.stop2)
        return int(np.count_nonzero(self.good & (t2 < t1)))

    def grid(self) -> np.ndarray:
        top = float(max(self.reward1.max(initial=0.0), self.reward2.max(initial=0.0)))
        return np.linspace(0.0, top, self.grid_points)

    def dominance(self) -> dict:
        """Exceedance curves on good trials and the per-point dominance test."""
        v = self.grid()
        g = self.good
        r1 = self.reward1[g]
        r2 = self.reward2[g]
        count = len(r1)
        e1 = np.array([(r1 > x).mean() if count else 0.0 for x in v])
        e2 = np.array([(r2 > x).mean() if count else 0.0 for x in v])
        se = np.zeros_like(v)
        if count > 1:
            for j, x in enumerate(v):
                d = (r2 > x).astype(float) - (r1 > x).astype(float) / self.factor
                se[j] = d.std(ddof=1) / math.sqrt(count)
        lower = e1 / self.factor - SLACK_SE * se
        return {"v": v, "exceed1": e1, "exceed2": e2, "bound": e1 / self.factor, "se": se,
                "ok": e2 >= lower, "good_trials": count}

    def reward_ratio_check(self) -> dict:
        """Mean sample-based reward against ``(1-eps)/(1+eps)^3`` of the explicit reward."""
        kappa = (1.0 - self.epsilon) / self.factor
        d = self.reward2 - kappa * self.reward1
        se = float(d.std(ddof=1) / math.sqrt(len(d))) if len(d) > 1 else 0.0
        mean1, mean2 = float(self.reward1.mean()), float(self.reward2.mean())
        return {"kappa": kappa, "mean_explicit": mean1, "mean_samples": mean2,
                "ratio": mean2 / mean1 if mean1 else math.nan, "slack": SLACK_SE * se,
                "ok": float(d.mean()) >= -SLACK_SE * se}

    def area_check(self) -> dict:
        """Mean reward lies between the right and left Riemann sums of its exceedance curve."""
        out = {}
        v = self.grid()
        if len(v) < 2 or v[-1] == 0.0:
            return {"ok": True}
        step = np.diff(v)
        ok = True
        for name, r in (("explicit", self.reward1), ("samples", self.reward2)):
            curve = np.array([(r > x).mean() for x in v])
            left = float(np.sum(curve[:-1] * step))
            right = float(np.sum(curve[1:] * step))
            mean = float(np.mean(np.maximum(r, 0.0)))
            this_ok = right - 1e-12 <= mean <= left + 1e-12
            ok &= this_ok
            out[name] = {"mean": mean, "left_sum": left, "right_sum": right, "ok": this_ok}
        out["ok"] = ok
        return out


def coupled_cfhov(dist: Distribution, s: Schedule, epsilon: float, m: int, trials: int, seed: int,
                  rank_rounding: str = CEIL, pool_mode: str = "auto", workers: int = 1,
                  grid_points: int = 200) -> CoupledRun:
    """Run both i.i.d. rules on shared realized sequences; each trial draws its own pool."""
    if not s.is_clipped:
        raise ValueError("coupled runs need a clipped schedule")
    explicit = explicit_cfhov_policy(dist, s).arrays()
    ranks = schedule_ranks(s, m, epsilon, rank_rounding)
    instance = Instance.iid(dist, s.n)

    def run_block(b, size):
        thr_v, thr_t = pool_thresholds(dist, m, ranks, block_rng(seed, b, _OFFLINE), size, pool_mode)
        good = goodness_batch(dist, thr_v, thr_t, s.p, epsilon)
        values, ties = draw_realized(instance, block_rng(seed, b, _REAL), size)
        r1, t1 = run_policy_batch(*explicit, values, ties)
        r2, t2 = run_policy_batch(thr_v, thr_t, values, ties)
        return t1, t2, r1, r2, good

    parts = map_blocks(run_block, trials, workers)
    cat = [np.concatenate([p[k] for p in parts]) for k in range(5)]
    run = CoupledRun(epsilon, m, s, seed, cat[0], cat[1], cat[2], cat[3], cat[4], grid_points)
    dom = run.dominance()
    run.summary = {
        "trials": trials,
        "good_trials": dom["good_trials"],
        "good_fraction": float(run.good.mean()),
        "early_stops": run.early_stops(),
        "dominance_ok": bool(dom["ok"].all()),
        "dominance_failures": int(np.count_nonzero(~dom["ok"])),
        "reward_ratio": run.reward_ratio_check(),
        "area": run.area_check(),
    }
    return run


# instances


def hard_instance(epsilon: float) -> Instance:
    """A sure 1 followed by ``1/eps`` with probability ``eps`` (else 0)."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    return Instance((PointMass(1.0), FiniteDiscrete((1.0 / epsilon, 0.0), (epsilon, 1.0 - epsilon))))


def hard_instance_exact(epsilon) -> tuple[Fraction, Fraction]:
    """Exact ``(prophet, optimal full-information gambler)`` values in rational arithmetic."""
    eps = Fraction(str(epsilon)) if isinstance(epsilon, float) else Fraction(epsilon)
    if not 0 < eps < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    second = [(1 / eps, eps), (Fraction(0), 1 - eps)]
    prophet = sum(q * max(Fraction(1), x) for x, q in second)
    # backward induction: continue value after step 1, then the sure 1 against it
    cont = sum(q * x for x, q in second)
    gambler = max(Fraction(1), cont)
    return prophet, gambler


def random_instance(rng: np.random.Generator, max_n: int = 8) -> Instance:
    """Mixed-family instance with 1..max_n nonnegative distributions."""
    n = int(rng.integers(1, max_n + 1))
    out = []
    for _ in range(n):
        family = int(rng.integers(4))
        if family == 0:
            lo = float(rng.uniform(0, 2))
            out.append(Uniform(lo, lo + float(rng.uniform(0.1, 3))))
        elif family == 1:
            out.append(Exponential(float(rng.uniform(0.3, 3))))
        elif family == 2:
            k = int(rng.integers(2, 5))
            vals = np.round(rng.uniform(0, 5, k), 3)
            q = rng.dirichlet(np.ones(k))
            q[-1] = 1.0 - q[:-1].sum()
            out.append(FiniteDiscrete(tuple(vals), tuple(q)))
        else:
            out.append(PointMass(float(np.round(rng.uniform(0, 3), 3))))
    return Instance(tuple(out))


@dataclass
class PoolCheck:
    """Goodness of independently drawn pools (one row per pool)."""

    good: np.ndarray
    tail_ratio_min: np.ndarray  # min over live steps of Pr[x > tau_i] / p_i
    tail_ratio_max: np.ndarray
    m: int
    seed: int

    @property
    def good_fraction(self) -> float:
        return float(self.good.mean())

    def passes(self, epsilon: float) -> tuple[bool, float]:
        """One-sided test of ``good_fraction >= 1 - eps`` with 4-standard-error slack."""
        target = 1.0 - epsilon
        slack = SLACK_SE * math.sqrt(target * epsilon / len(self.good))
        return self.good_fraction >= target - slack, slack


def pool_goodness(dist: Distribution, s: Schedule, epsilon: float, m: int, pools: int, seed: int,
                  rank_rounding: str = CEIL, pool_mode: str = "full", workers: int = 1) -> PoolCheck:
    """Draw ``pools`` pools of size ``m`` and test each resulting threshold vector."""
    ranks = schedule_ranks(s, m, epsilon, rank_rounding)
    p = np.asarray(s.p)
    live = p > 0

    def run_block(b, size):
        thr_v, thr_t = pool_thresholds(dist, m, ranks, block_rng(seed, b, _OFFLINE), size, pool_mode)
        good = goodness_batch(dist, thr_v, thr_t, p, epsilon)
        tails = dist.tail_many(thr_v.ravel(), thr_t.ravel()).reshape(thr_v.shape)
        if live.any():
            ratio = tails[:, live] / p[live]
            return good, ratio.min(axis=1), ratio.max(axis=1)
        return good, np.ones(size), np.ones(size)

    parts = map_blocks(run_block, pools, workers)
    return PoolCheck(*(np.concatenate([q[k] for q in parts]) for k in range(3)), m, seed)

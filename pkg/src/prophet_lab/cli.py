"""Config-driven experiment runner.

Configs are line-oriented ``key = value`` text; ``#`` starts a comment. Each
experiment writes ``<experiment>.csv`` and ``<experiment>_summary.json`` to the
output directory and exits 0 only if every check passed.

Keys
----
experiment      verify-single-sample | verify-iid | ratio | lemma1 | oracle-sweep
rule            single-sample | explicit-cfhov | samples-cfhov | median-of-max | half-expected-max
instance        hard(eps) | iid(<dist>, n) | [<dist>, <dist>, ...]
distribution    uniform(a,b) | exp(rate) | discrete([v...],[p...]) | point(v) | empirical([x...])
n, epsilon, schedule (constant(c) | file(path)), trials, seed, pools, worlds, max_n,
m, rank_rounding (ceil | floor), pool_mode (auto | full | order-stats), grid_points,
min_ratio, adversary (fixed-order | almighty), output_dir, threads

CSV columns
-----------
oracle-sweep          world,n,jstar,prophet_formula,prophet_exact,gambler_bound,gambler_exact,adversary_exact,ratio
verify-single-sample  world,n,jstar,orders,prophet_exact,gambler_bound,min_gambler_exact,adversary_exact,min_ratio
ratio                 trial,stop_index,reward,prophet
lemma1                pool,good,min_tail_ratio,max_tail_ratio
verify-iid            v,exceed_explicit,exceed_samples,bound,std_error,pass
"""

from __future__ import annotations

import argparse
import ast
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import harness, oracle
from .estimation import CEIL, FLOOR, required_samples
from .harness import SLACK_SE, RuleSpec
from .kernels import BACKEND
from .rules import build_schedule, clip_schedule
from .values import (ALMIGHTY, FIXED_ORDER, Distribution, Empirical, Exponential, FiniteDiscrete, Instance,
                     PointMass, Uniform)

EXPERIMENTS = ("verify-single-sample", "verify-iid", "ratio", "lemma1", "oracle-sweep")

CSV_COLUMNS = {
    "oracle-sweep": ["world", "n", "jstar", "prophet_formula", "prophet_exact", "gambler_bound",
                     "gambler_exact", "adversary_exact", "ratio"],
    "verify-single-sample": ["world", "n", "jstar", "orders", "prophet_exact", "gambler_bound",
                             "min_gambler_exact", "adversary_exact", "min_ratio"],
    "ratio": ["trial", "stop_index", "reward", "prophet"],
    "lemma1": ["pool", "good", "min_tail_ratio", "max_tail_ratio"],
    "verify-iid": ["v", "exceed_explicit", "exceed_samples", "bound", "std_error", "pass"],
}

REQUIRED = {
    "oracle-sweep": ("worlds", "seed"),
    "verify-single-sample": ("worlds", "seed"),
    "ratio": ("rule", "trials", "seed"),
    "lemma1": ("distribution", "n", "epsilon", "pools", "seed"),
    "verify-iid": ("distribution", "n", "epsilon", "trials", "seed"),
}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    experiment: str
    rule: Optional[str] = None
    instance: Optional[str] = None
    distribution: Optional[str] = None
    n: Optional[int] = None
    epsilon: Optional[float] = None
    schedule: str = "constant(1)"
    trials: Optional[int] = None
    seed: Optional[int] = None
    pools: Optional[int] = None
    worlds: Optional[int] = None
    max_n: Optional[int] = None
    m: Optional[int] = None
    rank_rounding: str = CEIL
    pool_mode: str = "auto"
    grid_points: int = 200
    min_ratio: Optional[float] = None
    adversary: str = FIXED_ORDER
    output_dir: Optional[str] = None
    threads: int = 1

    def resolved(self) -> dict:
        return asdict(self)


_INT_KEYS = {"n", "trials", "seed", "pools", "worlds", "max_n", "m", "grid_points", "threads"}
_FLOAT_KEYS = {"epsilon", "min_ratio"}
_KEYS = {f.name for f in fields(ExperimentConfig)}


# distribution and instance literals


def _literal(node):
    return ast.literal_eval(node)


def _dist_from_node(node) -> Distribution:
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name):
        raise ValueError(f"not a distribution literal: {ast.unparse(node)}")
    name = node.func.id
    args = [_literal(a) for a in node.args]
    if name == "uniform":
        return Uniform(*(float(a) for a in args))
    if name == "exp":
        return Exponential(*(float(a) for a in args))
    if name == "discrete":
        values, probs = args
        return FiniteDiscrete(tuple(float(v) for v in values), tuple(float(p) for p in probs))
    if name == "point":
        (v,) = args
        return PointMass(float(v))
    if name == "empirical":
        (data,) = args
        return Empirical(data)
    raise ValueError(f"unknown distribution family {name!r}")


def parse_distribution(text: str) -> Distribution:
    try:
        return _dist_from_node(ast.parse(text.strip(), mode="eval").body)
    except (SyntaxError, TypeError) as exc:
        raise ValueError(f"bad distribution literal {text!r}: {exc}") from None


def parse_instance(text: str, adversary: str = FIXED_ORDER) -> Instance:
    try:
        node = ast.parse(text.strip(), mode="eval").body
    except SyntaxError as exc:
        raise ValueError(f"bad instance literal {text!r}: {exc}") from None
    if isinstance(node, ast.List):
        return Instance(tuple(_dist_from_node(e) for e in node.elts), adversary)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        if node.func.id == "hard":
            inst = harness.hard_instance(float(_literal(node.args[0])))
            return Instance(inst.distributions, adversary)
        if node.func.id == "iid":
            dist_node, n_node = node.args
            return Instance.iid(_dist_from_node(dist_node), int(_literal(n_node)), adversary)
        return Instance((_dist_from_node(node),), adversary)
    raise ValueError(f"bad instance literal {text!r}")


def parse_config(text: str, experiment: Optional[str] = None, base_dir=None) -> ExperimentConfig:
    """Parse and validate a config; raises :class:`ConfigError` listing every problem found.

    ``experiment`` (the CLI subcommand) fills in or must agree with the ``experiment`` key.
    Relative schedule file paths resolve against ``base_dir``.
    """
    errors: list[str] = []
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in raw:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            if key in _INT_KEYS:
                value = int(value)
            elif key in _FLOAT_KEYS:
                value = float(value)
        except ValueError:
            errors.append(f"line {lineno}: {key} must be a number, got {value!r}")
            continue
        raw[key] = value

    if experiment is not None:
        if raw.get("experiment", experiment) != experiment:
            errors.append(f"config experiment {raw['experiment']!r} does not match subcommand {experiment!r}")
        raw["experiment"] = experiment
    kind = raw.get("experiment")
    if kind is None:
        errors.append("missing required field 'experiment'")
    elif kind not in EXPERIMENTS:
        errors.append(f"unknown experiment {kind!r}")
    else:
        for key in REQUIRED[kind]:
            if key not in raw:
                errors.append(f"missing required field {key!r} for {kind}")
        if kind == "ratio" and "instance" not in raw and "distribution" not in raw:
            errors.append("ratio needs 'instance' or 'distribution'")

    eps = raw.get("epsilon")
    if eps is not None and not 0.0 < eps < 1.0:
        errors.append(f"epsilon = {eps!r} out of range (0, 1)")
    for key in ("trials", "n", "pools", "worlds", "max_n", "m", "grid_points", "threads"):
        if key in raw and raw[key] < 1:
            errors.append(f"{key} = {raw[key]!r} out of range (must be >= 1)")
    if "seed" in raw and not 0 <= raw["seed"] < 2**64:
        errors.append("seed must be an unsigned 64-bit integer")
    if raw.get("rank_rounding", CEIL) not in (CEIL, FLOOR):
        errors.append(f"rank_rounding must be ceil or floor, got {raw['rank_rounding']!r}")
    if raw.get("pool_mode", "auto") not in ("auto", "full", "order-stats"):
        errors.append(f"unknown pool_mode {raw['pool_mode']!r}")
    if raw.get("adversary", FIXED_ORDER) not in (FIXED_ORDER, ALMIGHTY):
        errors.append(f"unknown adversary {raw['adversary']!r}")
    if kind == "oracle-sweep" and raw.get("max_n", 12) > oracle.MAX_ENUMERATION_N:
        errors.append(f"max_n above the enumeration bound {oracle.MAX_ENUMERATION_N}")
    if kind == "verify-single-sample" and raw.get("max_n", 6) > oracle.MAX_PERMUTATION_N:
        errors.append(f"max_n above the permutation-sweep bound {oracle.MAX_PERMUTATION_N}")
    if "rule" in raw and raw["rule"] not in harness.RULES:
        errors.append(f"unknown rule {raw['rule']!r}")

    for key, parser in (("distribution", parse_distribution), ("instance", parse_instance)):
        if key in raw:
            try:
                parser(raw[key])
            except (ValueError, TypeError) as exc:
                errors.append(f"{key}: {exc}")

    schedule = raw.get("schedule", "constant(1)")
    if base_dir is not None and schedule.startswith("file("):
        inner = schedule[5:-1].strip()
        if not Path(inner).is_absolute():
            schedule = f"file({Path(base_dir) / inner})"
        raw["schedule"] = schedule
    if "schedule" in raw:
        n = raw.get("n") or _instance_n(raw)
        if n is not None:
            try:
                build_schedule(n, schedule, eps if eps is not None and 0 < eps < 1 else 0.5)
            except (ValueError, OSError) as exc:
                errors.append(f"schedule: {exc}")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(**raw)


def _instance_n(raw) -> Optional[int]:
    try:
        return parse_instance(raw["instance"]).n if "instance" in raw else None
    except (ValueError, TypeError):
        return None


# experiments


def _check(name, passed, **detail):
    return {"name": name, "pass": bool(passed), "detail": detail}


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _run_oracle_sweep(cfg, workers):
    rng = np.random.default_rng(cfg.seed)
    max_n = cfg.max_n or 12
    rows, diffs, checks = [], [], {"bound": True, "half": True, "adversary": True}
    for k in range(cfg.worlds):
        world = oracle.random_world(rng, int(rng.integers(1, max_n + 1)))
        pf, gb = oracle.prophet_formula(world), oracle.gambler_bound_formula(world)
        prophet, gambler, adversary = oracle.enumerate_orders(world, [tuple(range(1, world.n + 1))])
        gambler = float(gambler[0])
        diffs.append(abs(pf - prophet))
        checks["bound"] &= gambler >= gb - 1e-12
        checks["half"] &= gb >= 0.5 * pf - 1e-12 and gambler >= 0.5 * prophet - 1e-12
        checks["adversary"] &= adversary >= 0.5 * pf - 1e-12
        rows.append([k, world.n, world.jstar, pf, prophet, gb, gambler, adversary, gambler / prophet])
    max_diff = max(diffs)
    result = [
        _check("prophet_formula_exact", max_diff <= 1e-12, max_abs_diff=max_diff),
        _check("gambler_bound", checks["bound"]),
        _check("half_of_prophet", checks["half"]),
        _check("almighty_adversary_half", checks["adversary"]),
    ]
    estimates = {"worlds": cfg.worlds, "max_abs_diff": max_diff,
                 "min_ratio": min(r[-1] for r in rows)}
    return rows, estimates, result


def _run_verify_single_sample(cfg, workers):
    rng = np.random.default_rng(cfg.seed)
    max_n = cfg.max_n or oracle.MAX_PERMUTATION_N
    rows = []
    ok = {"bound": True, "half": True, "adversary_half": True, "adversary_below": True}
    for k in range(cfg.worlds):
        world = oracle.random_world(rng, int(rng.integers(1, max_n + 1)))
        orders = oracle.all_orders(world.n)
        prophet, gambler, adversary = oracle.enumerate_orders(world, orders)
        gb, pf = oracle.gambler_bound_formula(world), oracle.prophet_formula(world)
        worst = float(gambler.min())
        ok["bound"] &= worst >= gb - 1e-12
        ok["half"] &= worst >= 0.5 * prophet - 1e-12
        ok["adversary_half"] &= adversary >= 0.5 * pf - 1e-12
        ok["adversary_below"] &= adversary <= worst + 1e-12
        rows.append([k, world.n, world.jstar, len(orders), prophet, gb, worst, adversary, worst / prophet])
    min_ratio = min(r[-1] for r in rows)
    checks = [
        _check("gambler_bound_all_orders", ok["bound"]),
        _check("half_of_prophet_all_orders", ok["half"], min_ratio=min_ratio),
        _check("almighty_adversary_half", ok["adversary_half"]),
        _check("almighty_adversary_below_fixed_orders", ok["adversary_below"]),
    ]
    return rows, {"worlds": cfg.worlds, "min_ratio": min_ratio}, checks


def _config_instance(cfg) -> Instance:
    if cfg.instance is not None:
        return parse_instance(cfg.instance, cfg.adversary)
    return Instance.iid(parse_distribution(cfg.distribution), cfg.n or 1, cfg.adversary)


def _run_ratio(cfg, workers):
    instance = _config_instance(cfg)
    rule = RuleSpec(cfg.rule, cfg.schedule, cfg.epsilon or 0.1, cfg.m, cfg.rank_rounding, cfg.pool_mode)
    sim = harness.simulate_rule(rule, instance, cfg.trials, cfg.seed, workers)
    ratio = harness.ratio_of_means(sim.rewards, sim.prophet, cfg.seed)
    rows = [[k, int(s) + 1 if s >= 0 else "", r, p]
            for k, (s, r, p) in enumerate(zip(sim.stops, sim.rewards, sim.prophet))]
    estimates = {
        "rule": harness.Estimate.from_samples(sim.rewards, cfg.seed).as_dict(),
        "prophet": harness.Estimate.from_samples(sim.prophet, cfg.seed).as_dict(),
        "ratio": ratio.as_dict(),
    }
    target = cfg.min_ratio
    if target is None and rule.name in ("single-sample", "median-of-max", "half-expected-max"):
        target = 0.5
    checks = []
    if target is not None:
        slack = SLACK_SE * ratio.std_error
        checks.append(_check("ratio_at_least_target", ratio.mean >= target - slack,
                             ratio=ratio.mean, target=target, slack=slack))
    return rows, estimates, checks


def _run_lemma1(cfg, workers):
    dist = parse_distribution(cfg.distribution)
    s = clip_schedule(build_schedule(cfg.n, cfg.schedule, cfg.epsilon))
    m = cfg.m or required_samples(cfg.n, cfg.epsilon)
    mode = "full" if cfg.pool_mode == "auto" else cfg.pool_mode
    res = harness.pool_goodness(dist, s, cfg.epsilon, m, cfg.pools, cfg.seed, cfg.rank_rounding, mode, workers)
    ok, slack = res.passes(cfg.epsilon)
    rows = [[k, bool(g), lo, hi] for k, (g, lo, hi) in enumerate(zip(res.good, res.tail_ratio_min, res.tail_ratio_max))]
    estimates = {"m": m, "good_fraction": res.good_fraction, "pools": cfg.pools}
    checks = [_check("good_fraction_at_least_1_minus_eps", ok, good_fraction=res.good_fraction,
                     target=1.0 - cfg.epsilon, slack=slack)]
    return rows, estimates, checks


def _run_verify_iid(cfg, workers):
    dist = parse_distribution(cfg.distribution)
    s = clip_schedule(build_schedule(cfg.n, cfg.schedule, cfg.epsilon))
    m = cfg.m or required_samples(cfg.n, cfg.epsilon)
    run = harness.coupled_cfhov(dist, s, cfg.epsilon, m, cfg.trials, cfg.seed, cfg.rank_rounding,
                                cfg.pool_mode, workers, cfg.grid_points)
    dom = run.dominance()
    rows = [list(r) for r in zip(dom["v"], dom["exceed1"], dom["exceed2"], dom["bound"], dom["se"], dom["ok"])]
    summ = run.summary
    rr = summ["reward_ratio"]
    checks = [
        _check("samples_rule_never_stops_earlier", summ["early_stops"] == 0, early_stops=summ["early_stops"],
               good_trials=summ["good_trials"]),
        _check("exceedance_dominance", summ["dominance_ok"], failures=summ["dominance_failures"]),
        _check("reward_ratio", rr["ok"], ratio=rr["ratio"], kappa=rr["kappa"], slack=rr["slack"]),
        _check("area_identity", summ["area"]["ok"]),
    ]
    estimates = {"m": m, "good_fraction": summ["good_fraction"], "mean_explicit": rr["mean_explicit"],
                 "mean_samples": rr["mean_samples"], "ratio": rr["ratio"]}
    return rows, estimates, checks


_RUNNERS = {
    "oracle-sweep": _run_oracle_sweep,
    "verify-single-sample": _run_verify_single_sample,
    "ratio": _run_ratio,
    "lemma1": _run_lemma1,
    "verify-iid": _run_verify_iid,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: Optional[int] = None) -> tuple[int, dict]:
    """Run ``cfg`` and write its CSV and JSON summary.

    Returns ``(status, summary)``: 0 when every check passed, 1 when some check
    failed, 2 on I/O errors (with an ``error`` record and no artifacts).
    """
    out = Path(out_dir or cfg.output_dir or ".")
    if not out.is_dir():
        return 2, {"error": "output directory does not exist", "path": str(out)}
    workers = workers or cfg.threads
    rows, estimates, checks = _RUNNERS[cfg.experiment](cfg, workers)
    summary = _jsonable({
        "config": cfg.resolved(),
        "estimates": estimates,
        "checks": checks,
        "seed": cfg.seed,
        "backend": BACKEND,
        "failures": [c["name"] for c in checks if not c["pass"]],
    })
    csv_path = out / f"{cfg.experiment}.csv"
    json_path = out / f"{cfg.experiment}_summary.json"
    try:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS[cfg.experiment])
            writer.writerows([_fmt(x) for x in row] for row in rows)
        json_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        return 2, {"error": str(exc), "path": str(exc.filename or out)}
    return (0 if not summary["failures"] else 1), summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prophet-lab", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path)
        p.add_argument("--seed-override", type=int)
        p.add_argument("--threads", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(json.dumps({"error": exc.strerror, "path": str(args.config)}), file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text, args.command, base_dir=args.config.parent)
    except ConfigError as exc:
        print(json.dumps({"error": "invalid config", "path": str(args.config), "errors": exc.errors}),
              file=sys.stderr)
        return 2
    if args.seed_override is not None:
        cfg.seed = args.seed_override
    if args.threads is not None and args.threads < 1:
        print(json.dumps({"error": "threads must be >= 1"}), file=sys.stderr)
        return 2
    status, summary = run_experiment(cfg, args.out, args.threads)
    if status == 2:
        print(json.dumps(summary), file=sys.stderr)
        return status
    for c in summary["checks"]:
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['name']}")
    if summary["failures"]:
        print(json.dumps({"failures": summary["failures"]}), file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())

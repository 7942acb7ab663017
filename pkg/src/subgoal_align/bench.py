"""Configuration-driven benchmark runner.

For every (domain, grid size, obstacle density, human count) cell the
runner builds seeded ensembles, derives the waypoint hypotheses, and
drives both query strategies against the same simulated oracle and
ground truth, so the comparison is paired per trial. Results go to CSV
or JSON; the summary reports mean +/- std query counts and the paired
reduction percentage per cell.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, fields, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .bottlenecks import build_hypothesis_set
from .envs import DOMAINS, EnsembleSpec, GridSpec, make_ensemble
from .mdp import DEFAULT_GAMMA, DEFAULT_TOLERANCE
from .querying import (
    DEFAULT_PRIOR,
    DEFAULT_QUERY_BUDGET,
    DEFAULT_QUERY_COST,
    SimulatedOracle,
    build_meta_policy,
    query_all_baseline,
    run_session,
)
from .subgoals import verify_achievement
from .subsets import AchievabilityChecker, find_maximal_achievable_subsets

STRATEGY_NAMES = ("strategic", "query_all")
CSV_HEADER = (
    "domain,width,height,density,humans,trial,strategy,queries,outcome,"
    "t_bottleneck_ms,t_subsets_ms,t_query_ms,t_total_ms"
)
ENV_PREFIX = "SUBGOAL_ALIGN_"


@dataclass(frozen=True)
class ExperimentConfig:
    """Benchmark sweep parameters; every field has a usable default."""

    domains: tuple[str, ...] = ("maze",)
    grid_sizes: tuple[tuple[int, int], ...] = ((4, 4),)
    obstacle_densities: tuple[float, ...] = (0.1,)
    human_model_counts: tuple[int, ...] = (20,)
    trials_per_config: int = 3
    query_budget: int = DEFAULT_QUERY_BUDGET
    master_seed: int = 0
    gamma: float = DEFAULT_GAMMA
    tolerance: float = DEFAULT_TOLERANCE
    strategies: tuple[str, ...] = STRATEGY_NAMES
    slip_probability: float = 0.0
    query_cost: float = DEFAULT_QUERY_COST
    prior: float = DEFAULT_PRIOR
    subgoal_inclusion_prob: float = 0.5
    verify_soundness: bool = True

    def __post_init__(self):
        if self.trials_per_config < 1:
            raise ValueError("need at least one trial per configuration")
        for domain in self.domains:
            if domain not in DOMAINS:
                raise ValueError(f"unknown domain {domain!r}")
        for strategy in self.strategies:
            if strategy not in STRATEGY_NAMES:
                raise ValueError(f"unknown strategy {strategy!r}")

    def cells(self):
        index = 0
        for domain in self.domains:
            for width, height in self.grid_sizes:
                for density in self.obstacle_densities:
                    for humans in self.human_model_counts:
                        yield index, domain, width, height, density, humans
                        index += 1


_LIST_KEYS = {
    "domains": lambda text: tuple(part.strip() for part in text.split(",") if part.strip()),
    "grid_sizes": lambda text: tuple(
        _parse_grid(part) for part in text.split(",") if part.strip()
    ),
    "obstacle_densities": lambda text: tuple(
        float(part) for part in text.split(",") if part.strip()
    ),
    "human_model_counts": lambda text: tuple(
        int(part) for part in text.split(",") if part.strip()
    ),
    "strategies": lambda text: tuple(part.strip() for part in text.split(",") if part.strip()),
}

_KEY_ALIASES = {
    "densities": "obstacle_densities",
    "humans": "human_model_counts",
    "trials": "trials_per_config",
    "budget": "query_budget",
    "seed": "master_seed",
    "slip": "slip_probability",
    "inclusion_prob": "subgoal_inclusion_prob",
}


def _parse_grid(text: str) -> tuple[int, int]:
    w, _, h = text.strip().lower().partition("x")
    return (int(w), int(h))


def _coerce(name: str, raw: str):
    if name in _LIST_KEYS:
        return _LIST_KEYS[name](raw)
    current = ExperimentConfig.__dataclass_fields__[name].default
    if isinstance(current, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw.strip()


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        name = _KEY_ALIASES.get(key, key)
        if name not in ExperimentConfig.__dataclass_fields__:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        values[name] = _coerce(name, raw)
    return values


def config_from_sources(
    path=None,
    environ: Optional[Mapping[str, str]] = None,
    overrides: Optional[dict] = None,
) -> ExperimentConfig:
    """Merge config file, environment overrides, then explicit overrides
    (highest precedence)."""
    values: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    if environ:
        for key in ExperimentConfig.__dataclass_fields__:
            raw = environ.get(ENV_PREFIX + key.upper())
            if raw is None:
                for alias, name in _KEY_ALIASES.items():
                    if name == key:
                        raw = environ.get(ENV_PREFIX + alias.upper())
                        if raw is not None:
                            break
            if raw is not None:
                values[key] = _coerce(key, raw)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


@dataclass(frozen=True)
class TrialResult:
    """One strategy's outcome on one seeded trial."""

    domain: str
    width: int
    height: int
    density: float
    humans: int
    trial: int
    strategy: str
    queries_asked: int
    outcome: str
    t_bottleneck_ms: float
    t_subsets_ms: float
    t_query_ms: float
    t_total_ms: float
    human_bottleneck_count: int
    seed: int
    sound: Optional[bool] = None

    def csv_row(self) -> list:
        return [
            self.domain,
            self.width,
            self.height,
            self.density,
            self.humans,
            self.trial,
            self.strategy,
            self.queries_asked,
            self.outcome,
            f"{self.t_bottleneck_ms:.3f}",
            f"{self.t_subsets_ms:.3f}",
            f"{self.t_query_ms:.3f}",
            f"{self.t_total_ms:.3f}",
        ]


def _trial_seed(master_seed: int, cell_index: int, trial: int) -> int:
    seq = np.random.SeedSequence([int(master_seed) & (2**63 - 1), cell_index, trial])
    return int(seq.generate_state(1, np.uint64)[0])


def _run_trial(
    config: ExperimentConfig,
    domain: str,
    width: int,
    height: int,
    density: float,
    humans: int,
    trial: int,
    seed: int,
) -> list[TrialResult]:
    base = GridSpec(
        width=width,
        height=height,
        obstacle_density=density,
        seed=seed,
        slip_probability=config.slip_probability,
        domain=domain,
        gamma=config.gamma,
    )
    ensemble = EnsembleSpec(
        base=base,
        human_count=humans,
        subgoal_inclusion_prob=config.subgoal_inclusion_prob,
    )
    t_start = time.perf_counter()
    robot, human_models, truth = make_ensemble(ensemble)
    t0 = time.perf_counter()
    hypothesis = build_hypothesis_set(human_models)
    candidates = tuple(sorted(hypothesis.candidates))
    t_bottleneck = (time.perf_counter() - t0) * 1e3
    t0 = time.perf_counter()
    checker = AchievabilityChecker(
        robot, candidates, tolerance=config.tolerance
    )
    family = find_maximal_achievable_subsets(robot, candidates, checker=checker)
    t_subsets = (time.perf_counter() - t0) * 1e3
    shared = dict(
        domain=domain,
        width=width,
        height=height,
        density=density,
        humans=humans,
        trial=trial,
        t_bottleneck_ms=t_bottleneck,
        t_subsets_ms=t_subsets,
        human_bottleneck_count=len(candidates),
        seed=seed,
    )
    results = []
    for strategy_name in config.strategies:
        t0 = time.perf_counter()
        if strategy_name == "strategic":
            strategy = build_meta_policy(
                candidates, family, query_cost=config.query_cost, prior=config.prior
            )
        else:
            strategy = query_all_baseline(candidates, family)
        oracle = SimulatedOracle(truth, budget=config.query_budget)
        outcome = run_session(strategy, oracle, robot, family)
        t_query = (time.perf_counter() - t0) * 1e3
        sound = None
        if config.verify_soundness and outcome.result == "policy_found":
            sound = verify_achievement(
                robot, outcome.policy, outcome.certified_for, required=truth
            )
        elif config.verify_soundness and outcome.result == "proven_infeasible":
            sound = not family.is_achievable(truth)
        results.append(
            TrialResult(
                strategy=strategy_name,
                queries_asked=outcome.queries_asked,
                outcome=outcome.result,
                t_query_ms=t_query,
                t_total_ms=(time.perf_counter() - t_start) * 1e3,
                sound=sound,
                **shared,
            )
        )
    return results


def run_experiment(config: ExperimentConfig) -> tuple[list[TrialResult], "Summary"]:
    """Run every cell and trial; per-trial failures are recorded as
    ``error:`` outcomes and the run continues."""
    results: list[TrialResult] = []
    for cell_index, domain, width, height, density, humans in config.cells():
        for trial in range(config.trials_per_config):
            seed = _trial_seed(config.master_seed, cell_index, trial)
            try:
                results.extend(
                    _run_trial(
                        config, domain, width, height, density, humans, trial, seed
                    )
                )
            except Exception as exc:  # noqa: BLE001 - failures become rows
                for strategy_name in config.strategies:
                    results.append(
                        TrialResult(
                            domain=domain,
                            width=width,
                            height=height,
                            density=density,
                            humans=humans,
                            trial=trial,
                            strategy=strategy_name,
                            queries_asked=0,
                            outcome=f"error:{type(exc).__name__}",
                            t_bottleneck_ms=0.0,
                            t_subsets_ms=0.0,
                            t_query_ms=0.0,
                            t_total_ms=0.0,
                            human_bottleneck_count=0,
                            seed=seed,
                        )
                    )
    return results, summarize(results)


# -- summaries ---------------------------------------------------------------


def _mean_std(values: Sequence[float]) -> tuple[float, float, bool]:
    """Sample mean and (n-1)-denominator std; single samples flag std 0."""
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0, True
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var), False


@dataclass(frozen=True)
class SummaryRow:
    domain: str
    width: int
    height: int
    strategy: str
    trials: int
    mean_queries: float
    std_queries: float
    mean_t_bottleneck_ms: float
    mean_t_subsets_ms: float
    mean_t_query_ms: float
    mean_t_total_ms: float
    single_sample: bool


@dataclass(frozen=True)
class ReductionRow:
    domain: str
    width: int
    height: int
    trials: int
    mean_reduction: float
    std_reduction: float
    single_sample: bool


@dataclass(frozen=True)
class Summary:
    rows: tuple[SummaryRow, ...]
    reductions: tuple[ReductionRow, ...]

    def to_text(self) -> str:
        out = io.StringIO()
        out.write("strategy results (mean +/- std over trials)\n")
        out.write(
            f"{'domain':<12}{'grid':<8}{'strategy':<12}{'n':>4}"
            f"{'queries':>16}{'t_total_ms':>14}\n"
        )
        for row in self.rows:
            grid = f"{row.width}x{row.height}"
            flag = "*" if row.single_sample else ""
            out.write(
                f"{row.domain:<12}{grid:<8}{row.strategy:<12}{row.trials:>4}"
                f"{row.mean_queries:>9.2f}+/-{row.std_queries:<4.2f}{flag:<1}"
                f"{row.mean_t_total_ms:>12.1f}\n"
            )
        out.write("\npaired reduction (query_all -> strategic), percent\n")
        out.write(f"{'domain':<12}{'grid':<8}{'n':>4}{'reduction':>18}\n")
        for row in self.reductions:
            grid = f"{row.width}x{row.height}"
            flag = "*" if row.single_sample else ""
            out.write(
                f"{row.domain:<12}{grid:<8}{row.trials:>4}"
                f"{row.mean_reduction:>11.1f}+/-{row.std_reduction:<5.1f}{flag}\n"
            )
        out.write("(* single sample: std reported as 0)\n")
        return out.getvalue()


def summarize(results: Sequence[TrialResult]) -> Summary:
    """Aggregate per (domain, grid size, strategy); reductions are
    computed per paired trial and then averaged. Failed trials are
    excluded from the statistics."""
    results = [r for r in results if not r.outcome.startswith("error:")]
    if not results:
        raise ValueError("no results to summarize")
    groups: dict[tuple, list[TrialResult]] = {}
    for r in results:
        groups.setdefault((r.domain, r.width, r.height, r.strategy), []).append(r)
    rows = []
    for (domain, width, height, strategy), bucket in sorted(groups.items()):
        mean_q, std_q, single = _mean_std([r.queries_asked for r in bucket])
        rows.append(
            SummaryRow(
                domain=domain,
                width=width,
                height=height,
                strategy=strategy,
                trials=len(bucket),
                mean_queries=mean_q,
                std_queries=std_q,
                mean_t_bottleneck_ms=_mean_std([r.t_bottleneck_ms for r in bucket])[0],
                mean_t_subsets_ms=_mean_std([r.t_subsets_ms for r in bucket])[0],
                mean_t_query_ms=_mean_std([r.t_query_ms for r in bucket])[0],
                mean_t_total_ms=_mean_std([r.t_total_ms for r in bucket])[0],
                single_sample=single,
            )
        )
    by_trial: dict[tuple, dict[str, TrialResult]] = {}
    for r in results:
        key = (r.domain, r.width, r.height, r.density, r.humans, r.trial)
        by_trial.setdefault(key, {})[r.strategy] = r
    reduction_groups: dict[tuple, list[float]] = {}
    for key, pair in by_trial.items():
        if "strategic" not in pair or "query_all" not in pair:
            continue
        qa = pair["query_all"].queries_asked
        st = pair["strategic"].queries_asked
        reduction = 0.0 if qa == 0 else (qa - st) / qa * 100.0
        reduction_groups.setdefault(key[:3], []).append(reduction)
    reductions = []
    for (domain, width, height), values in sorted(reduction_groups.items()):
        mean_r, std_r, single = _mean_std(values)
        reductions.append(
            ReductionRow(
                domain=domain,
                width=width,
                height=height,
                trials=len(values),
                mean_reduction=mean_r,
                std_reduction=std_r,
                single_sample=single,
            )
        )
    return Summary(rows=tuple(rows), reductions=tuple(reductions))


# -- output ------------------------------------------------------------------


def write_csv(results: Sequence[TrialResult], stream) -> None:
    writer = csv.writer(stream)
    writer.writerow(CSV_HEADER.split(","))
    for r in results:
        writer.writerow(r.csv_row())


def results_to_json(results: Sequence[TrialResult], summary: Summary) -> dict:
    return {
        "results": [
            {f.name: getattr(r, f.name) for f in fields(TrialResult)} for r in results
        ],
        "summary": {
            "rows": [{f.name: getattr(r, f.name) for f in fields(SummaryRow)} for r in summary.rows],
            "reductions": [
                {f.name: getattr(r, f.name) for f in fields(ReductionRow)}
                for r in summary.reductions
            ],
        },
    }


def write_results(results, summary, path, fmt: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "csv":
            write_csv(results, fh)
        elif fmt == "json":
            json.dump(results_to_json(results, summary), fh, indent=2)
            fh.write("\n")
        else:
            raise ValueError(f"unknown output format {fmt!r}")

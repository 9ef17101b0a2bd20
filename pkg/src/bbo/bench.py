"""Built-in benchmark problems and a rank-based comparison runner.

CONSTR is the standard constrained bi-objective test problem; Branin and
Ackley are classic single-objective surfaces. ``run_benchmark`` scores each
(problem, seed, strategy) cell by the final incumbent (single objective) or
the hypervolume difference from the problem's optimum (multi-objective) and
aggregates competition ranks with ties averaged.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from . import moo
from .advisor import TaskSpec
from .errors import SetupError
from .optimizer import run
from .space import Configuration, ParameterSpec, SearchSpace

CONSTR_REF_POINT = (10.0, 10.0)
CONSTR_GRID = 2000

STRATEGIES = ("auto", "gp", "prf", "ea", "random")


@dataclass(frozen=True)
class BenchmarkProblem:
    name: str
    space: SearchSpace
    num_objectives: int
    num_constraints: int
    evaluate: Callable[[Configuration], tuple[list, list]]
    known_optimum: Optional[float] = None  # single-objective problems
    ref_point: Optional[tuple] = None  # multi-objective problems
    optimal_hv: Optional[Callable[[], float]] = None  # lazy, cached provider


# --- CONSTR: minimize (x1, (1+x2)/x1) s.t. x2 + 9 x1 >= 6 and 9 x1 - x2 >= 1 ---


def constr_evaluate(config: Configuration) -> tuple[list, list]:
    x1 = float(config["x1"])
    x2 = float(config["x2"])
    f1 = x1
    f2 = (1.0 + x2) / x1
    c1 = 6.0 - (x2 + 9.0 * x1)  # feasible iff <= 0
    c2 = 1.0 - (9.0 * x1 - x2)
    return [f1, f2], [c1, c2]


def _constr_space() -> SearchSpace:
    return SearchSpace(
        [
            ParameterSpec("x1", "float", low=0.1, high=1.0),
            ParameterSpec("x2", "float", low=0.0, high=5.0),
        ]
    )


@functools.lru_cache(maxsize=4)
def compute_constr_reference(grid: int = CONSTR_GRID) -> tuple[tuple, float]:
    """Reference point and optimal hypervolume for CONSTR.

    The optimum is computed once by dense evaluation: the non-dominated
    feasible set over a grid x grid sweep of the input box, measured against
    the fixed reference point (10, 10).
    """
    x1 = np.linspace(0.1, 1.0, grid)
    x2 = np.linspace(0.0, 5.0, grid)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    X1 = X1.ravel()
    X2 = X2.ravel()
    feasible = (6.0 - (X2 + 9.0 * X1) <= 0) & (1.0 - (9.0 * X1 - X2) <= 0)
    f1 = X1[feasible]
    f2 = (1.0 + X2[feasible]) / f1
    front = _pareto_2d(f1, f2)
    hv = moo.hypervolume(front, CONSTR_REF_POINT)
    return CONSTR_REF_POINT, float(hv)


def _pareto_2d(f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
    """Non-dominated subset of 2-D points via sort + running minimum."""
    order = np.lexsort((f2, f1))
    f1s, f2s = f1[order], f2[order]
    prev_best = np.concatenate([[np.inf], np.minimum.accumulate(f2s)[:-1]])
    keep = f2s < prev_best
    return np.column_stack([f1s[keep], f2s[keep]])


def constr_problem() -> BenchmarkProblem:
    return BenchmarkProblem(
        name="constr",
        space=_constr_space(),
        num_objectives=2,
        num_constraints=2,
        evaluate=constr_evaluate,
        ref_point=CONSTR_REF_POINT,
        optimal_hv=lambda: compute_constr_reference()[1],
    )


# --- Branin ---

_BRANIN_B = 5.1 / (4.0 * math.pi**2)
_BRANIN_C = 5.0 / math.pi
_BRANIN_S = 10.0
_BRANIN_T = 1.0 / (8.0 * math.pi)
BRANIN_OPTIMUM = 0.39788735772973816


def branin_evaluate(config: Configuration) -> tuple[list, list]:
    x1 = float(config["x1"])
    x2 = float(config["x2"])
    value = (
        (x2 - _BRANIN_B * x1**2 + _BRANIN_C * x1 - 6.0) ** 2
        + _BRANIN_S * (1.0 - _BRANIN_T) * math.cos(x1)
        + _BRANIN_S
    )
    return [value], []


def branin_problem() -> BenchmarkProblem:
    space = SearchSpace(
        [
            ParameterSpec("x1", "float", low=-5.0, high=10.0),
            ParameterSpec("x2", "float", low=0.0, high=15.0),
        ]
    )
    return BenchmarkProblem(
        name="branin",
        space=space,
        num_objectives=1,
        num_constraints=0,
        evaluate=branin_evaluate,
        known_optimum=BRANIN_OPTIMUM,
    )


# --- Ackley ---


def ackley_evaluate(config: Configuration) -> tuple[list, list]:
    x = np.array([config["x1"], config["x2"]], dtype=float)
    value = (
        -20.0 * math.exp(-0.2 * math.sqrt(float(np.mean(x**2))))
        - math.exp(float(np.mean(np.cos(2.0 * math.pi * x))))
        + 20.0
        + math.e
    )
    return [value], []


def ackley_problem() -> BenchmarkProblem:
    space = SearchSpace(
        [
            ParameterSpec("x1", "float", low=-5.0, high=5.0),
            ParameterSpec("x2", "float", low=-5.0, high=5.0),
        ]
    )
    return BenchmarkProblem(
        name="ackley",
        space=space,
        num_objectives=1,
        num_constraints=0,
        evaluate=ackley_evaluate,
        known_optimum=0.0,
    )


_PROBLEM_FACTORIES = {
    "constr": constr_problem,
    "branin": branin_problem,
    "ackley": ackley_problem,
}


def get_problem(name: str) -> BenchmarkProblem:
    try:
        return _PROBLEM_FACTORIES[name]()
    except KeyError:
        raise SetupError(
            f"unknown problem {name!r}; valid problems: {sorted(_PROBLEM_FACTORIES)}"
        ) from None


# --- rank-table runner ---


@dataclass
class BenchmarkResult:
    rows: list[dict]  # problem, seed, strategy, score, rank
    median_ranks: dict[str, float]
    wins: dict[str, dict[str, int]]  # strategy -> problem -> win count


def _score_run(problem: BenchmarkProblem, result) -> float:
    if problem.num_objectives == 1:
        if result.incumbent is None:
            return math.inf
        return float(result.incumbent.objectives[0])
    front = [o.objectives for o in result.pareto_front]
    optimal = problem.optimal_hv() if problem.optimal_hv is not None else 0.0
    return moo.hypervolume_difference(front, problem.ref_point, optimal)


def run_benchmark(
    problems: Sequence,
    strategies: Sequence[str],
    n_seeds: int = 10,
    budget: int = 100,
) -> BenchmarkResult:
    """Run every (problem, seed, strategy) cell and rank strategies per cell.

    Scores are final incumbents (single objective) or hypervolume
    differences (multi-objective); competition ranks share the average on
    ties. Fully seeded, so identical inputs reproduce identical tables.
    """
    if len(strategies) < 2:
        raise SetupError("run_benchmark needs at least 2 strategies")
    for s in strategies:
        if s not in STRATEGIES:
            raise SetupError(f"unknown strategy {s!r}; valid strategies: {list(STRATEGIES)}")
    resolved = [get_problem(p) if isinstance(p, str) else p for p in problems]

    rows: list[dict] = []
    for problem in resolved:
        for seed in range(n_seeds):
            scores = []
            for strategy in strategies:
                task = TaskSpec(
                    space=problem.space,
                    num_objectives=problem.num_objectives,
                    num_constraints=problem.num_constraints,
                    max_runs=budget,
                    algorithm=strategy,
                    ref_point=problem.ref_point,
                    seed=seed,
                    task_id=f"{problem.name}-{strategy}-seed{seed}",
                )
                result = run(task, problem.evaluate)
                scores.append(_score_run(problem, result))
            ranks = rankdata(scores, method="average")
            for strategy, score, rank in zip(strategies, scores, ranks):
                rows.append(
                    {
                        "problem": problem.name,
                        "seed": seed,
                        "strategy": strategy,
                        "score": score,
                        "rank": float(rank),
                    }
                )

    median_ranks = {
        s: float(np.median([r["rank"] for r in rows if r["strategy"] == s]))
        for s in strategies
    }
    wins: dict[str, dict[str, int]] = {s: {} for s in strategies}
    for problem in resolved:
        cell_rows = [r for r in rows if r["problem"] == problem.name]
        for seed in range(n_seeds):
            cell = [r for r in cell_rows if r["seed"] == seed]
            best = min(r["rank"] for r in cell)
            for r in cell:
                if r["rank"] == best:
                    wins[r["strategy"]][problem.name] = (
                        wins[r["strategy"]].get(problem.name, 0) + 1
                    )
    return BenchmarkResult(rows=rows, median_ranks=median_ranks, wins=wins)


def rank_table_csv(result: BenchmarkResult) -> str:
    """CSV rendering (problem,seed,strategy,score,rank), stable byte-for-byte."""
    lines = ["problem,seed,strategy,score,rank"]
    for r in result.rows:
        lines.append(
            f"{r['problem']},{r['seed']},{r['strategy']},{r['score']!r},{r['rank']!r}"
        )
    return "\n".join(lines) + "\n"

"""Direct search over meta/categorical neighborhoods with standard subproblems.

The outer loop alternates an optional global search (uniform seeded draws of
meta and categorical components) with a poll over the user-defined
neighborhoods.  Every candidate pair of fixed components is resolved by a
coordinate pattern search over the acting standard variables under the
extreme barrier: infeasible or failed points count as +inf.  Acceptance is
strict decrease only.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np

from .blackbox import EvaluationRecord, Evaluator, Problem, barrier_value
from .domain import ContinuousScope, Domain, MetaComponent, Point
from .errors import (BudgetExhaustedError, ConfigurationError, EvaluationError,
                     NotEnumerableError)
from .neighborhoods import (carried_categorical, categorical_neighbors,
                            default_meta_mapping, meta_neighbors, realize_neighbor)

INITIAL_FRACTION = 0.25
REFINE_FACTOR = 0.5
MIN_FRACTION = 1e-6


@dataclass
class MeshState:
    """Per-variable step sizes for the standard subproblem.

    Continuous steps are fractions of the scope width; integer steps are
    absolute and never drop below 1.
    """

    continuous: dict
    integer: dict

    @classmethod
    def initial(cls, domain: Domain, var_ids) -> "MeshState":
        continuous, integer = {}, {}
        for vid in var_ids:
            scope = domain.spec(vid).scope
            if isinstance(scope, ContinuousScope):
                continuous[vid] = INITIAL_FRACTION
            else:
                integer[vid] = max(1, scope.width // 4)
        return cls(continuous, integer)

    def refine(self):
        for vid, fraction in self.continuous.items():
            self.continuous[vid] = max(MIN_FRACTION, fraction * REFINE_FACTOR)
        for vid, step in self.integer.items():
            self.integer[vid] = max(1, step // 2)

    def at_minimum(self) -> bool:
        return (all(f <= MIN_FRACTION * (1 + 1e-9) for f in self.continuous.values())
                and all(s == 1 for s in self.integer.values()))


@dataclass
class SearchConfig:
    budget: int = 100
    subproblem_budget: int = 50
    max_iterations: int = 1000
    seed: int = 0
    opportunistic: bool = True
    global_search: str = "random"  # "random" | "none"

    def __post_init__(self):
        if self.budget < 1 or self.subproblem_budget < 1 or self.max_iterations < 1:
            raise ConfigurationError("budgets and iteration limits must be positive")
        if self.global_search not in ("random", "none"):
            raise ConfigurationError(f"unknown global search strategy {self.global_search!r}")


@dataclass
class SubproblemResult:
    point: Point
    record: EvaluationRecord | None
    barrier: float
    evaluations: int
    reason: str          # "min_mesh" | "subproblem_budget" | "global_budget" | "start_only"
    truncated: bool      # the overall budget ran out mid-solve
    mesh: MeshState | None = None


@dataclass
class IterationStats:
    iteration: int
    evaluations_used: int
    incumbent: float     # barrier value of the incumbent
    improved: bool


@dataclass
class DirectSearchResult:
    best: EvaluationRecord
    history: list
    iterations: list
    stop_reason: str
    evaluator: Evaluator


def _evaluate_barrier(evaluator: Evaluator, point: Point):
    """Evaluate under the extreme barrier; failed runs yield +inf."""
    try:
        record = evaluator.evaluate(point)
    except EvaluationError:
        return evaluator.history[-1], math.inf
    return record, barrier_value(record)


def solve_standard_subproblem(evaluator: Evaluator, tm: MetaComponent, tq: dict,
                              start: dict, cfg: SearchConfig,
                              mesh: MeshState | None = None) -> SubproblemResult:
    """Coordinate pattern search over the acting standard variables.

    Meta and categorical components stay fixed.  Each sweep polls +/- one
    step along every coordinate, recentering on the first strict improvement;
    a fully failed poll refines the mesh.  Stops at the per-subproblem budget
    or once a poll fails with every step at its minimum.  Passing a mesh
    resumes refinement where a previous solve left off.
    """
    domain = evaluator.problem.domain
    ids = domain.acting_index_set(tm, "standard")
    if mesh is None:
        mesh = MeshState.initial(domain, ids)
    evaluations = 0

    def step_candidate(current, vid, sign):
        scope = domain.spec(vid).scope
        if isinstance(scope, ContinuousScope):
            return scope.clamp(current[vid] + sign * mesh.continuous[vid] * scope.width)
        return scope.clamp(current[vid] + sign * mesh.integer[vid])

    start_point = Point(tm, tq, start)
    try:
        best_record, best_barrier = _evaluate_barrier(evaluator, start_point)
        evaluations += 1
    except BudgetExhaustedError:
        return SubproblemResult(start_point, None, math.inf, 0, "global_budget",
                                True, mesh)
    best_point = start_point

    if not ids:
        return SubproblemResult(best_point, best_record, best_barrier, evaluations,
                                "start_only", False, mesh)
    while True:
        improved = False
        for vid in ids:
            for sign in (1, -1):
                if evaluations >= cfg.subproblem_budget:
                    return SubproblemResult(best_point, best_record, best_barrier,
                                            evaluations, "subproblem_budget", False,
                                            mesh)
                value = step_candidate(best_point.standard, vid, sign)
                if value == best_point.standard[vid]:
                    continue
                candidate = Point(tm, tq, {**best_point.standard, vid: value})
                try:
                    record, barrier = _evaluate_barrier(evaluator, candidate)
                    evaluations += 1
                except BudgetExhaustedError:
                    return SubproblemResult(best_point, best_record, best_barrier,
                                            evaluations, "global_budget", True, mesh)
                if barrier < best_barrier:
                    best_point, best_record, best_barrier = candidate, record, barrier
                    improved = True
                    break
            if improved:
                break
        if improved:
            continue
        if mesh.at_minimum():
            return SubproblemResult(best_point, best_record, best_barrier,
                                    evaluations, "min_mesh", False, mesh)
        mesh.refine()


def global_search_step(domain: Domain, rng: np.random.Generator, metas=None):
    """Uniform seeded draw of a meta component and a categorical component."""
    if metas is None:
        try:
            metas = domain.enumerate_meta_set()
        except NotEnumerableError as exc:
            raise ConfigurationError(
                "the random global search needs an enumerable meta set") from exc
    tm = metas[int(rng.integers(len(metas)))]
    tq = {vid: int(rng.integers(1, domain.spec(vid).scope.size + 1))
          for vid in domain.acting_index_set(tm, "categorical")}
    return tm, tq


def run_direct_search(problem: Problem, cfg: SearchConfig, meta_mapping=None,
                      categorical_mapping=None, progress=True) -> DirectSearchResult:
    """Global search + poll on user-defined neighborhoods (strict decrease).

    The first incumbent is the completed point of the first enumerated meta
    component.  With the opportunistic flag the poll stops at the first
    improving neighbor; otherwise all neighbors are evaluated and the best
    improving one is accepted.  Stops on budget, iteration limit, or a fully
    failed poll with the incumbent's own subproblem at the minimum mesh.
    """
    domain = problem.domain
    if meta_mapping is None:
        meta_mapping = default_meta_mapping(domain)
    try:
        metas = domain.enumerate_meta_set()
    except NotEnumerableError as exc:
        raise ConfigurationError("direct search needs an enumerable meta set") from exc
    evaluator = Evaluator(problem, cfg.budget)
    rng = np.random.default_rng(cfg.seed)

    start = domain.complete_point(metas[0], {})
    record, barrier = _evaluate_barrier(evaluator, start)
    incumbent_point, incumbent_record, incumbent = start, record, barrier

    def solve(tm, tq, warm_standard):
        return solve_standard_subproblem(evaluator, tm, tq, warm_standard, cfg)

    def accept(result):
        nonlocal incumbent_point, incumbent_record, incumbent
        incumbent_point, incumbent_record, incumbent = (
            result.point, result.record, result.barrier)

    iterations = []
    stop_reason = "max_iterations"
    # The incumbent's own refinement resumes its mesh across iterations so a
    # small per-subproblem budget still reaches the minimum mesh eventually.
    refine_mesh: MeshState | None = None
    refine_key: Point | None = None
    for k in range(1, cfg.max_iterations + 1):
        if evaluator.budget.remaining <= 0:
            stop_reason = "budget"
            break
        improved = False
        truncated = False
        converged = False

        if cfg.global_search == "random":
            tm, tq = global_search_step(domain, rng, metas)
            warm = realize_neighbor(domain, incumbent_point, tm, tq)
            result = solve(tm, tq, warm.standard)
            truncated |= result.truncated
            if result.barrier < incumbent:
                accept(result)
                improved = True

        if not improved and not truncated:
            polled = []
            for tm in meta_neighbors(domain, meta_mapping, incumbent_point):
                tqs = categorical_neighbors(domain, categorical_mapping,
                                            incumbent_point, tm)
                if not tqs:
                    # No categorical neighbors under tm: poll the carried
                    # categorical component so pure meta moves are still tried.
                    tqs = [carried_categorical(domain, incumbent_point, tm)]
                for tq in tqs:
                    warm = realize_neighbor(domain, incumbent_point, tm, tq)
                    result = solve(tm, tq, warm.standard)
                    truncated |= result.truncated
                    if cfg.opportunistic:
                        if result.barrier < incumbent:
                            accept(result)
                            improved = True
                            break
                    else:
                        polled.append(result)
                    if truncated:
                        break
                if improved or truncated:
                    break
            if not cfg.opportunistic and polled:
                best = min(polled, key=lambda r: r.barrier)
                if best.barrier < incumbent:
                    accept(best)
                    improved = True

        if not improved and not truncated:
            # Refine the incumbent's own subproblem; a failed poll with the
            # incumbent already at the minimum mesh means convergence.
            if refine_key != incumbent_point:
                refine_mesh, refine_key = None, incumbent_point
            result = solve_standard_subproblem(
                evaluator, incumbent_point.meta, incumbent_point.categorical,
                incumbent_point.standard, cfg, mesh=refine_mesh)
            truncated |= result.truncated
            if result.barrier < incumbent:
                accept(result)
                improved = True
                refine_mesh, refine_key = result.mesh, incumbent_point
            else:
                refine_mesh = result.mesh
                if result.reason in ("min_mesh", "start_only"):
                    converged = True

        iterations.append(IterationStats(k, evaluator.budget.used, incumbent, improved))
        if progress:
            print(f"iteration {k} evaluations {evaluator.budget.used} "
                  f"incumbent {incumbent:.6g}", file=sys.stderr)
        if truncated:
            stop_reason = "budget"
            break
        if converged:
            stop_reason = "converged"
            break

    return DirectSearchResult(best=incumbent_record, history=evaluator.history,
                              iterations=iterations, stop_reason=stop_reason,
                              evaluator=evaluator)

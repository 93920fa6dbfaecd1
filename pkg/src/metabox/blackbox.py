"""Evaluation runtime: caching, budget accounting, history and subprocess blackboxes.

A Problem bundles a domain, a constraint system and one evaluation backend
(an in-process callable or an external command).  An Evaluator wraps a
Problem with a budget, a result cache keyed by canonical point strings, and
an append-only history.  Cached hits append to the history but never spend
budget.
"""

from __future__ import annotations

import json
import math
import os
import subprocess
import threading
import time
from dataclasses import dataclass

from .constraints import ConstraintSystem
from .domain import Domain, GROUPS, Point
from .errors import (BudgetExhaustedError, DomainError, EvaluationError)

TIMEOUT_ENV_VAR = "METABOX_BLACKBOX_TIMEOUT"
DEFAULT_TIMEOUT = 60.0


def render_value(value) -> str:
    """Canonical text form of a variable value (17 significant digits for reals)."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def cache_key(point: Point) -> str:
    """Canonical string identity of a point.

    Meta ids sorted lexicographically with their values, then acting variable
    ids sorted with theirs; nonacting variables never appear.
    """
    meta = ";".join(f"{k}={render_value(v)}" for k, v in sorted(point.meta.items()))
    acting = {**point.categorical, **point.standard}
    rest = ";".join(f"{k}={render_value(v)}" for k, v in sorted(acting.items()))
    return f"{meta}|{rest}"


@dataclass
class EvaluationRecord:
    point: Point
    objective: float
    constraints: dict
    feasible: bool
    index: int
    cached: bool
    wall_ms: float
    error: str | None = None


@dataclass
class BudgetState:
    max_evaluations: int
    used: int = 0

    @property
    def remaining(self) -> int:
        return self.max_evaluations - self.used


def barrier_value(record: EvaluationRecord) -> float:
    """Extreme-barrier objective: +inf for infeasible or failed evaluations."""
    if record.error is not None or not record.feasible:
        return math.inf
    return record.objective


@dataclass(frozen=True)
class Problem:
    """Immutable problem description: domain, constraints and a backend.

    ``objective`` is a callable ``point -> (objective, blackbox_constraint_values)``
    for in-process problems; ``command`` launches one external process per
    evaluation using the JSON line protocol described in the README.
    """

    domain: Domain
    constraints: ConstraintSystem
    objective: object = None
    command: tuple = ()
    timeout: float = DEFAULT_TIMEOUT
    name: str = ""

    def __post_init__(self):
        if (self.objective is None) == (not self.command):
            raise ValueError("exactly one of objective/command must be provided")
        object.__setattr__(self, "command", tuple(self.command))


def subprocess_payload(domain: Domain, point: Point) -> dict:
    """JSON object written to an external blackbox (labels at the boundary)."""
    categorical = {vid: domain.spec(vid).scope.label(idx)
                   for vid, idx in point.categorical.items()}
    return {"meta": dict(point.meta), "categorical": categorical,
            "standard": dict(point.standard)}


class Evaluator:
    """Stateful evaluation session: budget + cache + history as one synchronized unit.

    Concurrent evaluate() calls are permitted; the budget check and increment
    are atomic and duplicate in-flight keys coalesce onto one backend call.
    """

    def __init__(self, problem: Problem, max_evaluations: int, timeout: float | None = None):
        self.problem = problem
        self.budget = BudgetState(int(max_evaluations))
        self.history: list[EvaluationRecord] = []
        self._cache: dict[str, EvaluationRecord] = {}
        self._inflight: dict[str, threading.Event] = {}
        self._lock = threading.Lock()
        env = os.environ.get(TIMEOUT_ENV_VAR)
        self.timeout = timeout if timeout is not None else (
            float(env) if env else problem.timeout)

    # -- public API -------------------------------------------------------------

    @property
    def evaluated_keys(self):
        with self._lock:
            return set(self._cache)

    def is_evaluated(self, point: Point) -> bool:
        with self._lock:
            return cache_key(point) in self._cache

    def evaluate(self, point: Point) -> EvaluationRecord:
        issues = self.problem.domain.membership_issues(point)
        if issues:
            raise DomainError(
                f"point outside domain: {'; '.join(map(str, issues))}", issues)
        key = cache_key(point)
        while True:
            with self._lock:
                hit = self._cache.get(key)
                if hit is not None:
                    record = EvaluationRecord(
                        point=point, objective=hit.objective,
                        constraints=dict(hit.constraints), feasible=hit.feasible,
                        index=len(self.history), cached=True, wall_ms=0.0)
                    self.history.append(record)
                    return record
                waiter = self._inflight.get(key)
                if waiter is None:
                    if self.budget.used >= self.budget.max_evaluations:
                        raise BudgetExhaustedError(
                            f"budget of {self.budget.max_evaluations} evaluations exhausted")
                    self.budget.used += 1
                    event = threading.Event()
                    self._inflight[key] = event
                    break
            waiter.wait()
        try:
            record = self._run_backend(point)
        except EvaluationError as exc:
            with self._lock:
                failed = EvaluationRecord(
                    point=point, objective=math.inf, constraints={}, feasible=False,
                    index=len(self.history), cached=False, wall_ms=0.0, error=str(exc))
                self.history.append(failed)
                del self._inflight[key]
            event.set()
            raise
        with self._lock:
            record.index = len(self.history)
            self.history.append(record)
            self._cache[key] = record
            del self._inflight[key]
        event.set()
        return record

    # -- backend dispatch ----------------------------------------------------------

    def _run_backend(self, point: Point) -> EvaluationRecord:
        start = time.perf_counter()
        if self.problem.objective is not None:
            try:
                objective, blackbox_values = self.problem.objective(point)
            except EvaluationError:
                raise
            except Exception as exc:  # backend bugs surface as evaluation errors
                raise EvaluationError(f"builtin backend failed: {exc}") from exc
        else:
            objective, blackbox_values = self._run_subprocess(point)
        constraints = {}
        system = self.problem.constraints
        for spec in system.acting_constraints(point.meta):
            if spec.analytic:
                constraints[spec.id] = system.evaluate_analytic(spec, point)
            else:
                if spec.id not in blackbox_values:
                    raise EvaluationError(
                        f"backend returned no value for acting constraint {spec.id!r}")
                constraints[spec.id] = float(blackbox_values[spec.id])
        feasible = system.is_feasible(point, constraints)
        wall_ms = (time.perf_counter() - start) * 1e3
        return EvaluationRecord(point=point, objective=float(objective),
                                constraints=constraints, feasible=feasible,
                                index=-1, cached=False, wall_ms=wall_ms)

    def _run_subprocess(self, point: Point):
        payload = json.dumps(subprocess_payload(self.problem.domain, point))
        try:
            proc = subprocess.run(
                list(self.problem.command), input=payload.encode(),
                capture_output=True, timeout=self.timeout)
        except subprocess.TimeoutExpired:
            raise EvaluationError(
                f"blackbox timed out after {self.timeout} s") from None
        except OSError as exc:
            raise EvaluationError(f"blackbox could not be launched: {exc}") from exc
        if proc.returncode != 0:
            raise EvaluationError(
                f"blackbox exited with code {proc.returncode}: "
                f"{proc.stderr.decode(errors='replace')[:500]}")
        try:
            output = json.loads(proc.stdout.decode())
            objective = float(output["objective"])
            constraint_values = {str(k): float(v)
                                 for k, v in output.get("constraints", {}).items()}
        except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise EvaluationError(f"blackbox output malformed: {exc}") from exc
        return objective, constraint_values


# ---------------------------------------------------------------------------
# History file
# ---------------------------------------------------------------------------

def history_header(domain: Domain, system: ConstraintSystem) -> list[str]:
    return (["eval_index", "cached", "feasible", "objective"]
            + [v.id for v in domain.variables]
            + [c.id for c in system.constraints])


def _cell(domain: Domain, vid: str, record: EvaluationRecord) -> str:
    spec = domain.spec(vid)
    point = record.point
    if spec.type.is_meta:
        return render_value(point.meta[vid])
    if spec.type in GROUPS["categorical"]:
        if vid not in point.categorical:
            return ""
        return render_value(spec.scope.label(point.categorical[vid]))
    if vid not in point.standard:
        return ""
    return render_value(point.standard[vid])


def write_history(domain: Domain, system: ConstraintSystem, records, path):
    """Write evaluation records as CSV; nonacting cells are empty.

    Deterministic column order: variables then constraints, declaration order.
    """
    lines = [",".join(history_header(domain, system))]
    for record in records:
        row = [str(record.index),
               "true" if record.cached else "false",
               "true" if record.feasible else "false",
               render_value(record.objective)]
        row += [_cell(domain, v.id, record) for v in domain.variables]
        row += [render_value(record.constraints[c.id]) if c.id in record.constraints else ""
                for c in system.constraints]
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

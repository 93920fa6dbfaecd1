"""Bayesian optimization: expected improvement over the mixed GP surrogate.

Each iteration maximizes expected improvement over the auxiliary domain
(meta component enumerated, categorical components enumerated or sampled,
standard variables searched by a pattern search on the acquisition), subject
to surrogate constraint means being nonpositive, then evaluates the chosen
point on the true problem.  Previously evaluated points are excluded, so on
fully finite domains the loop sweeps the whole space.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .blackbox import (EvaluationRecord, Evaluator, Problem, barrier_value, cache_key)
from .domain import (ContinuousScope, Domain, MetaComponent, Point, denormalize,
                     enumerate_domain_points)
from .encoders import Encoder
from .errors import (BudgetExhaustedError, ConfigurationError, EvaluationError,
                     FittingError, NotEnumerableError)
from .gp import GPModel, KernelConfig, fit_hyperparameters, merge_kernel_overrides

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def expected_improvement(mean, sigma, f_star):
    """(f* - mean) Phi(z) + sigma phi(z) with z = (f* - mean) / sigma.

    At sigma = 0 this is the pointwise limit max(f* - mean, 0).  Accepts
    scalars or arrays.
    """
    mean_arr = np.asarray(mean, dtype=float)
    sigma_arr = np.asarray(sigma, dtype=float)
    improvement = f_star - mean_arr
    positive = sigma_arr > 0
    safe_sigma = np.where(positive, sigma_arr, 1.0)
    z = improvement / safe_sigma
    smooth = improvement * ndtr(z) + sigma_arr * np.exp(-0.5 * z * z) / _SQRT_2PI
    out = np.where(positive, smooth, np.maximum(improvement, 0.0))
    if np.ndim(mean) == 0 and np.ndim(sigma) == 0:
        return float(out)
    return out


@dataclass
class BOConfig:
    budget: int = 100
    seed: int = 0
    max_iterations: int = 100000
    categorical_mode: str = "matrix"   # kernel mode; "encoded" pairs with the encoder
    encoder_kind: str = "identity"
    acq_starts: int = 5
    acq_budget: int = 48               # acquisition evaluations per inner search
    categorical_cap: int = 256         # full enumeration of X^q(xm) up to this size
    enumeration_cap: int = 4096        # finite-domain full enumeration path
    refit_full_until: int = 50         # refit every iteration up to this many samples
    refit_every: int = 5               # afterwards refit every this many new samples
    fit_sweeps: int = 8
    kernel: dict | None = None         # serialized KernelConfig overriding the defaults

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigurationError("budget must be positive")


@dataclass
class AuxiliaryCandidate:
    """Maximizer of the acquisition over the auxiliary domain."""

    meta: MetaComponent
    encoded: np.ndarray
    categorical: dict
    standard: dict
    acquisition: float
    constraint_means: dict
    surrogate_feasible: bool

    def point(self) -> Point:
        return Point(self.meta, self.categorical, self.standard)


@dataclass
class AcquisitionLogRow:
    iteration: int
    meta: MetaComponent
    acquisition: float
    surrogate_feasible: bool


@dataclass
class BOResult:
    best: EvaluationRecord | None
    history: list
    acquisition_log: list
    evaluator: Evaluator
    stop_reason: str


# ---------------------------------------------------------------------------
# Acquisition maximization
# ---------------------------------------------------------------------------

class _Best:
    """Strictly-improving tracker; ties keep the earlier candidate.

    Candidates are materialized lazily so losing offers cost nothing.
    """

    def __init__(self):
        self.value = -math.inf
        self._make = None

    def offer(self, value, make_candidate):
        if value > self.value:
            self.value = value
            self._make = make_candidate

    def materialize(self):
        return self._make() if self._make is not None else None


def _offer_batch(points, ei, system, constraint_models, xm, encoder, evaluated,
                 best_feasible, best_any, features=None):
    """Feed a batch of candidates to the trackers.

    Surrogate constraint means are computed lazily: walking the batch in
    stable descending-EI order, the first surrogate-feasible candidate is the
    batch's best feasible one, and candidates below the current best need no
    constraint check at all.
    """
    acting = [c.id for c in system.acting_constraints(xm)]

    def point_means(index):
        means = {}
        single = None
        for cid in acting:
            model = constraint_models.get(cid)
            if model is None:
                means[cid] = 0.0
                continue
            if single is None:
                single = model.features([points[index]])
            means[cid] = float(model.mean_batch(single)[0])
        return means

    def make(index, means, feasible):
        point = points[index]
        return AuxiliaryCandidate(
            meta=point.meta, encoded=encoder.encode(point.categorical, point.meta),
            categorical=dict(point.categorical), standard=dict(point.standard),
            acquisition=float(ei[index]), constraint_means=means,
            surrogate_feasible=feasible)

    def make_checked(index):
        means = point_means(index)
        return make(index, means, all(v <= 0.0 for v in means.values()))

    fresh = [i for i in range(len(points)) if cache_key(points[i]) not in evaluated]
    for i in fresh:
        best_any.offer(float(ei[i]), lambda i=i: make_checked(i))
    for i in sorted(fresh, key=lambda i: -ei[i]):
        if ei[i] <= best_feasible.value:
            break
        means = point_means(i)
        if all(v <= 0.0 for v in means.values()):
            best_feasible.offer(float(ei[i]), lambda i=i, means=means: make(i, means, True))
            break


def _enumerate_categorical(domain: Domain, xm, cap: int, rng):
    """All categorical components under xm, or uniform samples past the cap."""
    ids = domain.acting_index_set(xm, "categorical")
    sizes = [domain.spec(v).scope.size for v in ids]
    total = 1
    for s in sizes:
        total *= s
    if total <= cap:
        components = []
        for flat in range(total):
            rem, combo = flat, {}
            for vid, size in zip(reversed(ids), reversed(sizes)):
                combo[vid] = rem % size + 1
                rem //= size
            components.append(combo)
        return components
    draws = []
    for _ in range(cap):
        draws.append({vid: int(rng.integers(1, size + 1))
                      for vid, size in zip(ids, sizes)})
    return draws


def _acquisition_pattern_search(model, system, constraint_models, encoder, xm, xq,
                                start_standard, f_star, evaluated, cfg,
                                best_feasible, best_any):
    """Pattern search maximizing EI over the standard variables of one combo."""
    domain = model.domain
    ids = domain.acting_index_set(xm, "standard")

    def batch_ei(points):
        features = model.features(points)
        mean, var = model.predict_batch(features)
        return np.atleast_1d(expected_improvement(mean, np.sqrt(var), f_star)), features

    if not ids:
        point = Point(xm, xq, {})
        ei, features = batch_ei([point])
        _offer_batch([point], ei, system, constraint_models, xm, encoder, evaluated,
                     best_feasible, best_any, features)
        return
    fractions = {vid: 0.25 for vid in ids
                 if isinstance(domain.spec(vid).scope, ContinuousScope)}
    steps = {vid: max(1, domain.spec(vid).scope.width // 4) for vid in ids
             if vid not in fractions}
    center = dict(start_standard)
    center_point = Point(xm, xq, center)
    start_ei, start_features = batch_ei([center_point])
    center_ei = float(start_ei[0])
    _offer_batch([center_point], start_ei, system, constraint_models, xm, encoder,
                 evaluated, best_feasible, best_any, start_features)
    used = 1
    while used < cfg.acq_budget:
        candidates = []
        for vid in ids:
            scope = domain.spec(vid).scope
            for sign in (1, -1):
                if vid in fractions:
                    value = scope.clamp(center[vid] + sign * fractions[vid] * scope.width)
                else:
                    value = scope.clamp(center[vid] + sign * steps[vid])
                if value != center[vid]:
                    candidates.append(Point(xm, xq, {**center, vid: value}))
        if not candidates:
            break
        ei, features = batch_ei(candidates)
        used += len(candidates)
        _offer_batch(candidates, ei, system, constraint_models, xm, encoder, evaluated,
                     best_feasible, best_any, features)
        best_idx = int(np.argmax(ei))
        if ei[best_idx] > center_ei:
            center = dict(candidates[best_idx].standard)
            center_ei = float(ei[best_idx])
            continue
        at_minimum = (all(f <= 0.02 for f in fractions.values())
                      and all(s == 1 for s in steps.values()))
        if at_minimum:
            break
        for vid in fractions:
            fractions[vid] = max(0.02, fractions[vid] * 0.5)
        for vid in steps:
            steps[vid] = max(1, steps[vid] // 2)


def maximize_acquisition(model: GPModel, system, constraint_models, encoder: Encoder,
                         evaluated, f_star, cfg: BOConfig, rng) -> AuxiliaryCandidate | None:
    """Best expected-improvement candidate over the auxiliary domain.

    Candidates whose surrogate constraint means exceed zero are rejected;
    when no surrogate-feasible candidate exists anywhere the global EI
    maximizer is returned flagged infeasible.  Already evaluated points are
    excluded; None signals an exhausted finite domain.
    """
    domain = model.domain
    try:
        metas = domain.enumerate_meta_set()
    except NotEnumerableError as exc:
        raise ConfigurationError("acquisition needs an enumerable meta set") from exc
    best_feasible, best_any = _Best(), _Best()
    try:
        points = enumerate_domain_points(domain, cfg.enumeration_cap)
    except NotEnumerableError:
        points = None
    if points is not None:
        fresh = [p for p in points if cache_key(p) not in evaluated]
        if not fresh:
            return None
        mean, var = model.predict_batch(fresh)
        ei = np.atleast_1d(expected_improvement(mean, np.sqrt(var), f_star))
        by_meta = {}
        for i, p in enumerate(fresh):
            by_meta.setdefault(p.meta, []).append(i)
        for xm in metas:
            idx = by_meta.get(xm, [])
            if idx:
                subset = [fresh[i] for i in idx]
                _offer_batch(subset, ei[idx], system, constraint_models,
                             xm, encoder, evaluated, best_feasible, best_any,
                             model.features(subset))
    else:
        for xm in metas:
            for xq in _enumerate_categorical(domain, xm, cfg.categorical_cap, rng):
                for start in range(cfg.acq_starts):
                    if start == 0:
                        standard = domain.complete_point(xm, {}).standard
                    else:
                        standard = {}
                        for vid in domain.acting_index_set(xm, "standard"):
                            scope = domain.spec(vid).scope
                            standard[vid] = denormalize(scope, float(rng.random()))
                    _acquisition_pattern_search(
                        model, system, constraint_models, encoder, xm, xq, standard,
                        f_star, evaluated, cfg, best_feasible, best_any)
    feasible_candidate = best_feasible.materialize()
    if feasible_candidate is not None:
        return feasible_candidate
    return best_any.materialize()


# ---------------------------------------------------------------------------
# Initial design and the outer loop
# ---------------------------------------------------------------------------

def latin_hypercube(rng, samples: int, dims: int) -> np.ndarray:
    """Jittered Latin hypercube in [0, 1)^dims."""
    out = np.empty((samples, dims))
    for j in range(dims):
        out[:, j] = (rng.permutation(samples) + rng.random(samples)) / samples
    return out


def initial_design(domain: Domain, rng, metas) -> list:
    """Stratified design: per meta component, d + 1 points (d acting non-meta
    variables) by Latin hypercube on the standard part and uniform categorical draws."""
    points = []
    for xm in metas:
        cat_ids = domain.acting_index_set(xm, "categorical")
        std_ids = domain.acting_index_set(xm, "standard")
        count = len(cat_ids) + len(std_ids) + 1
        cube = latin_hypercube(rng, count, len(std_ids))
        for i in range(count):
            categorical = {vid: int(rng.integers(1, domain.spec(vid).scope.size + 1))
                           for vid in cat_ids}
            standard = {vid: denormalize(domain.spec(vid).scope, float(cube[i, j]))
                        for j, vid in enumerate(std_ids)}
            points.append(Point(xm, categorical, standard))
    return points


def _best_record(history):
    best = None
    for record in history:
        if record.cached:
            continue
        key = (barrier_value(record), record.objective)
        if best is None or key < best[0]:
            best = (key, record)
    return best[1] if best else None


def run_bo(problem: Problem, cfg: BOConfig, progress: bool = False) -> BOResult:
    """Initial design, then fit-maximize-evaluate until the budget is spent.

    Constraint surrogates are GP means fit on all acting observations of each
    constraint, sharing the objective kernel's correlation hyperparameters
    (the mean prediction is scale-invariant).
    """
    domain = problem.domain
    system = problem.constraints
    try:
        metas = domain.enumerate_meta_set()
    except NotEnumerableError as exc:
        raise ConfigurationError("Bayesian optimization needs an enumerable meta set") from exc
    evaluator = Evaluator(problem, cfg.budget)
    rng = np.random.default_rng(cfg.seed)
    encoder = Encoder(domain, cfg.encoder_kind)

    train_points, train_values = [], []
    constraint_data = {c.id: ([], []) for c in system.constraints}
    seen = set()

    def absorb(record):
        if record.error is not None or not math.isfinite(record.objective):
            return
        key = cache_key(record.point)
        if key in seen:
            return
        seen.add(key)
        train_points.append(record.point)
        train_values.append(record.objective)
        for cid, value in record.constraints.items():
            constraint_data[cid][0].append(record.point)
            constraint_data[cid][1].append(value)

    stop_reason = "budget"
    for point in initial_design(domain, rng, metas):
        try:
            absorb(evaluator.evaluate(point))
        except EvaluationError:
            continue
        except BudgetExhaustedError:
            stop_reason = "budget"
            break

    acquisition_log = []
    base_config = merge_kernel_overrides(domain, cfg.categorical_mode,
                                         cfg.kernel or {})
    config: KernelConfig | None = None
    samples_at_refit = -1
    iteration = 0
    while evaluator.budget.remaining > 0 and iteration < cfg.max_iterations:
        iteration += 1
        if len(train_points) < 2:
            stop_reason = "no_data"
            break
        if (config is None or len(train_points) <= cfg.refit_full_until
                or len(train_points) - samples_at_refit >= cfg.refit_every):
            try:
                config = fit_hyperparameters(
                    domain, train_points, train_values, seed=cfg.seed,
                    mode=cfg.categorical_mode, encoder=encoder, sweeps=cfg.fit_sweeps,
                    base=base_config)
            except FittingError:
                config = base_config
            samples_at_refit = len(train_points)
        model = GPModel(domain, train_points, train_values, config, encoder)
        constraint_models = {}
        for cid, (pts, vals) in constraint_data.items():
            if pts:
                constraint_models[cid] = GPModel(domain, pts, vals, config, encoder)
        feasible_values = [r.objective for r in evaluator.history
                           if not r.cached and r.feasible and r.error is None]
        if feasible_values:
            f_star = min(feasible_values)
        else:
            f_star = min(train_values)
        candidate = maximize_acquisition(model, system, constraint_models, encoder,
                                         evaluator.evaluated_keys, f_star, cfg, rng)
        if candidate is None:
            stop_reason = "exhausted"
            break
        acquisition_log.append(AcquisitionLogRow(
            iteration, candidate.meta, candidate.acquisition,
            candidate.surrogate_feasible))
        if progress:
            print(f"iteration {iteration} evaluations {evaluator.budget.used} "
                  f"acquisition {candidate.acquisition:.6g}", file=sys.stderr)
        try:
            absorb(evaluator.evaluate(candidate.point()))
        except EvaluationError:
            continue
        except BudgetExhaustedError:
            stop_reason = "budget"
            break
    return BOResult(best=_best_record(evaluator.history), history=evaluator.history,
                    acquisition_log=acquisition_log, evaluator=evaluator,
                    stop_reason=stop_reason)


def write_acquisition_log(rows, path):
    """Sidecar CSV: iteration, chosen meta component, EI value, surrogate-feasible flag."""
    lines = ["iteration,meta,acquisition,surrogate_feasible"]
    for row in rows:
        meta = ";".join(f"{k}={v}" for k, v in sorted(row.meta.items()))
        lines.append(f"{row.iteration},{meta},{row.acquisition:.17g},"
                     f"{'true' if row.surrogate_feasible else 'false'}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

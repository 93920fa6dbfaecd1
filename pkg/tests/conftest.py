import numpy as np
import pytest

import metabox as mb
from metabox.blackbox import barrier_value
from metabox.domain import denormalize


@pytest.fixture(scope="session")
def mlp_problem():
    return mb.mlp_problem()


@pytest.fixture(scope="session")
def mlp_domain():
    return mb.mlp_problem().domain


@pytest.fixture(scope="session")
def wide_mlp_domain():
    # Layer count 0..3 so the boundary and interior neighborhood cases exist.
    return mb.mlp_domain(l_min=0, l_max=3)


@pytest.fixture(scope="session")
def toy_problem():
    return mb.toy_problem()


@pytest.fixture(scope="session")
def toy_brute_force(toy_problem):
    """Independent oracle: exhaustive enumeration under the extreme barrier."""
    evaluator = mb.Evaluator(toy_problem, 10_000)
    best = None
    for point in mb.enumerate_domain_points(toy_problem.domain):
        record = evaluator.evaluate(point)
        value = barrier_value(record)
        if best is None or value < best[0]:
            best = (value, point)
    return best


def random_point(domain, rng, metas=None):
    """Uniform draw over a domain with enumerable meta set."""
    metas = metas or domain.enumerate_meta_set()
    xm = metas[int(rng.integers(len(metas)))]
    partial = {}
    for vid in domain.acting_index_set(xm, "categorical"):
        partial[vid] = int(rng.integers(1, domain.spec(vid).scope.size + 1))
    for vid in domain.acting_index_set(xm, "standard"):
        partial[vid] = denormalize(domain.spec(vid).scope, float(rng.random()))
    return domain.complete_point(xm, partial)


def uniform_random_search(problem, budget, seed):
    """Baseline sampler: best extreme-barrier value of seeded uniform draws."""
    evaluator = mb.Evaluator(problem, budget)
    rng = np.random.default_rng(seed)
    metas = problem.domain.enumerate_meta_set()
    best = None
    while evaluator.budget.remaining > 0:
        record = evaluator.evaluate(random_point(problem.domain, rng, metas))
        value = barrier_value(record)
        if best is None or value < best:
            best = value
    return best

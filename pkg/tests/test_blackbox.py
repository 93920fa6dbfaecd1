import concurrent.futures
import json
import math
import sys

import pytest

import metabox as mb
from metabox.blackbox import cache_key, history_header, render_value
from metabox.builtin_problems import (MLP_ACTIVATION_GAP, MLP_CONTINUOUS_TARGETS,
                                      toy_table)

ADAM2 = mb.MetaComponent({"l": 2, "o": "Adam"})


# -- cache keys ------------------------------------------------------------------

def test_cache_key_sorted_and_17_digits(mlp_domain):
    point = mlp_domain.complete_point(ADAM2, {"r": 1 / 3})
    key = cache_key(point)
    assert key.startswith("l=2;o=Adam|")
    assert f"r={1 / 3:.17g}" in key
    assert "lam" not in key  # nonacting variables never appear


def test_cache_key_invariant_to_map_order(mlp_domain):
    a = mb.Point({"l": 2, "o": "Adam"}, {"a": 1},
                 {"u1": 200, "u2": 150, "r": 0.5, "beta1": 0.5, "beta2": 0.5, "eps": 0.5})
    b = mb.Point({"o": "Adam", "l": 2}, {"a": 1},
                 {"eps": 0.5, "beta2": 0.5, "beta1": 0.5, "r": 0.5, "u2": 150, "u1": 200})
    assert cache_key(a) == cache_key(b)
    assert a == b and hash(a) == hash(b)


# -- evaluation, cache, budget ------------------------------------------------------

def test_duplicate_evaluation_hits_cache(mlp_problem, mlp_domain):
    evaluator = mb.Evaluator(mlp_problem, 5)
    point = mlp_domain.complete_point(ADAM2, {})
    first = evaluator.evaluate(point)
    second = evaluator.evaluate(point)
    assert not first.cached and second.cached
    assert second.objective == first.objective
    assert second.constraints == first.constraints
    assert evaluator.budget.used == 1
    assert [r.index for r in evaluator.history] == [0, 1]


def test_budget_exhaustion_raises(mlp_problem, mlp_domain):
    evaluator = mb.Evaluator(mlp_problem, 1)
    evaluator.evaluate(mlp_domain.complete_point(ADAM2, {}))
    with pytest.raises(mb.BudgetExhaustedError):
        evaluator.evaluate(mlp_domain.complete_point(ADAM2, {"u1": 150}))
    # cached points stay available after exhaustion
    assert evaluator.evaluate(mlp_domain.complete_point(ADAM2, {})).cached


def test_used_counts_only_fresh_records(mlp_problem, mlp_domain):
    evaluator = mb.Evaluator(mlp_problem, 10)
    for u1 in (150, 150, 200, 200, 150):
        evaluator.evaluate(mlp_domain.complete_point(ADAM2, {"u1": u1}))
    assert evaluator.budget.used == sum(1 for r in evaluator.history if not r.cached) == 2


def test_out_of_domain_point_refused(mlp_problem, mlp_domain):
    evaluator = mb.Evaluator(mlp_problem, 5)
    bad = mb.Point(ADAM2, {"a": 1}, {"u1": 200, "u2": 150, "r": 0.5, "beta1": 0.5,
                                     "beta2": 0.5, "eps": 0.5, "lam": 0.5})
    with pytest.raises(mb.DomainError) as err:
        evaluator.evaluate(bad)
    assert any(issue.subject == "lam" for issue in err.value.reasons)


def test_concurrent_duplicate_evaluations_coalesce(toy_problem):
    point = toy_problem.domain.complete_point(mb.MetaComponent({"m": "A"}), {})
    evaluator = mb.Evaluator(toy_problem, 10)
    with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
        records = list(pool.map(lambda _: evaluator.evaluate(point), range(8)))
    assert evaluator.budget.used == 1
    assert sum(1 for r in records if not r.cached) == 1
    assert len({r.objective for r in records}) == 1


def test_in_flight_duplicates_wait_for_one_slow_call(toy_problem):
    import time as _time

    def slow_objective(point):
        _time.sleep(0.15)
        return float(point.standard["k"]), {}

    problem = mb.Problem(domain=toy_problem.domain,
                         constraints=mb.ConstraintSystem(toy_problem.domain, []),
                         objective=slow_objective)
    evaluator = mb.Evaluator(problem, 10)
    point = toy_problem.domain.complete_point(mb.MetaComponent({"m": "A"}), {"k": 3})
    with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
        records = list(pool.map(lambda _: evaluator.evaluate(point), range(4)))
    assert evaluator.budget.used == 1  # overlapping calls coalesced onto one run
    assert all(r.objective == 3.0 for r in records)


def test_timeout_env_var_override(monkeypatch, toy_problem):
    monkeypatch.setenv("METABOX_BLACKBOX_TIMEOUT", "7.5")
    evaluator = mb.Evaluator(toy_problem, 1)
    assert evaluator.timeout == 7.5
    monkeypatch.delenv("METABOX_BLACKBOX_TIMEOUT")
    assert mb.Evaluator(toy_problem, 1).timeout == toy_problem.timeout


# -- the proxy problem ----------------------------------------------------------------

def test_proxy_minimum_is_zero(mlp_problem):
    evaluator = mb.Evaluator(mlp_problem, 5)
    record = evaluator.evaluate(mb.mlp_minimizer(mlp_problem.domain))
    assert record.objective == 0.0
    assert record.feasible


def test_proxy_sigmoid_gap(mlp_problem, mlp_domain):
    evaluator = mb.Evaluator(mlp_problem, 5)
    record = evaluator.evaluate(mlp_domain.complete_point(ADAM2, {"a": "Sigmoid"}))
    assert record.objective >= MLP_ACTIVATION_GAP["Sigmoid"]


def test_proxy_monotonicity_violation_infeasible(mlp_problem, mlp_domain):
    evaluator = mb.Evaluator(mlp_problem, 5)
    record = evaluator.evaluate(
        mlp_domain.complete_point(ADAM2, {"u1": 100, "u2": 300}))
    assert record.constraints["units_mono_2"] == 200.0
    assert not record.feasible


def test_proxy_continuous_targets_lie_inside_unit_interval():
    for targets in MLP_CONTINUOUS_TARGETS.values():
        assert all(0.0 < z < 1.0 for z in targets.values())


def test_replay_reproduces_values_bit_for_bit(mlp_problem, mlp_domain):
    first = mb.Evaluator(mlp_problem, 20)
    points = [mlp_domain.complete_point(ADAM2, {"u1": u}) for u in (100, 137, 291)]
    originals = [first.evaluate(p) for p in points]
    replay = mb.Evaluator(mlp_problem, 20)
    for point, original in zip(points, originals):
        again = replay.evaluate(point)
        assert again.objective == original.objective
        assert again.constraints == original.constraints


# -- the toy problem --------------------------------------------------------------------

def test_toy_table_is_distinct_and_small(toy_problem):
    table = toy_table()
    assert len(table) == 60 <= 120
    assert len(set(table.values())) == 60


def test_toy_unique_minimum(toy_brute_force):
    value, point = toy_brute_force
    assert math.isfinite(value)
    table = toy_table()
    feasible_values = [v for p, v in table.items()
                       if p.meta["m"] == "A" or p.standard["k"] <= 2]
    assert value == min(feasible_values)


def test_toy_blackbox_constraint_emitted_only_when_acting(toy_problem):
    evaluator = mb.Evaluator(toy_problem, 10)
    a_rec = evaluator.evaluate(
        toy_problem.domain.complete_point(mb.MetaComponent({"m": "A"}), {}))
    b_rec = evaluator.evaluate(
        toy_problem.domain.complete_point(mb.MetaComponent({"m": "B"}), {"k": 4}))
    assert a_rec.constraints == {}
    assert b_rec.constraints == {"branch_cap": 2.0}
    assert not b_rec.feasible


# -- external subprocess blackboxes --------------------------------------------------------

def quadratic_child(tmp_path, body):
    script = tmp_path / "bb.py"
    script.write_text(body)
    return script


CHILD_OK = """\
import json, sys
data = json.load(sys.stdin)
k = data["standard"]["k"]
level = data["categorical"]["s"]
value = (k - 1) ** 2 + {"low": 0, "mid": 1, "high": 2}[level]
out = {"objective": value}
if data["meta"]["m"] == "B":
    out["constraints"] = {"branch_cap": k - 2}
json.dump(out, sys.stdout)
"""


def subprocess_problem(toy_problem, script):
    return mb.Problem(domain=toy_problem.domain, constraints=toy_problem.constraints,
                      command=(sys.executable, str(script)), timeout=20.0)


def test_subprocess_protocol_round_trip(tmp_path, toy_problem):
    script = quadratic_child(tmp_path, CHILD_OK)
    problem = subprocess_problem(toy_problem, script)
    evaluator = mb.Evaluator(problem, 5)
    point = toy_problem.domain.complete_point(
        mb.MetaComponent({"m": "B"}), {"k": 3, "s": "high", "pB": "short"})
    record = evaluator.evaluate(point)
    assert record.objective == (3 - 1) ** 2 + 2
    assert record.constraints["branch_cap"] == 1.0
    assert not record.feasible


def test_subprocess_failure_recorded_and_raised(tmp_path, toy_problem):
    script = quadratic_child(tmp_path, "import sys; sys.exit(3)\n")
    problem = subprocess_problem(toy_problem, script)
    evaluator = mb.Evaluator(problem, 5)
    point = toy_problem.domain.complete_point(mb.MetaComponent({"m": "A"}), {})
    with pytest.raises(mb.EvaluationError):
        evaluator.evaluate(point)
    record = evaluator.history[-1]
    assert record.error is not None
    assert record.objective == math.inf and not record.feasible
    assert evaluator.budget.used == 1  # failures consume budget


def test_subprocess_malformed_output_is_an_evaluation_error(tmp_path, toy_problem):
    script = quadratic_child(tmp_path, "print('not json')\n")
    problem = subprocess_problem(toy_problem, script)
    evaluator = mb.Evaluator(problem, 5)
    with pytest.raises(mb.EvaluationError):
        evaluator.evaluate(
            toy_problem.domain.complete_point(mb.MetaComponent({"m": "A"}), {}))


def test_subprocess_missing_constraint_value_is_an_error(tmp_path, toy_problem):
    script = quadratic_child(tmp_path, 'import json,sys; json.dump({"objective": 1.0}, sys.stdout)\n')
    problem = subprocess_problem(toy_problem, script)
    evaluator = mb.Evaluator(problem, 5)
    point = toy_problem.domain.complete_point(mb.MetaComponent({"m": "B"}), {})
    with pytest.raises(mb.EvaluationError):
        evaluator.evaluate(point)


def test_subprocess_timeout(tmp_path, toy_problem):
    script = quadratic_child(tmp_path, "import time; time.sleep(60)\n")
    problem = mb.Problem(domain=toy_problem.domain, constraints=toy_problem.constraints,
                         command=(sys.executable, str(script)), timeout=0.5)
    evaluator = mb.Evaluator(problem, 5)
    with pytest.raises(mb.EvaluationError, match="timed out"):
        evaluator.evaluate(
            toy_problem.domain.complete_point(mb.MetaComponent({"m": "A"}), {}))


def test_subprocess_payload_uses_labels(toy_problem):
    from metabox.blackbox import subprocess_payload
    point = toy_problem.domain.complete_point(
        mb.MetaComponent({"m": "B"}), {"pB": 2, "s": 3, "k": 1})
    payload = subprocess_payload(toy_problem.domain, point)
    assert payload == {"meta": {"m": "B"},
                       "categorical": {"pB": "short", "s": "high"},
                       "standard": {"k": 1}}


# -- history files ----------------------------------------------------------------------------

def test_history_columns_and_empty_nonacting_cells(tmp_path, mlp_problem, mlp_domain):
    evaluator = mb.Evaluator(mlp_problem, 5)
    evaluator.evaluate(mlp_domain.complete_point(ADAM2, {}))
    path = tmp_path / "history.csv"
    mb.write_history(mlp_domain, mlp_problem.constraints, evaluator.history, path)
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    assert header == history_header(mlp_domain, mlp_problem.constraints)
    row = dict(zip(header, lines[1].split(",")))
    assert row["u3"] == ""            # nonacting at l=2
    assert row["units_mono_3"] == ""  # nonacting constraint
    assert row["a"] == "ReLU"         # labels at the I/O boundary
    assert row["cached"] == "false"
    assert float(row["objective"]) == evaluator.history[0].objective


def test_history_zero_records_is_header_only(tmp_path, mlp_problem, mlp_domain):
    path = tmp_path / "empty.csv"
    mb.write_history(mlp_domain, mlp_problem.constraints, [], path)
    lines = path.read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("eval_index,")


def test_render_value_round_trips_floats():
    for value in (1 / 3, 1e-17, 123456.789012345678, 5e7 + 0.123):
        assert float(render_value(value)) == value

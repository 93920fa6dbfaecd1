import pytest

import metabox as mb
from metabox.builtin_problems import mlp_constraints

ADAM2 = mb.MetaComponent({"l": 2, "o": "Adam"})
ADAM3 = mb.MetaComponent({"l": 3, "o": "Adam"})


@pytest.fixture(scope="module")
def mlp_system(mlp_problem):
    return mlp_problem.constraints


@pytest.fixture(scope="module")
def wide_system(wide_mlp_domain):
    return mlp_constraints(wide_mlp_domain)


def units_point(domain, l, **units):
    values = {f"u{i}": units.get(f"u{i}", 200) for i in range(1, l + 1)}
    return domain.complete_point(mb.MetaComponent({"l": l, "o": "Adam"}), values)


# -- acting decreed constraints ---------------------------------------------------

def test_acting_decreed_constraints_per_layer_count(mlp_system, wide_system,
                                                    wide_mlp_domain):
    assert [c.id for c in mlp_system.acting_decreed_constraints(ADAM2)] == ["units_mono_2"]
    assert [c.id for c in mlp_system.acting_decreed_constraints(ADAM3)] == [
        "units_mono_2", "units_mono_3"]
    for l in (0, 1):
        xm = mb.MetaComponent({"l": l, "o": "Adam"})
        assert wide_system.acting_decreed_constraints(xm) == []


def test_decreed_count_is_layers_minus_one(mlp_system):
    for l in (2, 3):
        xm = mb.MetaComponent({"l": l, "o": "Adam"})
        assert len(mlp_system.acting_decreed_constraints(xm)) == l - 1


def test_acting_decreed_is_subset_of_static_decreed(mlp_system):
    static = set(c.id for c in mlp_system.decreed_constraints)
    for xm in mlp_system.domain.enumerate_meta_set():
        acting = set(c.id for c in mlp_system.acting_decreed_constraints(xm))
        assert acting <= static


# -- analytic evaluation -----------------------------------------------------------

def test_global_unit_sum(mlp_system, mlp_domain):
    point = units_point(mlp_domain, 2, u1=200, u2=150)
    spec = next(c for c in mlp_system.constraints if c.id == "units_total")
    assert mlp_system.evaluate_analytic(spec, point) == -150.0


def test_global_sum_adapts_to_acting_set(mlp_system, mlp_domain):
    # The u3 term is inert at l=2 even though the body references it.
    point3 = units_point(mlp_domain, 3, u1=200, u2=150, u3=100)
    spec = next(c for c in mlp_system.constraints if c.id == "units_total")
    assert mlp_system.evaluate_analytic(spec, point3) == -50.0


def test_monotonicity_constraint_boundary_and_violation(mlp_system, mlp_domain):
    spec = next(c for c in mlp_system.constraints if c.id == "units_mono_2")
    assert mlp_system.evaluate_analytic(spec, units_point(mlp_domain, 2, u1=100, u2=100)) == 0.0
    assert mlp_system.evaluate_analytic(spec, units_point(mlp_domain, 2, u1=100, u2=300)) == 200.0


def test_evaluating_nonacting_constraint_is_a_decree_violation(mlp_system, mlp_domain):
    spec = next(c for c in mlp_system.constraints if c.id == "units_mono_3")
    with pytest.raises(mb.DecreeViolationError):
        mlp_system.evaluate_analytic(spec, units_point(mlp_domain, 2))


# -- feasibility ---------------------------------------------------------------------

def test_feasibility_all_nonpositive(mlp_system, mlp_domain):
    point = units_point(mlp_domain, 2)
    values = {"units_total": -100.0, "units_mono_2": 0.0}
    assert mlp_system.is_feasible(point, values)


def test_feasibility_is_strict(mlp_system, mlp_domain):
    point = units_point(mlp_domain, 2)
    values = {"units_total": -100.0, "units_mono_2": 1e-12}
    assert not mlp_system.is_feasible(point, values)


def test_feasibility_vacuous_without_acting_constraints(toy_problem):
    point = toy_problem.domain.complete_point(mb.MetaComponent({"m": "A"}), {})
    assert toy_problem.constraints.is_feasible(point, {})


def test_missing_constraint_value_errors(mlp_system, mlp_domain):
    point = units_point(mlp_domain, 2)
    with pytest.raises(mb.IncompleteConstraintValuesError):
        mlp_system.is_feasible(point, {"units_total": -1.0})


def test_feasibility_monotone_under_constraint_removal(mlp_domain):
    base = mlp_constraints(mlp_domain)
    point = units_point(mlp_domain, 3, u1=200, u2=150, u3=100)
    values = {c.id: base.evaluate_analytic(c, point) for c in base.acting_constraints(point.meta)}
    assert base.is_feasible(point, values)
    for drop in ("units_total", "units_mono_2", "units_mono_3"):
        reduced = mb.ConstraintSystem(
            mlp_domain, [c for c in base.constraints if c.id != drop])
        kept = {k: v for k, v in values.items() if k != drop}
        assert reduced.is_feasible(point, kept)


# -- load-time validation --------------------------------------------------------------

def test_decreed_analytic_must_reference_co_acting_variables(mlp_domain):
    bad = mb.ConstraintSpec(
        "premature", mb.Role.DECREED,
        mb.LinearExpression(((1.0, "u3"),)),
        mb.DecreePredicate((mb.Threshold("l", 2),)))
    with pytest.raises(mb.ScopeError):
        mb.ConstraintSystem(mlp_domain, [bad])


def test_analytic_bodies_reject_categorical_references(mlp_domain):
    bad = mb.ConstraintSpec("nope", mb.Role.GLOBAL, mb.LinearExpression(((1.0, "a"),)))
    with pytest.raises(mb.ScopeError):
        mb.ConstraintSystem(mlp_domain, [bad])


def test_constraint_ids_cannot_collide_with_variables(mlp_domain):
    bad = mb.ConstraintSpec("u1", mb.Role.GLOBAL, mb.LinearExpression(((1.0, "u1"),)))
    with pytest.raises(mb.ScopeError):
        mb.ConstraintSystem(mlp_domain, [bad])

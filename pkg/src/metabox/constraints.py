"""Global and decreed inequality constraints and feasibility.

Every constraint has the form c(x) <= 0.  Global constraints are always
acting; decreed constraints are acting only when their decree predicate is
satisfied by the meta component.  Analytic bodies are linear expressions over
standard variables; blackbox bodies are read from the evaluation backend.
"""

from __future__ import annotations

from dataclasses import dataclass

from .domain import (ALWAYS, DecreePredicate, Domain, GROUPS, Membership, Point, Role,
                     Threshold)
from .errors import (DecreeViolationError, IncompleteConstraintValuesError,
                     NotEnumerableError, ScopeError)


@dataclass(frozen=True)
class LinearExpression:
    """Sum of coefficient * variable terms plus a constant, compared to <= 0."""

    terms: tuple          # ((coefficient, variable_id), ...)
    constant: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms",
                           tuple((float(c), str(v)) for c, v in self.terms))
        object.__setattr__(self, "constant", float(self.constant))

    def referenced_ids(self):
        return [v for _, v in self.terms]


@dataclass(frozen=True)
class BlackboxOutput:
    """Constraint value produced by the blackbox, keyed by constraint id.

    ``slot`` is the declaration index among blackbox-bodied constraints.
    """

    slot: int


@dataclass(frozen=True)
class ConstraintSpec:
    id: str
    role: Role
    body: object
    decree: DecreePredicate = ALWAYS

    def __post_init__(self):
        if self.role == Role.META:
            raise ScopeError(f"constraint {self.id!r}: constraints are global or decreed")
        if (self.role == Role.DECREED) == self.decree.always:
            raise ScopeError(
                f"constraint {self.id!r}: decreed constraints need a nonempty decree, "
                "global ones an empty one")

    @property
    def analytic(self) -> bool:
        return isinstance(self.body, LinearExpression)


class ConstraintSystem:
    """All constraints of a problem, validated against a domain.

    Immutable after construction; safe to share across threads.
    """

    def __init__(self, domain: Domain, constraints=()):
        self.domain = domain
        self.constraints = tuple(constraints)
        seen = set()
        for c in self.constraints:
            if c.id in seen or c.id in domain:
                raise ScopeError(f"constraint id {c.id!r} collides with another id")
            seen.add(c.id)
        self._validate()

    def _validate(self):
        meta = set(self.domain.meta_ids)
        for c in self.constraints:
            for atom in c.decree.atoms:
                if atom.meta_id not in meta:
                    raise ScopeError(
                        f"constraint {c.id!r}: decree references {atom.meta_id!r}, "
                        "which is not a meta variable")
            if not c.analytic:
                continue
            for vid in c.body.referenced_ids():
                spec = self.domain.spec(vid)
                if spec.type not in GROUPS["standard"]:
                    raise ScopeError(
                        f"constraint {c.id!r}: analytic bodies may only reference "
                        f"integer/continuous variables, not {vid!r}")
            if c.role == Role.DECREED:
                self._check_co_acting(c)

    def _check_co_acting(self, c: ConstraintSpec):
        """A decreed analytic constraint must only reference variables that are
        acting whenever its own predicate holds."""
        try:
            metas = self.domain.enumerate_meta_set()
        except NotEnumerableError:
            metas = None
        if metas is not None:
            for xm in metas:
                if not self.domain.decree_satisfied(c.decree, xm):
                    continue
                for vid in c.body.referenced_ids():
                    if not self.domain.is_acting(vid, xm):
                        raise ScopeError(
                            f"constraint {c.id!r}: references {vid!r}, nonacting under "
                            f"{dict(xm)}")
            return
        # Non-enumerable meta set: fall back to a syntactic implication check
        # (every atom of the variable's decree must be implied by one of the
        # constraint's atoms).
        for vid in c.body.referenced_ids():
            spec = self.domain.spec(vid)
            if spec.role != Role.DECREED:
                continue
            for needed in spec.decree.atoms:
                if not any(_implies(have, needed) for have in c.decree.atoms):
                    raise ScopeError(
                        f"constraint {c.id!r}: cannot establish that {vid!r} is acting "
                        "whenever the constraint is")

    # -- queries ---------------------------------------------------------------

    @property
    def global_constraints(self):
        return [c for c in self.constraints if c.role == Role.GLOBAL]

    @property
    def decreed_constraints(self):
        return [c for c in self.constraints if c.role == Role.DECREED]

    def acting_decreed_constraints(self, xm):
        """Decreed constraints whose predicate ``xm`` satisfies, declaration order."""
        self.domain.validate_meta(xm)
        return [c for c in self.decreed_constraints
                if self.domain.decree_satisfied(c.decree, xm)]

    def acting_constraints(self, xm):
        """Globals plus acting decreed constraints, declaration order."""
        self.domain.validate_meta(xm)
        return [c for c in self.constraints
                if c.role == Role.GLOBAL or self.domain.decree_satisfied(c.decree, xm)]

    def blackbox_constraints(self):
        return [c for c in self.constraints if not c.analytic]

    # -- evaluation --------------------------------------------------------------

    def evaluate_analytic(self, spec: ConstraintSpec, point: Point) -> float:
        """Value of a linear constraint body at a point.

        Terms over nonacting variables contribute nothing for global
        constraints (the sum adapts to the acting set).  Evaluating a decreed
        constraint where it is nonacting is a decree violation.
        """
        if not spec.analytic:
            raise ScopeError(f"constraint {spec.id!r} has no analytic body")
        if spec.role == Role.DECREED and not self.domain.decree_satisfied(spec.decree, point.meta):
            raise DecreeViolationError(
                f"constraint {spec.id!r} is nonacting under {dict(point.meta)}")
        value = spec.body.constant
        for coefficient, vid in spec.body.terms:
            if vid in point.standard:
                value += coefficient * point.standard[vid]
            elif spec.role == Role.DECREED:
                raise DecreeViolationError(
                    f"constraint {spec.id!r}: referenced variable {vid!r} is nonacting")
        return value

    def is_feasible(self, point: Point, values) -> bool:
        """True iff every acting constraint value is <= 0, exactly (no tolerance)."""
        for c in self.acting_constraints(point.meta):
            if c.id not in values:
                raise IncompleteConstraintValuesError(
                    f"missing value for acting constraint {c.id!r}")
            if values[c.id] > 0.0:
                return False
        return True


def _implies(have, needed) -> bool:
    if have.meta_id != needed.meta_id:
        return False
    if isinstance(have, Threshold) and isinstance(needed, Threshold):
        return have.minimum >= needed.minimum
    if isinstance(have, Membership) and isinstance(needed, Membership):
        have_set = set(a for a in have.allowed if not isinstance(a, tuple))
        needed_set = set(a for a in needed.allowed if not isinstance(a, tuple))
        if any(isinstance(a, tuple) for a in have.allowed + needed.allowed):
            return False
        return have_set <= needed_set
    return False

"""
This module contains the non-relational domains that Zones are compared against: Intervals and a fixed Predicate
domain of seven disjoint integer ranges.
"""
import logging
from dataclasses import dataclass

import numpy as np

from zoneslice.ir_frontend import AssignStmt, AssumeStmt, NopStmt

logger = logging.getLogger(__name__)

INF = float("inf")

# the seven disjoint elements of the Predicate domain as closed integer ranges, E1..E7
PREDICATE_ELEMENTS = (
    (-INF, -5),
    (-4, -2),
    (-1, -1),
    (0, 0),
    (1, 1),
    (2, 4),
    (5, INF),
)
ALL_ELEMENTS = frozenset(range(len(PREDICATE_ELEMENTS)))


class DomainError(Exception):
    """
    This class deals with the error handling of the Interval and Predicate domains.
    """

    def __init__(self, message):  # ignore warning about super-init | pylint: disable=W0231
        self.message = message

    def __str__(self):
        return f"Domain Error: {self.message}"


def format_bound(value) -> str:
    """Prints integral bounds without decimals and infinities as -inf / +inf."""
    if value == INF:
        return "+inf"
    if value == -INF:
        return "-inf"
    return str(int(value))


@dataclass(frozen=True)
class IntervalState:
    """Per variable a closed range [lower, upper]; Bottom is flagged and then holds empty ranges."""

    names: tuple
    lower: tuple
    upper: tuple
    is_bottom: bool = False

    def __str__(self):
        return dump_intervals(self)

    @classmethod
    def top(cls, variables):
        """Every variable unconstrained."""
        variables = tuple(variables)
        return cls(variables, (-INF,) * len(variables), (INF,) * len(variables))

    @classmethod
    def bottom(cls, variables):
        """The infeasible state."""
        variables = tuple(variables)
        return cls(variables, (INF,) * len(variables), (-INF,) * len(variables), True)

    def range_of(self, name):
        """Returns (lower, upper) of a variable."""
        index = self.names.index(name)
        return self.lower[index], self.upper[index]


def _intervals_from(names, lower, upper) -> IntervalState:
    if any(low > high for low, high in zip(lower, upper)):
        return IntervalState.bottom(names)
    return IntervalState(tuple(names), tuple(lower), tuple(upper))


def _check_universe(first, second):
    if first.names != second.names:
        raise DomainError(f"variable universe mismatch between {first.names} and {second.names}")


def _guard_constraints(stmt: AssumeStmt):
    """Constraints (s, t, c) of an assume with None for constants; disequalities refine nothing."""
    constraints = stmt.guard.difference_constraints()
    if constraints is None:
        logger.debug("%s refines no bound", stmt)
        return []
    return constraints


def interval_transfer(state: IntervalState, stmt) -> IntervalState:
    """
    This function applies a statement to an IntervalState.
    :param state: incoming state
    :param stmt: AssignStmt, AssumeStmt or NopStmt
    :return: the outgoing state
    """
    if state.is_bottom or isinstance(stmt, NopStmt):
        return state
    lower, upper = list(state.lower), list(state.upper)
    if isinstance(stmt, AssignStmt):
        index = state.names.index(stmt.target)
        if stmt.rhs is None:
            lower[index], upper[index] = -INF, INF
        elif stmt.rhs.var is None:
            lower[index] = upper[index] = stmt.rhs.const
        else:
            low, high = state.range_of(stmt.rhs.var)
            lower[index], upper[index] = low + stmt.rhs.const, high + stmt.rhs.const
        return _intervals_from(state.names, lower, upper)
    for source, target, const in _guard_constraints(stmt):
        if source == target:
            if const < 0:
                return IntervalState.bottom(state.names)
            continue
        if target is None:
            index = state.names.index(source)
            upper[index] = min(upper[index], const)
        elif source is None:
            index = state.names.index(target)
            lower[index] = max(lower[index], -const)
        else:
            # source <= target + const
            s, t = state.names.index(source), state.names.index(target)
            upper[s] = min(upper[s], upper[t] + const)
            lower[t] = max(lower[t], lower[s] - const)
    return _intervals_from(state.names, lower, upper)


def interval_join_widen(first: IntervalState, second: IntervalState, widen: bool = False) -> IntervalState:
    """
    This function joins two IntervalStates, or widens first by second when widen is set: bounds of second that
    exceed those of first jump to infinity.
    """
    _check_universe(first, second)
    if first.is_bottom:
        return second
    if second.is_bottom:
        return first
    if widen:
        lower = [a if b >= a else -INF for a, b in zip(first.lower, second.lower)]
        upper = [a if b <= a else INF for a, b in zip(first.upper, second.upper)]
    else:
        lower = [min(a, b) for a, b in zip(first.lower, second.lower)]
        upper = [max(a, b) for a, b in zip(first.upper, second.upper)]
    return _intervals_from(first.names, lower, upper)


def interval_leq(first: IntervalState, second: IntervalState) -> bool:
    """Inclusion of concretizations."""
    _check_universe(first, second)
    if first.is_bottom:
        return True
    if second.is_bottom:
        return False
    return all(a >= c and b <= d for a, b, c, d in zip(first.lower, first.upper, second.lower, second.upper))


def interval_mask(state: IntervalState, grid: np.ndarray, names) -> np.ndarray:
    """Membership of every grid row, one column per name in names, in the concretization of an IntervalState."""
    if state.is_bottom:
        return np.zeros(len(grid), dtype=bool)
    mask = np.ones(len(grid), dtype=bool)
    for column, name in enumerate(names):
        low, high = state.range_of(name)
        mask &= (grid[:, column] >= low) & (grid[:, column] <= high)
    return mask


def dump_intervals(state: IntervalState) -> str:
    """One ``v in [lo, hi]`` line per variable."""
    if state.is_bottom:
        return "false"
    return "\n".join(
        f"{name} in [{format_bound(low)}, {format_bound(high)}]"
        for name, low, high in zip(state.names, state.lower, state.upper)
    )


def element_of(value: int) -> int:
    """Index of the Predicate element containing an integer."""
    for index, (low, high) in enumerate(PREDICATE_ELEMENTS):
        if low <= value <= high:
            return index
    raise DomainError(f"no predicate element contains {value}")


def elements_overlapping(low, high) -> frozenset:
    """Indices of the Predicate elements that intersect the range [low, high]."""
    return frozenset(
        index for index, (e_low, e_high) in enumerate(PREDICATE_ELEMENTS) if e_low <= high and low <= e_high
    )


def _hull(elements):
    return (
        min(PREDICATE_ELEMENTS[index][0] for index in elements),
        max(PREDICATE_ELEMENTS[index][1] for index in elements),
    )


@dataclass(frozen=True)
class PredicateState:
    """Per variable a set of element indices; an empty set for any variable means Bottom."""

    names: tuple
    elements: tuple

    def __str__(self):
        return dump_predicates(self)

    @property
    def is_bottom(self) -> bool:
        """True when some variable has no element left."""
        return any(not elements for elements in self.elements)

    @classmethod
    def top(cls, variables):
        """Every variable may hold any element."""
        variables = tuple(variables)
        return cls(variables, (ALL_ELEMENTS,) * len(variables))

    @classmethod
    def bottom(cls, variables):
        """The infeasible state."""
        variables = tuple(variables)
        return cls(variables, (frozenset(),) * len(variables))

    def elements_of(self, name) -> frozenset:
        """Element indices of a variable."""
        return self.elements[self.names.index(name)]


def _predicates_from(names, elements) -> PredicateState:
    if any(not element_set for element_set in elements):
        return PredicateState.bottom(names)
    return PredicateState(tuple(names), tuple(elements))


def predicate_transfer(state: PredicateState, stmt) -> PredicateState:
    """
    This function applies a statement to a PredicateState. Assignments evaluate the right-hand side on the range of
    every element of the source variable; guards drop elements whose range cannot satisfy them.
    :param state: incoming state
    :param stmt: AssignStmt, AssumeStmt or NopStmt
    :return: the outgoing state
    """
    if state.is_bottom or isinstance(stmt, NopStmt):
        return state
    elements = list(state.elements)
    if isinstance(stmt, AssignStmt):
        index = state.names.index(stmt.target)
        if stmt.rhs is None:
            elements[index] = ALL_ELEMENTS
        elif stmt.rhs.var is None:
            elements[index] = frozenset({element_of(stmt.rhs.const)})
        else:
            shift = stmt.rhs.const
            elements[index] = frozenset().union(
                *(
                    elements_overlapping(PREDICATE_ELEMENTS[e][0] + shift, PREDICATE_ELEMENTS[e][1] + shift)
                    for e in state.elements_of(stmt.rhs.var)
                )
            )
        return _predicates_from(state.names, elements)
    for source, target, const in _guard_constraints(stmt):
        if source == target:
            if const < 0:
                return PredicateState.bottom(state.names)
            continue
        if target is None:
            s = state.names.index(source)
            elements[s] = frozenset(e for e in elements[s] if PREDICATE_ELEMENTS[e][0] <= const)
        elif source is None:
            t = state.names.index(target)
            elements[t] = frozenset(e for e in elements[t] if PREDICATE_ELEMENTS[e][1] >= -const)
        else:
            s, t = state.names.index(source), state.names.index(target)
            if not elements[s] or not elements[t]:
                return PredicateState.bottom(state.names)
            # source <= target + const, checked on the hull of the other side
            t_high = _hull(elements[t])[1]
            elements[s] = frozenset(e for e in elements[s] if PREDICATE_ELEMENTS[e][0] <= t_high + const)
            if not elements[s]:
                return PredicateState.bottom(state.names)
            s_low = _hull(elements[s])[0]
            elements[t] = frozenset(e for e in elements[t] if PREDICATE_ELEMENTS[e][1] >= s_low - const)
    return _predicates_from(state.names, elements)


def predicate_join(first: PredicateState, second: PredicateState) -> PredicateState:
    """Per-variable union of element sets."""
    _check_universe(first, second)
    if first.is_bottom:
        return second
    if second.is_bottom:
        return first
    return PredicateState(first.names, tuple(a | b for a, b in zip(first.elements, second.elements)))


def predicate_leq(first: PredicateState, second: PredicateState) -> bool:
    """Inclusion of concretizations."""
    _check_universe(first, second)
    if first.is_bottom:
        return True
    if second.is_bottom:
        return False
    return all(a <= b for a, b in zip(first.elements, second.elements))


def predicate_mask(state: PredicateState, grid: np.ndarray, names) -> np.ndarray:
    """Membership of every grid row, one column per name in names, in the concretization of a PredicateState."""
    if state.is_bottom:
        return np.zeros(len(grid), dtype=bool)
    mask = np.ones(len(grid), dtype=bool)
    for column, name in enumerate(names):
        values = grid[:, column]
        column_mask = np.zeros(len(grid), dtype=bool)
        for element in state.elements_of(name):
            low, high = PREDICATE_ELEMENTS[element]
            column_mask |= (values >= low) & (values <= high)
        mask &= column_mask
    return mask


def predicate_gamma(state: PredicateState, names, box: int) -> set:
    """
    This function enumerates the concretization of a PredicateState restricted to names within [-box, box].
    :return: set of integer tuples ordered like names
    """
    # local import: zone depends on this module
    from zoneslice.zone import box_grid  # pylint: disable=import-outside-toplevel

    grid = box_grid(len(names), box)
    return {tuple(int(value) for value in row) for row in grid[predicate_mask(state, grid, names)]}


def interval_gamma(state: IntervalState, names, box: int) -> set:
    """Enumerates the concretization of an IntervalState restricted to names within [-box, box]."""
    from zoneslice.zone import box_grid  # pylint: disable=import-outside-toplevel

    grid = box_grid(len(names), box)
    return {tuple(int(value) for value in row) for row in grid[interval_mask(state, grid, names)]}


def dump_predicates(state: PredicateState) -> str:
    """One ``v in {E1,E3}`` line per variable with 1-based element numbers."""
    if state.is_bottom:
        return "false"
    return "\n".join(
        f"{name} in {{{','.join(f'E{e + 1}' for e in sorted(elements))}}}"
        for name, elements in zip(state.names, state.elements)
    )

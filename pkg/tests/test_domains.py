"""
This module contains all tests for the domains.py file
"""
import logging

import pytest

from zoneslice.domains import (
    ALL_ELEMENTS,
    INF,
    PREDICATE_ELEMENTS,
    DomainError,
    IntervalState,
    PredicateState,
    element_of,
    elements_overlapping,
    format_bound,
    interval_gamma,
    interval_join_widen,
    interval_leq,
    interval_transfer,
    predicate_gamma,
    predicate_join,
    predicate_leq,
    predicate_transfer,
)
from zoneslice.ir_frontend import AssignStmt, AssumeStmt, Expr, Guard, NopStmt


def _assume(lhs, op, var=None, const=0):
    return AssumeStmt(Guard(lhs, op, Expr(var, const)))


def _intervals(**ranges):
    names = tuple(ranges)
    return IntervalState(names, tuple(low for low, _ in ranges.values()), tuple(high for _, high in ranges.values()))


def _predicates(**elements):
    return PredicateState(tuple(elements), tuple(frozenset(value) for value in elements.values()))


@pytest.fixture(name="top_xy")
def fixture_top_xy():
    """
    This fixture returns the unconstrained IntervalState over x and y.
    :return: IntervalState
    """
    return IntervalState.top(("x", "y"))


@pytest.mark.parametrize(
    "stmt, expected_x",
    [
        (AssignStmt("x", Expr(None, 3)), (3, 3)),
        (AssignStmt("x", Expr("y", 1)), (1, 3)),
        (AssignStmt("x", None), (-INF, INF)),
        (_assume("x", "<=", const=5), (0, 5)),
        (_assume("x", ">=", const=2), (2, 10)),
        (_assume("x", "<", const=5), (0, 4)),
        (_assume("x", "!=", const=1), (0, 10)),
        (NopStmt(), (0, 10)),
    ],
)
def test_interval_transfer(stmt, expected_x):
    """
    This function tests interval_transfer on x in [0, 10] and y in [0, 2]
    :param stmt: the statement to apply
    :param expected_x: expected range of x afterwards
    """
    state = _intervals(x=(0, 10), y=(0, 2))
    assert interval_transfer(state, stmt).range_of("x") == expected_x


def test_disequality_logged(caplog):
    """
    This function tests that an assume that refines no bound is reported at debug level
    :param caplog: pytest log capture
    """
    state = _intervals(x=(0, 10))
    with caplog.at_level(logging.DEBUG, logger="zoneslice.domains"):
        assert interval_transfer(state, _assume("x", "!=", const=1)) == state
    assert "assume x != 1 refines no bound" in caplog.text


def test_interval_transfer_relational():
    """
    This function tests that an equality guard narrows both variables to their overlap
    """
    result = interval_transfer(_intervals(x=(0, 10), y=(3, 5)), _assume("x", "==", "y"))
    assert result.range_of("x") == (3, 5)
    assert result.range_of("y") == (3, 5)


@pytest.mark.parametrize(
    "stmt",
    [_assume("x", ">=", const=1), _assume("x", "<=", "x", -1)],
)
def test_interval_transfer_infeasible(stmt):
    """
    This function tests that an unsatisfiable guard gives Bottom
    :param stmt: the unsatisfiable guard
    """
    result = interval_transfer(_intervals(x=(0, 0)), stmt)
    assert result.is_bottom
    assert str(result) == "false"
    assert interval_transfer(result, AssignStmt("x", Expr(None, 1))).is_bottom


def test_interval_join_widen():
    """
    This function tests the join and the widening of intervals
    """
    first, second = _intervals(x=(0, 1)), _intervals(x=(3, 4))
    assert interval_join_widen(first, second).range_of("x") == (0, 4)
    assert interval_join_widen(first, _intervals(x=(0, 2)), widen=True).range_of("x") == (0, INF)
    assert interval_join_widen(first, _intervals(x=(-1, 1)), widen=True).range_of("x") == (-INF, 1)
    assert interval_join_widen(IntervalState.bottom(("x",)), first) == first
    assert interval_join_widen(first, IntervalState.bottom(("x",))) == first


def test_interval_leq(top_xy):
    """
    This function tests the inclusion of IntervalStates
    :param top_xy: unconstrained state
    """
    small = _intervals(x=(0, 1), y=(0, 0))
    assert interval_leq(small, top_xy)
    assert not interval_leq(top_xy, small)
    assert interval_leq(IntervalState.bottom(("x", "y")), small)
    assert not interval_leq(small, IntervalState.bottom(("x", "y")))


def test_interval_universe_mismatch(top_xy):
    """
    This function tests that states over different variables cannot be combined
    :param top_xy: unconstrained state
    """
    with pytest.raises(DomainError) as error:
        interval_join_widen(top_xy, IntervalState.top(("x",)))
    assert str(error.value).startswith("Domain Error")


def test_interval_gamma_and_dump():
    """
    This function tests the enumeration and the text form of IntervalStates
    """
    state = _intervals(x=(0, 0), w=(-INF, 2))
    assert interval_gamma(state, ("x",), 2) == {(0,)}
    assert len(interval_gamma(state, ("x", "w"), 2)) == 5
    assert str(state) == "x in [0, 0]\nw in [-inf, 2]"
    assert str(IntervalState.top(("x",))) == "x in [-inf, +inf]"


@pytest.mark.parametrize(
    "value, expected_result",
    [(-7, 0), (-5, 0), (-3, 1), (-1, 2), (0, 3), (1, 4), (4, 5), (9, 6)],
)
def test_element_of(value, expected_result):
    """
    This function tests the element lookup of the Predicate domain
    :param value: integer
    :param expected_result: index of its element
    """
    assert element_of(value) == expected_result


@pytest.mark.parametrize(
    "bounds, expected_result",
    [((-1, 1), {2, 3, 4}), ((-INF, 0), {0, 1, 2, 3}), ((3, 3), {5}), ((6, INF), {6})],
)
def test_elements_overlapping(bounds, expected_result):
    """
    This function tests which elements intersect a range
    :param bounds: the range
    :param expected_result: indices of the intersecting elements
    """
    assert elements_overlapping(*bounds) == frozenset(expected_result)


def test_predicate_elements_partition():
    """
    This function tests that every integer in [-100, 100] lies in exactly one Predicate element, the one
    element_of returns
    """
    for value in range(-100, 101):
        containing = [index for index, (low, high) in enumerate(PREDICATE_ELEMENTS) if low <= value <= high]
        assert containing == [element_of(value)]
        assert elements_overlapping(value, value) == frozenset(containing)


@pytest.mark.parametrize(
    "y_elements, stmt, expected_x",
    [
        ({3}, AssignStmt("x", Expr(None, 0)), {3}),
        ({3}, AssignStmt("x", Expr("y", 1)), {4}),
        ({5}, AssignStmt("x", Expr("y", -3)), {2, 3, 4}),
        ({6}, AssignStmt("x", Expr("y", 1)), {6}),
        ({3}, AssignStmt("x", None), ALL_ELEMENTS),
        ({3}, _assume("x", "<=", const=0), {0, 1, 2, 3}),
        ({3}, _assume("x", ">=", const=2), {5, 6}),
        ({3}, _assume("x", "<=", "y"), {0, 1, 2, 3}),
        ({3}, _assume("x", ">", "y"), {4, 5, 6}),
        ({3}, _assume("x", "!=", const=0), ALL_ELEMENTS),
    ],
)
def test_predicate_transfer(y_elements, stmt, expected_x):
    """
    This function tests predicate_transfer with x unconstrained
    :param y_elements: elements of y
    :param stmt: the statement to apply
    :param expected_x: expected elements of x afterwards
    """
    state = _predicates(x=ALL_ELEMENTS, y=y_elements)
    result = predicate_transfer(state, stmt)
    assert result.elements_of("x") == frozenset(expected_x)
    assert result.elements_of("y") == frozenset(y_elements)


def test_predicate_transfer_infeasible():
    """
    This function tests that dropping every element of a variable gives Bottom
    """
    result = predicate_transfer(_predicates(x={3}), _assume("x", ">=", const=1))
    assert result.is_bottom
    assert result == PredicateState.bottom(("x",))
    assert str(result) == "false"
    assert predicate_transfer(result, NopStmt()) is result


def test_predicate_join_leq():
    """
    This function tests the union and the inclusion of PredicateStates
    """
    first, second = _predicates(x={2}), _predicates(x={4})
    joined = predicate_join(first, second)
    assert joined.elements_of("x") == frozenset({2, 4})
    assert predicate_leq(first, joined)
    assert not predicate_leq(joined, first)
    assert predicate_join(PredicateState.bottom(("x",)), first) == first
    assert predicate_leq(PredicateState.bottom(("x",)), first)
    with pytest.raises(DomainError):
        predicate_leq(first, PredicateState.top(("y",)))


def test_predicate_gamma_and_dump():
    """
    This function tests the enumeration of a non-convex PredicateState and its text form
    """
    state = _predicates(x={2, 4})
    assert predicate_gamma(state, ("x",), 2) == {(-1,), (1,)}
    assert str(state) == "x in {E3,E5}"
    assert str(_predicates(x={3})) == "x in {E4}"


@pytest.mark.parametrize(
    "value, expected_result",
    [(3.0, "3"), (-2, "-2"), (INF, "+inf"), (-INF, "-inf")],
)
def test_format_bound(value, expected_result):
    """
    This function tests the text form of bounds
    :param value: bound
    :param expected_result: its text
    """
    assert format_bound(value) == expected_result

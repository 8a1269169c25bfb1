"""
This module contains the property based tests: the closure, the reductions and the minimizations checked against
independent oracles on random states and random programs.
"""
import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from zoneslice.dataflow import replay_delta, run_fixpoint, transfer_with_delta
from zoneslice.domains import (
    element_of,
    interval_join_widen,
    interval_leq,
    interval_transfer,
    predicate_join,
    predicate_leq,
    predicate_transfer,
)
from zoneslice.harness import Outcome, outcome_of, smallest_changed_set
from zoneslice.ir_frontend import (
    AssignStmt,
    AssumeStmt,
    Expr,
    Guard,
    ParseError,
    build_cfg,
    parse_program,
    pretty_print,
)
from zoneslice.minimizer import (
    MinMethod,
    larsen_reduce,
    min_changed_set,
    min_neighbor_variables,
    node_neighbors_arbitrary,
    node_neighbors_closed,
    remove_spurious,
    slice_is_sound,
)
from zoneslice.zone import (
    TOP,
    Z0,
    ZoneState,
    box_grid,
    close,
    enumerate_box,
    is_bottom,
    join,
    meet_edge,
    to_intervals,
    widen,
    zone_equals,
    zone_leq,
    zone_mask,
)
from .oracles import (
    OPERATORS,
    PROGRAM_VARIABLES,
    box_for,
    floyd_warshall,
    interval_states,
    is_assume,
    predicate_states,
    programs,
    remove_spurious_sequential,
    run_concrete,
    satisfies,
    union_find_component,
    zone_states,
)

SLOW = [HealthCheck.too_slow, HealthCheck.filter_too_much]
MIRRORED = {
    Outcome.MORE: Outcome.LESS,
    Outcome.LESS: Outcome.MORE,
    Outcome.EQUAL: Outcome.EQUAL,
    Outcome.INCOMPARABLE: Outcome.INCOMPARABLE,
}


def _mn_holds(point) -> bool:
    """Whether the minimal neighbours may be checked at a program point: guards must not tighten towards Z0."""
    if not is_assume(point):
        return True
    closed = close(point.after).bounds
    for source, target in point.delta.de:
        if source != Z0 and np.isfinite(closed[Z0, source]):
            return False
        if source == Z0 and np.isfinite(closed[target, Z0]):
            return False
    return True


@st.composite
def zone_pairs(draw, max_vars=3, limit=4):
    """Two random states over the same variables."""
    count = draw(st.integers(1, max_vars))
    first = draw(zone_states(count, count, limit))
    second = draw(zone_states(count, count, limit))
    return first, second


@st.composite
def statements(draw, variables):
    """A random assignment, havoc or guard over the given variables."""
    target = draw(st.sampled_from(variables))
    other = draw(st.sampled_from(variables))
    const = draw(st.integers(-4, 4))
    kind = draw(st.sampled_from(["constant", "relational", "havoc", "assume"]))
    if kind == "constant":
        return AssignStmt(target, Expr(None, const))
    if kind == "relational":
        return AssignStmt(target, Expr(other, const))
    if kind == "havoc":
        return AssignStmt(target, None)
    operator = draw(st.sampled_from([op for op in OPERATORS if op != "!="]))
    return AssumeStmt(Guard(target, operator, Expr(draw(st.sampled_from([other, None])), const)))


@settings(derandomize=True, deadline=None, max_examples=500)
@given(zone_states())
def test_close_matches_floyd_warshall(zone):
    """
    This function tests the closure against a textbook shortest path implementation
    :param zone: random state
    """
    expected = floyd_warshall(zone.bounds.tolist())
    closed = close(zone)
    if expected is None:
        assert closed.is_bottom_matrix()
    else:
        assert np.array_equal(closed.bounds, np.array(expected))
        assert close(closed) is closed


@settings(derandomize=True, deadline=None, max_examples=500, suppress_health_check=SLOW)
@given(zone_states(max_vars=4))
def test_reductions_keep_semantics(zone):
    """
    This function tests that the spurious edge removal and the transitive reduction keep the set of solutions
    :param zone: random state
    """
    closed = close(zone)
    grid = box_grid(closed.dim - 1, 10)
    expected = zone_mask(closed, grid)
    assert np.array_equal(zone_mask(remove_spurious(closed), grid), expected)
    reduced = larsen_reduce(closed)
    assert np.array_equal(zone_mask(reduced, grid), expected)
    assert zone_equals(reduced, closed)
    if not closed.is_bottom_matrix():
        assert {(s, t) for s, t, _ in reduced.edges()} <= {(s, t) for s, t, _ in remove_spurious(closed).edges()}


@settings(derandomize=True, deadline=None, max_examples=300, suppress_health_check=SLOW)
@given(st.data())
def test_connected_components_oracle(data):
    """
    This function tests the connected components against union-find on the edges between program variables
    :param data: hypothesis data
    """
    zone = close(data.draw(zone_states(min_vars=2)))
    assume(not zone.is_bottom_matrix())
    graph = remove_spurious(zone)
    seeds = data.draw(st.sets(st.integers(1, graph.dim - 1), min_size=1))
    nodes = range(1, graph.dim)
    edges = [(s, t) for s, t, _ in graph.edges() if Z0 not in (s, t)]
    result = min_changed_set(zone, seeds, (), MinMethod.CC)
    assert result.variables == frozenset(union_find_component(nodes, edges, seeds))


@settings(derandomize=True, deadline=None, max_examples=300, suppress_health_check=SLOW)
@given(st.data())
def test_neighbourhood_variants(data):
    """
    This function tests that the closed neighbourhood never selects more variables or edges than the arbitrary one,
    and exactly the same variables on closed states without interval constraints
    :param data: hypothesis data
    """
    zero_edges = data.draw(st.booleans())
    zone = close(data.draw(zone_states(zero_edges=zero_edges)))
    assume(not zone.is_bottom_matrix())
    graph = remove_spurious(zone)
    seeds = data.draw(st.sets(st.integers(1, graph.dim - 1), min_size=1))
    closed_result = node_neighbors_closed(graph, seeds)
    arbitrary_result = node_neighbors_arbitrary(graph, seeds)
    closed_vars, arbitrary_vars = closed_result.variables, arbitrary_result.variables
    assert closed_vars <= arbitrary_vars
    assert closed_result.edge_ids <= arbitrary_result.edge_ids
    if not zero_edges:
        assert closed_vars == arbitrary_vars


@st.composite
def guarded_updates(draw):
    """
    A closed state with an updated edge (s, t), where the state has no path from Z0 or from t to s, and the new
    bound of the edge.
    """
    zone = draw(zone_states(min_vars=2))
    source = draw(st.integers(1, zone.dim - 1))
    target = draw(st.sampled_from([v for v in range(1, zone.dim) if v != source]))
    matrix = zone.bounds.copy()
    matrix[[Z0, target], source] = TOP
    closed = close(ZoneState(matrix, zone.names))
    if not closed.is_bottom_matrix() and not np.isinf(closed.bounds[[Z0, target], source]).all():
        matrix[:, source] = TOP
        matrix[source, source] = 0
        closed = close(ZoneState(matrix, zone.names))
    bound = draw(st.integers(-8, 8))
    if not closed.is_bottom_matrix() and bound >= closed.bounds[source, target]:
        bound = int(closed.bounds[source, target]) - 1
    return closed, source, target, bound


@settings(derandomize=True, deadline=None, max_examples=1000, suppress_health_check=SLOW)
@given(guarded_updates())
def test_min_neighbors_target_exclusion(update):
    """
    This function tests that the target of an updated edge keeps its bounds and is not a seed of the minimal
    neighbours when nothing leads from Z0 or from the target to the source
    :param update: closed state, source, target and new bound
    """
    before, source, target, bound = update
    assume(not before.is_bottom_matrix())
    after, delta = meet_edge(before, source, target, bound)
    reduced = remove_spurious(after)
    assert np.isinf(reduced.bounds[target, source])
    assert np.isinf(reduced.bounds[Z0, source])
    assert delta.de == frozenset({(source, target)})
    assert target not in min_neighbor_variables(delta.de)
    name = before.names[target]
    assert to_intervals(after).range_of(name) == to_intervals(before).range_of(name)
    assert slice_is_sound(before, after, min_changed_set(after, delta.dv, delta.de, MinMethod.MN))


def _check_point(point):
    """Soundness, coverage and the smallest set bound of the selections at one Zone program point."""
    methods = [MinMethod.FS, MinMethod.CC, MinMethod.NN] + ([MinMethod.MN] if _mn_holds(point) else [])
    smallest = smallest_changed_set(point.before, point.after)
    for method in methods:
        selection = point.slices[method]
        assert slice_is_sound(point.before, point.after, selection), (point.label, method)
        if smallest is not None and not selection.is_bottom:
            assert len(smallest) <= len(selection.variables), (point.label, method)
    mn = point.slices[MinMethod.MN]
    if point.delta.de and not mn.is_bottom:
        assert min_neighbor_variables(point.delta.de) <= mn.variables
    for larger, smaller in zip(MinMethod, list(MinMethod)[1:]):
        assert point.slices[smaller].edge_ids <= point.slices[larger].edge_ids, point.label


@settings(derandomize=True, deadline=None, max_examples=300, suppress_health_check=SLOW)
@given(programs())
def test_engine_selections(source):
    """
    This function tests the selections of every program point of a random program
    :param source: random .tir program
    """
    result = run_fixpoint(build_cfg(parse_program(source)))
    for point in result.points:
        _check_point(point)
        assert zone_equals(replay_delta(point.before, point.after, point.delta), point.after), point.label


@settings(derandomize=True, deadline=None, max_examples=300, suppress_health_check=SLOW)
@given(
    programs(),
    st.lists(st.integers(-6, 6), min_size=3, max_size=3),
    st.lists(st.integers(-8, 8), min_size=1, max_size=4),
)
def test_domains_cover_executions(source, initial, havoc_values):
    """
    This function tests that every state reached by a concrete execution lies in the invariant of every domain
    :param source: random .tir program
    :param initial: start values of a, b and c
    :param havoc_values: values returned by havoc, round robin
    """
    cfg = build_cfg(parse_program(source))
    results = {domain: run_fixpoint(cfg, domain) for domain in ("zones", "intervals", "predicates")}
    for block, env in run_concrete(cfg, initial, havoc_values):
        assert satisfies(results["zones"].block_in[block], env), (block, env)
        intervals = results["intervals"].block_in[block]
        assert not intervals.is_bottom
        ranges = zip(intervals.names, intervals.lower, intervals.upper)
        assert all(low <= env[name] <= high for name, low, high in ranges)
        predicates = results["predicates"].block_in[block]
        assert all(element_of(env[name]) in predicates.elements_of(name) for name in predicates.names)


@settings(derandomize=True, deadline=None, max_examples=300, suppress_health_check=SLOW)
@given(programs())
def test_pretty_print_round_trip(source):
    """
    This function tests that printing and parsing a program gives the same program
    :param source: random .tir program
    """
    program = parse_program(source)
    text = pretty_print(program)
    assert parse_program(text) == program
    assert pretty_print(parse_program(text)) == text


@settings(derandomize=True, deadline=None, max_examples=500)
@given(st.text(alphabet=st.sampled_from(list("intfhwlevasrxy 0123456789:=<>!+-;(){}\n/@\t")), max_size=60))
def test_parser_fuzz(text):
    """
    This function tests that arbitrary text is either parsed or rejected with a ParseError
    :param text: random text
    """
    try:
        parse_program(text)
    except ParseError as error:
        assert error.line >= 1
        assert error.column >= 1


@settings(derandomize=True, deadline=None, max_examples=200)
@given(zone_pairs())
def test_equality_is_semantic(pair):
    """
    This function tests that two states have equal closed matrices exactly when they have the same solutions
    :param pair: two random states over the same variables
    """
    first, second = pair
    box = box_for(first, second)
    same_solutions = enumerate_box(first, box) == enumerate_box(second, box)
    assert zone_equals(first, second) == same_solutions


@settings(derandomize=True, deadline=None, max_examples=300, suppress_health_check=SLOW)
@given(zone_pairs())
def test_join_is_upper_bound(pair):
    """
    This function tests that the join includes both arguments
    :param pair: two random states over the same variables
    """
    first, second = pair
    joined = join(first, second)
    assert zone_leq(first, joined)
    assert zone_leq(second, joined)
    assert enumerate_box(first, 4) | enumerate_box(second, 4) <= enumerate_box(joined, 4)


@settings(derandomize=True, deadline=None, max_examples=300, suppress_health_check=SLOW)
@given(st.data())
def test_widening_terminates(data):
    """
    This function tests that widening only ever drops bounds, so every widening sequence stabilises
    :param data: hypothesis data
    """
    count = data.draw(st.integers(1, 3))
    start = data.draw(zone_states(count, count))
    assume(not is_bottom(start))
    current = close(start)
    finite = np.isfinite(current.bounds)
    steps = 0
    for zone in data.draw(st.lists(zone_states(count, count), min_size=1, max_size=8)):
        following = widen(current, join(current, zone))
        kept = np.isfinite(following.bounds)
        assert not np.any(kept & ~finite)
        assert np.array_equal(following.bounds[kept], current.bounds[kept])
        if not np.array_equal(following.bounds, current.bounds):
            steps += 1
        current, finite = following, kept
    assert steps <= int(np.sum(np.isfinite(close(start).bounds))) - close(start).dim


@settings(derandomize=True, deadline=None, max_examples=300, suppress_health_check=SLOW)
@given(st.data())
def test_transfer_is_monotone(data):
    """
    This function tests that the Zone transfer functions preserve inclusion
    :param data: hypothesis data
    """
    count = data.draw(st.integers(1, 3))
    smaller = data.draw(zone_states(count, count))
    larger = join(smaller, data.draw(zone_states(count, count)))
    stmt = data.draw(statements(smaller.variables))

    assert zone_leq(transfer_with_delta(smaller, stmt)[0], transfer_with_delta(larger, stmt)[0])


@settings(derandomize=True, deadline=None, max_examples=300, suppress_health_check=SLOW)
@given(st.data())
def test_interval_and_predicate_transfer_monotone(data):
    """
    This function tests that the Interval and Predicate transfer functions preserve inclusion
    :param data: hypothesis data
    """
    names = PROGRAM_VARIABLES[: data.draw(st.integers(1, 3))]
    stmt = data.draw(statements(names))
    smaller = data.draw(interval_states(names))
    larger = interval_join_widen(smaller, data.draw(interval_states(names)))
    assert interval_leq(interval_transfer(smaller, stmt), interval_transfer(larger, stmt))
    smaller = data.draw(predicate_states(names))
    larger = predicate_join(smaller, data.draw(predicate_states(names)))
    assert predicate_leq(predicate_transfer(smaller, stmt), predicate_transfer(larger, stmt))


@settings(derandomize=True, deadline=None, max_examples=300, suppress_health_check=SLOW)
@given(st.data())
def test_interval_widening_steps(data):
    """
    This function tests that interval widening only moves bounds to infinity, so a variable changes at most twice
    :param data: hypothesis data
    """
    names = PROGRAM_VARIABLES[: data.draw(st.integers(1, 3))]
    current = data.draw(interval_states(names))
    steps = 0
    for state in data.draw(st.lists(interval_states(names), min_size=1, max_size=10)):
        following = interval_join_widen(current, interval_join_widen(current, state), widen=True)
        for before, after in zip(current.lower + current.upper, following.lower + following.upper):
            assert after == before or (math.isinf(after) and not math.isinf(before))
        if following != current:
            steps += 1
        current = following
    assert steps <= 2 * len(names)


@settings(derandomize=True, deadline=None, max_examples=300, suppress_health_check=SLOW)
@given(st.data())
def test_spurious_removal_order(data):
    """
    This function tests that removing spurious edges one at a time, in any order, gives the same state
    :param data: hypothesis data
    """
    zone = close(data.draw(zone_states(min_vars=2)))
    assume(not zone.is_bottom_matrix())
    pairs = [(s, t) for s in range(1, zone.dim) for t in range(1, zone.dim) if s != t]
    order = data.draw(st.permutations(pairs))
    expected = remove_spurious_sequential(zone.bounds.tolist(), order)
    assert np.array_equal(remove_spurious(zone).bounds, np.array(expected))


@settings(derandomize=True, deadline=None, max_examples=300, suppress_health_check=SLOW)
@given(zone_pairs())
def test_outcome_is_mirrored(pair):
    """
    This function tests that swapping the two sides of a comparison swaps MORE and LESS and keeps EQUAL and
    INCOMPARABLE, and that an included state is never less precise
    :param pair: two random states over the same variables
    """
    first, second = pair
    grid = box_grid(first.dim - 1, box_for(first, second))
    first_mask, second_mask = zone_mask(first, grid), zone_mask(second, grid)
    outcome = outcome_of(first_mask, second_mask)
    assert outcome_of(second_mask, first_mask) == MIRRORED[outcome]
    if zone_leq(first, second):
        assert outcome in (Outcome.MORE, Outcome.EQUAL)

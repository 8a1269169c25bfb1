"""
This module contains the Zone abstract domain: a difference bound matrix over the program variables and a special
zero variable Z0. Entry bounds[s][t] = b encodes the inequality s - t <= b; an absent edge is stored as +inf.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from zoneslice.domains import IntervalState

Z0 = 0
TOP = np.inf
ENUMERATION_GUARD_BITS = 24


class ZoneError(Exception):
    """
    This class deals with the error handling of the Zone operations.
    """

    def __init__(self, message):  # ignore warning about super-init | pylint: disable=W0231
        self.message = message

    def __str__(self):
        return f"Zone Error: {self.message}"


@dataclass(frozen=True)
class LinearForm:
    """Right-hand side ``var + const`` of an assignment, var being a variable index or None for a constant."""

    var: Optional[int]
    const: int = 0


@dataclass(frozen=True)
class DeltaSet:
    """
    The updated variables (dv, Z0 excluded) and updated edges (de) of one step of the analysis.
    """

    dv: frozenset = frozenset()
    de: frozenset = frozenset()

    def __or__(self, other):
        return DeltaSet(self.dv | other.dv, self.de | other.de)

    def is_empty(self) -> bool:
        """True when the step changed nothing."""
        return not self.dv and not self.de

    @classmethod
    def from_edges(cls, edges, extra_vars=()):
        """Builds a delta from a set of edges; dv gets every endpoint other than Z0 plus extra_vars."""
        edges = frozenset(edges)
        endpoints = {node for edge in edges for node in edge if node != Z0}
        return cls(frozenset(endpoints) | frozenset(extra_vars), edges)


@dataclass(frozen=True, eq=False)
class ZoneState:
    """
    An immutable Zone over a fixed variable universe. ``names`` starts with "Z0"; Bottom is the matrix filled with
    -inf. The closed flag is set by operations whose result satisfies the triangle inequality.
    """

    bounds: np.ndarray
    names: tuple
    closed: bool = False

    def __post_init__(self):
        bounds = np.array(self.bounds, dtype=float)
        if bounds.shape != (len(self.names), len(self.names)):
            raise ZoneError(f"matrix of shape {bounds.shape} does not match {len(self.names)} variables")
        bounds.flags.writeable = False
        object.__setattr__(self, "bounds", bounds)

    def __str__(self):
        return dump_zone(self) or "top"

    @property
    def dim(self) -> int:
        """Number of variables including Z0."""
        return len(self.names)

    @property
    def variables(self) -> tuple:
        """Names of the program variables."""
        return self.names[1:]

    def index(self, name: str) -> int:
        """Returns the index of a variable name; "Z0" maps to 0."""
        try:
            return self.names.index(name)
        except ValueError as error:
            raise ZoneError(f"unknown variable '{name}'") from error

    @classmethod
    def top(cls, variables):
        """The unconstrained state over the given variable names."""
        names = ("Z0", *variables)
        bounds = np.full((len(names), len(names)), TOP)
        np.fill_diagonal(bounds, 0)
        return cls(bounds, names, closed=True)

    @classmethod
    def bottom(cls, variables):
        """The infeasible state over the given variable names."""
        names = ("Z0", *variables)
        return cls(np.full((len(names), len(names)), -np.inf), names, closed=True)

    @classmethod
    def from_constraints(cls, variables, constraints):
        """
        Builds a (non-closed) state from inequalities.
        :param variables: the program variable names
        :param constraints: iterable of (s, t, b) meaning s - t <= b, with names or "Z0"
        :return: ZoneState
        """
        state = cls.top(variables)
        bounds = state.bounds.copy()
        for source, target, bound in constraints:
            s, t = state.index(source), state.index(target)
            if s == t:
                raise ZoneError(f"constraint {source} - {target} relates a variable to itself")
            bounds[s, t] = min(bounds[s, t], bound)
        return cls(bounds, state.names, closed=False)

    def edges(self):
        """Finite off-diagonal entries as sorted (s, t, b) triples; Bottom has none."""
        if self.is_bottom_matrix():
            return []
        rows, cols = np.nonzero(np.isfinite(self.bounds))
        return [(int(s), int(t), self.bounds[s, t]) for s, t in zip(rows, cols) if s != t]

    def is_bottom_matrix(self) -> bool:
        """True for the canonical Bottom matrix, without closing."""
        return bool(self.bounds[0, 0] < 0)


def _check_same_universe(first: ZoneState, second: ZoneState):
    if first.names != second.names:
        raise ZoneError(f"dimension mismatch between {first.names} and {second.names}")


def close(zone: ZoneState) -> ZoneState:
    """
    This function computes the all-pairs shortest path closure of a Zone (Floyd-Warshall on the matrix).
    :param zone: any ZoneState
    :return: closed ZoneState, or Bottom when a negative cycle exists
    """
    if zone.closed:
        return zone
    matrix = zone.bounds.copy()
    for k in range(zone.dim):
        matrix = np.minimum(matrix, matrix[:, k, None] + matrix[None, k, :])
    if np.any(np.diag(matrix) < 0):
        return ZoneState.bottom(zone.variables)
    return ZoneState(matrix, zone.names, closed=True)


def is_bottom(zone: ZoneState) -> bool:
    """True iff the Zone is infeasible."""
    return close(zone).is_bottom_matrix()


def meet_edge(zone: ZoneState, source: int, target: int, bound) -> tuple:
    """
    This function adds the inequality source - target <= bound.
    :return: the new state (closed again when the input was closed) and the DeltaSet of the strictly tightened entry
    """
    if source == target:
        raise ZoneError(f"invalid edge ({source}, {target}): both endpoints are the same variable")
    if zone.is_bottom_matrix() or bound >= zone.bounds[source, target]:
        return zone, DeltaSet()
    matrix = zone.bounds.copy()
    matrix[source, target] = bound
    result = ZoneState(matrix, zone.names, closed=False)
    if zone.closed:
        result = close(result)
    return result, DeltaSet.from_edges({(source, target)})


def forget(zone: ZoneState, var: int) -> ZoneState:
    """
    This function removes every constraint on a variable; the result is closed.
    :param zone: a ZoneState, closed first if needed
    :param var: index of the variable, never Z0
    """
    if var == Z0:
        raise ZoneError("invalid variable: Z0 cannot be forgotten")
    zone = close(zone)
    if zone.is_bottom_matrix():
        return zone
    matrix = zone.bounds.copy()
    matrix[var, :] = TOP
    matrix[:, var] = TOP
    matrix[var, var] = 0
    return ZoneState(matrix, zone.names, closed=True)


def _written_delta(before: ZoneState, after: ZoneState, written, extra_vars):
    changed = {(s, t) for s, t in written if before.bounds[s, t] != after.bounds[s, t]}
    return DeltaSet.from_edges(changed, extra_vars)


def assign(zone: ZoneState, var: int, rhs: Optional[LinearForm]) -> tuple:
    """
    This function applies ``var := rhs`` to a Zone.
    :param zone: the incoming state
    :param var: index of the assigned variable
    :param rhs: a constant, ``u + c`` or ``var + c``; None stands for an unsupported right-hand side (havoc)
    :return: the closed result and its DeltaSet
    """
    zone = close(zone)
    if zone.is_bottom_matrix():
        return zone, DeltaSet()
    if rhs is None:
        return forget(zone, var), DeltaSet(frozenset({var}))
    if rhs.var == var:
        if rhs.const == 0:
            return zone, DeltaSet()
        # translation keeps the matrix closed
        matrix = zone.bounds.copy()
        matrix[var, :] += rhs.const
        matrix[:, var] -= rhs.const
        matrix[var, var] = 0
        result = ZoneState(matrix, zone.names, closed=True)
        written = [(var, t) for t in range(zone.dim) if t != var] + [(s, var) for s in range(zone.dim) if s != var]
        return result, _written_delta(zone, result, written, {var})
    other = Z0 if rhs.var is None else rhs.var
    matrix = forget(zone, var).bounds.copy()
    matrix[var, other] = rhs.const
    matrix[other, var] = -rhs.const
    result = close(ZoneState(matrix, zone.names, closed=False))
    # both written entries count, changed or not
    return result, DeltaSet.from_edges({(var, other), (other, var)}, {var})


def join(first: ZoneState, second: ZoneState) -> ZoneState:
    """Pointwise maximum of two closed matrices; Bottom is neutral."""
    _check_same_universe(first, second)
    first, second = close(first), close(second)
    if first.is_bottom_matrix():
        return second
    if second.is_bottom_matrix():
        return first
    return ZoneState(np.maximum(first.bounds, second.bounds), first.names, closed=True)


def widen(previous: ZoneState, current: ZoneState) -> ZoneState:
    """
    Standard widening: keeps the entries of previous that current does not exceed, the others become +inf. The
    result is not closed and previous is used as stored.
    """
    _check_same_universe(previous, current)
    if previous.is_bottom_matrix():
        return current
    current = close(current)
    if current.is_bottom_matrix():
        return previous
    matrix = np.where(current.bounds <= previous.bounds, previous.bounds, TOP)
    return ZoneState(matrix, previous.names, closed=False)


def zone_equals(first: ZoneState, second: ZoneState) -> bool:
    """Semantic equality: compares the closed matrices."""
    _check_same_universe(first, second)
    return bool(np.array_equal(close(first).bounds, close(second).bounds))


def zone_leq(first: ZoneState, second: ZoneState) -> bool:
    """True when first is included in second."""
    _check_same_universe(first, second)
    first, second = close(first), close(second)
    if first.is_bottom_matrix():
        return True
    if second.is_bottom_matrix():
        return False
    return bool(np.all(first.bounds <= second.bounds))


def diff_delta(before: ZoneState, after: ZoneState) -> DeltaSet:
    """
    This function computes the delta of a merge or widening step: every entry of the closed matrices that differs.
    Against Bottom every finite entry of the other state counts as changed.
    """
    _check_same_universe(before, after)
    before, after = close(before), close(after)
    if before.is_bottom_matrix() and after.is_bottom_matrix():
        return DeltaSet()
    if before.is_bottom_matrix() or after.is_bottom_matrix():
        state = after if before.is_bottom_matrix() else before
        return DeltaSet.from_edges({(s, t) for s, t, _ in state.edges()}, range(1, state.dim))
    rows, cols = np.nonzero(before.bounds != after.bounds)
    return DeltaSet.from_edges({(int(s), int(t)) for s, t in zip(rows, cols)})


def to_intervals(zone: ZoneState) -> IntervalState:
    """Projects a Zone on its interval constraints: upper = bounds[v][Z0], lower = -bounds[Z0][v]."""
    zone = close(zone)
    if zone.is_bottom_matrix():
        return IntervalState.bottom(zone.variables)
    lower = tuple(float(-zone.bounds[Z0, v]) for v in range(1, zone.dim))
    upper = tuple(float(zone.bounds[v, Z0]) for v in range(1, zone.dim))
    return IntervalState(zone.variables, lower, upper)


@lru_cache(maxsize=16)
def box_grid(count: int, box: int) -> np.ndarray:
    """
    This function lists all integer vectors of [-box, box]^count, one per row.
    :return: read-only int32 array of shape ((2 * box + 1) ** count, count)
    """
    if count * math.log2(2 * box + 1) > ENUMERATION_GUARD_BITS:
        raise ZoneError(
            f"refusing to enumerate {count} variables over [-{box}, {box}]: more than "
            f"{ENUMERATION_GUARD_BITS} bits of search space"
        )
    if count == 0:
        grid = np.zeros((1, 0), dtype=np.int32)
        grid.flags.writeable = False
        return grid
    axis = np.arange(-box, box + 1, dtype=np.int32)
    grid = np.stack(np.meshgrid(*([axis] * count), indexing="ij"), axis=-1).reshape(-1, count)
    grid.flags.writeable = False
    return grid


def edge_mask(edges, grid: np.ndarray, columns) -> np.ndarray:
    """
    This function evaluates a conjunction of inequalities on every row of a grid.
    :param edges: (s, t, b) triples over variable indices
    :param grid: integer vectors, one per row
    :param columns: the variable index of each grid column
    :return: boolean mask of the satisfying rows
    """
    position = {var: column for column, var in enumerate(columns)}
    mask = np.ones(len(grid), dtype=bool)
    zero = np.zeros(len(grid), dtype=np.int64)
    for source, target, bound in edges:
        if any(var != Z0 and var not in position for var in (source, target)):
            raise ZoneError(f"edge ({source}, {target}) uses a variable outside the enumerated columns")
        left = zero if source == Z0 else grid[:, position[source]].astype(np.int64)
        right = zero if target == Z0 else grid[:, position[target]]
        mask &= left - right <= bound
    return mask


def zone_mask(zone: ZoneState, grid: np.ndarray) -> np.ndarray:
    """Membership of every grid row (one column per program variable) in the concretization of a Zone."""
    if is_bottom(zone):
        return np.zeros(len(grid), dtype=bool)
    return edge_mask(zone.edges(), grid, range(1, zone.dim))


def enumerate_box(zone: ZoneState, box: int) -> set:
    """
    This function enumerates the concretization of a Zone within [-box, box] for every variable, Z0 fixed to 0.
    :return: set of integer tuples ordered like zone.variables
    """
    grid = box_grid(zone.dim - 1, box)
    return {tuple(int(value) for value in row) for row in grid[zone_mask(zone, grid)]}


def dump_zone(zone: ZoneState) -> str:
    """One inequality per line ``s - t <= b``, sorted by (row, column); Bottom prints as ``false``."""
    if zone.is_bottom_matrix():
        return "false"
    return "\n".join(f"{zone.names[s]} - {zone.names[t]} <= {int(b)}" for s, t, b in zone.edges())

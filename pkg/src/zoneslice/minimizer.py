"""
This module contains the minimal changed set algorithms. Given a Zone after a step of the analysis and the sets of
updated variables (dv) and updated edges (de), each algorithm selects the inequalities that may have been affected,
so that a comparison with another domain can be restricted to them.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum

import networkx as nx
import numpy as np

from zoneslice.zone import TOP, Z0, ZoneState, close, is_bottom

logger = logging.getLogger(__name__)


class MinimizerError(Exception):
    """
    This class deals with contract violations of the minimization algorithms.
    """

    def __init__(self, message):  # ignore warning about super-init | pylint: disable=W0231
        self.message = message

    def __str__(self):
        return f"Minimizer Error: {self.message}"


class MinMethod(Enum):
    """FS keeps the full state; CC, NN and MN are successively tighter selections."""

    FS = "fs"
    CC = "cc"
    NN = "nn"
    MN = "mn"


@dataclass(frozen=True)
class Subgraph:
    """
    A selection of inequalities from a Zone: the variables it covers (Z0 never included) and the edges (s, t, b),
    sorted by (s, t).
    """

    variables: frozenset
    edges: tuple
    names: tuple = field(compare=False)
    is_bottom: bool = False

    def __str__(self):
        return dump_subgraph(self)

    @property
    def edge_ids(self) -> frozenset:
        """The (s, t) identifiers of the inequalities."""
        return frozenset((s, t) for s, t, _ in self.edges)

    @property
    def variable_names(self) -> list:
        """Names of the covered variables in index order."""
        return [self.names[var] for var in sorted(self.variables)]

    @classmethod
    def empty(cls, names, bottom=False):
        """The selection without variables or edges."""
        return cls(frozenset(), (), tuple(names), bottom)


def _subgraph(zone: ZoneState, variables, keep) -> Subgraph:
    edges = tuple((s, t, b) for s, t, b in zone.edges() if keep(s, t))
    return Subgraph(frozenset(variables) - {Z0}, edges, zone.names)


def _check_seeds(dv):
    if not dv:
        raise MinimizerError("the set of updated variables is empty")
    if Z0 in dv:
        raise MinimizerError("Z0 cannot be an updated variable")


def remove_spurious(zone: ZoneState) -> ZoneState:
    """
    This function removes every edge (s, t) between variables with an interval constraint when
    bounds[s][t] >= bounds[s][Z0] + bounds[Z0][t]: the path through Z0 already implies it.
    :param zone: a ZoneState; Bottom is returned unchanged
    :return: the reduced state, flagged as not closed
    """
    if zone.is_bottom_matrix():
        return zone
    matrix = zone.bounds.copy()
    candidates = np.array(
        [v for v in range(1, zone.dim) if np.isfinite(matrix[v, Z0]) or np.isfinite(matrix[Z0, v])], dtype=int
    )
    if len(candidates) > 1:
        block = np.ix_(candidates, candidates)
        through_zero = matrix[candidates, Z0][:, None] + matrix[Z0, candidates][None, :]
        spurious = matrix[block] >= through_zero
        np.fill_diagonal(spurious, False)
        logger.debug("removing %d spurious edges", int(np.sum(spurious & np.isfinite(matrix[block]))))
        matrix[block] = np.where(spurious, TOP, matrix[block])
    return ZoneState(matrix, zone.names, closed=False)


def connected_components(graph: ZoneState, dv) -> Subgraph:
    """
    This function selects the undirected components of the updated variables. Z0 is left out of the traversal, so
    interval constraints never connect two variables.
    :param graph: a spurious-reduced ZoneState
    :param dv: indices of the updated variables
    :return: Subgraph of the components with every edge touching them
    """
    _check_seeds(dv)
    undirected = nx.Graph()
    undirected.add_nodes_from(range(1, graph.dim))
    undirected.add_edges_from((s, t) for s, t, _ in graph.edges() if Z0 not in (s, t))
    variables = set().union(*(nx.node_connected_component(undirected, v) for v in dv))
    return _subgraph(graph, variables, lambda s, t: s in variables or t in variables)


def _reachability_graph(graph: ZoneState) -> nx.DiGraph:
    """Directed constraint graph in which Z0 is a sink."""
    directed = nx.DiGraph()
    directed.add_nodes_from(range(graph.dim))
    directed.add_edges_from((s, t) for s, t, _ in graph.edges() if s != Z0)
    return directed


def node_neighbors_arbitrary(graph: ZoneState, dv) -> Subgraph:
    """
    This function selects, per updated variable v, its backward reachable set R-(v) and forward reachable set R+(v).
    Z0 may be reached but is never expanded. An edge is kept when it touches an updated variable or when both endpoints
    lie in R-(v) or R+(v) of the same v, so the interval bounds of the seeds are always part of the selection.
    :param graph: a spurious-reduced ZoneState, closed or not
    :param dv: indices of the updated variables
    """
    _check_seeds(dv)
    directed = _reachability_graph(graph)
    regions = [{v} | nx.ancestors(directed, v) | nx.descendants(directed, v) for v in sorted(dv)]
    variables = set().union(*regions)

    def keep(s, t):
        return s in dv or t in dv or any(s in region and t in region for region in regions)

    return _subgraph(graph, variables, keep)


def node_neighbors_closed(graph: ZoneState, dv) -> Subgraph:
    """
    This function selects the edges incident to an updated variable. On a closed reduced state this is the same
    neighbourhood as node_neighbors_arbitrary, computed with one pass over the row and column of each variable.
    """
    _check_seeds(dv)
    selected = []
    for v in sorted(dv):
        row = np.flatnonzero(np.isfinite(graph.bounds[v, :]))
        column = np.flatnonzero(np.isfinite(graph.bounds[:, v]))
        selected.extend((v, int(t)) for t in row if t != v)
        selected.extend((int(s), v) for s in column if s != v)
    selected = set(selected)
    variables = {node for edge in selected for node in edge} | set(dv)
    return _subgraph(graph, variables, lambda s, t: (s, t) in selected)


def min_neighbor_variables(de) -> frozenset:
    """
    This function keeps one variable per updated edge (s, t): t when s is Z0, otherwise s. The other endpoint keeps
    its previous relation to the rest of the state.
    """
    return frozenset(t if s == Z0 else s for s, t in de)


def min_neighbors(graph: ZoneState, de, closed: bool = True) -> Subgraph:
    """
    This function selects the node neighbours of the variables chosen by min_neighbor_variables.
    :param graph: a spurious-reduced ZoneState
    :param de: the updated edges
    :param closed: whether graph was reduced from a closed state
    """
    if not de:
        raise MinimizerError("the set of updated edges is empty")
    variables = min_neighbor_variables(de)
    return node_neighbors_closed(graph, variables) if closed else node_neighbors_arbitrary(graph, variables)


def full_state(graph: ZoneState) -> Subgraph:
    """Every variable and every finite edge of the state."""
    return _subgraph(graph, range(1, graph.dim), lambda s, t: True)


def min_changed_set(zone: ZoneState, dv, de, method: MinMethod, closed: bool = True) -> Subgraph:
    """
    This function removes the spurious edges of a Zone and selects the inequalities affected by an update.
    :param zone: the state after the update
    :param dv: indices of the updated variables
    :param de: the updated edges; MN falls back to dv when it is empty
    :param method: MinMethod to apply
    :param closed: close the state first and use the neighbourhood variant for closed states
    :return: Subgraph; the empty Subgraph for Bottom
    """
    if is_bottom(zone):
        return Subgraph.empty(zone.names, bottom=True)
    graph = remove_spurious(close(zone) if closed else zone)
    if method == MinMethod.FS:
        return full_state(graph)
    if method == MinMethod.CC:
        return connected_components(graph, dv)
    if method == MinMethod.NN:
        return node_neighbors_closed(graph, dv) if closed else node_neighbors_arbitrary(graph, dv)
    if not de:
        logger.debug("no updated edges, minimal neighbours start from the updated variables")
        return node_neighbors_closed(graph, dv) if closed else node_neighbors_arbitrary(graph, dv)
    return min_neighbors(graph, de, closed)


def larsen_reduce(zone: ZoneState) -> ZoneState:
    """
    This function removes every edge implied by a two-hop path through any other node, one edge at a time, so that
    the closure of what is left never changes. Edges between program variables go first, Z0 edges after.
    :param zone: a closed ZoneState
    :return: the reduced state, flagged as not closed
    """
    zone = close(zone)
    if zone.is_bottom_matrix():
        return zone
    matrix = zone.bounds.copy()
    pairs = [(s, t) for s, t, _ in zone.edges()]
    for phase in (False, True):
        for s, t in pairs:
            if (Z0 in (s, t)) != phase:
                continue
            through = matrix[s, :] + matrix[:, t]
            through[[s, t]] = TOP
            if np.min(through) <= matrix[s, t]:
                matrix[s, t] = TOP
    return ZoneState(matrix, zone.names, closed=False)


def slice_is_sound(before: ZoneState, after: ZoneState, sub: Subgraph) -> bool:
    """
    This function checks that a selection covers a step: the closed states before and after agree on every entry
    between variables outside the selection (Z0 counts as outside).
    """
    before, after = close(before), close(after)
    if before.is_bottom_matrix() or after.is_bottom_matrix():
        return True
    outside = [v for v in range(after.dim) if v not in sub.variables]
    block = np.ix_(outside, outside)
    return bool(np.array_equal(before.bounds[block], after.bounds[block]))


def dump_subgraph(sub: Subgraph) -> str:
    """A ``vars:`` header line followed by the inequalities in the format of dump_zone."""
    if sub.is_bottom:
        return "vars:\nfalse"
    lines = [" ".join(["vars:", *sub.variable_names])]
    lines.extend(f"{sub.names[s]} - {sub.names[t]} <= {int(b)}" for s, t, b in sub.edges)
    return "\n".join(lines)

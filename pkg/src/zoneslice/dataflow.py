"""
This module contains the worklist fixpoint engine. It runs any of the three domains over a Cfg and records, per
program point, the state before and after the step. For Zones every step also carries its DeltaSet and the
selections of the four minimization methods.
"""
import heapq
import logging
from collections import Counter
from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Callable, Optional

import numpy as np

from zoneslice.domains import (
    IntervalState,
    PredicateState,
    dump_intervals,
    dump_predicates,
    interval_join_widen,
    interval_leq,
    interval_transfer,
    predicate_join,
    predicate_leq,
    predicate_transfer,
)
from zoneslice.ir_frontend import AssignStmt, AssumeStmt, Cfg, NopStmt
from zoneslice.minimizer import MinMethod, Subgraph, min_changed_set, remove_spurious
from zoneslice.zone import (
    Z0,
    DeltaSet,
    LinearForm,
    ZoneState,
    assign,
    close,
    diff_delta,
    dump_zone,
    join,
    meet_edge,
    widen,
    zone_equals,
    zone_leq,
)

logger = logging.getLogger(__name__)

WIDEN_DELAY = 2
VISIT_BUDGET = 1000
DOMAINS = ("zones", "intervals", "predicates")


class AnalysisError(Exception):
    """
    This class deals with the error handling of the fixpoint engine.
    """

    def __init__(self, message):  # ignore warning about super-init | pylint: disable=W0231
        self.message = message

    def __str__(self):
        return f"Analysis Error: {self.message}"


def transfer_with_delta(zone: ZoneState, stmt) -> tuple:
    """
    This function applies a statement to a Zone and reports what it changed. de holds the written entries whose
    bound changed; dv holds their endpoints and the assigned variables. An entry changed by the closure with neither
    endpoint in dv adds t when the entry is (Z0, t) and s otherwise.
    :param zone: incoming ZoneState
    :param stmt: AssignStmt, AssumeStmt or NopStmt
    :return: (closed ZoneState, DeltaSet)
    """
    zone = close(zone)
    if zone.is_bottom_matrix() or isinstance(stmt, NopStmt):
        return zone, DeltaSet()
    if isinstance(stmt, AssignStmt):
        target = zone.index(stmt.target)
        rhs = None
        if stmt.rhs is not None:
            rhs = LinearForm(None if stmt.rhs.var is None else zone.index(stmt.rhs.var), stmt.rhs.const)
        result, delta = assign(zone, target, rhs)
    else:
        result, delta = _assume(zone, stmt)
    if result.is_bottom_matrix():
        return result, DeltaSet()
    updated = set(delta.dv)
    for s, t in sorted(diff_delta(zone, result).de):
        if s not in updated and t not in updated:
            updated.add(t if s == Z0 else s)
    return result, DeltaSet(frozenset(updated), delta.de)


def merge_delta(before: ZoneState, after: ZoneState) -> DeltaSet:
    """
    This function computes the delta of a merge or widening step on the spurious-reduced closed states, so a relation
    that only follows from two interval constraints does not count as changed. Against Bottom it falls back to
    diff_delta.
    """
    before, after = close(before), close(after)
    if before.is_bottom_matrix() or after.is_bottom_matrix():
        return diff_delta(before, after)
    rows, cols = np.nonzero(remove_spurious(before).bounds != remove_spurious(after).bounds)
    return DeltaSet.from_edges({(int(s), int(t)) for s, t in zip(rows, cols)})


def _assume(zone: ZoneState, stmt: AssumeStmt) -> tuple:
    constraints = None if stmt.opaque else stmt.guard.difference_constraints()
    if not constraints:
        return zone, DeltaSet()
    delta = DeltaSet()
    for source, target, const in constraints:
        s = Z0 if source is None else zone.index(source)
        t = Z0 if target is None else zone.index(target)
        if s == t:
            if const < 0:
                return ZoneState.bottom(zone.variables), DeltaSet()
            continue
        zone, step = meet_edge(zone, s, t, const)
        delta = delta | step
    return zone, delta


def _zone_transfer(state, stmt):
    return transfer_with_delta(state, stmt)[0]


# all operations the engine needs per domain
DOMAIN_OPS = {
    "zones": SimpleNamespace(
        top=ZoneState.top,
        bottom=ZoneState.bottom,
        join=join,
        widen=widen,
        transfer=_zone_transfer,
        equals=zone_equals,
        leq=zone_leq,
        dump=lambda state: dump_zone(close(state)),
    ),
    "intervals": SimpleNamespace(
        top=IntervalState.top,
        bottom=IntervalState.bottom,
        join=interval_join_widen,
        widen=lambda previous, current: interval_join_widen(previous, current, widen=True),
        transfer=interval_transfer,
        equals=lambda first, second: first == second,
        leq=interval_leq,
        dump=dump_intervals,
    ),
    "predicates": SimpleNamespace(
        top=PredicateState.top,
        bottom=PredicateState.bottom,
        join=predicate_join,
        # finite lattice: no widening needed
        widen=predicate_join,
        transfer=predicate_transfer,
        equals=lambda first, second: first == second,
        leq=predicate_leq,
        dump=dump_predicates,
    ),
}


def get_domain_ops(domain: str) -> SimpleNamespace:
    """Returns the operations of a domain by name."""
    try:
        return DOMAIN_OPS[domain]
    except KeyError as error:
        raise AnalysisError(f"unknown domain '{domain}', choose one of {', '.join(DOMAINS)}") from error


@dataclass
class ProgramPoint:
    """
    One recorded step. Labels are ``B{b}.in`` for merges, ``B{b}.{i}`` for the i-th statement of block b and
    ``B{u}->B{v}`` for the assume on a branch edge; the two edges of one branch share the group ``B{u}.branch``.
    """

    label: str
    block: int
    kind: str
    group: str
    stmt: Optional[object]
    before: object
    after: object
    delta: Optional[DeltaSet] = None
    slices: dict = field(default_factory=dict)


@dataclass
class AnalysisResult:
    """States per block and the recorded program points of one run."""

    cfg: Cfg
    domain: str
    block_in: dict
    block_out: dict
    points: list
    visits: Counter

    def point(self, label: str) -> ProgramPoint:
        """Returns the program point with the given label."""
        for point in self.points:
            if point.label == label:
                return point
        raise AnalysisError(f"no program point '{label}' in {self.cfg.name}")

    def dump(self) -> str:
        """Text dump of the state after every program point."""
        ops = get_domain_ops(self.domain)
        return "\n".join(f"# point {point.label}\n{ops.dump(point.after)}".rstrip() for point in self.points) + "\n"


def _edge_state(ops, cfg, block_out, source, target):
    assume = cfg.graph.edges[source, target]["assume"]
    state = block_out[source]
    return state if assume is None else ops.transfer(state, assume)


def _incoming(ops, cfg, block_out, block):
    combined = ops.top(cfg.variables) if block == cfg.entry else None
    for pred in cfg.predecessors(block):
        if pred in block_out:
            state = _edge_state(ops, cfg, block_out, pred, block)
            combined = state if combined is None else ops.join(combined, state)
    return combined if combined is not None else ops.bottom(cfg.variables)


def _run_block(ops, cfg, block, state):
    for stmt in cfg.statements(block):
        state = ops.transfer(state, stmt)
    return state


def run_fixpoint(
    cfg: Cfg,
    domain: str = "zones",
    trace: Optional[Callable[[str], None]] = None,
    widen_delay: int = WIDEN_DELAY,
    visit_budget: int = VISIT_BUDGET,
    closed: bool = True,
) -> AnalysisResult:
    """
    This function computes the fixpoint of a domain over a Cfg with a worklist ordered by block id. Widen points use
    the plain join on their first widen_delay visits and widening afterwards.
    :param cfg: control flow graph
    :param domain: "zones", "intervals" or "predicates"
    :param trace: callback receiving one line per worklist step
    :param widen_delay: number of visits before widening starts
    :param visit_budget: maximum number of visits per block
    :param closed: for Zones, whether the selections use the closed neighbourhood variant
    :return: AnalysisResult with program points and, for Zones, deltas and selections
    """
    ops = get_domain_ops(domain)
    block_in, block_out, visits = {}, {}, Counter()
    worklist, queued = [cfg.entry], {cfg.entry}
    while worklist:
        block = heapq.heappop(worklist)
        queued.discard(block)
        visits[block] += 1
        if visits[block] > visit_budget:
            raise AnalysisError(f"block B{block} of {cfg.name} exceeded the budget of {visit_budget} visits")
        combined = _incoming(ops, cfg, block_out, block)
        previous = block_in.get(block)
        if previous is not None and block in cfg.widen_points and visits[block] > widen_delay:
            combined = ops.widen(previous, ops.join(previous, combined))
        changed = previous is None or not ops.equals(previous, combined)
        line = f"visit block={block} domain={domain} changed={changed}"
        logger.debug(line)
        if trace is not None:
            trace(line)
        if not changed:
            continue
        block_in[block] = combined
        block_out[block] = _run_block(ops, cfg, block, combined)
        for succ, _ in cfg.successors(block):
            if succ not in queued:
                heapq.heappush(worklist, succ)
                queued.add(succ)
    result = AnalysisResult(cfg, domain, block_in, block_out, [], visits)
    result.points = _record_points(ops, result)
    if domain == "zones":
        for point in result.points:
            point.slices = compute_slices(point, closed)
    return result


def _record_points(ops, result: AnalysisResult) -> list:
    cfg, points = result.cfg, []
    for block in cfg.blocks:
        if block not in result.block_in:
            continue
        preds = cfg.predecessors(block)
        if len(preds) + (block == cfg.entry) >= 2:
            forward = [pred for pred in preds if not cfg.is_back_edge(pred, block) and pred in result.block_out]
            if block == cfg.entry or not forward:
                before = ops.top(cfg.variables)
            else:
                before = _edge_state(ops, cfg, result.block_out, forward[0], block)
            points.append(_point(f"B{block}.in", block, "merge", None, before, result.block_in[block], result.domain))
        state = result.block_in[block]
        for index, stmt in enumerate(cfg.statements(block)):
            point = _point(f"B{block}.{index}", block, "stmt", stmt, state, None, result.domain)
            state = point.after
            points.append(point)
        for succ, data in cfg.successors(block):
            if data["assume"] is not None:
                point = _point(f"B{block}->B{succ}", block, "edge", data["assume"], state, None, result.domain)
                point.group = f"B{block}.branch"
                points.append(point)
    return points


def _point(label, block, kind, stmt, before, after, domain) -> ProgramPoint:
    delta = None
    if domain == "zones":
        if stmt is None:
            delta = merge_delta(before, after)
        else:
            after, delta = transfer_with_delta(before, stmt)
    elif stmt is not None:
        after = get_domain_ops(domain).transfer(before, stmt)
    return ProgramPoint(label, block, kind, label, stmt, before, after, delta)


def compute_slices(point: ProgramPoint, closed: bool = True) -> dict:
    """
    This function computes the selection of every MinMethod for a Zone program point. A Bottom state has empty
    selections; a step without updated variables is represented by the full state for every method.
    """
    zone = point.after
    if close(zone).is_bottom_matrix():
        return {method: Subgraph.empty(zone.names, bottom=True) for method in MinMethod}
    full = min_changed_set(zone, (), (), MinMethod.FS, closed)
    if not point.delta.dv:
        return {method: full for method in MinMethod}
    slices = {MinMethod.FS: full}
    for method in (MinMethod.CC, MinMethod.NN, MinMethod.MN):
        slices[method] = min_changed_set(zone, point.delta.dv, point.delta.de, method, closed)
    return slices


def replay_delta(before: ZoneState, after: ZoneState, delta: DeltaSet) -> ZoneState:
    """
    This function rebuilds the state after a step from the state before it: every entry in the row or column of an
    updated variable is taken from after, the rest from before.
    """
    before, after = close(before), close(after)
    if before.is_bottom_matrix() or after.is_bottom_matrix():
        return after
    touched = np.zeros(after.dim, dtype=bool)
    touched[list(delta.dv)] = True
    use_after = touched[:, None] | touched[None, :]
    return close(ZoneState(np.where(use_after, after.bounds, before.bounds), after.names))


def check_fixpoint(result: AnalysisResult) -> list:
    """
    This function re-checks a result: the stored input of every block must include what its predecessors send, and
    the stored output must equal the block applied to the stored input.
    :return: list of violation messages, empty for a fixpoint
    """
    ops, cfg, violations = get_domain_ops(result.domain), result.cfg, []
    for block in cfg.blocks:
        if block not in result.block_in:
            continue
        incoming = _incoming(ops, cfg, result.block_out, block)
        if not ops.leq(incoming, result.block_in[block]):
            violations.append(f"B{block}: input does not include the incoming state")
        if not ops.equals(_run_block(ops, cfg, block, result.block_in[block]), result.block_out[block]):
            violations.append(f"B{block}: output differs from the transfer of its input")
    return violations

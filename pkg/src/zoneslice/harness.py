"""
This module contains the comparison harness. Per program point it compares the Zone selections of every
minimization method with the full Interval or Predicate state restricted to the same variables, and aggregates the
outcomes and the size reductions into a report.
"""
import json
import logging
import time
import warnings
from enum import Enum
from itertools import combinations
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from zoneslice.dataflow import run_fixpoint
from zoneslice.domains import (
    PREDICATE_ELEMENTS,
    IntervalState,
    PredicateState,
    interval_mask,
    predicate_mask,
)
from zoneslice.ir_frontend import build_cfg, read_program
from zoneslice.minimizer import MinMethod, Subgraph
from zoneslice.utils import round_all_dict_values
from zoneslice.zone import Z0, ZoneError, ZoneState, box_grid, close, edge_mask

logger = logging.getLogger(__name__)

DEFAULT_BOX = 16
TARGETS = ("intervals", "predicates")
# method -> the method it is measured against
PREDECESSOR = {MinMethod.CC: MinMethod.FS, MinMethod.NN: MinMethod.CC, MinMethod.MN: MinMethod.NN}


class HarnessError(Exception):
    """
    This class deals with the error handling of the comparison harness.
    """

    def __init__(self, message):  # ignore warning about super-init | pylint: disable=W0231
        self.message = message

    def __str__(self):
        return f"Harness Error: {self.message}"


class Outcome(Enum):
    """Precision of the Zone selection relative to the other domain."""

    MORE = "more"
    EQUAL = "equal"
    LESS = "less"
    INCOMPARABLE = "incomparable"


def _restricted(other, names):
    """Hashable view of the other state on the given variables."""
    if isinstance(other, IntervalState):
        return ("intervals", other.is_bottom, tuple(other.range_of(name) for name in names))
    return ("predicates", other.is_bottom, tuple(other.elements_of(name) for name in names))


def _largest_constant(zone_slice: Subgraph, other, names) -> int:
    constants = [abs(b) for _, _, b in zone_slice.edges]
    if isinstance(other, IntervalState) and not other.is_bottom:
        for name in names:
            constants.extend(abs(bound) for bound in other.range_of(name) if np.isfinite(bound))
    elif isinstance(other, PredicateState):
        constants.extend(abs(bound) for element in PREDICATE_ELEMENTS for bound in element if np.isfinite(bound))
    return int(max(constants, default=0))


def classify_pair(zone_slice: Subgraph, other, box: int = DEFAULT_BOX):
    """
    This function compares a Zone selection with the other state restricted to the variables of the selection, by
    enumerating both over the box [-box, box]. The box is raised to one above the largest constant when needed.
    :param zone_slice: Subgraph of a minimization method
    :param other: IntervalState or PredicateState at the same program point
    :param box: half width of the enumeration box
    :return: Outcome, or None when the selection has no variables (the point is skipped)
    """
    if zone_slice.is_bottom or not zone_slice.variables:
        return None
    columns = sorted(zone_slice.variables)
    names = zone_slice.variable_names
    box = max(box, _largest_constant(zone_slice, other, names) + 1)
    try:
        grid = box_grid(len(columns), box)
    except ZoneError as error:
        raise HarnessError(f"{error.message}; no symbolic fallback is available for larger boxes") from error
    zone_side = edge_mask(zone_slice.edges, grid, columns)
    if isinstance(other, IntervalState):
        other_side = interval_mask(other, grid, names)
    else:
        other_side = predicate_mask(other, grid, names)
    return outcome_of(zone_side, other_side)


def outcome_of(first: np.ndarray, second: np.ndarray) -> Outcome:
    """
    This function compares two membership masks over the same grid. MORE means that first holds strictly fewer
    points than second, i.e. first is strictly more precise.
    :return: Outcome of first against second
    """
    first_only = bool(np.any(first & ~second))
    second_only = bool(np.any(second & ~first))
    if not first_only and not second_only:
        return Outcome.EQUAL
    if not first_only:
        return Outcome.MORE
    if not second_only:
        return Outcome.LESS
    return Outcome.INCOMPARABLE


def compare_program(path, against=TARGETS, methods=tuple(MinMethod), box: int = DEFAULT_BOX) -> list:
    """
    This function analyses one .tir file with Zones and the target domains and classifies every program point.
    :param path: path of the .tir file
    :param against: names of the target domains
    :param methods: MinMethods to classify; the sizes of all four are always recorded
    :param box: half width of the enumeration box
    :return: list of records, one per (program point, method)
    """
    cfg = build_cfg(read_program(path))
    zones = run_fixpoint(cfg, "zones")
    targets = {target: run_fixpoint(cfg, target) for target in against}
    cache, records = {}, []
    for index, point in enumerate(zones.points):
        for method in MinMethod:
            zone_slice = point.slices[method]
            record = {
                "file": Path(path).stem,
                "point_index": index,
                "point": point.label,
                "group": point.group,
                "method": method.value,
                "vars": len(zone_slice.variables),
                "edges": len(zone_slice.edges),
                "bottom": zone_slice.is_bottom,
                "seconds": 0.0,
            }
            for target in against:
                record[f"vs_{target}"] = None
                if method not in methods:
                    continue
                other = targets[target].point(point.label).after
                key = (zone_slice.variables, zone_slice.edges, _restricted(other, zone_slice.variable_names))
                start = time.perf_counter()
                if key not in cache:
                    cache[key] = classify_pair(zone_slice, other, box)
                record["seconds"] += time.perf_counter() - start
                outcome = cache[key]
                if outcome is None:
                    logger.debug("skipping %s at %s: the selection is empty or Bottom", method.value, point.label)
                record[f"vs_{target}"] = None if outcome is None else outcome.value
            records.append(record)
    return records


def report_frame(records: list) -> pd.DataFrame:
    """This function orders the per-point records by (file, point, method) in a DataFrame."""
    frame = pd.DataFrame(records)
    if frame.empty:
        return frame
    order = {method.value: rank for rank, method in enumerate(MinMethod)}
    frame["method_rank"] = frame["method"].map(order)
    frame = frame.sort_values(["file", "point_index", "method_rank"]).drop(columns="method_rank")
    return frame.reset_index(drop=True)


def _reduction(sizes: pd.DataFrame, column: str, method: MinMethod) -> float:
    if method not in PREDECESSOR:
        return 0.0
    previous = sizes[(column, PREDECESSOR[method].value)]
    current = sizes[(column, method.value)]
    percentage = np.where(previous > 0, (previous - current) / previous.where(previous > 0, 1) * 100, 0.0)
    per_file = pd.Series(percentage, index=sizes.index).groupby(level="file").mean()
    return float(per_file.mean())


def aggregate_report(frame: pd.DataFrame, methods=tuple(MinMethod), against=TARGETS, suite: str = "corpus") -> dict:
    """
    This function aggregates per-point records into one report row per method: the average reduction of variables
    and edges versus the preceding method, the outcome counts per target and the time spent classifying.
    Branch edges of one condition count as one statement with the larger selection; averages are taken per file and
    then over files.
    :return: dictionary in the report JSON layout
    """
    if frame.empty:
        warnings.warn(f"The suite '{suite}' has no program points to compare.")
        return {"suite": suite, "rows": []}
    reachable = frame[~frame["bottom"]]
    sizes = reachable.groupby(["file", "group", "method"])[["vars", "edges"]].max().unstack("method")
    rows = []
    for method in methods:
        method_frame = frame[frame["method"] == method.value]
        row = {
            "method": method.value.upper(),
            "var_reduction_pct": _reduction(sizes, "vars", method) if not sizes.empty else 0.0,
            "edge_reduction_pct": _reduction(sizes, "edges", method) if not sizes.empty else 0.0,
        }
        skipped = method_frame["bottom"] | (method_frame["vars"] == 0)
        for target in against:
            outcomes = method_frame.loc[~skipped, f"vs_{target}"]
            row[f"vs_{target}"] = {outcome.value: int((outcomes == outcome.value).sum()) for outcome in Outcome}
        row["skipped"] = int(skipped.sum())
        row["seconds"] = float(method_frame["seconds"].sum())
        rows.append(row)
    return {"suite": suite, "rows": rows}


def run_comparison(corpus_dir, against=TARGETS, methods=tuple(MinMethod), box: int = DEFAULT_BOX) -> tuple:
    """
    This function compares every .tir file of a directory.
    :return: (DataFrame of per-point records, report dictionary)
    """
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise FileNotFoundError(f"The directory {corpus_dir} does not exist.")
    records = []
    for path in sorted(corpus_dir.glob("*.tir")):
        logger.info("comparing %s", path.name)
        records.extend(compare_program(path, against, methods, box))
    frame = report_frame(records)
    return frame, aggregate_report(frame, methods, against, corpus_dir.name)


def report_to_json(report: dict) -> str:
    """Serializes a report with percentages and timings rounded to two digits."""
    return json.dumps(round_all_dict_values(report, 2), indent=2) + "\n"


def plot_reductions(report: dict, path=None):
    """
    This function draws the average variable and edge reduction per method as a bar chart.
    :param report: report dictionary of aggregate_report
    :param path: file to save the chart to, when given
    :return: the matplotlib Figure
    """
    bar_data = pd.DataFrame(report["rows"], columns=["method", "var_reduction_pct", "edge_reduction_pct"])
    bar_data = bar_data.rename(columns={"var_reduction_pct": "variables", "edge_reduction_pct": "edges"})
    axis = bar_data.plot.bar(x="method", figsize=(10, 5), color=["#4c72b0", "#dd8452"])
    axis.set_title(f"Average reduction versus the preceding method ({report['suite']})")
    axis.set_ylabel("reduction (%)")
    axis.set_xlabel("")
    figure = axis.get_figure()
    if path is not None:
        figure.savefig(path, bbox_inches="tight")
        plt.close(figure)
    return figure


def _literal(value) -> str:
    value = int(value)
    return str(value) if value >= 0 else f"(- {abs(value)})"


def _edge_atom(names, source, target, bound) -> str:
    if target == Z0:
        return f"(<= {names[source]} {_literal(bound)})"
    if source == Z0:
        return f"(<= {_literal(-bound)} {names[target]})"
    return f"(<= (- {names[source]} {names[target]}) {_literal(bound)})"


def _range_atoms(name, low, high) -> list:
    atoms = []
    if np.isfinite(low):
        atoms.append(f"(<= {_literal(low)} {name})")
    if np.isfinite(high):
        atoms.append(f"(<= {name} {_literal(high)})")
    return atoms


def smtlib_text(state) -> str:
    """
    This function writes a state as an SMT-LIB2 script over integer constants: one assertion per inequality, a
    disjunction of element ranges per constrained Predicate variable.
    :param state: Subgraph, IntervalState or PredicateState
    """
    if isinstance(state, Subgraph):
        declared, bottom = state.variable_names, state.is_bottom
        assertions = [_edge_atom(state.names, s, t, b) for s, t, b in state.edges]
    elif isinstance(state, IntervalState):
        declared, bottom = list(state.names), state.is_bottom
        assertions = [atom for name in state.names for atom in _range_atoms(name, *state.range_of(name))]
    elif isinstance(state, PredicateState):
        declared, bottom, assertions = list(state.names), state.is_bottom, []
        for name in state.names:
            elements = sorted(state.elements_of(name))
            if len(elements) == len(PREDICATE_ELEMENTS):
                continue
            options = []
            for element in elements:
                atoms = _range_atoms(name, *PREDICATE_ELEMENTS[element])
                options.append(atoms[0] if len(atoms) == 1 else f"(and {' '.join(atoms)})")
            assertions.append(options[0] if len(options) == 1 else f"(or {' '.join(options)})")
    else:
        raise HarnessError(f"cannot export a {type(state).__name__} to SMT-LIB")
    lines = ["(set-logic QF_LIA)"]
    lines.extend(f"(declare-const {name} Int)" for name in sorted(declared))
    if bottom:
        lines.append("(assert false)")
    else:
        lines.extend(f"(assert {atom})" for atom in assertions)
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def emit_smtlib(state, path) -> None:
    """Writes smtlib_text(state) to path; an unwritable path raises OSError."""
    Path(path).write_text(smtlib_text(state), encoding="utf-8")


def smallest_changed_set(before: ZoneState, after: ZoneState):
    """
    This function searches by brute force the smallest set of variables V such that the closed states before and
    after a step agree on every entry between variables outside V. Only meant for small states.
    :return: frozenset of variable indices, or None when either state is Bottom
    """
    before, after = close(before), close(after)
    if before.is_bottom_matrix() or after.is_bottom_matrix():
        return None
    variables = range(1, after.dim)
    for size in range(after.dim):
        for chosen in combinations(variables, size):
            outside = [v for v in range(after.dim) if v not in chosen]
            block = np.ix_(outside, outside)
            if np.array_equal(before.bounds[block], after.bounds[block]):
                return frozenset(chosen)
    return frozenset(variables)

"""
This module contains the ZoneSliceCase class. This is the parent class that deals with anything related to the
analysis of one program: parsing, the fixpoints per domain, the minimized Zone selections and the comparison.
"""

from pathlib import Path
import os
import copy

import zoneslice as zs
from zoneslice.dataflow import DOMAINS, compute_slices, run_fixpoint
from zoneslice.harness import DEFAULT_BOX, TARGETS, compare_program, emit_smtlib, report_frame
from zoneslice.ir_frontend import build_cfg, read_program
from zoneslice.minimizer import MinMethod
from zoneslice.utils import label_to_filename


def default_corpus_path() -> Path:
    """Location of the programs bundled with the package."""
    return Path(os.path.dirname(zs.__file__)) / "data" / "corpus"


def list_corpus(dir_path=None):
    """This function returns the names of all .tir programs in a directory, by default the bundled corpus"""
    dir_path = Path(dir_path) if dir_path is not None else default_corpus_path()

    try:
        return sorted(name[: -len(".tir")] for name in os.listdir(dir_path) if name.endswith(".tir"))
    except FileNotFoundError as error:
        raise FileNotFoundError(f"The directory {dir_path} does not exist.") from error


class ZoneSliceCase:
    """
    This class holds one program and everything computed for it: the control flow graph, the analysis result of
    every domain and the comparison records.
    """

    def __init__(self, name, file_path=None):
        self.file_path = Path(file_path) if file_path is not None else default_corpus_path()
        self.name = name
        self.program = None
        self.cfg = None
        self.results = {}
        self.closed = True
        self.comparison = None

    def __str__(self):
        analyzed = ", ".join(sorted(self.results)) if self.results else "none"
        cfg_formatted = str(self.cfg) if self.cfg is not None else "First .build() a case to parse the program"
        return (
            f"Case: {self.name} (tir) \n"
            f"Data location: {self.file_path} \n"
            f"Analyzed domains: {analyzed} \n"
            f"{cfg_formatted}"
        )

    @property
    def source_path(self) -> Path:
        """Path of the .tir file of this case."""
        return self.file_path / f"{self.name}.tir"

    def copy(self):
        """
        Creates a deep copy of the instance.
        """
        return copy.deepcopy(self)

    def build(self):
        """This function parses the program and builds its control flow graph"""
        print(f"Creating '{self.name}'")
        self.program = read_program(self.source_path)
        self.cfg = build_cfg(self.program)

    def analyze(self, domain="zones", trace=None, closed=True):
        """
        This function computes the fixpoint of a domain over the program.
        :param domain: "zones", "intervals", "predicates" or "all"
        :param trace: callback receiving one line per worklist step
        :param closed: for Zones, use the closed neighbourhood variant for the selections
        """
        if self.cfg is None:
            self.build()
        domains = DOMAINS if domain == "all" else (domain,)
        for name in domains:
            print(f"Analyzing '{self.name}' with {name}")
            self.results[name] = run_fixpoint(self.cfg, name, trace=trace, closed=closed)
        self.closed = closed

    def slice(self, method="mn", point=None, closed=None):
        """
        This function returns the Zone selections of a minimization method.
        :param method: "fs", "cc", "nn" or "mn"
        :param point: label of a program point; all points when None
        :param closed: neighbourhood variant; defaults to the one used by .analyze()
        :return: dictionary label -> Subgraph, or a single Subgraph when point is given
        """
        if not self._check_steps_completed():
            return None
        method = MinMethod(method)
        closed = self.closed if closed is None else closed
        points = self.results["zones"].points
        if point is not None:
            points = [self.results["zones"].point(point)]
        selections = {
            item.label: (item.slices if closed == self.closed else compute_slices(item, closed))[method]
            for item in points
        }
        return selections[point] if point is not None else selections

    def compare(self, against=TARGETS, methods=tuple(MinMethod), box=DEFAULT_BOX):
        """
        This function classifies every program point of the case against the target domains.
        :return: pandas DataFrame with one record per (point, method)
        """
        print(f"Comparing '{self.name}' against {', '.join(against)}")
        self.comparison = report_frame(compare_program(self.source_path, against, methods, box))
        return self.comparison

    def export_smt(self, output_path=None):
        """
        This function writes an SMT-LIB2 file per program point and analyzed domain; Zones are written as their full
        reduced state.
        :param output_path: directory for the files, by default ./smt
        :return: list of written paths
        """
        if not self._check_steps_completed():
            return []
        output_path = Path(output_path) if output_path is not None else Path.cwd() / "smt"
        output_path.mkdir(parents=True, exist_ok=True)
        written = []
        for domain, result in sorted(self.results.items()):
            for point in result.points:
                state = point.slices[MinMethod.FS] if domain == "zones" else point.after
                path = output_path / f"{self.name}.{label_to_filename(point.label)}.{domain}.smt2"
                emit_smtlib(state, path)
                written.append(path)
        print(f"Wrote {len(written)} SMT-LIB files to {output_path}")
        return written

    def _check_steps_completed(self) -> bool:
        """This function checks whether all steps are performed.
        :return: boolean which indicates if all steps are performed
        """
        ready = False
        if self.cfg is None:
            print("First .build() a case to parse the program")
        elif "zones" not in self.results:
            print("First .analyze() a case with zones to compute the selections")
        else:
            ready = True
        return ready

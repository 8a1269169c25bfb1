"""
This module contains the frontend for the small three address language (.tir files) analysed by zoneslice: the parser,
a pretty printer and the construction of the control flow graph that the dataflow engine iterates over.
"""
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import networkx as nx

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1

# operator -> operator of the negated guard
NEGATIONS = {"<=": ">", "<": ">=", ">=": "<", ">": "<=", "==": "!=", "!=": "=="}

TOKEN_PATTERN = re.compile(
    r"(?P<space>[ \t\r]+)|(?P<newline>\n)|(?P<comment>//[^\n]*)"
    r"|(?P<int>[0-9]+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>:=|<=|>=|==|!=|<|>|\+|-|;|\(|\)|\{|\})"
)
KEYWORDS = {"int", "if", "else", "while", "assert", "havoc"}


class ParseError(Exception):
    """
    This class deals with the error handling of the parser. Every error carries the location it was raised at.
    """

    def __init__(self, message, line=0, column=0):  # ignore warning about super-init | pylint: disable=W0231
        self.message = message
        self.line = line
        self.column = column

    def __str__(self):
        return f"Parse Error: line {self.line}, column {self.column}: {self.message}"


@dataclass(frozen=True)
class Expr:
    """An expression ``var + const``; a bare integer when var is None."""

    var: Optional[str]
    const: int = 0

    def __str__(self):
        if self.var is None:
            return str(self.const)
        if self.const == 0:
            return self.var
        sign = "+" if self.const > 0 else "-"
        return f"{self.var} {sign} {abs(self.const)}"


@dataclass(frozen=True)
class Guard:
    """A condition ``lhs op rhs`` as written in the source."""

    lhs: str
    op: str
    rhs: Expr

    def __str__(self):
        return f"{self.lhs} {self.op} {self.rhs}"

    def negate(self):
        """Returns the logical negation of this guard."""
        return Guard(self.lhs, NEGATIONS[self.op], self.rhs)

    def difference_constraints(self):
        """
        This function rewrites the guard as a conjunction of constraints ``s - t <= c`` over the integers, where an
        endpoint of None stands for the zero variable.
        :return: list of (s, t, c) triples, or None when the guard is a disequality (not expressible this way)
        """
        if self.op == "!=":
            return None
        other, const = self.rhs.var, self.rhs.const
        # strict integer inequalities are tightened by one
        upper = {"<=": const, "<": const - 1, "==": const}
        lower = {">=": const, ">": const + 1, "==": const}
        constraints = []
        if self.op in upper:
            constraints.append((self.lhs, other, upper[self.op]))
        if self.op in lower:
            constraints.append((other, self.lhs, -lower[self.op]))
        return constraints


@dataclass(frozen=True)
class Assign:
    """Source statement ``target := expr;``"""

    target: str
    expr: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Havoc:
    """Source statement ``havoc target;``"""

    target: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Assert:
    """Source statement ``assert guard;``"""

    guard: Guard
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class If:
    """Source statement ``if (guard) {...} else {...}``"""

    guard: Guard
    then_body: tuple
    else_body: tuple = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class While:
    """Source statement ``while (guard) {...}``"""

    guard: Guard
    body: tuple
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Program:
    """A parsed method: its name, declared variables (in declaration order) and body."""

    name: str
    variables: tuple
    body: tuple


# -- Statements as they appear in the blocks and on the edges of a Cfg
@dataclass(frozen=True)
class AssignStmt:
    """Assignment of rhs to target; rhs None means havoc."""

    target: str
    rhs: Optional[Expr]

    def __str__(self):
        return f"havoc {self.target}" if self.rhs is None else f"{self.target} := {self.rhs}"


@dataclass(frozen=True)
class AssumeStmt:
    """
    Refinement by a branch guard. Opaque assumes come from a disequality in the source and do not refine Zones on
    either branch.
    """

    guard: Guard
    opaque: bool = False

    def __str__(self):
        return f"assume {self.guard}"


@dataclass(frozen=True)
class NopStmt:
    """A statement without effect on the abstract state; asserts are kept as nops so their invariant is recorded."""

    guard: Optional[Guard] = None

    def __str__(self):
        return "nop" if self.guard is None else f"assert {self.guard}"


class _Parser:
    """Recursive descent parser over the token list of one .tir file. Parser objects are single use."""

    def __init__(self, text, name):
        self.name = name
        self.tokens = self._tokenize(text)
        self.position = 0
        self.declared = []

    @staticmethod
    def _tokenize(text):
        tokens = []
        line, line_start, index = 1, 0, 0
        while index < len(text):
            match = TOKEN_PATTERN.match(text, index)
            if match is None:
                raise ParseError(f"unexpected character '{text[index]}'", line, index - line_start + 1)
            kind, value = match.lastgroup, match.group()
            if kind == "newline":
                line, line_start = line + 1, match.end()
            elif kind == "ident" and value in KEYWORDS:
                tokens.append(("keyword", value, line, index - line_start + 1))
            elif kind not in ("space", "comment"):
                tokens.append((kind, value, line, index - line_start + 1))
            index = match.end()
        tokens.append(("eof", "", line, index - line_start + 1))
        return tokens

    def _peek(self, offset=0):
        return self.tokens[min(self.position + offset, len(self.tokens) - 1)]

    def _error(self, message, token=None):
        token = token or self._peek()
        return ParseError(message, token[2], token[3])

    def _accept(self, value):
        if self._peek()[1] == value and self._peek()[0] in ("op", "keyword"):
            self.position += 1
            return True
        return False

    def _expect(self, value):
        if not self._accept(value):
            found = self._peek()[1] or "end of file"
            raise self._error(f"expected '{value}' but found '{found}'")

    def _identifier(self, declared=True):
        token = self._peek()
        if token[0] != "ident":
            raise self._error(f"expected an identifier but found '{token[1] or 'end of file'}'")
        self.position += 1
        if declared and token[1] not in self.declared:
            raise self._error(f"use of undeclared variable '{token[1]}'", token)
        return token[1]

    def _integer(self, negative=False):
        token = self._peek()
        if token[0] != "int":
            raise self._error(f"expected an integer but found '{token[1] or 'end of file'}'")
        self.position += 1
        value = -int(token[1]) if negative else int(token[1])
        if not INT32_MIN <= value <= INT32_MAX:
            raise self._error(f"integer literal {value} does not fit in 32 bits", token)
        return value

    def _expression(self):
        if self._peek()[0] == "int" or self._peek()[1] == "-":
            return Expr(None, self._integer(negative=self._accept("-")))
        var = self._identifier()
        if self._accept("+"):
            return Expr(var, self._integer())
        if self._accept("-"):
            return Expr(var, -self._integer())
        return Expr(var)

    def _guard(self):
        lhs = self._identifier()
        token = self._peek()
        if token[1] not in NEGATIONS:
            raise self._error(f"expected a comparison operator but found '{token[1] or 'end of file'}'")
        self.position += 1
        return Guard(lhs, token[1], self._expression())

    def _block(self):
        self._expect("{")
        body = []
        while not self._accept("}"):
            if self._peek()[0] == "eof":
                raise self._error("missing '}' before end of file")
            body.append(self._statement())
        return tuple(body)

    def _statement(self):
        token = self._peek()
        if self._accept("if"):
            self._expect("(")
            guard = self._guard()
            self._expect(")")
            then_body = self._block()
            else_body = self._block() if self._accept("else") else ()
            return If(guard, then_body, else_body, token[2])
        if self._accept("while"):
            self._expect("(")
            guard = self._guard()
            self._expect(")")
            return While(guard, self._block(), token[2])
        if self._accept("assert"):
            guard = self._guard()
            self._expect(";")
            return Assert(guard, token[2])
        if self._accept("havoc"):
            target = self._identifier()
            self._expect(";")
            return Havoc(target, token[2])
        if token[0] == "ident":
            target = self._identifier()
            self._expect(":=")
            expr = self._expression()
            self._expect(";")
            return Assign(target, expr, token[2])
        raise self._error(f"unexpected '{token[1] or 'end of file'}'")

    def parse(self):
        """Parses declarations followed by statements until the end of the file."""
        while self._accept("int"):
            token = self._peek()
            name = self._identifier(declared=False)
            if name in self.declared:
                raise self._error(f"variable '{name}' is declared twice", token)
            self.declared.append(name)
            self._expect(";")
        body = []
        while self._peek()[0] != "eof":
            body.append(self._statement())
        return Program(self.name, tuple(self.declared), tuple(body))


def parse_program(text: str, name: str = "main") -> Program:
    """
    This function parses the text of a .tir file.
    :param text: source text
    :param name: name of the method, by convention the file name without extension
    :return: the Program
    """
    return _Parser(text, name).parse()


def read_program(path) -> Program:
    """This function reads and parses a .tir file, naming the method after the file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as error:
        raise FileNotFoundError(f"The program {path} does not exist.") from error
    return parse_program(text, path.stem)


def pretty_print(program: Program) -> str:
    """This function renders a Program back to canonical .tir text."""
    lines = [f"int {var};" for var in program.variables]

    def render(body, depth):
        pad = "    " * depth
        for stmt in body:
            if isinstance(stmt, Assign):
                lines.append(f"{pad}{stmt.target} := {stmt.expr};")
            elif isinstance(stmt, Havoc):
                lines.append(f"{pad}havoc {stmt.target};")
            elif isinstance(stmt, Assert):
                lines.append(f"{pad}assert {stmt.guard};")
            elif isinstance(stmt, If):
                lines.append(f"{pad}if ({stmt.guard}) {{")
                render(stmt.then_body, depth + 1)
                if stmt.else_body:
                    lines.append(f"{pad}}} else {{")
                    render(stmt.else_body, depth + 1)
                lines.append(f"{pad}}}")
            else:
                lines.append(f"{pad}while ({stmt.guard}) {{")
                render(stmt.body, depth + 1)
                lines.append(f"{pad}}}")

    render(program.body, 0)
    return "\n".join(lines) + "\n"


class Cfg:
    """
    This class holds the control flow graph of one method. Blocks are the nodes of a networkx DiGraph with a tuple of
    statements each; edges carry a branch label ('then', 'else' or 'fall') and, for conditional edges, the assume
    statement that refines the state along it.
    """

    def __init__(self, name, variables, graph, entry):
        self.name = name
        self.variables = tuple(variables)
        self.graph = graph
        self.entry = entry
        self._idoms = nx.immediate_dominators(graph, entry)
        self.widen_points = frozenset(target for source, target in graph.edges if self.is_back_edge(source, target))

    def __str__(self):
        lines = [f"cfg {self.name} entry=B{self.entry} widen={sorted(self.widen_points)}"]
        for block in self.blocks:
            stmts = "; ".join(str(stmt) for stmt in self.statements(block))
            lines.append(f"B{block}: [{stmts}]")
            for succ, data in self.successors(block):
                assume = f" {data['assume']}" if data["assume"] is not None else ""
                lines.append(f"  -> B{succ} ({data['label']}){assume}")
        return "\n".join(lines)

    @property
    def blocks(self):
        """Block ids in increasing order."""
        return sorted(self.graph.nodes)

    def statements(self, block):
        """Returns the statements of a block."""
        return self.graph.nodes[block]["stmts"]

    def successors(self, block):
        """Returns (successor, edge data) pairs, the then-edge before the else-edge."""
        order = {"then": 0, "else": 1, "fall": 2}
        succs = [(succ, self.graph.edges[block, succ]) for succ in self.graph.successors(block)]
        return sorted(succs, key=lambda item: (order[item[1]["label"]], item[0]))

    def predecessors(self, block):
        """Returns predecessor ids in increasing order."""
        return sorted(self.graph.predecessors(block))

    def dominates(self, dominator, block):
        """Walks the immediate-dominator chain of block up to the entry."""
        while block != dominator:
            parent = self._idoms.get(block, block)
            if parent == block:
                return False
            block = parent
        return True

    def is_back_edge(self, source, target):
        """An edge is a back-edge when its target dominates its source."""
        return self.dominates(target, source)


class _CfgBuilder:
    """
    Lowers a Program to basic blocks. Statement lists are lowered back to front so that every block knows its
    successor when it is created.
    """

    def __init__(self):
        self.graph = nx.DiGraph()
        self.counter = 0

    def _new_block(self, stmts=()):
        block = self.counter
        self.counter += 1
        self.graph.add_node(block, stmts=tuple(stmts))
        return block

    def _connect(self, block, terminator):
        if terminator[0] == "fall":
            self.graph.add_edge(block, terminator[1], label="fall", assume=None)
            return
        _, guard, then_block, else_block = terminator
        # a disequality in the source leaves both branches without Zone refinement
        opaque = guard.op == "!="
        self.graph.add_edge(block, then_block, label="then", assume=AssumeStmt(guard, opaque))
        self.graph.add_edge(block, else_block, label="else", assume=AssumeStmt(guard.negate(), opaque))

    def _flush(self, pending, terminator, exit_block=None):
        if not pending and terminator[0] == "fall":
            return terminator[1]
        if exit_block is not None and terminator == ("fall", exit_block):
            # trailing statements of the method body go straight into the (still unused) exit block
            self.graph.nodes[exit_block]["stmts"] = tuple(pending)
            return exit_block
        block = self._new_block(pending)
        self._connect(block, terminator)
        return block

    def lower(self, body, terminator, exit_block=None):
        """
        This function lowers a statement list whose control continues at the given terminator.
        :param body: tuple of source statements
        :param terminator: ("fall", block) or ("branch", guard, then_block, else_block)
        :param exit_block: the exit block, only while it can still absorb trailing statements
        :return: the entry block id of the lowered list
        """
        pending = []
        for stmt in reversed(body):
            if isinstance(stmt, Assign):
                pending.insert(0, AssignStmt(stmt.target, stmt.expr))
            elif isinstance(stmt, Havoc):
                pending.insert(0, AssignStmt(stmt.target, None))
            elif isinstance(stmt, Assert):
                pending.insert(0, NopStmt(stmt.guard))
            elif isinstance(stmt, If):
                follow = self._flush(pending, terminator, exit_block)
                exit_block, pending = None, []
                then_entry = self.lower(stmt.then_body, ("fall", follow))
                else_entry = self.lower(stmt.else_body, ("fall", follow)) if stmt.else_body else follow
                if then_entry == else_entry:
                    # both branches empty: keep two distinct out-edges
                    then_entry = self._new_block()
                    self._connect(then_entry, ("fall", follow))
                terminator = ("branch", stmt.guard, then_entry, else_entry)
            else:
                follow = self._flush(pending, terminator, exit_block)
                exit_block, pending = None, []
                header = self._new_block()
                body_entry = self.lower(stmt.body, ("fall", header))
                self._connect(header, ("branch", stmt.guard, body_entry, follow))
                terminator = ("fall", header)
        return self._flush(pending, terminator, exit_block)

    def renumber(self, entry):
        """Renumbers blocks in depth-first preorder from the entry, following then-edges before else-edges."""
        order = {"then": 0, "else": 1, "fall": 2}
        mapping, stack = {}, [entry]
        while stack:
            block = stack.pop()
            if block in mapping:
                continue
            mapping[block] = len(mapping)
            succs = sorted(self.graph.successors(block), key=lambda s: order[self.graph.edges[block, s]["label"]])
            stack.extend(reversed(succs))
        reachable = self.graph.subgraph(mapping).copy()
        return nx.relabel_nodes(reachable, mapping), 0


def build_cfg(program: Program) -> Cfg:
    """
    This function builds the control flow graph of a program.
    :param program: a parsed Program
    :return: Cfg whose widen points are the targets of its back-edges
    """
    builder = _CfgBuilder()
    exit_block = builder._new_block()  # pylint: disable=protected-access
    entry = builder.lower(program.body, ("fall", exit_block), exit_block=exit_block)
    # the exit block has no successor
    builder.graph.remove_edges_from(list(builder.graph.out_edges(exit_block)))
    graph, entry = builder.renumber(entry)
    return Cfg(program.name, program.variables, graph, entry)

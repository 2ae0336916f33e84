"""Interprocedural propagation engine, parameterised by an abstract domain.

Each method denotes a monotone function from an abstract value at its entry
to an abstract value at its exit.  The engine represents these denotations
extensionally: a table per method holding the exit value for every entry
value that actually flows into it.  Starting from bottom everywhere, it
re-evaluates method bodies (an inner fixpoint over the block graph, joining
at merge points) against the current tables until nothing grows — Kleene
iteration over a finite function space, so termination needs no widening.

Virtual call sites are resolved per candidate: the dispatch guard filters
the incoming value, the surviving part is adjusted to the callee's scope
and looked up in (or added to) the callee's table, and the callee's current
exit value for that precise input flows back through the return adjustment.
Candidates whose guard filters everything out contribute nothing, so
methods reachable only through impossible dispatches stay at bottom.

A "domain" object bundles the lattice operations and transfer functions;
see :class:`ooescape.domain_e.EDomain` and
:class:`ooescape.domain_er.ERDomain` for the two implementations.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Any

from .frontend import Block, Exit, MethodIR, Op, Program

#: Operation kinds that carry a nested right-hand side.
BINARY_KINDS = ("eq", "plus", "lt", "minus", "put_field")

Point = tuple[int, int]


@dataclass
class MethodSummary:
    """Fixpoint results for one method, joined over its reached inputs."""

    name: str
    entry: Any
    exit: Any
    decorations: tuple[tuple[str, Any], ...]   # schedule label -> value, in order
    watch: dict[str, Any]                      # watchpoint label -> value
    escaping: int                              # bitmask over creation points
    points: tuple[tuple[str, str, bool], ...]  # (point, class, allocatable)


@dataclass
class AnalysisResult:
    """Everything the reporting layer needs, per method plus global stats."""

    domain_name: str
    methods: dict[str, MethodSummary]
    iterations: int
    nc: int | None = None          # constraint count (constraint backend only)
    linearity: float | None = None  # average component size (ditto)
    millis: float = 0.0

    def escaping(self, method: str) -> int:
        return self.methods[method].escaping

    def allocatable(self, method: str) -> tuple[str, ...]:
        return tuple(p for p, _, ok in self.methods[method].points if ok)


def creation_sites(program: Program) -> dict[str, list[str]]:
    """Map each method to the creation point labels its body allocates."""

    def news(op: Op):
        if op.kind == "new":
            yield op.name
        for inner in op.rhs or ():
            yield from news(inner)

    sites: dict[str, list[str]] = {}
    for name, ir in program.methods.items():
        found: list[str] = []
        for block in ir.blocks:
            for op in block.instrs:
                found.extend(news(op))
        sites[name] = found
    return sites


class Engine:
    """Drives one abstract domain over a lowered program to a fixpoint."""

    def __init__(self, program: Program, domain):
        self.program = program
        self.domain = domain
        # method -> {entry value -> best known exit value}; insertion order
        # is deterministic, so iteration over the tables is too.
        self.tables: dict[str, dict[Any, Any]] = {name: {} for name in program.methods}
        self.iterations = 0
        self._dirty = False

    # -- fixpoint ----------------------------------------------------------

    def run(self) -> AnalysisResult:
        started = time.perf_counter()
        d = self.domain
        program = self.program
        if program.entry is not None:
            ir = program.entry_method()
            self.tables[ir.name][d.entry_value(ir)] = d.bottom()

        while True:
            self._dirty = False
            for name in sorted(program.methods):
                ir = program.methods[name]
                table = self.tables[name]
                for entry in list(table):
                    self.iterations += 1
                    exit_value = self._analyze(ir, entry)
                    grown = d.join(table[entry], exit_value)
                    if not d.equal(grown, table[entry]):
                        table[entry] = grown
                        self._dirty = True
            if not self._dirty:
                break

        sites = creation_sites(program)
        table = program.points
        methods: dict[str, MethodSummary] = {}
        for name in sorted(program.methods):
            ir = program.methods[name]
            bottom = d.bottom()
            entry = bottom
            exit_value = bottom
            record: dict[Point, Any] = {}
            for inp, out in self.tables[name].items():
                entry = d.join(entry, inp)
                exit_value = d.join(exit_value, out)
                self._analyze(ir, inp, record)
            escaping = d.escaping(ir, exit_value)
            points = tuple(
                (p, table.class_of(p), not escaping >> table.index(p) & 1)
                for p in sorted(sites[name], key=table.index)
            )
            methods[name] = MethodSummary(
                name=name,
                entry=entry,
                exit=exit_value,
                decorations=tuple((label, record.get(pt, bottom))
                                  for label, pt in ir.schedule),
                watch={label: record.get(pt, bottom)
                       for label, pt in ir.watchpoints.items()},
                escaping=escaping,
                points=points,
            )
        millis = (time.perf_counter() - started) * 1000.0
        return AnalysisResult(d.name, methods, self.iterations, millis=millis)

    # -- one method body ---------------------------------------------------

    def _analyze(self, ir: MethodIR, entry, record: dict | None = None):
        """Stabilise the block-entry values of one body; return the exit value.

        With ``record`` given, a final in-order sweep joins into ``record``
        the value observed immediately before every instruction (and after
        the last one of each block), which is what decorations and
        watchpoints read.
        """
        d = self.domain
        invals = [d.bottom() for _ in ir.blocks]
        invals[0] = entry
        exit_value = d.bottom()
        while True:
            changed = False
            exit_value = d.bottom()
            for block in ir.blocks:
                val = invals[block.id]
                if block.id != 0 and d.is_bottom(val):
                    continue
                out = self._flow_block(block, val)
                if isinstance(block.term, Exit):
                    exit_value = d.join(exit_value, out)
                for succ in block.successors():
                    grown = d.join(invals[succ], out)
                    if not d.equal(grown, invals[succ]):
                        invals[succ] = grown
                        changed = True
            if not changed:
                break
        if record is not None:
            for block in ir.blocks:
                if block.id != 0 and d.is_bottom(invals[block.id]):
                    continue
                self._flow_block(block, invals[block.id], record)
        return exit_value

    def _flow_block(self, block: Block, val, record: dict | None = None):
        d = self.domain
        for i, op in enumerate(block.instrs):
            if record is not None:
                key = (block.id, i)
                record[key] = d.join(record[key], val) if key in record else val
            val = self._flow_op(op, val)
        if record is not None:
            key = (block.id, len(block.instrs))
            record[key] = d.join(record[key], val) if key in record else val
        return val

    def _flow_op(self, op: Op, val):
        d = self.domain
        if op.kind == "vcall":
            return self._flow_vcall(op, val)
        if op.kind in BINARY_KINDS:
            right = d.drop_res(op, val)
            for inner in op.rhs:
                right = self._flow_op(inner, right)
            return d.combine(op, val, right)
        return d.transfer(op, val)

    def _flow_vcall(self, op: Op, val):
        d = self.domain
        result = d.bottom()
        for cand in op.candidates:
            found = d.lookup(cand.lookup, val)
            if d.is_bottom(found):
                continue  # nothing dispatches here: candidate is dead
            arg = d.call(cand.call, found)
            callee = self.tables[cand.method]
            if arg not in callee:
                callee[arg] = d.bottom()
                self._dirty = True
            result = d.join(result, d.ret(cand.ret, found, callee[arg]))
        return result


def analyze(program: Program, domain) -> AnalysisResult:
    """Run ``domain`` over ``program`` to its interprocedural fixpoint."""
    return Engine(program, domain).run()

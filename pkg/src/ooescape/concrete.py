"""Concrete small-step interpreter.

States are frames paired with memories.  A frame maps the variables in scope
to values: Python ints for int variables, ``None`` (null) or a :class:`Loc`
for reference variables.  A memory maps locations to objects, each tagged
with the creation point that allocated it.  Execution is purely functional —
every update builds new dicts/objects — so recorded states are stable
snapshots.

An operation can be *undefined* on a state (field access on null, a guard
that fails, a dispatch with no matching method): the interpreter then returns
``None`` and the trace stops contributing.  Memory agreement checks mirror
the update relation used by the two-state operations: the second memory must
still hold objects with the same creation points at the locations the first
state can observe.
"""

from __future__ import annotations

from dataclasses import dataclass

from .frontend.ir import Branch, Exit, Goto, MethodIR, Op, Program
from .model import INT, OUT, RES, THIS, TypeEnv


@dataclass(frozen=True)
class Loc:
    """A heap location; distinct from ints even when numbered alike."""

    n: int

    def __repr__(self) -> str:
        return f"l{self.n}"


@dataclass(frozen=True)
class Obj:
    """A heap object: its creation point plus a field frame."""

    pi: str
    fields: tuple  # sorted tuple of (field, value) pairs

    def field(self, f: str):
        for name, value in self.fields:
            if name == f:
                return value
        raise KeyError(f)

    def with_field(self, f: str, value) -> "Obj":
        return Obj(self.pi, tuple(
            (name, value if name == f else old)
            for name, old in self.fields
        ))


def make_obj(pi: str, fields: dict) -> Obj:
    return Obj(pi, tuple(sorted(fields.items())))


class Truncated(Exception):
    """The step budget ran out; collected results are a sound subset."""


def initial_value(t: str):
    return 0 if t == INT else None


def initial_fields(field_env: TypeEnv) -> dict:
    return {f: initial_value(t) for f, t in field_env.items()}


def memory_agrees(m1: dict, m2: dict, locs) -> bool:
    """Every observed location still holds an object of the same point."""
    for l in locs:
        o2 = m2.get(l)
        if o2 is None or l not in m1 or m1[l].pi != o2.pi:
            return False
    return True


def frame_locs(frame: dict, skip=()) -> set:
    return {v for k, v in frame.items() if isinstance(v, Loc) and k not in skip}


def reachable_locs(frame: dict, memory: dict) -> list[Loc]:
    """Locations reachable from the frame, in a deterministic BFS order."""
    order: list[Loc] = []
    seen: set[Loc] = set()
    queue = [frame[v] for v in sorted(frame) if isinstance(frame[v], Loc)]
    while queue:
        l = queue.pop(0)
        if l in seen:
            continue
        seen.add(l)
        order.append(l)
        obj = memory[l]
        for _, value in obj.fields:
            if isinstance(value, Loc) and value not in seen:
                queue.append(value)
    return order


def canonical_state(frame: dict, memory: dict):
    """Rename reachable locations to 0.. and drop garbage.

    Two states get the same canonical form exactly when they agree up to a
    bijective renaming of their reachable locations; unreachable objects are
    ignored.  The canonical form is itself a (frame, memory) pair.
    """
    order = reachable_locs(frame, memory)
    rename = {l: Loc(i) for i, l in enumerate(order)}

    def value(v):
        return rename[v] if isinstance(v, Loc) else v

    new_frame = {v: value(x) for v, x in frame.items()}
    new_memory = {
        rename[l]: Obj(
            memory[l].pi,
            tuple((f, value(x)) for f, x in memory[l].fields),
        )
        for l in order
    }
    return new_frame, new_memory


def state_key(frame: dict, memory: dict):
    """A hashable identity for a state modulo renaming and garbage."""
    f, m = canonical_state(frame, memory)
    return (
        tuple(sorted(f.items(), key=lambda kv: kv[0])),
        tuple(sorted(((l.n, m[l]) for l in m), key=lambda kv: kv[0])),
    )


# ---------------------------------------------------------------------------
# Entry states
# ---------------------------------------------------------------------------

def entry_state(program: Program, method: str | None = None):
    """The default initial state: a fresh receiver, null/zero parameters.

    When the creation-point table carries externals beyond the receiver,
    reference parameters are bound to fresh objects of those points instead
    of null, in declared parameter order.
    """
    name = method or program.entry
    if name is None:
        raise ValueError("no entry method configured")
    ir = program.methods[name]
    sig = ir.sig
    classes = program.classes

    externals = [p for p in program.points if p.external]
    if not externals:
        raise ValueError("creation-point table has no external receiver")
    assert externals[0].klass == sig.klass

    memory: dict = {}
    this_loc = Loc(0)
    memory[this_loc] = make_obj(
        externals[0].name, initial_fields(classes.fields_of(sig.klass))
    )
    frame = {THIS: this_loc}
    extra = externals[1:]
    for p in sig.params:
        t = sig.param_env[p]
        if t == INT:
            frame[p] = 0
        elif extra:
            point = extra.pop(0)
            l = Loc(len(memory))
            memory[l] = make_obj(
                point.name, initial_fields(classes.fields_of(point.klass))
            )
            frame[p] = l
        else:
            frame[p] = None
    return frame, memory


# ---------------------------------------------------------------------------
# Interpreter
# ---------------------------------------------------------------------------

class Interpreter:
    """Deterministic execution of a lowered program.

    ``on_watch(method_name, watch_name, frame, memory)`` fires every time a
    named watchpoint is crossed (method exits included).  ``budget`` bounds
    the total number of executed operations; exhausting it raises
    :class:`Truncated`.
    """

    def __init__(self, program: Program, budget: int = 100_000,
                 on_watch=None):
        self.program = program
        self.remaining = budget
        self.on_watch = on_watch
        self._watch_index: dict[str, dict] = {}
        for name, ir in program.methods.items():
            self._watch_index[name] = {
                pt: wname for wname, pt in ir.watchpoints.items()
            }

    def tick(self):
        self.remaining -= 1
        if self.remaining < 0:
            raise Truncated()

    def run_entry(self, method: str | None = None, state=None):
        name = method or self.program.entry
        if name is None:
            raise ValueError("no entry method configured")
        if state is None:
            state = entry_state(self.program, name)
        frame, memory = state
        return self.run_method(self.program.methods[name], frame, memory)

    def run_method(self, ir: MethodIR, frame: dict, memory: dict):
        """Execute a method body; returns the exit state or None if stuck."""
        watch = self._watch_index[ir.name]
        bid = 0
        while True:
            blk = ir.blocks[bid]
            self._maybe_watch(ir, watch, (bid, 0), frame, memory)
            for i, op in enumerate(blk.instrs):
                result = self.exec_op(op, frame, memory)
                if result is None:
                    return None
                frame, memory = result
                self._maybe_watch(ir, watch, (bid, i + 1), frame, memory)
            term = blk.term
            if isinstance(term, Exit):
                return frame, memory
            if isinstance(term, Goto):
                bid = term.target
            else:
                assert isinstance(term, Branch)
                bid = term.then if frame[RES] >= 0 else term.els

    def _maybe_watch(self, ir, watch, point, frame, memory):
        if self.on_watch is not None and point in watch:
            self.on_watch(ir.name, watch[point], frame, memory)

    def _run_ops(self, ops, frame, memory):
        for op in ops:
            result = self.exec_op(op, frame, memory)
            if result is None:
                return None
            frame, memory = result
        return frame, memory

    def exec_op(self, op: Op, frame: dict, memory: dict):
        self.tick()
        kind = op.kind

        if kind == "nop":
            return frame, memory
        if kind == "get_int":
            return {**frame, RES: op.value}, memory
        if kind == "get_null":
            return {**frame, RES: None}, memory
        if kind == "get_var":
            return {**frame, RES: frame[op.name]}, memory
        if kind == "put_var":
            new = dict(frame)
            new[op.name] = new.pop(RES)
            return new, memory
        if kind == "expand":
            return {**frame, op.name: initial_value(op.vtype)}, memory
        if kind == "restrict":
            new = dict(frame)
            for v in op.names:
                del new[v]
            return new, memory
        if kind == "get_field":
            l = frame[RES]
            if l is None:
                return None
            return {**frame, RES: memory[l].field(op.name)}, memory
        if kind == "is_null":
            return {**frame, RES: 1 if frame[RES] is None else -1}, memory
        if kind == "is_true":
            if frame[RES] < 0:
                return None
            new = dict(frame)
            del new[RES]
            return new, memory
        if kind == "is_false":
            if frame[RES] >= 0:
                return None
            new = dict(frame)
            del new[RES]
            return new, memory
        if kind == "new":
            classes = self.program.classes
            klass = self.program.points.class_of(op.name)
            l = Loc(max((x.n for x in memory), default=-1) + 1)
            obj = make_obj(op.name, initial_fields(classes.fields_of(klass)))
            return {**frame, RES: l}, {**memory, l: obj}

        if kind in ("eq", "plus", "lt", "minus"):
            base = dict(frame)
            del base[RES]
            rhs = self._run_ops(op.rhs, base, memory)
            if rhs is None:
                return None
            frame2, memory2 = rhs
            a, b = frame[RES], frame2[RES]
            if kind == "eq":
                value = 1 if a == b else -1
            elif kind == "plus":
                value = a + b
            elif kind == "minus":
                value = a - b
            else:
                value = 1 if a < b else -1
            return {**frame2, RES: value}, memory2

        if kind == "put_field":
            l = frame[RES]
            base = dict(frame)
            del base[RES]
            rhs = self._run_ops(op.rhs, base, memory)
            if rhs is None:
                return None
            frame2, memory2 = rhs
            if l is None:
                return None
            if not memory_agrees(memory, memory2, [l]):
                return None
            new_frame = dict(frame2)
            value = new_frame.pop(RES)
            return new_frame, {**memory2, l: memory2[l].with_field(op.name, value)}

        if kind == "vcall":
            return self.exec_vcall(op, frame, memory)

        raise AssertionError(f"unexpected top-level operation {op}")

    def exec_vcall(self, op: Op, frame: dict, memory: dict):
        classes = self.program.classes
        recv = frame[RES]
        if recv is None:
            return None
        pi = memory[recv].pi
        target = classes.methods_of(self.program.points.class_of(pi)).get(
            op.selector
        )
        if target is None:
            return None
        cand = next(
            (c for c in op.candidates if c.method == target.name), None
        )
        if cand is None:
            return None

        # lookup passes: res keeps the receiver, only its type refines
        callee = self.program.methods[cand.method]
        sig = callee.sig
        formals = sorted(sig.params)
        entry = {
            formal: frame[actual]
            for formal, actual in zip(formals, cand.call.names)
        }
        entry[THIS] = recv
        self.tick()  # the call operation itself
        result = self.run_method(callee, entry, memory)
        if result is None:
            return None
        exit_frame, exit_memory = result
        observed = frame_locs(frame, skip=(RES,))
        if not memory_agrees(memory, exit_memory, observed):
            return None
        self.tick()  # the return operation
        return {**frame, RES: exit_frame[OUT]}, exit_memory

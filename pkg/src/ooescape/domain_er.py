"""Refined domain: per-variable and per-field creation-point sets.

An abstract state is ``None`` (bottom: the program point is unreachable)
or an :class:`ERState`: one bitset per class-typed variable in scope plus
one per class-typed field of the whole program.  Integer slots carry no
information and are simply not stored.  The collector ``xi`` empties the
field approximations of classes none of whose points are reachable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator

from .concrete import Loc, make_obj, reachable_locs
from .frontend import MethodIR, Op
from .model import INT, OUT, RES, THIS, StaticInfo, TypeEnv

MAX_ENUM_POINTS = 6

RETURN_MODES = ("shadow", "top")


@dataclass(frozen=True)
class ERState:
    """Immutable frame * memory pair (class-typed slots only)."""

    frame: tuple[tuple[str, int], ...]
    memory: tuple[tuple[str, int], ...]

    @staticmethod
    def make(frame: dict, memory: dict) -> "ERState":
        return ERState(tuple(sorted(frame.items())), tuple(sorted(memory.items())))

    def frame_dict(self) -> dict:
        return dict(self.frame)

    def memory_dict(self) -> dict:
        return dict(self.memory)

    def var(self, name: str) -> int:
        return dict(self.frame)[name]

    def field(self, name: str) -> int:
        return dict(self.memory)[name]


def _class_vars(info: StaticInfo, env: TypeEnv) -> list[str]:
    return [v for v in env if info.classes.is_class(env[v])]


def class_fields(info: StaticInfo) -> TypeEnv:
    """The class-typed slice of the program-wide field environment."""
    fields = info.classes.all_fields_env()
    return fields.restrict_to([f for f in fields
                               if info.classes.is_class(fields[f])])


def empty_memory(info: StaticInfo) -> dict:
    return {f: 0 for f in class_fields(info)}


def mu_top(info: StaticInfo) -> dict:
    """The least informative memory: every field any compatible point."""
    fields = class_fields(info)
    return {f: info.compatible(info.points.all_bits, fields[f]) for f in fields}


def _point_fields(info: StaticInfo, name: str) -> list[str]:
    fenv = info.classes.fields_of(info.points.class_of(name))
    return [f for f in fenv if info.classes.is_class(fenv[f])]


def leq_state(a: ERState | None, b: ERState | None) -> bool:
    """Slot-wise inclusion; bottom below everything."""
    if a is None:
        return True
    if b is None:
        return False
    bf, bm = b.frame_dict(), b.memory_dict()
    return all(bits | bf[v] == bf[v] for v, bits in a.frame) and \
        all(bits | bm[f] == bm[f] for f, bits in a.memory)


def rho(info: StaticInfo, state: ERState) -> int:
    """Points reachable from the variables through the field approximations."""
    memory = state.memory_dict()
    result = 0
    for _, bits in state.frame:
        result |= bits
    pending = result
    while pending:
        grown = 0
        for name in info.points.names_of(pending):
            for f in _point_fields(info, name):
                grown |= memory[f]
        pending = grown & ~result
        result |= grown
    return result


def xi(info: StaticInfo, env: TypeEnv, state: ERState | None) -> ERState | None:
    """Empty the field approximations that no reachable object carries."""
    if state is None:
        return None
    frame = state.frame_dict()
    if THIS in env and frame.get(THIS, 0) == 0 and info.classes.is_class(env[THIS]):
        return None
    live: set[str] = set()
    for name in info.points.names_of(rho(info, state)):
        live.update(_point_fields(info, name))
    memory = {f: (bits if f in live else 0) for f, bits in state.memory}
    return ERState.make(frame, memory)


def theta(info: StaticInfo, env: TypeEnv, e: int) -> ERState | None:
    """Embed a creation-point set: every slot gets its compatible points."""
    frame = {v: info.compatible(e, env[v]) for v in _class_vars(info, env)}
    fields = class_fields(info)
    memory = {f: info.compatible(e, fields[f]) for f in fields}
    return xi(info, env, ERState.make(frame, memory))


def alpha_er(info: StaticInfo, env: TypeEnv,
             states: Iterable[tuple[dict, dict]]) -> ERState | None:
    """Abstract a set of concrete states; the empty set maps to bottom."""
    states = list(states)
    if not states:
        return None
    frame = {v: 0 for v in _class_vars(info, env)}
    memory = empty_memory(info)
    for cframe, cmemory in states:
        for v in frame:
            value = cframe[v]
            if isinstance(value, Loc):
                frame[v] |= info.points.bit(cmemory[value].pi)
        for loc in reachable_locs(cframe, cmemory):
            obj = cmemory[loc]
            for fname, value in obj.fields:
                if isinstance(value, Loc):
                    memory[fname] |= info.points.bit(cmemory[value].pi)
    return ERState.make(frame, memory)


def representatives_er(info: StaticInfo, env: TypeEnv, state: ERState,
                       max_points: int = MAX_ENUM_POINTS) -> list[tuple[dict, dict]]:
    """Enumerate the worst concrete states under an abstract state.

    Every creation point gets one object at a fixed location; each
    class-typed slot independently ranges over the locations of the points
    in its approximation, or holds ``null`` when the approximation is
    empty.  States where ``this`` would be ``null`` are dropped.
    """
    table = info.points
    if len(table) > max_points:
        raise ValueError(f"refusing to enumerate states over {len(table)} creation points")
    locs = {name: Loc(table.index(name)) for name in table.names_of(table.all_bits)}
    frame_map = state.frame_dict()
    memory_map = state.memory_dict()

    def choices(bits: int) -> list:
        return [locs[n] for n in table.names_of(bits)] or [None]

    if THIS in frame_map and frame_map[THIS] == 0:
        return []
    slots: list[tuple[str, str | None, list]] = []
    for v in _class_vars(info, env):
        slots.append((v, None, choices(frame_map[v])))
    all_names = table.names_of(table.all_bits)
    for name in all_names:
        for f in _point_fields(info, name):
            slots.append((f, name, choices(memory_map[f])))

    states = []
    for picks in itertools.product(*(opts for _, _, opts in slots)):
        frame: dict = {v: 0 for v in env if env[v] == INT}
        fields: dict[str, dict] = {name: {} for name in all_names}
        for (slot, owner, _), value in zip(slots, picks):
            if owner is None:
                frame[slot] = value
            else:
                fields[owner][slot] = value
        memory = {}
        for name in all_names:
            fenv = info.classes.fields_of(table.class_of(name))
            full = {f: (fields[name].get(f) if info.classes.is_class(fenv[f]) else 0)
                    for f in fenv}
            memory[locs[name]] = make_obj(name, full)
        states.append((frame, memory))
    return states


def canonical_elements_er(info: StaticInfo, env: TypeEnv,
                          limit: int = 1 << 20) -> Iterator[ERState]:
    """Yield the collector's fixpoints over ``env`` (bottom excluded).

    The fixpoint test runs on plain bitmasks — a state survives when
    ``this`` is inhabited (where in scope) and every non-empty field slot
    belongs to a class with a reachable creation point — and only the
    survivors are materialised.
    """
    table = info.points
    fields = class_fields(info)
    var_slots = [(v, info.compatible(table.all_bits, env[v]))
                 for v in _class_vars(info, env)]
    field_slots = [(f, info.compatible(table.all_bits, fields[f]))
                   for f in fields]
    total = 1
    for _, bits in var_slots + field_slots:
        total *= 1 << bin(bits).count("1")
        if total > limit:
            raise ValueError("abstract state space too large to enumerate")

    def subsets(bits: int) -> list[int]:
        out = [0]
        for name in table.names_of(bits):
            out += [s | table.bit(name) for s in out]
        return out

    # For the closure: which field slots each point's class pulls in, and
    # which points legitimise a non-empty field slot.
    findex = {f: i for i, (f, _) in enumerate(field_slots)}
    pulls: dict[int, tuple[int, ...]] = {}
    owners = [0] * len(field_slots)
    for name in table.names_of(table.all_bits):
        bit = table.bit(name)
        indices = tuple(findex[f] for f in _point_fields(info, name) if f in findex)
        pulls[bit] = indices
        for i in indices:
            owners[i] |= bit

    this_at = next((i for i, (v, _) in enumerate(var_slots) if v == THIS), None)
    var_pools = [subsets(bits) for _, bits in var_slots]
    field_pools = [subsets(bits) for _, bits in field_slots]
    var_names = [v for v, _ in var_slots]
    field_names = [f for f, _ in field_slots]
    for fvals in itertools.product(*var_pools):
        if this_at is not None and fvals[this_at] == 0:
            continue
        base = 0
        for bits in fvals:
            base |= bits
        for mvals in itertools.product(*field_pools):
            reach = base
            pending = reach
            while pending:
                grown = 0
                while pending:
                    low = pending & -pending
                    pending ^= low
                    for i in pulls[low]:
                        grown |= mvals[i]
                pending = grown & ~reach
                reach |= pending
            if all(v == 0 or owners[i] & reach for i, v in enumerate(mvals)):
                yield ERState.make(dict(zip(var_names, fvals)),
                                   dict(zip(field_names, mvals)))


class ERDomain:
    """Transfer functions for the per-variable analysis.

    ``return_mode`` picks the treatment of method returns: ``"shadow"``
    (default) trusts the callee's memory, relying on shadow parameters to
    keep the caller's arguments observable inside it; ``"top"`` restores
    the caller's variables but assumes the worst about every field.
    """

    name = "er"

    def __init__(self, program, return_mode: str = "shadow"):
        if return_mode not in RETURN_MODES:
            raise ValueError(f"unknown return mode {return_mode!r}")
        self.program = program
        self.info: StaticInfo = program.info
        self.return_mode = return_mode
        self._fields = class_fields(self.info)
        self._mu_top = mu_top(self.info)

    # -- lattice ---------------------------------------------------------

    def bottom(self):
        return None

    def is_bottom(self, value) -> bool:
        return value is None

    def join(self, a, b):
        if a is None:
            return b
        if b is None:
            return a
        frame = {v: bits | dict(b.frame)[v] for v, bits in a.frame}
        memory = {f: bits | dict(b.memory)[f] for f, bits in a.memory}
        return ERState.make(frame, memory)

    def leq(self, a, b) -> bool:
        return leq_state(a, b)

    def equal(self, a, b) -> bool:
        return a == b

    def entry_value(self, method: MethodIR):
        # Mirrors the interpreter's entry states: the receiver is a
        # pre-existing object, and class-typed parameters are bound to the
        # remaining stand-ins in declared order (null once they run out).
        sig = method.sig
        table = self.info.points
        externals = table.names_of(table.external_bits)
        frame = {THIS: table.bit(externals[0])}
        spare = list(externals[1:])
        for p in sig.params:
            if self.info.classes.is_class(sig.param_env[p]):
                frame[p] = table.bit(spare.pop(0)) if spare else 0
        return ERState.make(frame, empty_memory(self.info))

    def xi(self, env: TypeEnv, state):
        return xi(self.info, env, state)

    # -- straight-line operations ----------------------------------------

    def transfer(self, op: Op, value):
        if value is None:
            return None
        kind = op.kind
        frame = value.frame_dict()
        memory = value.memory_dict()
        is_class = self.info.classes.is_class
        if kind in ("nop", "get_int", "is_true", "is_false"):
            return value
        if kind == "get_null":
            frame[RES] = 0
            return ERState.make(frame, memory)
        if kind == "get_var":
            if is_class(op.env_in[op.name]):
                frame[RES] = frame[op.name]
            return ERState.make(frame, memory)
        if kind == "new":
            frame[RES] = self.info.points.bit(op.name)
            return ERState.make(frame, memory)
        if kind == "expand":
            if is_class(op.vtype):
                frame[op.name] = 0
            return ERState.make(frame, memory)
        if kind == "put_var":
            res = frame.pop(RES, None)
            if res is not None and is_class(op.env_out[op.name]):
                frame[op.name] = res
            return self.xi(op.env_out, ERState.make(frame, memory))
        if kind == "is_null":
            frame.pop(RES, None)
            return self.xi(op.env_out, ERState.make(frame, memory))
        if kind == "restrict":
            for v in op.names:
                frame.pop(v, None)
            return self.xi(op.env_out, ERState.make(frame, memory))
        if kind == "get_field":
            if frame[RES] == 0:
                return None
            ftype = op.env_out[RES]
            if is_class(ftype):
                frame[RES] = memory[op.name]
            else:
                frame.pop(RES)
            return self.xi(op.env_out, ERState.make(frame, memory))
        raise ValueError(f"not a unary operation: {kind}")

    def drop_res(self, op: Op, value):
        if value is None:
            return None
        frame = value.frame_dict()
        frame.pop(RES, None)
        return self.xi(op.env_in.restrict([RES]), ERState.make(frame, value.memory_dict()))

    def combine(self, op: Op, left, right):
        if left is None or right is None:
            return None
        if op.kind != "put_field":
            return right
        receiver = left.var(RES)
        if receiver == 0:
            return None
        frame = right.frame_dict()
        memory = right.memory_dict()
        rhs = frame.pop(RES, None)
        if rhs is not None:
            # The write is observable only if some possible receiver is still
            # reachable after the right-hand side was evaluated.
            occurs = any(bits & receiver for bits in frame.values()) or \
                any(bits & receiver for bits in memory.values())
            if occurs:
                memory[op.name] = memory[op.name] | rhs
        return self.xi(op.env_out, ERState.make(frame, memory))

    # -- virtual calls ----------------------------------------------------

    def lookup(self, op: Op, value):
        if value is None:
            return None
        classes = self.info.classes
        table = self.info.points
        frame = value.frame_dict()
        hits = 0
        for name in table.names_of(frame[RES]):
            sig = classes.methods_of(table.class_of(name)).get(op.selector)
            if sig is not None and sig.name == op.method:
                hits |= table.bit(name)
        if not hits:
            return None
        frame[RES] = hits
        return self.xi(op.env_out, ERState.make(frame, value.memory_dict()))

    def call(self, op: Op, value):
        if value is None:
            return None
        frame = value.frame_dict()
        callee_env = op.env_out
        formals = sorted(n for n in callee_env if n != THIS)
        entry = {}
        for formal, temp in zip(formals, op.names):
            if self.info.classes.is_class(callee_env[formal]):
                entry[formal] = frame[temp]
        entry[THIS] = frame[RES]
        return self.xi(callee_env, ERState.make(entry, value.memory_dict()))

    def ret(self, op: Op, caller, exit_value):
        if caller is None or exit_value is None:
            return None
        ret_type = op.env_out[RES] if RES in op.env_out else None
        out_bits = exit_value.frame_dict().get(OUT, 0)
        if self.return_mode == "shadow":
            frame = caller.frame_dict()
            frame.pop(RES, None)
            if ret_type is not None and self.info.classes.is_class(ret_type):
                frame[RES] = out_bits
            return self.xi(op.env_out, ERState.make(frame, exit_value.memory_dict()))
        # Pessimistic mode: the caller's variables survive, but their fields
        # are unknown, so the collected worst memory joins the callee's.
        frame = caller.frame_dict()
        frame.pop(RES, None)
        scrubbed = self.xi(op.env_in.restrict([RES]),
                           ERState.make(frame, dict(self._mu_top)))
        if scrubbed is None:
            return None
        frame = scrubbed.frame_dict()
        memory = scrubbed.memory_dict()
        for f, bits in exit_value.memory:
            memory[f] = memory[f] | bits
        if ret_type is not None and self.info.classes.is_class(ret_type):
            frame[RES] = out_bits
        return ERState.make(frame, memory)

    # -- reporting ---------------------------------------------------------

    def escaping(self, method: MethodIR, exit_value) -> int:
        """Program points still reachable from the caller after the method."""
        if exit_value is None:
            return 0
        return rho(self.info, exit_value) & ~self.info.points.external_bits

    def describe(self, value, env: TypeEnv | None = None) -> str:
        if value is None:
            return "bottom"
        names = self.info.points.names_of

        def row(pairs):
            return ", ".join(f"{k}:{{{', '.join(names(v))}}}" for k, v in pairs if v)

        return f"[{row(value.frame)}] * [{row(value.memory)}]"

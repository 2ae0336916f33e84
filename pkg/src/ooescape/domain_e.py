"""Creation-point domain: bitset values with an abstract garbage collector.

An abstract value is an ``int`` bitmask over the program's creation points
(see :class:`ooescape.model.CreationPointTable`); bit ``i`` set means an
object allocated at point ``i`` may still be reachable.  ``0`` doubles as
the bottom element (unreachable program point).  The collector ``delta``
removes points that no state over a given type environment could reach.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Iterator

from .concrete import Loc, make_obj, reachable_locs
from .frontend import MethodIR, Op
from .model import INT, RES, THIS, StaticInfo, TypeEnv

# Worst-state enumeration is exponential in the number of creation points;
# keep it for small tables only.
MAX_ENUM_POINTS = 6

RETURN_MODES = ("shadow", "figure", "simple")


def delta(info: StaticInfo, env: TypeEnv, e: int, cache: dict | None = None,
          frame: bool = True) -> int:
    """Drop the points of ``e`` that no state over ``env`` can reach.

    A point survives when a chain of variables and fields could lead to it:
    each class type appearing in ``env`` contributes its compatible points,
    and every surviving point pulls in the points compatible with its own
    class's fields, transitively.  With ``frame`` set (a variable
    environment, the default) each inhabited type additionally admits the
    points compatible with the class-typed fields declared anywhere below
    it, since a variable may hold any subclass instance; field environments
    pass ``frame=False`` and stay with the per-point rule.  When ``this``
    is typed but has no compatible point the state itself is impossible and
    the result is empty.
    """
    if cache is not None:
        key = (env, e, frame)
        hit = cache.get(key)
        if hit is not None:
            return hit
    classes = info.classes
    result = 0
    if THIS not in env or info.compatible(e, env[THIS]):
        for t in set(env.types):
            if not classes.is_class(t):
                continue
            roots = info.compatible(e, t)
            result |= roots
            if frame and roots:
                for sub in classes.subclasses(t):
                    for ft in classes.fields_of(sub).types:
                        if classes.is_class(ft):
                            result |= info.compatible(e, ft)
        # Close over the fields of the surviving points' own classes.
        pending = result
        while pending:
            grown = 0
            for name in info.points.names_of(pending):
                fenv = classes.fields_of(info.points.class_of(name))
                for ft in fenv.types:
                    if classes.is_class(ft):
                        grown |= info.compatible(e, ft)
            pending = grown & ~result
            result |= grown
    if cache is not None:
        cache[key] = result
    return result


def alpha_state(info: StaticInfo, frame: dict, memory: dict) -> int:
    """Creation points of the objects reachable in one concrete state."""
    bits = 0
    for loc in reachable_locs(frame, memory):
        bits |= info.points.bit(memory[loc].pi)
    return bits


def alpha(info: StaticInfo, states: Iterable[tuple[dict, dict]]) -> int:
    """Union of :func:`alpha_state` over a set of states."""
    bits = 0
    for frame, memory in states:
        bits |= alpha_state(info, frame, memory)
    return bits


def representatives(info: StaticInfo, env: TypeEnv, e: int,
                    max_points: int = MAX_ENUM_POINTS) -> list[tuple[dict, dict]]:
    """Enumerate the worst states over ``env`` built from the points of ``e``.

    Every point of ``e`` gets one object at a fixed location; every
    class-typed slot (variable or field) independently ranges over the
    locations of the compatible points, or holds ``null`` when there are
    none.  States where ``this`` would be ``null`` are dropped, so the
    result may be empty.
    """
    table = info.points
    if len(table) > max_points:
        raise ValueError(f"refusing to enumerate states over {len(table)} creation points")
    classes = info.classes
    names = table.names_of(e)
    locs = {name: Loc(table.index(name)) for name in names}

    def choices(t: str) -> list:
        if not classes.is_class(t):
            return [0]
        opts = [locs[n] for n in names if classes.subtype_of(table.class_of(n), t)]
        return opts or [None]

    slots: list[tuple[str, str | None, list]] = []  # (var-or-field, owner point, options)
    for var in env:
        opts = choices(env[var])
        if var == THIS and opts == [None]:
            return []
        slots.append((var, None, opts))
    for name in names:
        fenv = classes.fields_of(table.class_of(name))
        for field in fenv:
            slots.append((field, name, choices(fenv[field])))

    states = []
    for picks in itertools.product(*(opts for _, _, opts in slots)):
        frame: dict = {}
        fields: dict[str, dict] = {name: {} for name in names}
        for (slot, owner, _), value in zip(slots, picks):
            if owner is None:
                frame[slot] = value
            else:
                fields[owner][slot] = value
        memory = {locs[name]: make_obj(name, fields[name]) for name in names}
        states.append((frame, memory))
    return states


def canonical_elements(info: StaticInfo, env: TypeEnv,
                       universe: int | None = None,
                       cache: dict | None = None) -> Iterator[int]:
    """Yield the fixpoints of the collector over subsets of ``universe``."""
    table = info.points
    if universe is None:
        universe = table.all_bits
    members = [table.bit(n) for n in table.names_of(universe)]
    if len(members) > 16:
        raise ValueError(f"refusing to enumerate {2 ** len(members)} subsets")
    for picks in itertools.product((0, 1), repeat=len(members)):
        e = 0
        for bit, take in zip(members, picks):
            if take:
                e |= bit
        if delta(info, env, e, cache) == e:
            yield e


class EDomain:
    """Transfer functions for the creation-point analysis.

    ``return_mode`` picks the treatment of method returns: ``"shadow"``
    (default) re-collects the union of caller and callee-exit values
    against the caller's environment, relying on shadow parameters to keep
    the callee's arguments observable; ``"figure"`` rebuilds reachability
    pessimistically from the full point table; ``"simple"`` is the cheap
    sound variant (and also degrades ``lookup`` to the identity).
    """

    name = "e"

    def __init__(self, program, return_mode: str = "shadow"):
        if return_mode not in RETURN_MODES:
            raise ValueError(f"unknown return mode {return_mode!r}")
        self.program = program
        self.info: StaticInfo = program.info
        self.return_mode = return_mode
        self._cache: dict = {}

    # -- lattice ---------------------------------------------------------

    def bottom(self) -> int:
        return 0

    def is_bottom(self, value: int) -> bool:
        return value == 0

    def join(self, a: int, b: int) -> int:
        return a | b

    def leq(self, a: int, b: int) -> bool:
        return a | b == b

    def equal(self, a: int, b: int) -> bool:
        return a == b

    def entry_value(self, method: MethodIR) -> int:
        # The entry state binds this (and any class-typed parameter, when
        # external stand-ins are enabled) to pre-existing objects.
        return self.info.points.external_bits

    def delta(self, env: TypeEnv, e: int, frame: bool = True) -> int:
        return delta(self.info, env, e, self._cache, frame)

    # -- straight-line operations ----------------------------------------

    def transfer(self, op: Op, value: int) -> int:
        kind = op.kind
        if kind in ("nop", "get_int", "get_null", "get_var", "expand",
                    "is_true", "is_false"):
            return value
        if kind == "new":
            # Inside a method body an empty value means no state reaches
            # this point at all (``this`` is always bound), so stay empty.
            if not value and THIS in op.env_in:
                return value
            return value | self.info.points.bit(op.name)
        if kind == "put_var":
            return self.delta(op.env_in.restrict([op.name]), value)
        if kind == "is_null":
            return self.delta(op.env_in.restrict([RES]), value)
        if kind == "restrict":
            return self.delta(op.env_out, value)
        if kind == "get_field":
            if not self.info.compatible(value, op.env_in[RES]):
                return 0
            return self.delta(op.env_out, value)
        raise ValueError(f"not a unary operation: {kind}")

    def drop_res(self, op: Op, value: int) -> int:
        """Seed for the nested right-hand side of a two-argument operation."""
        return self.delta(op.env_in.restrict([RES]), value)

    def combine(self, op: Op, left: int, right: int) -> int:
        if op.kind == "put_field":
            if not left:
                return 0
            if not self.info.compatible(left, op.env_in[RES]):
                return 0
            return self.delta(op.env_out, right)
        # Integer operations: strict in both halves, result is the right one.
        if not left or not right:
            return 0
        return right

    # -- virtual calls ----------------------------------------------------

    def lookup(self, op: Op, value: int) -> int:
        classes = self.info.classes
        table = self.info.points
        target = op.env_in[RES]
        hits = 0
        for name in table.names_of(value):
            klass = table.class_of(name)
            if not classes.subtype_of(klass, target):
                continue
            sig = classes.methods_of(klass).get(op.selector)
            if sig is not None and sig.name == op.method:
                hits |= table.bit(name)
        if not hits:
            return 0
        if self.return_mode == "simple":
            return value
        result = self.delta(op.env_in.restrict([RES]), value)
        for name in table.names_of(hits):
            fenv = classes.fields_of(table.class_of(name))
            result |= table.bit(name) | self.delta(fenv, value, frame=False)
        return result

    def call(self, op: Op, value: int) -> int:
        keep = set(op.names) | {RES}
        return self.delta(op.env_in.restrict_to(keep), value)

    def ret(self, op: Op, caller: int, exit_value: int) -> int:
        if not caller:
            return 0
        if self.return_mode == "shadow":
            return self.delta(op.env_out, caller | exit_value)
        everything = self.info.points.all_bits
        if self.return_mode == "simple":
            return self.delta(op.env_in.restrict([RES]), everything) | exit_value
        classes = self.info.classes
        table = self.info.points
        scope = op.env_in.restrict([RES])
        result = 0
        for t in set(scope.types):
            if not classes.is_class(t):
                continue
            for name in table.names_of(caller):
                if classes.subtype_of(table.class_of(name), t):
                    fenv = classes.fields_of(table.class_of(name))
                    result |= table.bit(name) | self.delta(fenv, everything, frame=False)
        return result | exit_value

    # -- reporting ---------------------------------------------------------

    def escaping(self, method: MethodIR, exit_value: int) -> int:
        """Program points of ``exit_value`` still visible to the caller."""
        return exit_value & ~self.info.points.external_bits

    def describe(self, value: int) -> str:
        return "{" + ", ".join(self.info.points.names_of(value)) + "}"

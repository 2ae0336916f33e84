"""Static program model: classes, fields, methods, type environments, creation points.

Everything in this module is immutable after load.  The model is shared by the
concrete interpreter, both abstract domains and the analysis engines, so the
invariants enforced here (single inheritance, qualified field identities,
deterministic creation-point order) are what make the rest of the package
deterministic.

Creation-point sets are represented as plain ints (bitsets) indexed by the
position of the point in the :class:`CreationPointTable`.  External points
(the objects assumed to pre-exist the entry call, such as the receiver of the
entry method) are appended after all program-text points.
"""

from __future__ import annotations

from dataclasses import dataclass

INT = "int"
RES = "res"
OUT = "out"
THIS = "this"


class ModelError(Exception):
    """A malformed program model (bad hierarchy, duplicate names, unknown types)."""


# ---------------------------------------------------------------------------
# Type environments
# ---------------------------------------------------------------------------

class TypeEnv:
    """An interned, immutable map from variable names to types.

    Interning means structurally equal environments are the *same* object,
    which lets the abstract garbage collectors memoize on ``id(env)``.
    Use :meth:`make` (or the derived ``extend``/``restrict`` helpers); never
    construct instances directly.
    """

    __slots__ = ("names", "types", "_map", "_hash")

    _cache: dict[tuple[tuple[str, str], ...], "TypeEnv"] = {}

    def __init__(self, items: tuple[tuple[str, str], ...]):
        self.names = tuple(n for n, _ in items)
        self.types = tuple(t for _, t in items)
        self._map = dict(items)
        self._hash = hash(items)

    @classmethod
    def make(cls, mapping) -> "TypeEnv":
        items = tuple(sorted(dict(mapping).items()))
        env = cls._cache.get(items)
        if env is None:
            env = cls(items)
            cls._cache[items] = env
        return env

    # -- queries ------------------------------------------------------------

    def __contains__(self, name: str) -> bool:
        return name in self._map

    def __getitem__(self, name: str) -> str:
        return self._map[name]

    def get(self, name: str, default=None):
        return self._map.get(name, default)

    def items(self):
        return zip(self.names, self.types)

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        return self is other or (
            isinstance(other, TypeEnv)
            and self.names == other.names
            and self.types == other.types
        )

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}:{t}" for n, t in self.items())
        return f"TypeEnv[{inner}]"

    # -- derivations (all interned) ------------------------------------------

    def extend(self, name: str, typ: str) -> "TypeEnv":
        if name in self._map:
            raise ModelError(f"variable {name!r} already in scope")
        return TypeEnv.make({**self._map, name: typ})

    def replace(self, name: str, typ: str) -> "TypeEnv":
        """Rebind ``name`` (used by lookup, which retypes ``res``)."""
        if name not in self._map:
            raise ModelError(f"variable {name!r} not in scope")
        return TypeEnv.make({**self._map, name: typ})

    def restrict(self, names) -> "TypeEnv":
        """Drop the given variables from scope."""
        gone = set(names)
        missing = gone - set(self.names)
        if missing:
            raise ModelError(f"cannot restrict unknown variables {sorted(missing)}")
        return TypeEnv.make({n: t for n, t in self.items() if n not in gone})

    def restrict_to(self, names) -> "TypeEnv":
        """Keep only the given variables."""
        keep = set(names)
        missing = keep - set(self.names)
        if missing:
            raise ModelError(f"cannot keep unknown variables {sorted(missing)}")
        return TypeEnv.make({n: t for n, t in self.items() if n in keep})


EMPTY_ENV = TypeEnv.make({})


# ---------------------------------------------------------------------------
# Creation points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CreationPoint:
    name: str
    klass: str
    external: bool = False


class CreationPointTable:
    """The ordered set of creation points, with bitset helpers.

    Program-text points come first in source order; external points are
    appended last.  A set of creation points is an int whose bit ``i`` is the
    point at index ``i``.
    """

    __slots__ = ("points", "_index", "all_bits", "external_bits")

    def __init__(self, points):
        self.points = tuple(points)
        names = [p.name for p in self.points]
        if len(set(names)) != len(names):
            raise ModelError("duplicate creation-point names")
        # program points must precede external ones
        seen_external = False
        for p in self.points:
            if p.external:
                seen_external = True
            elif seen_external:
                raise ModelError("external creation points must come last")
        self._index = {p.name: i for i, p in enumerate(self.points)}
        self.all_bits = (1 << len(self.points)) - 1
        self.external_bits = 0
        for i, p in enumerate(self.points):
            if p.external:
                self.external_bits |= 1 << i

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ModelError(f"unknown creation point {name!r}") from None

    def bit(self, name: str) -> int:
        return 1 << self.index(name)

    def class_of(self, name: str) -> str:
        return self.points[self.index(name)].klass

    def class_at(self, i: int) -> str:
        return self.points[i].klass

    def bits_of(self, names) -> int:
        bits = 0
        for n in names:
            bits |= self.bit(n)
        return bits

    def names_of(self, bits: int) -> list[str]:
        return [p.name for i, p in enumerate(self.points) if bits >> i & 1]

    def indices(self, bits: int):
        i = 0
        while bits:
            if bits & 1:
                yield i
            bits >>= 1
            i += 1


# ---------------------------------------------------------------------------
# Classes and methods
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MethodSig:
    """Signature of one method: its identity and parameter environment.

    ``param_env`` always contains ``out`` (typed int for void methods) and
    ``this`` (typed with the defining class); ``params`` keeps the declared
    parameter order, which the call protocol needs to pair actuals with the
    alphabetically-enumerated formals.
    """

    name: str                    # qualified id, "Class.selector"
    klass: str
    selector: str
    params: tuple[str, ...]      # declared order, without this/out
    param_env: TypeEnv           # formals + out + this

    @property
    def return_type(self) -> str:
        return self.param_env[OUT]


class ClassTable:
    """The class hierarchy with field and method tables.

    Field identities are canonicalized at load: a field is stored under its
    bare name when no other class declares that name, otherwise under
    "Class.name".  Redeclaring an inherited field is rejected.
    """

    def __init__(self, classes, parent, field_decls, method_sigs):
        # classes: iterable of names in declaration order
        # parent: dict name -> parent name or None
        # field_decls: dict name -> list of (field, type) in declaration order
        # method_sigs: dict name -> dict selector -> MethodSig
        self.classes = tuple(classes)
        self.parent = dict(parent)
        self._check_hierarchy()
        self._field_ids, self._own_fields = self._qualify_fields(field_decls)
        self._sigs = {k: dict(v) for k, v in method_sigs.items()}
        self._fields_env_cache: dict[str, TypeEnv] = {}
        self._methods_cache: dict[str, dict[str, MethodSig]] = {}
        self._all_fields = self._build_all_fields_env()
        self._check_partial_order()

    # -- construction checks --------------------------------------------------

    def _check_hierarchy(self):
        known = set(self.classes)
        if len(known) != len(self.classes):
            raise ModelError("duplicate class declaration")
        if INT in known:
            raise ModelError("'int' cannot be used as a class name")
        for name, sup in self.parent.items():
            if sup is not None and sup not in known:
                raise ModelError(f"class {name} extends unknown class {sup}")
        # reject cycles (walk each chain with a seen-set)
        for name in self.classes:
            seen = set()
            cur = name
            while cur is not None:
                if cur in seen:
                    raise ModelError(f"inheritance cycle through {name}")
                seen.add(cur)
                cur = self.parent[cur]

    def _qualify_fields(self, field_decls):
        declared_in: dict[str, list[str]] = {}
        for klass in self.classes:
            for fname, _ in field_decls.get(klass, ()):
                declared_in.setdefault(fname, []).append(klass)
        field_ids: dict[tuple[str, str], str] = {}
        own_fields: dict[str, list[tuple[str, str]]] = {}
        for klass in self.classes:
            own = []
            seen = set()
            for fname, ftyp in field_decls.get(klass, ()):
                if fname in seen:
                    raise ModelError(f"duplicate field {fname!r} in class {klass}")
                seen.add(fname)
                if ftyp != INT and ftyp not in set(self.classes):
                    raise ModelError(f"field {klass}.{fname} has unknown type {ftyp}")
                fid = fname if len(declared_in[fname]) == 1 else f"{klass}.{fname}"
                field_ids[(klass, fname)] = fid
                own.append((fid, ftyp))
            own_fields[klass] = own
        # inherited fields are shared; redeclaration would shadow, reject it
        for klass in self.classes:
            sup = self.parent[klass]
            inherited_bare = set()
            while sup is not None:
                inherited_bare.update(f for f, _ in field_decls.get(sup, ()))
                sup = self.parent[sup]
            for fname, _ in field_decls.get(klass, ()):
                if fname in inherited_bare:
                    raise ModelError(
                        f"class {klass} redeclares inherited field {fname!r}"
                    )
        return field_ids, own_fields

    def _check_partial_order(self):
        # exhaustive check that subtyping is reflexive, antisymmetric and transitive
        for a in self.classes:
            if not self.subtype_of(a, a):
                raise ModelError("subtype order not reflexive")
        for a in self.classes:
            for b in self.classes:
                if a != b and self.subtype_of(a, b) and self.subtype_of(b, a):
                    raise ModelError(f"subtype order not antisymmetric: {a}, {b}")
                for c in self.classes:
                    if (
                        self.subtype_of(a, b)
                        and self.subtype_of(b, c)
                        and not self.subtype_of(a, c)
                    ):
                        raise ModelError("subtype order not transitive")

    def _build_all_fields_env(self) -> TypeEnv:
        acc: dict[str, str] = {}
        for klass in self.classes:
            for fid, ftyp in self._own_fields[klass]:
                if fid in acc:
                    raise ModelError(f"duplicate field identity {fid!r}")
                acc[fid] = ftyp
        return TypeEnv.make(acc)

    # -- queries ---------------------------------------------------------------

    def is_class(self, t: str) -> bool:
        return t in self.parent

    def subtype_of(self, t1: str, t2: str) -> bool:
        """Class subtyping along the hierarchy; int is only a subtype of itself."""
        if t1 == INT or t2 == INT:
            return t1 == t2
        if t1 not in self.parent or t2 not in self.parent:
            raise ModelError(f"unknown type in subtype check: {t1!r}, {t2!r}")
        cur = t1
        while cur is not None:
            if cur == t2:
                return True
            cur = self.parent[cur]
        return False

    def field_id(self, klass: str, fname: str) -> str:
        """Canonical identity of field ``fname`` as visible from ``klass``."""
        cur = klass
        while cur is not None:
            fid = self._field_ids.get((cur, fname))
            if fid is not None:
                return fid
            cur = self.parent[cur]
        if fname in self.fields_of(klass):
            return fname  # already canonical (pre-qualified in source)
        raise ModelError(f"class {klass} has no field {fname!r}")

    def fields_of(self, klass: str) -> TypeEnv:
        """The type environment of a class's fields, inherited ones included."""
        env = self._fields_env_cache.get(klass)
        if env is None:
            if klass not in self.parent:
                raise ModelError(f"unknown class {klass!r}")
            acc: dict[str, str] = {}
            cur = klass
            while cur is not None:
                for fid, ftyp in self._own_fields[cur]:
                    acc[fid] = ftyp
                cur = self.parent[cur]
            env = TypeEnv.make(acc)
            self._fields_env_cache[klass] = env
        return env

    def methods_of(self, klass: str) -> dict[str, MethodSig]:
        """selector -> the method reached by walking up from the class."""
        table = self._methods_cache.get(klass)
        if table is None:
            table = {}
            chain = []
            cur = klass
            while cur is not None:
                chain.append(cur)
                cur = self.parent[cur]
            for cls in reversed(chain):  # subclass entries overwrite
                table.update(self._sigs.get(cls, {}))
            self._methods_cache[klass] = table
        return table

    def method(self, qualified: str) -> MethodSig:
        klass, _, selector = qualified.partition(".")
        sig = self._sigs.get(klass, {}).get(selector)
        if sig is None:
            raise ModelError(f"unknown method {qualified!r}")
        return sig

    def all_methods(self):
        for klass in self.classes:
            for sig in self._sigs.get(klass, {}).values():
                yield sig

    def all_fields_env(self) -> TypeEnv:
        """The environment of every field in the program."""
        return self._all_fields

    def subclasses(self, klass: str) -> list[str]:
        """Every class below (or equal to) the given one, in declaration order."""
        return [c for c in self.classes if self.subtype_of(c, klass)]


def compatible_points(table: CreationPointTable, classes: ClassTable,
                      bits: int, t: str) -> int:
    """The points among ``bits`` whose class may flow into type ``t``; 0 for int."""
    if t == INT:
        return 0
    out = 0
    for i in table.indices(bits):
        if classes.subtype_of(table.class_at(i), t):
            out |= 1 << i
    return out


@dataclass(frozen=True)
class StaticInfo:
    """Everything the analyses need to know about a program, minus the code."""

    classes: ClassTable
    points: CreationPointTable

    def compatible(self, bits: int, t: str) -> int:
        return compatible_points(self.points, self.classes, bits, t)

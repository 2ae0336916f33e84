"""Differential checks between the concrete semantics and the abstract domains.

Both abstract domains come with executable worst-state enumerations
(:func:`~ooescape.domain_e.representatives` and
:func:`~ooescape.domain_er.representatives_er`), so the algebraic claims
behind them can be tested instead of trusted, at least over small creation
point tables:

* the abstraction maps invert the enumerations on canonical elements
  (round trip),
* for a distinguished set of instruction kinds the abstract transfer is
  exactly the abstraction of the collecting-semantics step applied to the
  enumerated states (optimality),
* an abstract state refines the embedded image of a creation-point set
  exactly when the underlying point set is included in it (membership).

Everything here returns lists of counterexample records; empty means the
property held.  The test-suite and the ``oracle-check`` command drive these
over corpus programs whose point tables are small enough to enumerate.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Iterator

from .concrete import Interpreter
from .domain_e import EDomain, alpha, canonical_elements, delta, representatives
from .domain_er import (ERDomain, ERState, alpha_er, canonical_elements_er,
                        class_fields, leq_state, representatives_er, theta, xi,
                        _class_vars)
from .frontend import Op, Program
from .model import RES, StaticInfo, TypeEnv

# Instruction kinds whose transfer functions are checked to be the exact
# abstraction of the concrete step (not merely a sound bound).  The
# remaining kinds are either trivially exact (no-ops on the abstract side)
# or degrade deliberately, e.g. integer tests.
E_EXACT_KINDS = ("get_var", "put_var", "new", "is_null", "restrict",
                 "expand", "lookup")
ER_EXACT_KINDS = ("get_var", "get_null", "put_var", "new", "is_null",
                  "restrict", "expand", "lookup", "get_field")


# ---------------------------------------------------------------------------
# collecting-semantics step


def concrete_step(program: Program, op: Op,
                  states: Iterable[tuple[dict, dict]]) -> list[tuple[dict, dict]]:
    """Run one operation on every state, keeping the runs that go through.

    Stuck runs (null dereference, failed guard) drop their state, matching
    the collecting semantics.  A ``lookup`` keeps exactly the states whose
    receiver dispatches to the candidate method, leaving them unchanged.
    """
    if op.kind == "lookup":
        classes = program.classes
        kept = []
        for frame, memory in states:
            recv = frame[RES]
            if recv is None:
                continue
            klass = program.points.class_of(memory[recv].pi)
            sig = classes.methods_of(klass).get(op.selector)
            if sig is not None and sig.name == op.method:
                kept.append((frame, memory))
        return kept
    interp = Interpreter(program, budget=10 ** 9)
    out = []
    for frame, memory in states:
        result = interp.exec_op(op, dict(frame), dict(memory))
        if result is not None:
            out.append(result)
    return out


# ---------------------------------------------------------------------------
# walking a lowered program


def iter_ops(program: Program,
             kinds: tuple[str, ...] | None = None) -> Iterator[tuple[str, Op]]:
    """Yield ``(method name, op)`` for every reachable operation.

    Nested right-hand sides of two-argument operations are included, as are
    the per-candidate dispatch guards of virtual calls (their ``call`` and
    ``return`` halves are interprocedural and are exercised by the engine
    tests instead).
    """

    def walk(op: Op) -> Iterator[Op]:
        yield op
        for inner in op.rhs or ():
            yield from walk(inner)
        for cand in op.candidates or ():
            yield cand.lookup

    for name in sorted(program.methods):
        for block in program.methods[name].blocks:
            for instr in block.instrs:
                for op in walk(instr):
                    if kinds is None or op.kind in kinds:
                        yield name, op


def program_envs(program: Program) -> list[TypeEnv]:
    """Every distinct type environment mentioned by the lowered program."""
    seen: dict[TypeEnv, None] = {}
    for ir in program.methods.values():
        seen[ir.entry_env] = None
        seen[ir.exit_env] = None
    for _, op in iter_ops(program):
        for env in (op.env_in, op.env_out, op.env_rhs):
            if env is not None:
                seen[env] = None
    return list(seen)


def enumerable(program: Program, max_points: int = 4) -> bool:
    """Whether the program's creation point table is small enough for the
    exhaustive checks below."""
    return len(program.points) <= max_points


# ---------------------------------------------------------------------------
# round trips


@dataclass
class RoundTrip:
    """One element the abstraction failed to recover from its states."""

    env: TypeEnv
    value: object
    recovered: object

    def __str__(self) -> str:  # pragma: no cover - debugging aid
        return f"over {dict(self.env.items())}: {self.value!r} came back as {self.recovered!r}"


def _slot_signature(info: StaticInfo, env: TypeEnv) -> tuple:
    """Class-typed slots of an environment.

    Both round trips are insensitive to integer-typed variables, so
    environments sharing this signature need checking only once.
    """
    return tuple((v, env[v]) for v in _class_vars(info, env))


def e_roundtrip_failures(program: Program,
                         envs: Iterable[TypeEnv] | None = None) -> list[RoundTrip]:
    """Canonical point sets not recovered by ``alpha`` after enumeration."""
    info = program.info
    cache: dict = {}
    seen = set()
    failures = []
    for env in envs if envs is not None else program_envs(program):
        sig = _slot_signature(info, env)
        if sig in seen:
            continue
        seen.add(sig)
        for e in canonical_elements(info, env, cache=cache):
            got = alpha(info, representatives(info, env, e))
            if got != e:
                failures.append(RoundTrip(env, e, got))
    return failures


def er_roundtrip_failures(program: Program,
                          envs: Iterable[TypeEnv] | None = None) -> list[RoundTrip]:
    """Canonical per-variable states not recovered by ``alpha_er``."""
    info = program.info
    seen = set()
    failures = []
    for env in envs if envs is not None else program_envs(program):
        sig = _slot_signature(info, env)
        if sig in seen:
            continue
        seen.add(sig)
        for state in canonical_elements_er(info, env):
            got = alpha_er(info, env, representatives_er(info, env, state))
            if got != state:
                failures.append(RoundTrip(env, state, got))
    return failures


# ---------------------------------------------------------------------------
# optimality of individual transfer functions


@dataclass
class TransferGap:
    """A transfer result that differs from the abstracted concrete step."""

    method: str
    op: Op
    value: object
    transfer: object
    optimal: object

    def __str__(self) -> str:  # pragma: no cover - debugging aid
        return (f"{self.method}: {self.op.kind} on {self.value!r} gave "
                f"{self.transfer!r}, concrete step gives {self.optimal!r}")


def e_transfer_gaps(program: Program,
                    kinds: tuple[str, ...] = E_EXACT_KINDS) -> list[TransferGap]:
    """Compare creation-point transfers against the collecting step."""
    domain = EDomain(program)
    info = program.info
    cache: dict = {}
    by_env: dict[TypeEnv, list[int]] = {}
    gaps = []
    for method, op in iter_ops(program, kinds):
        if op.env_in not in by_env:
            by_env[op.env_in] = list(canonical_elements(info, op.env_in, cache=cache))
        for e in by_env[op.env_in]:
            if op.kind == "lookup":
                got = domain.lookup(op, e)
            else:
                got = domain.transfer(op, e)
            stepped = concrete_step(program, op, representatives(info, op.env_in, e))
            best = alpha(info, stepped)
            if got != best:
                gaps.append(TransferGap(method, op, e, got, best))
    return gaps


def er_transfer_gaps(program: Program,
                     kinds: tuple[str, ...] = ER_EXACT_KINDS) -> list[TransferGap]:
    """Compare per-variable transfers against the collecting step."""
    domain = ERDomain(program)
    info = program.info
    by_env: dict[TypeEnv, list[ERState]] = {}
    gaps = []
    for method, op in iter_ops(program, kinds):
        if op.env_in not in by_env:
            by_env[op.env_in] = list(canonical_elements_er(info, op.env_in))
        for state in by_env[op.env_in]:
            if op.kind == "lookup":
                got = domain.lookup(op, state)
            else:
                got = domain.transfer(op, state)
            stepped = concrete_step(program, op,
                                    representatives_er(info, op.env_in, state))
            best = alpha_er(info, op.env_out, stepped)
            if got != best:
                gaps.append(TransferGap(method, op, state, got, best))
    return gaps


# ---------------------------------------------------------------------------
# membership through the embedding


@dataclass
class MembershipGap:
    """A sampled state for which refinement and membership disagree."""

    env: TypeEnv
    state_alpha: ERState
    points: int
    refined: bool
    member: bool


def random_er_state(rng: random.Random, info: StaticInfo,
                    env: TypeEnv) -> ERState | None:
    """Draw a random collected abstract state over ``env`` (None = bottom)."""
    frame = {}
    for var in _class_vars(info, env):
        mask = info.compatible(info.points.all_bits, env[var])
        frame[var] = rng.getrandbits(len(info.points)) & mask
    memory = {}
    for fname, ftype in class_fields(info).items():
        mask = info.compatible(info.points.all_bits, ftype)
        memory[fname] = rng.getrandbits(len(info.points)) & mask
    return xi(info, env, ERState.make(frame, memory))


def membership_gaps(program: Program, env: TypeEnv, samples: int = 1000,
                    seed: int = 0) -> list[MembershipGap]:
    """Sample (state, point set) pairs and test the membership equivalence.

    For a single concrete state the per-variable abstraction should refine
    the embedded image of a point set exactly when the reachable creation
    points are contained in that set.  Draws concrete states from the
    worst-state enumeration of random abstract states, so both common and
    adversarial shapes appear.
    """
    info = program.info
    rng = random.Random(seed)
    cache: dict = {}
    gaps = []
    drawn = 0
    attempts = 0
    while drawn < samples:
        attempts += 1
        if attempts > 50 * samples:
            raise ValueError(f"no drawable states over {dict(env.items())}")
        state = random_er_state(rng, info, env)
        if state is None:
            continue
        concretes = representatives_er(info, env, state)
        if not concretes:
            continue
        sigma = concretes[rng.randrange(len(concretes))]
        e = delta(info, env,
                  rng.getrandbits(len(info.points)) & info.points.all_bits,
                  cache)
        drawn += 1
        abstraction = alpha_er(info, env, [sigma])
        refined = leq_state(abstraction, theta(info, env, e))
        member = alpha(info, [sigma]) | e == e
        if refined != member:
            gaps.append(MembershipGap(env, abstraction,
                                      alpha(info, [sigma]), refined, member))
    return gaps

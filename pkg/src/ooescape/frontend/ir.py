"""Operation-level IR.

A method body is a control-flow graph of blocks.  Each block is a straight
sequence of operations followed by a terminator (unconditional jump, two-way
branch, or method exit).  Every operation records the type environment of its
input and output states, fixed at lowering time — interpreters and abstract
transfer functions never re-derive scopes.

Two operation kinds are composite:

* binary operations (``eq``/``plus``/``lt``/``minus``/``put_field``) carry the
  code of their right operand in ``rhs``.  A binary op receives the state
  after its left operand as first argument, evaluates ``rhs`` from that state
  with the result slot dropped, and combines the two states.
* ``vcall`` carries one :class:`Candidate` per method the call may dispatch
  to.  Each candidate bundles the guard (``lookup``), the frame construction
  (``call``) and the merge back into the caller (``return``); the callee body
  itself is shared, not inlined.

A *point* is a pair ``(block_id, n)`` denoting the state after the first
``n`` operations of that block; ``(b, 0)`` is the block entry, where joins
happen.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..model import MethodSig, StaticInfo, TypeEnv

Point = tuple[int, int]

# operation kinds that take a second input state (and carry rhs code)
BINARY_KINDS = frozenset({"eq", "plus", "lt", "minus", "put_field"})


@dataclass(frozen=True)
class Op:
    kind: str
    env_in: TypeEnv
    env_out: TypeEnv
    value: int | None = None            # get_int
    name: str | None = None             # variable / field / class / point name
    names: tuple[str, ...] | None = None  # restrict variables, call arguments
    method: str | None = None           # call / return / lookup target
    selector: str | None = None         # lookup selector
    vtype: str | None = None            # expand type
    rhs: tuple["Op", ...] | None = None  # right-operand code of binary kinds
    env_rhs: TypeEnv | None = None      # env of the second input state
    candidates: tuple["Candidate", ...] | None = None  # vcall
    label: str | None = None            # watchpoint name on nop
    line: int = 0

    def __repr__(self) -> str:
        bits = [self.kind]
        for attr in ("value", "name", "method", "selector", "vtype", "label"):
            v = getattr(self, attr)
            if v is not None:
                bits.append(str(v))
        if self.names is not None:
            bits.append(",".join(self.names))
        if self.candidates is not None:
            bits.append(f"<{len(self.candidates)} candidates>")
        return f"Op({' '.join(bits)})"


@dataclass(frozen=True)
class Candidate:
    """One dispatch target of a virtual call site."""

    method: str
    lookup: Op
    call: Op
    ret: Op


@dataclass(frozen=True)
class Goto:
    target: int


@dataclass(frozen=True)
class Branch:
    then: int
    els: int


@dataclass(frozen=True)
class Exit:
    pass


@dataclass(frozen=True)
class Block:
    id: int
    instrs: tuple[Op, ...]
    term: Goto | Branch | Exit

    def successors(self) -> tuple[int, ...]:
        if isinstance(self.term, Goto):
            return (self.term.target,)
        if isinstance(self.term, Branch):
            return (self.term.then, self.term.els)
        return ()


@dataclass
class MethodIR:
    """Lowered body of one method."""

    sig: MethodSig
    entry_env: TypeEnv                      # params + this (out not yet in scope)
    exit_env: TypeEnv                       # out + surviving shadow copies
    blocks: tuple[Block, ...]               # blocks[0] is the entry block
    schedule: tuple[tuple[str, Point], ...]  # decoration points in source order
    watchpoints: dict[str, Point] = field(default_factory=dict)
    shadow_vars: tuple[str, ...] = ()

    @property
    def name(self) -> str:
        return self.sig.name

    def block(self, bid: int) -> Block:
        return self.blocks[bid]

    def points(self):
        """All decoration points, block by block."""
        for b in self.blocks:
            for i in range(len(b.instrs) + 1):
                yield (b.id, i)

    def predecessors(self) -> dict[int, list[int]]:
        preds: dict[int, list[int]] = {b.id: [] for b in self.blocks}
        for b in self.blocks:
            for s in b.successors():
                preds[s].append(b.id)
        return preds


def boundary_envs(ir: MethodIR) -> dict[Point, TypeEnv]:
    """Scope at every decoration point, recovered from the recorded op envs.

    Blocks without instructions take the scope flowing in from any
    predecessor (the lowering keeps scopes equal at joins).
    """
    envs: dict[Point, TypeEnv] = {}
    for block in ir.blocks:
        for i, op in enumerate(block.instrs):
            envs[(block.id, i)] = op.env_in
        if block.instrs:
            envs[(block.id, len(block.instrs))] = block.instrs[-1].env_out
    pending = [b for b in ir.blocks if not b.instrs]
    preds = ir.predecessors() if pending else {}
    while pending:
        rest = []
        for block in pending:
            if block.id == 0:
                envs[(block.id, 0)] = ir.entry_env
                continue
            sources = [envs[(p, len(ir.block(p).instrs))] for p in preds[block.id]
                       if (p, len(ir.block(p).instrs)) in envs]
            if sources:
                envs[(block.id, 0)] = sources[0]
            else:
                rest.append(block)
        if len(rest) == len(pending):
            raise ValueError(f"block scope underdetermined in {ir.name}")
        pending = rest
    return envs


@dataclass
class Program:
    """A fully lowered program plus its static tables."""

    info: StaticInfo
    methods: dict[str, MethodIR]
    entry: str | None                       # qualified name of the entry method
    source_name: str = "<source>"

    @property
    def classes(self):
        return self.info.classes

    @property
    def points(self):
        return self.info.points

    def method(self, name: str) -> MethodIR:
        return self.methods[name]

    def entry_method(self) -> MethodIR:
        if self.entry is None:
            raise ValueError("program has no entry method configured")
        return self.methods[self.entry]

"""Constraint-based backend for the per-variable analysis.

Instead of iterating transfer functions, this engine compiles the refined
domain's dataflow into inclusion constraints over creation-point bitsets:

* one unknown per program point and class-typed frame variable (frame
  slots are flow-sensitive by default, mergeable per method);
* one unknown per class-typed field, global by default (flow-insensitive,
  which is cheap and usually loses nothing) or per program point;
* an allocation contributes a constant seed ``{point} <= unknown``, every
  other transfer contributes copy edges ``solution(dst) >= solution(src)
  & mask`` where the mask keeps dispatch filters and field typing exact;
* slots an operation does not touch get plain default-copy edges.

Solving condenses the copy graph into strongly connected components and
propagates least solutions in dependency order, starting from empty sets
everywhere; components are iterated locally until stable, so an acyclic
graph is solved with exactly one visit per component.

Pure inclusion edges cannot express that a dispatch candidate receives
nothing at all when no receiver matches it, so generation prunes instead:
it solves, discards call-site candidates whose filtered receiver solution
came out empty (their argument and memory edges with them), drops method
bodies that are no longer reachable from the entry, and repeats until the
candidate set is stable.  Solutions only shrink along the way, so the
refinement is monotone and terminates; each intermediate solution already
over-approximates every concrete run, which keeps the pruning sound.

The result is deliberately comparable with the denotational engine: the
same summaries are produced, and with per-point field unknowns the escape
sets match it on call graphs the pruning resolves exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import networkx as nx

from .domain_er import ERDomain, ERState, class_fields, rho, xi
from .engine import AnalysisResult, MethodSummary, creation_sites
from .frontend import Exit, MethodIR, Op, Program, boundary_envs
from .model import OUT, RES, THIS, TypeEnv

FIELD_MODES = ("merged", "per-point")
FRAME_MODES = ("per-point", "merged")

#: Unknowns are plain tuples: ``("v", owner, name)`` for frame slots and
#: ``("f", owner, name)`` for field slots, where ``owner`` is a program
#: point id when flow-sensitive and a method name (or ``"*"``) when merged.
Unknown = tuple


#: Stable identity of one dispatch candidate: the enclosing method, the
#: position of the call in its body, and the candidate's rank at the site.
SiteKey = tuple


@dataclass
class ConstraintGraph:
    """Inclusion constraints extracted from one lowered program."""

    program: Program
    fields_mode: str
    frames_mode: str
    index: dict[Unknown, int]                 # unknown -> dense id
    seeds: dict[Unknown, int]                 # constant <= unknown
    edges: list[tuple[Unknown, Unknown, int]]  # (src, dst, mask)
    nc: int                                   # constraints as emitted
    point_envs: dict[int, TypeEnv]            # program point -> scope
    point_owner: dict[int, str]               # program point -> method
    entry_points: dict[str, int]              # method -> entry point id
    exit_points: dict[str, int]               # method -> exit point id
    schedule_points: dict[str, tuple[tuple[str, int], ...]]
    watch_points: dict[str, dict[str, int]]
    # dispatch candidates kept in this graph: site -> (receiver unknown,
    # dispatch mask, callee); pruned-away sites are in `dead_sites`.
    candidate_sites: dict[SiteKey, tuple[Unknown, int, str]] = field(default_factory=dict)
    dead_sites: frozenset[SiteKey] = frozenset()
    live_methods: frozenset[str] = frozenset()

    def scc_order(self) -> list[list[Unknown]]:
        """Strongly connected components, dependency sources first."""
        g = nx.DiGraph()
        g.add_nodes_from(self.index)
        g.add_edges_from((src, dst) for src, dst, _ in self.edges)
        cond = nx.condensation(g)
        return [sorted(cond.nodes[c]["members"], key=self.index.__getitem__)
                for c in nx.topological_sort(cond)]


@dataclass
class Solution:
    """Least assignment satisfying a constraint graph, plus solver stats."""

    values: dict[Unknown, int]
    visits: int
    components: int
    millis: float

    def linearity(self) -> float:
        seen = sum(1 for _ in self.values)
        return seen / self.components if self.components else 1.0


class _Builder:
    def __init__(self, program: Program, fields: str, frames: str,
                 dead: frozenset[SiteKey] = frozenset(),
                 live: frozenset[str] | None = None):
        if fields not in FIELD_MODES:
            raise ValueError(f"unknown field mode {fields!r}")
        if frames not in FRAME_MODES:
            raise ValueError(f"unknown frame mode {frames!r}")
        self.program = program
        self.info = program.info
        self.fields_mode = fields
        self.frames_mode = frames
        self.dead = dead
        self.live = frozenset(program.methods) if live is None else live
        self.domain = ERDomain(program)
        self.fields = list(class_fields(self.info))
        self.all_bits = self.info.points.all_bits
        self.index: dict[Unknown, int] = {}
        self.seeds: dict[Unknown, int] = {}
        self.edges: list[tuple[Unknown, Unknown, int]] = []
        self.nc = 0
        self.point_envs: dict[int, TypeEnv] = {}
        self.point_owner: dict[int, str] = {}
        self.entry_points: dict[str, int] = {}
        self.exit_points: dict[str, int] = {}
        self.schedule_points: dict[str, tuple[tuple[str, int], ...]] = {}
        self.watch_points: dict[str, dict[str, int]] = {}
        self.candidate_sites: dict[SiteKey, tuple[Unknown, int, str]] = {}
        self._next = 0
        self._dispatch: dict[tuple[str, str], int] = {}

    # -- unknowns ----------------------------------------------------------

    def fresh(self, owner: str, env: TypeEnv) -> int:
        pid = self._next
        self._next += 1
        self.point_envs[pid] = env
        self.point_owner[pid] = owner
        return pid

    def _register(self, u: Unknown) -> Unknown:
        if u not in self.index:
            self.index[u] = len(self.index)
        return u

    def var_u(self, pid: int, name: str) -> Unknown:
        owner = pid if self.frames_mode == "per-point" else self.point_owner[pid]
        return self._register(("v", owner, name))

    def field_u(self, pid: int, name: str) -> Unknown:
        owner = pid if self.fields_mode == "per-point" else "*"
        return self._register(("f", owner, name))

    # -- constraint emission -----------------------------------------------

    def seed(self, dst: Unknown, bits: int) -> None:
        self.seeds[dst] = self.seeds.get(dst, 0) | bits
        self.nc += 1

    def edge(self, src: Unknown, dst: Unknown, mask: int | None = None) -> None:
        if src == dst:
            return  # a slot trivially includes itself
        self.edges.append((src, dst, self.all_bits if mask is None else mask))
        self.nc += 1

    def _class_vars(self, env: TypeEnv) -> list[str]:
        is_class = self.info.classes.is_class
        return [v for v in env if is_class(env[v])]

    def copy_frame(self, src: int, dst: int, skip: tuple[str, ...] = ()) -> None:
        src_vars = set(self._class_vars(self.point_envs[src]))
        for v in self._class_vars(self.point_envs[dst]):
            if v not in skip and v in src_vars:
                self.edge(self.var_u(src, v), self.var_u(dst, v))

    def copy_fields(self, src: int, dst: int) -> None:
        if self.fields_mode == "merged":
            return  # global unknowns: nothing flows between points
        for f in self.fields:
            self.edge(self.field_u(src, f), self.field_u(dst, f))

    def dispatch_mask(self, selector: str, method: str) -> int:
        key = (selector, method)
        if key not in self._dispatch:
            table = self.info.points
            classes = self.info.classes
            mask = 0
            for name in table.names_of(table.all_bits):
                sig = classes.methods_of(table.class_of(name)).get(selector)
                if sig is not None and sig.name == method:
                    mask |= table.bit(name)
            self._dispatch[key] = mask
        return self._dispatch[key]

    # -- program walk --------------------------------------------------------

    def build(self) -> ConstraintGraph:
        program = self.program
        boundary: dict[str, dict[tuple[int, int], int]] = {}
        for name in sorted(program.methods):
            ir = program.methods[name]
            envs = boundary_envs(ir)
            pids = {pt: self.fresh(name, envs[pt]) for pt in ir.points()}
            boundary[name] = pids
            self.entry_points[name] = pids[(0, 0)]
            self.exit_points[name] = self.fresh(name, ir.exit_env)
            self.schedule_points[name] = tuple(
                (label, pids[pt]) for label, pt in ir.schedule)
            self.watch_points[name] = {label: pids[pt]
                                       for label, pt in ir.watchpoints.items()}

        for name in sorted(program.methods):
            if name not in self.live:
                continue
            ir = program.methods[name]
            pids = boundary[name]
            for block in ir.blocks:
                for i, op in enumerate(block.instrs):
                    self._op(pids[(block.id, i)], pids[(block.id, i + 1)], op,
                             (name, block.id, i))
                endp = pids[(block.id, len(block.instrs))]
                if isinstance(block.term, Exit):
                    self.copy_frame(endp, self.exit_points[name])
                    self.copy_fields(endp, self.exit_points[name])
                for succ in block.successors():
                    self.copy_frame(endp, pids[(succ, 0)])
                    self.copy_fields(endp, pids[(succ, 0)])

        if program.entry is not None:
            ir = program.entry_method()
            entry = self.domain.entry_value(ir)
            pid = self.entry_points[ir.name]
            for v, bits in entry.frame:
                if bits:
                    self.seed(self.var_u(pid, v), bits)

        return ConstraintGraph(
            program=program,
            fields_mode=self.fields_mode,
            frames_mode=self.frames_mode,
            index=self.index,
            seeds=self.seeds,
            edges=self.edges,
            nc=self.nc,
            point_envs=self.point_envs,
            point_owner=self.point_owner,
            entry_points=self.entry_points,
            exit_points=self.exit_points,
            schedule_points=self.schedule_points,
            watch_points=self.watch_points,
            candidate_sites=self.candidate_sites,
            dead_sites=self.dead,
            live_methods=self.live,
        )

    # -- one operation -------------------------------------------------------

    def _op(self, p: int, q: int, op: Op, loc: SiteKey) -> None:
        kind = op.kind
        if kind == "vcall":
            self._vcall(p, q, op, loc)
            return
        if op.rhs is not None:
            self._binary(p, q, op, loc)
            return
        is_class = self.info.classes.is_class
        if kind in ("nop", "get_int", "is_true", "is_false"):
            self.copy_frame(p, q)
        elif kind == "get_null":
            self.copy_frame(p, q, skip=(RES,))
        elif kind == "get_var":
            self.copy_frame(p, q, skip=(RES,))
            if is_class(op.env_in[op.name]):
                self.edge(self.var_u(p, op.name), self.var_u(q, RES))
        elif kind == "new":
            self.copy_frame(p, q, skip=(RES,))
            self.seed(self.var_u(q, RES), self.info.points.bit(op.name))
        elif kind == "expand":
            self.copy_frame(p, q, skip=(op.name,))
        elif kind == "put_var":
            self.copy_frame(p, q, skip=(RES, op.name))
            if RES in op.env_in and is_class(op.env_out[op.name]):
                self.edge(self.var_u(p, RES), self.var_u(q, op.name))
        elif kind == "is_null":
            self.copy_frame(p, q, skip=(RES,))
        elif kind == "restrict":
            self.copy_frame(p, q, skip=tuple(op.names))
        elif kind == "get_field":
            self.copy_frame(p, q, skip=(RES,))
            ftype = op.env_out[RES]
            if is_class(ftype):
                self.edge(self.field_u(p, op.name), self.var_u(q, RES),
                          self.info.compatible(self.all_bits, ftype))
        else:
            raise ValueError(f"cannot encode operation kind {kind!r}")
        self.copy_fields(p, q)

    def _binary(self, p: int, q: int, op: Op, loc: SiteKey) -> None:
        owner = self.point_owner[p]
        cur = self.fresh(owner, op.env_in.restrict([RES]))
        self.copy_frame(p, cur, skip=(RES,))
        self.copy_fields(p, cur)
        for j, inner in enumerate(op.rhs):
            nxt = self.fresh(owner, inner.env_out)
            self._op(cur, nxt, inner, loc + ("r", j))
            cur = nxt
        self.copy_frame(cur, q, skip=(RES,))
        self.copy_fields(cur, q)
        if op.kind == "put_field":
            env_rhs = op.env_rhs
            if RES in env_rhs and self.info.classes.is_class(env_rhs[RES]):
                # Weak update: the written field also keeps its old points.
                self.edge(self.var_u(cur, RES), self.field_u(q, op.name))

    def _vcall(self, p: int, q: int, op: Op, loc: SiteKey) -> None:
        is_class = self.info.classes.is_class
        owner = self.point_owner[p]
        for k, cand in enumerate(op.candidates):
            site = loc + (k,)
            if site in self.dead:
                continue
            lk = cand.lookup
            mask = self.dispatch_mask(lk.selector, lk.method)
            self.candidate_sites[site] = (self.var_u(p, RES), mask, cand.method)
            filtered = self.fresh(owner, lk.env_out)
            self.copy_frame(p, filtered, skip=(RES,))
            self.copy_fields(p, filtered)
            self.edge(self.var_u(p, RES), self.var_u(filtered, RES), mask)

            entry = self.entry_points[cand.method]
            callee_env = cand.call.env_out
            formals = sorted(n for n in callee_env if n != THIS)
            for formal, temp in zip(formals, cand.call.names):
                if is_class(callee_env[formal]):
                    self.edge(self.var_u(filtered, temp),
                              self.var_u(entry, formal))
            self.edge(self.var_u(filtered, RES), self.var_u(entry, THIS))
            self.copy_fields(filtered, entry)

            made = self.exit_points[cand.method]
            ret_env = cand.ret.env_out
            self.copy_frame(filtered, q, skip=(RES,))
            if RES in ret_env and is_class(ret_env[RES]):
                self.edge(self.var_u(made, OUT), self.var_u(q, RES))
            self.copy_fields(made, q)


def _reachable(program: Program,
               sites: dict[SiteKey, tuple[Unknown, int, str]]) -> frozenset[str]:
    """Methods reachable from the entry through the given call candidates."""
    if program.entry is None:
        return frozenset()
    calls: dict[str, set[str]] = {}
    for site, (_, _, callee) in sites.items():
        calls.setdefault(site[0], set()).add(callee)
    reach = {program.entry}
    frontier = [program.entry]
    while frontier:
        for callee in sorted(calls.get(frontier.pop(), ())):
            if callee not in reach:
                reach.add(callee)
                frontier.append(callee)
    return frozenset(reach)


def generate_constraints(program: Program, fields: str = "merged",
                         frames: str = "per-point",
                         prune: bool = True) -> ConstraintGraph:
    """Compile the refined-domain dataflow of ``program`` into constraints.

    With ``prune`` (the default), generation alternates with solving:
    candidates whose filtered receivers solve to the empty set are removed
    and bodies that fall off the call graph are not encoded, until stable.
    """
    dead: frozenset[SiteKey] = frozenset()
    live = frozenset(program.methods)
    while True:
        graph = _Builder(program, fields, frames, dead=dead, live=live).build()
        if not prune:
            return graph
        solution = solve_constraints(graph)
        new_dead = set(dead)
        for site, (receiver, mask, _callee) in graph.candidate_sites.items():
            if solution.values[receiver] & mask == 0:
                new_dead.add(site)
        kept = {site: spec for site, spec in graph.candidate_sites.items()
                if site not in new_dead}
        new_live = _reachable(program, kept)
        if frozenset(new_dead) == dead and new_live == live:
            return graph
        dead, live = frozenset(new_dead), new_live


def solve_constraints(graph: ConstraintGraph) -> Solution:
    """Least solution by propagation over the condensed copy graph."""
    started = time.perf_counter()
    in_edges: dict[Unknown, list[tuple[Unknown, int]]] = {}
    for src, dst, mask in graph.edges:
        in_edges.setdefault(dst, []).append((src, mask))
    values = {u: graph.seeds.get(u, 0) for u in graph.index}
    visits = 0
    components = 0
    for members in graph.scc_order():
        components += 1
        if len(members) == 1 and not any(
                src == members[0] for src, _ in in_edges.get(members[0], ())):
            u = members[0]
            acc = values[u]
            for src, mask in in_edges.get(u, ()):
                acc |= values[src] & mask
            values[u] = acc
            visits += 1
            continue
        while True:
            visits += 1
            changed = False
            for u in members:
                acc = values[u]
                for src, mask in in_edges.get(u, ()):
                    acc |= values[src] & mask
                if acc != values[u]:
                    values[u] = acc
                    changed = True
            if not changed:
                break
    millis = (time.perf_counter() - started) * 1000.0
    return Solution(values=values, visits=visits, components=components,
                    millis=millis)


def state_at(graph: ConstraintGraph, solution: Solution, pid: int,
             collect: bool = True) -> ERState | None:
    """Reassemble the abstract state a solved graph implies at one point."""
    info = graph.program.info
    env = graph.point_envs[pid]
    is_class = info.classes.is_class
    values = solution.values
    frame = {}
    for v in env:
        if is_class(env[v]):
            owner = pid if graph.frames_mode == "per-point" else graph.point_owner[pid]
            frame[v] = values.get(("v", owner, v), 0)
    memory = {}
    for f in class_fields(info):
        owner = pid if graph.fields_mode == "per-point" else "*"
        memory[f] = values.get(("f", owner, f), 0)
    state = ERState.make(frame, memory)
    return xi(info, env, state) if collect else state


def analyze_constraints(program: Program, fields: str = "merged",
                        frames: str = "per-point",
                        prune: bool = True) -> AnalysisResult:
    """Run the constraint backend end to end and summarise like the engine."""
    started = time.perf_counter()
    graph = generate_constraints(program, fields=fields, frames=frames,
                                 prune=prune)
    solution = solve_constraints(graph)
    domain = ERDomain(program)
    info = program.info
    sites = creation_sites(program)
    table = info.points
    methods: dict[str, MethodSummary] = {}
    for name in sorted(program.methods):
        ir = program.methods[name]
        entry = state_at(graph, solution, graph.entry_points[name])
        raw_exit = state_at(graph, solution, graph.exit_points[name], collect=False)
        exit_value = xi(info, ir.exit_env, raw_exit)
        escaping = rho(info, raw_exit) & ~table.external_bits
        points = tuple(
            (p, table.class_of(p), not escaping >> table.index(p) & 1)
            for p in sorted(sites[name], key=table.index)
        )
        methods[name] = MethodSummary(
            name=name,
            entry=entry,
            exit=exit_value,
            decorations=tuple(
                (label, state_at(graph, solution, pid))
                for label, pid in graph.schedule_points[name]),
            watch={label: state_at(graph, solution, pid)
                   for label, pid in graph.watch_points[name].items()},
            escaping=escaping,
            points=points,
        )
    millis = (time.perf_counter() - started) * 1000.0
    return AnalysisResult(
        domain_name=domain.name,
        methods=methods,
        iterations=solution.visits,
        nc=graph.nc,
        linearity=solution.linearity(),
        millis=millis,
    )

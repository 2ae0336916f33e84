"""Lowering: AST → typed operation-level IR.

This pass fixes everything the semantics need statically:

* class tables and method signatures, with override-compatibility checks
  (an override must repeat the overridden signature exactly, so every
  dispatch candidate of a call site agrees on argument pairing and result
  type);
* the creation-point table, in source order, with the entry receiver (and
  optionally the entry method's reference parameters) appended as external
  points;
* per-method control-flow graphs whose operations carry their input/output
  type environments, checked against each operation's side conditions;
* shadow parameter copies: for each reference parameter ``v`` (including
  ``this``) a fresh ``v'`` is initialized to ``v`` on entry and never written
  again, so the values the caller passed in remain observable at the exit
  even if the body reassigns the originals.

Expressions thread their result through the reserved slot ``res``.  Binary
operations and field stores keep the code of their right operand nested in
the operation itself (see :mod:`.ir`), evaluated from the left state with
``res`` dropped.  Virtual calls stash arguments in fresh temporaries, then
branch over dispatch candidates, each guarded by a ``lookup``.
"""

from __future__ import annotations

from ..model import (
    INT,
    OUT,
    RES,
    THIS,
    ClassTable,
    CreationPoint,
    CreationPointTable,
    MethodSig,
    ModelError,
    StaticInfo,
    TypeEnv,
)
from . import syntax as ast
from .ir import Block, Branch, Candidate, Exit, Goto, MethodIR, Op, Program
from .syntax import ParseError, parse_source

VOID = "void"
RESERVED_VARS = {RES, OUT, THIS}


class FrontendError(Exception):
    """A lowering-time error (unknown names, type mismatches, bad structure)."""

    def __init__(self, msg: str, line: int = 0):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


def shadow_name(v: str) -> str:
    return v + "'"


def shadow_vars_of(sig: MethodSig, classes: ClassTable) -> tuple[str, ...]:
    """Names of the shadow copies a method body introduces, this' last."""
    out = [
        shadow_name(p)
        for p in sig.params
        if classes.is_class(sig.param_env[p])
    ]
    out.append(shadow_name(THIS))
    return tuple(out)


def method_exit_env(sig: MethodSig, classes: ClassTable,
                    shadows: bool) -> TypeEnv:
    """The environment of a method's exit states: out plus shadow copies."""
    env = {OUT: sig.return_type}
    if shadows:
        for p in sig.params:
            t = sig.param_env[p]
            if classes.is_class(t):
                env[shadow_name(p)] = t
        env[shadow_name(THIS)] = sig.klass
    return TypeEnv.make(env)


# ---------------------------------------------------------------------------
# Signature collection
# ---------------------------------------------------------------------------

def _collect_classes(prog: ast.SourceProgram) -> ClassTable:
    classes, parent, field_decls, sigs = [], {}, {}, {}
    for cd in prog.classes:
        if cd.name in parent:
            raise FrontendError(f"duplicate class {cd.name!r}", cd.line)
        classes.append(cd.name)
        parent[cd.name] = cd.parent
        field_decls[cd.name] = [(f, t) for f, t, _ in cd.fields]
        table = set()
        for md in cd.methods:
            if md.name in table:
                raise FrontendError(
                    f"duplicate method {md.name!r} in class {cd.name}", md.line
                )
            table.add(md.name)
            seen = set()
            env = {THIS: cd.name, OUT: INT if md.ret == VOID else md.ret}
            for pname, ptype in md.params:
                if pname in RESERVED_VARS:
                    raise FrontendError(
                        f"parameter name {pname!r} is reserved", md.line
                    )
                if pname in seen:
                    raise FrontendError(
                        f"duplicate parameter {pname!r}", md.line
                    )
                seen.add(pname)
                env[pname] = ptype
            sigs[f"{cd.name}.{md.name}"] = MethodSig(
                name=f"{cd.name}.{md.name}",
                klass=cd.name,
                selector=md.name,
                params=tuple(p for p, _ in md.params),
                param_env=TypeEnv.make(env),
            )
    by_class: dict[str, dict[str, MethodSig]] = {c: {} for c in classes}
    for sig in sigs.values():
        by_class[sig.klass][sig.selector] = sig
    try:
        table = ClassTable(classes, parent, field_decls, by_class)
    except ModelError as e:
        raise FrontendError(str(e)) from e
    # check signature types and override compatibility
    for sig in sigs.values():
        for p in sig.params:
            t = sig.param_env[p]
            if t != INT and not table.is_class(t):
                raise FrontendError(
                    f"unknown type {t!r} in {sig.name}"
                )
        rt = sig.return_type
        if rt != INT and not table.is_class(rt):
            raise FrontendError(f"unknown return type {rt!r} in {sig.name}")
    for cd in prog.classes:
        sup = cd.parent
        if sup is None:
            continue
        inherited = table.methods_of(sup)
        for md in cd.methods:
            if md.name not in inherited:
                continue
            base = inherited[md.name]
            mine = by_class[cd.name][md.name]
            same = base.params == mine.params and all(
                base.param_env[p] == mine.param_env[p] for p in base.params
            ) and base.return_type == mine.return_type
            if not same:
                raise FrontendError(
                    f"{mine.name} overrides {base.name} with a different "
                    "signature",
                    md.line,
                )
    return table


# ---------------------------------------------------------------------------
# Method body builder
# ---------------------------------------------------------------------------

class _Builder:
    """Accumulates blocks for one method; tracks the current environment."""

    def __init__(self, entry_env: TypeEnv):
        self.instrs: list[list[Op]] = [[]]
        self.terms: list = [None]
        self.cur = 0
        self.env = entry_env
        self.sink: list[Op] = self.instrs[0]
        self.scopes: list[list[str]] = []
        self.schedule: list[tuple[str, tuple[int, int]]] = []
        self.watchpoints: dict[str, tuple[int, int]] = {}
        self.temp_count = 0

    def new_block(self) -> int:
        self.instrs.append([])
        self.terms.append(None)
        return len(self.instrs) - 1

    def switch_to(self, bid: int, env: TypeEnv):
        self.cur = bid
        self.sink = self.instrs[bid]
        self.env = env

    def close(self, term):
        assert self.terms[self.cur] is None
        self.terms[self.cur] = term

    def emit(self, op: Op):
        assert op.env_in is self.env, f"env mismatch at {op}"
        self.sink.append(op)
        self.env = op.env_out

    def point(self) -> tuple[int, int]:
        assert self.sink is self.instrs[self.cur]
        return (self.cur, len(self.sink))

    def in_sub(self, base_env: TypeEnv, fn) -> tuple[tuple[Op, ...], TypeEnv]:
        """Run ``fn`` collecting ops into a detached list (binary rhs code)."""
        saved_sink, saved_env = self.sink, self.env
        sub: list[Op] = []
        self.sink, self.env = sub, base_env
        fn()
        ops, env = tuple(sub), self.env
        self.sink, self.env = saved_sink, saved_env
        return ops, env

    def fresh_temp(self) -> str:
        self.temp_count += 1
        return f"$t{self.temp_count}"


class _Lowerer:
    def __init__(self, classes: ClassTable, shadows: bool):
        self.classes = classes
        self.shadows = shadows
        self.sites: list[CreationPoint] = []
        self.site_labels: set[str] = set()
        self.watch_names: set[str] = set()

    # -- creation sites -------------------------------------------------------

    def register_site(self, label: str | None, klass: str,
                      line: int, col: int) -> str:
        name = label if label is not None else f"new@{line}:{col}"
        if name in self.site_labels:
            raise FrontendError(f"duplicate creation-point label {name!r}", line)
        self.site_labels.add(name)
        self.sites.append(CreationPoint(name, klass))
        return name

    # -- methods ---------------------------------------------------------------

    def lower_method(self, sig: MethodSig, decl: ast.MethodDecl) -> MethodIR:
        entry_env = sig.param_env.restrict([OUT])
        b = _Builder(entry_env)
        self.b = b
        self.sig = sig
        b.schedule.append(("entry", (0, 0)))

        exit_block = b.new_block()

        # shadow copies of reference parameters, then this
        shadow_list = []
        if self.shadows:
            for v in (*sig.params, THIS):
                t = sig.param_env[v]
                if not self.classes.is_class(t):
                    continue
                sv = shadow_name(v)
                if sv in b.env:
                    continue  # already present: insertion is idempotent
                shadow_list.append(sv)
                self._expand(sv, t, decl.line)
                self._get_var(v, decl.line)
                self._put_var(sv, decl.line)

        # out starts at the default value of the return type
        self._expand(OUT, sig.return_type, decl.line)
        if sig.return_type == INT:
            self._get_int(0, decl.line)
        else:
            self._get_null(sig.return_type, decl.line)
        self._put_var(OUT, decl.line)

        prologue_env = b.env
        terminated = self.lower_block(decl.body, exit_block, prologue_env)
        if not terminated:
            assert b.env is prologue_env
            b.close(Goto(exit_block))

        # exit block: drop the original parameters and this
        b.switch_to(exit_block, prologue_env)
        gone = [*sig.params, THIS]
        self._restrict(gone, decl.line)
        exit_env = b.env
        b.schedule.append(("exit", b.point()))
        b.watchpoints[f"{sig.name}:exit"] = b.point()
        b.close(Exit())

        blocks = tuple(
            Block(i, tuple(ops), term)
            for i, (ops, term) in enumerate(zip(b.instrs, b.terms))
        )
        for blk in blocks:
            assert blk.term is not None, f"unterminated block {blk.id} in {sig.name}"
        expected_exit = method_exit_env(sig, self.classes, self.shadows)
        assert exit_env is expected_exit
        return MethodIR(
            sig=sig,
            entry_env=entry_env,
            exit_env=exit_env,
            blocks=blocks,
            schedule=tuple(b.schedule),
            watchpoints=b.watchpoints,
            shadow_vars=tuple(shadow_list),
        )

    # -- statements --------------------------------------------------------------

    def lower_block(self, blk: ast.SBlock, exit_block: int,
                    prologue_env: TypeEnv) -> bool:
        b = self.b
        b.scopes.append([])
        terminated = False
        for stmt in blk.stmts:
            if terminated:
                raise FrontendError("unreachable statement", getattr(stmt, "line", 0))
            terminated = self.lower_stmt(stmt, exit_block, prologue_env)
        locals_here = b.scopes.pop()
        if not terminated and locals_here:
            self._restrict(locals_here, blk.line)
        return terminated

    def lower_stmt(self, stmt, exit_block: int, prologue_env: TypeEnv) -> bool:
        b = self.b
        if isinstance(stmt, ast.SWatch):
            if stmt.name in self.watch_names:
                raise FrontendError(
                    f"duplicate watchpoint {stmt.name!r}", stmt.line
                )
            self.watch_names.add(stmt.name)
            b.emit(Op("nop", env_in=b.env, env_out=b.env,
                      label=stmt.name, line=stmt.line))
            b.watchpoints[stmt.name] = b.point()
            b.schedule.append((f"@{stmt.name}", b.point()))
            return False

        if isinstance(stmt, ast.SBlock):
            return self.lower_block(stmt, exit_block, prologue_env)

        if isinstance(stmt, ast.SVarDecl):
            if stmt.name in RESERVED_VARS:
                raise FrontendError(
                    f"variable name {stmt.name!r} is reserved", stmt.line
                )
            t = stmt.vtype
            if t != INT and not self.classes.is_class(t):
                raise FrontendError(f"unknown type {t!r}", stmt.line)
            self._expand(stmt.name, t, stmt.line)
            b.scopes[-1].append(stmt.name)
            if stmt.init is not None:
                self.lower_expr(stmt.init, expected=t)
                self._put_var(stmt.name, stmt.line)
            b.schedule.append((f"L{stmt.line}", b.point()))
            return False

        if isinstance(stmt, ast.SAssign):
            self.lower_assign(stmt)
            b.schedule.append((f"L{stmt.line}", b.point()))
            return False

        if isinstance(stmt, ast.SExprStmt):
            self.lower_expr(stmt.expr, expected=None)
            self._restrict([RES], stmt.line)
            b.schedule.append((f"L{stmt.line}", b.point()))
            return False

        if isinstance(stmt, ast.SReturn):
            if stmt.expr is not None:
                self.lower_expr(stmt.expr, expected=self.sig.return_type)
                self._put_var(OUT, stmt.line)
            live = [v for scope in b.scopes for v in scope]
            if live:
                self._restrict(live, stmt.line)
            assert b.env is prologue_env
            b.schedule.append((f"L{stmt.line}", b.point()))
            b.close(Goto(exit_block))
            return True

        if isinstance(stmt, ast.SWhile):
            head = b.new_block()
            b.close(Goto(head))
            loop_env = b.env
            b.switch_to(head, loop_env)
            b.schedule.append((f"loop L{stmt.line}", (head, 0)))
            self.lower_cond(stmt.cond)
            cond_env = b.env
            body_blk = b.new_block()
            else_blk = b.new_block()
            b.close(Branch(body_blk, else_blk))
            b.switch_to(body_blk, cond_env)
            self._guard("is_true", stmt.line)
            assert b.env is loop_env
            terminated = self.lower_block(stmt.body, exit_block, prologue_env)
            if not terminated:
                assert b.env is loop_env
                b.close(Goto(head))
            b.switch_to(else_blk, cond_env)
            self._guard("is_false", stmt.line)
            assert b.env is loop_env
            return False

        if isinstance(stmt, ast.SIf):
            self.lower_cond(stmt.cond)
            cond_env = b.env
            outer_env = cond_env.restrict([RES])
            then_blk = b.new_block()
            else_blk = b.new_block()
            b.close(Branch(then_blk, else_blk))

            b.switch_to(then_blk, cond_env)
            self._guard("is_true", stmt.line)
            t_done = self.lower_block(stmt.then, exit_block, prologue_env)
            t_end = b.cur

            b.switch_to(else_blk, cond_env)
            self._guard("is_false", stmt.line)
            e_done = True
            if stmt.els is not None:
                e_done = self.lower_block(stmt.els, exit_block, prologue_env)
            else:
                e_done = False
            e_end = b.cur

            if t_done and e_done:
                return True
            join = b.new_block()
            if not t_done:
                b.cur = t_end
                b.close(Goto(join))
            if not e_done:
                b.cur = e_end
                b.close(Goto(join))
            b.switch_to(join, outer_env)
            return False

        raise FrontendError(f"cannot lower statement {stmt!r}")

    def lower_assign(self, stmt: ast.SAssign):
        b = self.b
        target = stmt.target
        if isinstance(target, ast.EVar):
            v = target.name
            if v not in b.env or v in RESERVED_VARS or v.endswith("'"):
                raise FrontendError(f"cannot assign to {v!r}", stmt.line)
            self.lower_expr(stmt.expr, expected=b.env[v])
            self._put_var(v, stmt.line)
            return
        # field store: evaluate the target object, then the value as rhs code
        assert isinstance(target, ast.EField)
        self.lower_expr(target.obj, expected=None)
        recv_t = b.env[RES]
        if not self.classes.is_class(recv_t):
            raise FrontendError("field store on a non-object", stmt.line)
        fid = self._field(recv_t, target.fname, stmt.line)
        ftype = self.classes.fields_of(recv_t)[fid]
        env1 = b.env
        base = env1.restrict([RES])
        rhs_ops, env2 = b.in_sub(
            base, lambda: self.lower_expr(stmt.expr, expected=ftype)
        )
        b.emit(Op(
            "put_field",
            env_in=env1,
            env_out=base,
            env_rhs=env2,
            rhs=rhs_ops,
            name=fid,
            line=stmt.line,
        ))

    def lower_cond(self, expr):
        self.lower_expr(expr, expected=INT)

    # -- expressions ----------------------------------------------------------------

    def lower_expr(self, expr, expected: str | None):
        b = self.b
        assert RES not in b.env
        if isinstance(expr, ast.EInt):
            self._get_int(expr.value, expr.line)
        elif isinstance(expr, ast.ENull):
            if expected is None or expected == INT:
                raise FrontendError(
                    "null needs a reference-typed context", expr.line
                )
            self._get_null(expected, expr.line)
        elif isinstance(expr, ast.EThis):
            self._get_var(THIS, expr.line)
        elif isinstance(expr, ast.EVar):
            if expr.name not in b.env or expr.name in RESERVED_VARS:
                raise FrontendError(f"unknown variable {expr.name!r}", expr.line)
            self._get_var(expr.name, expr.line)
        elif isinstance(expr, ast.EField):
            self.lower_expr(expr.obj, expected=None)
            recv_t = b.env[RES]
            if not self.classes.is_class(recv_t):
                raise FrontendError("field access on a non-object", expr.line)
            fid = self._field(recv_t, expr.fname, expr.line)
            ftype = self.classes.fields_of(recv_t)[fid]
            b.emit(Op(
                "get_field",
                env_in=b.env,
                env_out=b.env.replace(RES, ftype),
                name=fid,
                line=expr.line,
            ))
        elif isinstance(expr, ast.ENew):
            if not self.classes.is_class(expr.klass):
                raise FrontendError(f"unknown class {expr.klass!r}", expr.line)
            label = self.register_site(expr.label, expr.klass, expr.line, expr.col)
            b.emit(Op(
                "new",
                env_in=b.env,
                env_out=b.env.extend(RES, expr.klass),
                name=label,
                line=expr.line,
            ))
        elif isinstance(expr, ast.EBinary):
            self.lower_binary(expr)
        elif isinstance(expr, ast.ECall):
            self.lower_call(expr)
        else:
            raise FrontendError(f"cannot lower expression {expr!r}")
        got = b.env[RES]
        if expected is not None and not self.classes.subtype_of(got, expected):
            raise FrontendError(
                f"expected {expected}, got {got}", getattr(expr, "line", 0)
            )

    def lower_binary(self, expr: ast.EBinary):
        b = self.b
        op = expr.op
        left, right = expr.left, expr.right
        if op == ">":
            op, left, right = "<", right, left
        null_side = isinstance(left, ast.ENull) or isinstance(right, ast.ENull)
        if op in ("==", "!=") and null_side:
            obj = right if isinstance(left, ast.ENull) else left
            if isinstance(obj, ast.ENull):
                raise FrontendError("null == null is not supported", expr.line)
            self.lower_expr(obj, expected=None)
            if not self.classes.is_class(b.env[RES]):
                raise FrontendError(
                    "null comparison on a non-object", expr.line
                )
            b.emit(Op(
                "is_null",
                env_in=b.env,
                env_out=b.env.replace(RES, INT),
                line=expr.line,
            ))
            if op == "!=":
                self._negate(expr.line)
            return
        kind = {"+": "plus", "-": "minus", "<": "lt", "==": "eq", "!=": "eq"}[op]
        self.lower_expr(left, expected=INT)
        env1 = b.env
        base = env1.restrict([RES])
        rhs_ops, env2 = b.in_sub(
            base, lambda: self.lower_expr(right, expected=INT)
        )
        assert env2 is env1
        b.emit(Op(
            kind,
            env_in=env1,
            env_out=env1,
            env_rhs=env2,
            rhs=rhs_ops,
            line=expr.line,
        ))
        if op == "!=":
            self._negate(expr.line)

    def _negate(self, line: int):
        """Flip a comparison result: res in {1, -1} becomes 0 - res."""
        b = self.b
        tmp = b.fresh_temp()
        self._expand(tmp, INT, line)
        self._put_var(tmp, line)
        self._get_int(0, line)
        env1 = b.env
        base = env1.restrict([RES])
        rhs_ops, env2 = b.in_sub(base, lambda: self._get_var(tmp, line))
        b.emit(Op(
            "minus",
            env_in=env1,
            env_out=env1,
            env_rhs=env2,
            rhs=rhs_ops,
            line=line,
        ))
        self._restrict([tmp], line)

    def lower_call(self, expr: ast.ECall):
        b = self.b
        recv = expr.recv if expr.recv is not None else ast.EThis(expr.line)
        recv_t = self._static_type(recv)
        if not self.classes.is_class(recv_t):
            raise FrontendError("method call on a non-object", expr.line)
        table = self.classes.methods_of(recv_t)
        if expr.selector not in table:
            raise FrontendError(
                f"class {recv_t} has no method {expr.selector!r}", expr.line
            )
        static_sig = table[expr.selector]
        if len(expr.args) != len(static_sig.params):
            raise FrontendError(
                f"{static_sig.name} takes {len(static_sig.params)} arguments, "
                f"got {len(expr.args)}",
                expr.line,
            )

        # stash arguments into fresh temporaries, in declared order
        temps: dict[str, str] = {}
        for formal, arg in zip(static_sig.params, expr.args):
            ft = static_sig.param_env[formal]
            tmp = b.fresh_temp()
            temps[formal] = tmp
            self._expand(tmp, ft, expr.line)
            self.lower_expr(arg, expected=ft)
            self._put_var(tmp, expr.line)

        self.lower_expr(recv, expected=None)
        assert b.env[RES] == recv_t
        call_env = b.env
        arg_order = tuple(
            temps[f] for f in sorted(static_sig.params)
        )

        # one candidate per distinct method the site can dispatch to
        cand_sigs: list[MethodSig] = []
        seen = set()
        for sub in self.classes.subclasses(recv_t):
            sig = self.classes.methods_of(sub)[expr.selector]
            if sig.name not in seen:
                seen.add(sig.name)
                cand_sigs.append(sig)
        ret_t = static_sig.return_type
        out_env = call_env.replace(RES, ret_t)
        candidates = []
        for sig in cand_sigs:
            looked = call_env.replace(RES, sig.klass)
            lookup = Op(
                "lookup",
                env_in=call_env,
                env_out=looked,
                selector=expr.selector,
                method=sig.name,
                line=expr.line,
            )
            call = Op(
                "call",
                env_in=looked,
                env_out=sig.param_env.restrict([OUT]),
                method=sig.name,
                names=arg_order,
                line=expr.line,
            )
            ret = Op(
                "return",
                env_in=looked,
                env_out=out_env,
                env_rhs=method_exit_env(sig, self.classes, self.shadows),
                method=sig.name,
                line=expr.line,
            )
            candidates.append(Candidate(sig.name, lookup, call, ret))

        b.emit(Op(
            "vcall",
            env_in=call_env,
            env_out=out_env,
            selector=expr.selector,
            candidates=tuple(candidates),
            line=expr.line,
        ))
        if temps:
            self._restrict(list(temps.values()), expr.line)

    def _static_type(self, expr) -> str:
        """Type of an expression without lowering it (receiver pre-pass)."""
        b = self.b
        if isinstance(expr, ast.EThis):
            return self.sig.klass
        if isinstance(expr, ast.EVar):
            t = b.env.get(expr.name)
            if t is None:
                raise FrontendError(f"unknown variable {expr.name!r}", expr.line)
            return t
        if isinstance(expr, ast.ENew):
            return expr.klass
        if isinstance(expr, ast.EField):
            ot = self._static_type(expr.obj)
            if not self.classes.is_class(ot):
                raise FrontendError("field access on a non-object", expr.line)
            fid = self._field(ot, expr.fname, expr.line)
            return self.classes.fields_of(ot)[fid]
        if isinstance(expr, ast.ECall):
            recv = expr.recv if expr.recv is not None else ast.EThis(expr.line)
            rt = self._static_type(recv)
            if not self.classes.is_class(rt):
                raise FrontendError("method call on a non-object", expr.line)
            table = self.classes.methods_of(rt)
            if expr.selector not in table:
                raise FrontendError(
                    f"class {rt} has no method {expr.selector!r}", expr.line
                )
            return table[expr.selector].return_type
        if isinstance(expr, ast.EInt):
            return INT
        if isinstance(expr, ast.EBinary):
            return INT
        raise FrontendError("cannot type this receiver expression",
                            getattr(expr, "line", 0))

    # -- small op helpers ---------------------------------------------------------

    def _field(self, klass: str, fname: str, line: int) -> str:
        try:
            return self.classes.field_id(klass, fname)
        except ModelError as e:
            raise FrontendError(str(e), line) from e

    def _wrap(self, fn, line: int):
        try:
            return fn()
        except ModelError as e:
            raise FrontendError(str(e), line) from e

    def _get_int(self, value: int, line: int):
        b = self.b
        b.emit(Op("get_int", env_in=b.env,
                  env_out=self._wrap(lambda: b.env.extend(RES, INT), line),
                  value=value, line=line))

    def _get_null(self, klass: str, line: int):
        b = self.b
        b.emit(Op("get_null", env_in=b.env,
                  env_out=self._wrap(lambda: b.env.extend(RES, klass), line),
                  name=klass, line=line))

    def _get_var(self, v: str, line: int):
        b = self.b
        t = b.env.get(v)
        if t is None:
            raise FrontendError(f"unknown variable {v!r}", line)
        b.emit(Op("get_var", env_in=b.env,
                  env_out=self._wrap(lambda: b.env.extend(RES, t), line),
                  name=v, line=line))

    def _put_var(self, v: str, line: int):
        b = self.b
        t = b.env.get(v)
        if t is None:
            raise FrontendError(f"unknown variable {v!r}", line)
        if not self.classes.subtype_of(b.env[RES], t):
            raise FrontendError(
                f"cannot assign {b.env[RES]} to {v}: {t}", line
            )
        b.emit(Op("put_var", env_in=b.env,
                  env_out=self._wrap(lambda: b.env.restrict([RES]), line),
                  name=v, line=line))

    def _expand(self, v: str, t: str, line: int):
        b = self.b
        b.emit(Op("expand", env_in=b.env,
                  env_out=self._wrap(lambda: b.env.extend(v, t), line),
                  name=v, vtype=t, line=line))

    def _restrict(self, names: list[str], line: int):
        b = self.b
        b.emit(Op("restrict", env_in=b.env,
                  env_out=self._wrap(lambda: b.env.restrict(names), line),
                  names=tuple(names), line=line))

    def _guard(self, kind: str, line: int):
        b = self.b
        if b.env[RES] != INT:
            raise FrontendError("condition must be an int", line)
        b.emit(Op(kind, env_in=b.env,
                  env_out=b.env.restrict([RES]), line=line))


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def load_source(src: str, name: str = "<source>", entry: str | None = None,
                shadow_params: bool = True,
                external_params: bool = False) -> Program:
    """Parse and lower a program; returns the IR plus its static tables."""
    tree = parse_source(src)
    classes = _collect_classes(tree)
    lowerer = _Lowerer(classes, shadow_params)

    methods: dict[str, MethodIR] = {}
    for cd in tree.classes:
        for md in cd.methods:
            sig = classes.method(f"{cd.name}.{md.name}")
            methods[sig.name] = lowerer.lower_method(sig, md)

    entry = entry or tree.entry
    entry_sig = None
    if entry is not None:
        if entry not in methods:
            raise FrontendError(f"entry method {entry!r} not found")
        entry_sig = methods[entry].sig

    points = list(lowerer.sites)
    if entry_sig is not None:
        points.append(CreationPoint("ext0", entry_sig.klass, external=True))
        if external_params:
            i = 1
            for p in entry_sig.params:
                t = entry_sig.param_env[p]
                if classes.is_class(t):
                    points.append(CreationPoint(f"ext{i}", t, external=True))
                    i += 1
    try:
        table = CreationPointTable(points)
    except ModelError as e:
        raise FrontendError(str(e)) from e

    return Program(
        info=StaticInfo(classes, table),
        methods=methods,
        entry=entry,
        source_name=name,
    )


def load_program(path: str, **kwargs) -> Program:
    with open(path, encoding="utf-8") as fh:
        return load_source(fh.read(), name=path, **kwargs)

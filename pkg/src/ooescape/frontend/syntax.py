"""Lexer, parser and AST for the ``.oo`` surface language.

The language is a small class-based subset: single inheritance, int and class
fields, methods with typed parameters, locals, assignments, field stores,
``while``/``if``, ``return``, virtual calls and ``new``.  Two comment forms
carry analysis metadata: ``//! entry: Class.method`` names the default entry
method, and a ``//@ name`` line between statements places a named watchpoint.
``new C() {name}`` labels a creation site; unlabeled sites get a
deterministic ``new@line:col`` name.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


KEYWORDS = {
    "class", "extends", "int", "void", "new", "null", "this",
    "while", "if", "else", "return",
}

_PUNCT = ("==", "!=", "{", "}", "(", ")", ";", ",", ".", "=", "<", ">", "+", "-")


@dataclass(frozen=True)
class Token:
    kind: str       # "ident", "int", "kw", punctuation itself, "watch", "eof"
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    line, col, i, n = 1, 1, 0, len(src)

    def bump(k: int):
        nonlocal line, col, i
        for _ in range(k):
            if src[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = src[i]
        if c in " \t\r\n":
            bump(1)
            continue
        if src.startswith("//!", i):
            j = src.find("\n", i)
            j = n if j < 0 else j
            text = src[i + 3:j].strip()
            if text.startswith("entry:"):
                toks.append(Token("entry", text[len("entry:"):].strip(), line, col))
            bump(j - i)
            continue
        if src.startswith("//@", i):
            j = src.find("\n", i)
            j = n if j < 0 else j
            name = src[i + 3:j].strip()
            if not name.isidentifier():
                raise ParseError(f"bad watchpoint name {name!r}", line, col)
            toks.append(Token("watch", name, line, col))
            bump(j - i)
            continue
        if src.startswith("//", i):
            j = src.find("\n", i)
            bump((n if j < 0 else j) - i)
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("int", src[i:j], line, col))
            bump(j - i)
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            word = src[i:j]
            toks.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
            bump(j - i)
            continue
        for p in _PUNCT:
            if src.startswith(p, i):
                toks.append(Token(p, p, line, col))
                bump(len(p))
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass
class EInt:
    value: int
    line: int = 0


@dataclass
class ENull:
    line: int = 0


@dataclass
class EThis:
    line: int = 0


@dataclass
class EVar:
    name: str
    line: int = 0


@dataclass
class EField:
    obj: object
    fname: str
    line: int = 0


@dataclass
class ENew:
    klass: str
    label: str | None
    line: int = 0
    col: int = 0


@dataclass
class ECall:
    recv: object | None     # None means implicit this
    selector: str
    args: list
    line: int = 0


@dataclass
class EBinary:
    op: str                 # "+", "-", "<", ">", "==", "!="
    left: object
    right: object
    line: int = 0


@dataclass
class SVarDecl:
    vtype: str
    name: str
    init: object | None
    line: int = 0


@dataclass
class SAssign:
    target: object          # EVar or EField
    expr: object
    line: int = 0


@dataclass
class SExprStmt:
    expr: object
    line: int = 0


@dataclass
class SWhile:
    cond: object
    body: "SBlock"
    line: int = 0


@dataclass
class SIf:
    cond: object
    then: "SBlock"
    els: "SBlock | None"
    line: int = 0


@dataclass
class SReturn:
    expr: object | None
    line: int = 0


@dataclass
class SWatch:
    name: str
    line: int = 0


@dataclass
class SBlock:
    stmts: list
    line: int = 0


@dataclass
class MethodDecl:
    name: str
    ret: str                # "int", "void" or a class name
    params: list            # [(name, type)]
    body: SBlock
    line: int = 0


@dataclass
class ClassDecl:
    name: str
    parent: str | None
    fields: list            # [(name, type, line)]
    methods: list
    line: int = 0


@dataclass
class SourceProgram:
    classes: list = field(default_factory=list)
    entry: str | None = None


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.pos = 0

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, kind: str, what: str | None = None) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(f"expected {what or kind}, found {t.text or t.kind!r}",
                             t.line, t.col)
        return self.next()

    def expect_kw(self, word: str) -> Token:
        t = self.peek()
        if t.kind != "kw" or t.text != word:
            raise ParseError(f"expected {word!r}, found {t.text or t.kind!r}",
                             t.line, t.col)
        return self.next()

    def at_kw(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "kw" and t.text == word

    # -- program structure ---------------------------------------------------

    def parse_program(self) -> SourceProgram:
        prog = SourceProgram()
        while True:
            t = self.peek()
            if t.kind == "eof":
                break
            if t.kind == "entry":
                if prog.entry is not None:
                    raise ParseError("duplicate entry directive", t.line, t.col)
                prog.entry = t.text
                self.next()
                continue
            prog.classes.append(self.parse_class())
        return prog

    def parse_class(self) -> ClassDecl:
        start = self.expect_kw("class")
        name = self.expect("ident", "class name").text
        parent = None
        if self.at_kw("extends"):
            self.next()
            parent = self.expect("ident", "superclass name").text
        self.expect("{")
        fields, methods = [], []
        while self.peek().kind != "}":
            self.parse_member(fields, methods)
        self.expect("}")
        return ClassDecl(name, parent, fields, methods, start.line)

    def parse_type(self) -> str:
        t = self.peek()
        if self.at_kw("int"):
            self.next()
            return "int"
        if t.kind == "ident":
            self.next()
            return t.text
        raise ParseError(f"expected a type, found {t.text or t.kind!r}",
                         t.line, t.col)

    def parse_member(self, fields: list, methods: list):
        t = self.peek()
        if self.at_kw("void"):
            self.next()
            methods.append(self.parse_method("void"))
            return
        typ = self.parse_type()
        name_tok = self.expect("ident", "member name")
        if self.peek().kind == "(":
            self.pos -= 1  # put the name back for parse_method
            methods.append(self.parse_method(typ))
            return
        fields.append((name_tok.text, typ, name_tok.line))
        while self.peek().kind == ",":
            self.next()
            extra = self.expect("ident", "field name")
            fields.append((extra.text, typ, extra.line))
        self.expect(";")

    def parse_method(self, ret: str) -> MethodDecl:
        name_tok = self.expect("ident", "method name")
        self.expect("(")
        params = []
        if self.peek().kind != ")":
            while True:
                ptype = self.parse_type()
                pname = self.expect("ident", "parameter name").text
                params.append((pname, ptype))
                if self.peek().kind != ",":
                    break
                self.next()
        self.expect(")")
        body = self.parse_block()
        return MethodDecl(name_tok.text, ret, params, body, name_tok.line)

    # -- statements ------------------------------------------------------------

    def parse_block(self) -> SBlock:
        start = self.expect("{")
        stmts = []
        while self.peek().kind != "}":
            stmts.append(self.parse_stmt())
        self.expect("}")
        return SBlock(stmts, start.line)

    def parse_stmt(self):
        t = self.peek()
        if t.kind == "watch":
            self.next()
            return SWatch(t.text, t.line)
        if t.kind == "{":
            return self.parse_block()
        if self.at_kw("while"):
            self.next()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            body = self.parse_stmt()
            if not isinstance(body, SBlock):
                body = SBlock([body], t.line)
            return SWhile(cond, body, t.line)
        if self.at_kw("if"):
            self.next()
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            then = self.parse_stmt()
            if not isinstance(then, SBlock):
                then = SBlock([then], t.line)
            els = None
            if self.at_kw("else"):
                self.next()
                els = self.parse_stmt()
                if not isinstance(els, SBlock):
                    els = SBlock([els], t.line)
            return SIf(cond, then, els, t.line)
        if self.at_kw("return"):
            self.next()
            expr = None
            if self.peek().kind != ";":
                expr = self.parse_expr()
            self.expect(";")
            return SReturn(expr, t.line)
        # local declaration: type ident (= expr)? ;
        if self.at_kw("int") or (
            t.kind == "ident" and self.peek(1).kind == "ident"
        ):
            vtype = self.parse_type()
            name = self.expect("ident", "variable name").text
            init = None
            if self.peek().kind == "=":
                self.next()
                init = self.parse_expr()
            self.expect(";")
            return SVarDecl(vtype, name, init, t.line)
        # assignment or expression statement
        expr = self.parse_expr()
        if self.peek().kind == "=":
            if not isinstance(expr, (EVar, EField)):
                raise ParseError("assignment target must be a variable or field",
                                 t.line, t.col)
            self.next()
            value = self.parse_expr()
            self.expect(";")
            return SAssign(expr, value, t.line)
        self.expect(";")
        return SExprStmt(expr, t.line)

    # -- expressions -------------------------------------------------------------

    def parse_expr(self):
        return self.parse_comparison()

    def parse_comparison(self):
        left = self.parse_additive()
        t = self.peek()
        if t.kind in ("<", ">", "==", "!="):
            self.next()
            right = self.parse_additive()
            return EBinary(t.kind, left, right, t.line)
        return left

    def parse_additive(self):
        left = self.parse_postfix()
        while self.peek().kind in ("+", "-"):
            t = self.next()
            right = self.parse_postfix()
            left = EBinary(t.kind, left, right, t.line)
        return left

    def parse_postfix(self):
        expr = self.parse_primary()
        while self.peek().kind == ".":
            self.next()
            name = self.expect("ident", "member name")
            if self.peek().kind == "(":
                args = self.parse_args()
                expr = ECall(expr, name.text, args, name.line)
            else:
                expr = EField(expr, name.text, name.line)
        return expr

    def parse_args(self) -> list:
        self.expect("(")
        args = []
        if self.peek().kind != ")":
            while True:
                args.append(self.parse_expr())
                if self.peek().kind != ",":
                    break
                self.next()
        self.expect(")")
        return args

    def parse_primary(self):
        t = self.peek()
        if t.kind == "int":
            self.next()
            return EInt(int(t.text), t.line)
        if t.kind == "(":
            self.next()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if self.at_kw("null"):
            self.next()
            return ENull(t.line)
        if self.at_kw("this"):
            self.next()
            return EThis(t.line)
        if self.at_kw("new"):
            self.next()
            klass = self.expect("ident", "class name")
            self.expect("(")
            self.expect(")")
            label = None
            if (
                self.peek().kind == "{"
                and self.peek(1).kind == "ident"
                and self.peek(2).kind == "}"
            ):
                self.next()
                label = self.next().text
                self.next()
            return ENew(klass.text, label, klass.line, klass.col)
        if t.kind == "ident":
            self.next()
            if self.peek().kind == "(":
                args = self.parse_args()
                return ECall(None, t.text, args, t.line)
            return EVar(t.text, t.line)
        raise ParseError(f"expected an expression, found {t.text or t.kind!r}",
                         t.line, t.col)


def parse_source(src: str) -> SourceProgram:
    """Parse ``.oo`` source text into an AST."""
    parser = _Parser(tokenize(src))
    prog = parser.parse_program()
    tail = parser.peek()
    if tail.kind != "eof":
        raise ParseError("trailing input", tail.line, tail.col)
    return prog

"""Parser and AST for the contract-style target language.

A target is a single text file containing storage declarations and
functions over fixed-width integers:

    storage cell owner;
    storage array codes;

    fn SetCodeAt(i, c) {
        codes[i] = c;
    }

Statements: `let`, local assignment, storage writes (`name = e`,
`name[i] = e`, `push(name, e)`, `setlen(name, e)`), `if`/`else`,
`while`, `require(cmp)`, `assert(cmp)`, `return e`.

Conditions are single comparisons (`==`, `!=`, `<`, `<=`, `>`, `>=`);
`&&` and `||` in `if`/`require`/`assert` conditions are desugared into
nested ifs at parse time, so the runtime only ever sees one comparison
per branch site.

Every branch site, storage-write site, bounds check, and checked
arithmetic operation receives a unique SiteId, assigned in lexical
order after desugaring. Parsing is deterministic: the same text always
yields the same program and the same site numbering.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field

MAX_PARAMS = 16

# Array elements live in the upper half of the 64-bit address space so
# that (elem_base + index) mod 2^64 is monotonic in the signed index and
# a line fitted through two storage costs has its zero-crossing inside
# the signed range. Length/cell slots occupy small addresses.
ARRAY_ELEM_BASE = 1 << 63
ARRAY_ELEM_STRIDE = 1 << 40


class ParseError(Exception):
    """Syntax or resolution error, with source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass
class Expr:
    pass


@dataclass
class Lit(Expr):
    value: int


@dataclass
class Var(Expr):
    name: str


@dataclass
class LoadCell(Expr):
    name: str


@dataclass
class LoadElem(Expr):
    name: str
    index: Expr
    check_site: int = -1


@dataclass
class Len(Expr):
    name: str


@dataclass
class Scramble(Expr):
    arg: Expr


@dataclass
class BinOp(Expr):
    op: str  # + - * / %
    left: Expr
    right: Expr
    site: int = -1


@dataclass
class Neg(Expr):
    arg: Expr
    site: int = -1


@dataclass
class CmpExpr:
    op: str  # == != < <= > >=
    left: Expr
    right: Expr


@dataclass
class Stmt:
    pass


@dataclass
class Let(Stmt):
    name: str
    value: Expr


@dataclass
class AssignLocal(Stmt):
    name: str
    value: Expr


@dataclass
class StoreCell(Stmt):
    name: str
    value: Expr
    site: int = -1


@dataclass
class StoreElem(Stmt):
    name: str
    index: Expr
    value: Expr
    site: int = -1
    check_site: int = -1


@dataclass
class Push(Stmt):
    name: str
    value: Expr
    site: int = -1


@dataclass
class SetLen(Stmt):
    name: str
    value: Expr
    site: int = -1


@dataclass
class If(Stmt):
    cond: CmpExpr
    then: list[Stmt]
    els: list[Stmt]
    site: int = -1


@dataclass
class While(Stmt):
    cond: CmpExpr
    body: list[Stmt]
    site: int = -1


@dataclass
class Require(Stmt):
    cond: CmpExpr
    site: int = -1


@dataclass
class Assert(Stmt):
    cond: CmpExpr
    site: int = -1


@dataclass
class Return(Stmt):
    value: Expr


@dataclass
class StorageDecl:
    name: str
    kind: str  # "cell" or "array"
    base_addr: int = 0
    elem_base: int | None = None


@dataclass
class FunctionDef:
    name: str
    params: list[str]
    body: list[Stmt]


@dataclass
class TargetProgram:
    functions: list[FunctionDef]
    storage_decls: list[StorageDecl]
    name: str = ""
    source_path: str = ""
    branch_sites: list[int] = field(default_factory=list)
    store_sites: list[int] = field(default_factory=list)
    check_sites: list[int] = field(default_factory=list)
    arith_sites: list[int] = field(default_factory=list)
    entry_require_sites: set[int] = field(default_factory=set)

    def function_index(self, name: str) -> int:
        for i, f in enumerate(self.functions):
            if f.name == name:
                return i
        raise KeyError(name)

    def storage(self, name: str) -> StorageDecl:
        for d in self.storage_decls:
            if d.name == name:
                return d
        raise KeyError(name)

    @property
    def base_addresses(self) -> set[int]:
        return {d.base_addr for d in self.storage_decls}


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

KEYWORDS = {
    "fn", "let", "if", "else", "while", "require", "assert", "return",
    "storage", "cell", "array", "push", "setlen", "len", "scramble",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+*/%<>=(){}\[\],;])
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str  # "int", "name", "kw", "op", "eof"
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        if kind == "int":
            tokens.append(Token("int", tok, line, col))
        elif kind == "name":
            tokens.append(Token("kw" if tok in KEYWORDS else "name", tok, line, col))
        elif kind == "op":
            tokens.append(Token("op", tok, line, col))
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            col = len(tok) - tok.rfind("\n")
        else:
            col += len(tok)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _CondNode:
    """Temporary node for a condition that may contain && / ||."""


@dataclass
class _CondCmp(_CondNode):
    cmp: CmpExpr


@dataclass
class _CondAnd(_CondNode):
    left: _CondNode
    right: _CondNode


@dataclass
class _CondOr(_CondNode):
    left: _CondNode
    right: _CondNode


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.text != text or tok.kind == "eof":
            raise self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return self.next()

    def accept(self, text: str) -> bool:
        if self.peek().text == text and self.peek().kind != "eof":
            self.next()
            return True
        return False

    def expect_name(self) -> Token:
        tok = self.peek()
        if tok.kind != "name":
            raise self.error(f"expected identifier, found {tok.text or 'end of input'!r}")
        return self.next()

    # -- top level ---------------------------------------------------------

    def program(self) -> tuple[list[FunctionDef], list[StorageDecl]]:
        functions: list[FunctionDef] = []
        decls: list[StorageDecl] = []
        while self.peek().kind != "eof":
            if self.peek().text == "storage":
                decls.append(self.storage_decl())
            elif self.peek().text == "fn":
                functions.append(self.function())
            else:
                raise self.error("expected 'fn' or 'storage' at top level")
        return functions, decls

    def storage_decl(self) -> StorageDecl:
        self.expect("storage")
        tok = self.peek()
        if tok.text == "cell":
            kind = "cell"
        elif tok.text == "array":
            kind = "array"
        else:
            raise self.error("expected 'cell' or 'array'")
        self.next()
        name = self.expect_name().text
        self.expect(";")
        return StorageDecl(name=name, kind=kind)

    def function(self) -> FunctionDef:
        self.expect("fn")
        name_tok = self.expect_name()
        self.expect("(")
        params: list[str] = []
        if not self.accept(")"):
            while True:
                params.append(self.expect_name().text)
                if self.accept(")"):
                    break
                self.expect(",")
        if len(params) > MAX_PARAMS:
            raise ParseError(
                f"function {name_tok.text!r} has {len(params)} parameters (max {MAX_PARAMS})",
                name_tok.line, name_tok.col,
            )
        if len(set(params)) != len(params):
            raise ParseError(
                f"duplicate parameter name in function {name_tok.text!r}",
                name_tok.line, name_tok.col,
            )
        body = self.block()
        return FunctionDef(name=name_tok.text, params=params, body=body)

    # -- statements --------------------------------------------------------

    def block(self) -> list[Stmt]:
        self.expect("{")
        stmts: list[Stmt] = []
        while not self.accept("}"):
            stmts.extend(self.statement())
        return stmts

    def statement(self) -> list[Stmt]:
        tok = self.peek()
        if tok.text == "let":
            self.next()
            name = self.expect_name().text
            self.expect("=")
            value = self.expr()
            self.expect(";")
            return [Let(name, value)]
        if tok.text == "if":
            self.next()
            cond = self.condition()
            then = self.block()
            els = self.block() if self.accept("else") else []
            return [_desugar_if(cond, then, els)]
        if tok.text == "while":
            self.next()
            cond = self.condition()
            if not isinstance(cond, _CondCmp):
                raise ParseError("while condition must be a single comparison",
                                 tok.line, tok.col)
            body = self.block()
            return [While(cond.cmp, body)]
        if tok.text == "require":
            self.next()
            self.expect("(")
            cond = self.condition()
            self.expect(")")
            self.expect(";")
            return _desugar_guard(cond, Require)
        if tok.text == "assert":
            self.next()
            self.expect("(")
            cond = self.condition()
            self.expect(")")
            self.expect(";")
            return _desugar_guard(cond, Assert)
        if tok.text == "return":
            self.next()
            value = self.expr()
            self.expect(";")
            return [Return(value)]
        if tok.text == "push":
            self.next()
            self.expect("(")
            name = self.expect_name().text
            self.expect(",")
            value = self.expr()
            self.expect(")")
            self.expect(";")
            return [Push(name, value)]
        if tok.text == "setlen":
            self.next()
            self.expect("(")
            name = self.expect_name().text
            self.expect(",")
            value = self.expr()
            self.expect(")")
            self.expect(";")
            return [SetLen(name, value)]
        if tok.kind == "name":
            name = self.next().text
            if self.accept("["):
                index = self.expr()
                self.expect("]")
                self.expect("=")
                value = self.expr()
                self.expect(";")
                return [StoreElem(name, index, value)]
            self.expect("=")
            value = self.expr()
            self.expect(";")
            # cell vs local is resolved later, once declarations are known
            return [AssignLocal(name, value)]
        raise self.error(f"expected statement, found {tok.text or 'end of input'!r}")

    # -- conditions --------------------------------------------------------

    def condition(self) -> _CondNode:
        node = self.cond_and()
        while self.accept("||"):
            node = _CondOr(node, self.cond_and())
        return node

    def cond_and(self) -> _CondNode:
        node = self.cond_atom()
        while self.accept("&&"):
            node = _CondAnd(node, self.cond_atom())
        return node

    def cond_atom(self) -> _CondNode:
        left = self.expr()
        tok = self.peek()
        if tok.text not in ("==", "!=", "<", "<=", ">", ">="):
            raise self.error("expected comparison operator")
        op = self.next().text
        right = self.expr()
        return _CondCmp(CmpExpr(op, left, right))

    # -- expressions -------------------------------------------------------

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.next().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().text in ("*", "/", "%") and self.peek().kind == "op":
            op = self.next().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return Lit(int(tok.text))
        if tok.text == "len":
            self.next()
            self.expect("(")
            name = self.expect_name().text
            self.expect(")")
            return Len(name)
        if tok.text == "scramble":
            self.next()
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Scramble(arg)
        if tok.kind == "name":
            self.next()
            if self.accept("["):
                index = self.expr()
                self.expect("]")
                return LoadElem(tok.text, index)
            return Var(tok.text)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        raise self.error(f"expected expression, found {tok.text or 'end of input'!r}")


def _desugar_if(cond: _CondNode, then: list[Stmt], els: list[Stmt]) -> Stmt:
    """Lower && / || into nested ifs; duplicated blocks get fresh sites later."""
    if isinstance(cond, _CondCmp):
        return If(cond.cmp, then, els)
    if isinstance(cond, _CondAnd):
        inner = _desugar_if(cond.right, then, copy.deepcopy(els))
        return _desugar_if(cond.left, [inner], els)
    if isinstance(cond, _CondOr):
        inner = _desugar_if(cond.right, then, els)
        return _desugar_if(cond.left, copy.deepcopy(then), [inner])
    raise AssertionError(cond)


def _desugar_guard(cond: _CondNode, ctor) -> list[Stmt]:
    if isinstance(cond, _CondCmp):
        return [ctor(cond.cmp)]
    if isinstance(cond, _CondAnd):
        return _desugar_guard(cond.left, ctor) + _desugar_guard(cond.right, ctor)
    if isinstance(cond, _CondOr):
        # require(A || B)  =>  if A {} else { require(B); }
        return [_desugar_if(cond.left, [], _desugar_guard(cond.right, ctor))]
    raise AssertionError(cond)


# ---------------------------------------------------------------------------
# Resolution and site numbering
# ---------------------------------------------------------------------------


class _Resolver:
    """Checks identifiers, fixes cell-vs-local assignments, numbers sites."""

    def __init__(self, prog: TargetProgram):
        self.prog = prog
        self.next_site = 0
        self.storage_names = {d.name: d for d in prog.storage_decls}

    def site(self, category: list[int]) -> int:
        sid = self.next_site
        self.next_site += 1
        category.append(sid)
        return sid

    def run(self) -> None:
        for fn in self.prog.functions:
            scope = set(fn.params)
            fn.body = self.resolve_block(fn.body, scope)
        for fn in self.prog.functions:
            for stmt in fn.body:
                if isinstance(stmt, Require):
                    self.prog.entry_require_sites.add(stmt.site)
                else:
                    break

    def resolve_block(self, stmts: list[Stmt], scope: set[str]) -> list[Stmt]:
        out = []
        for stmt in stmts:
            out.append(self.resolve_stmt(stmt, scope))
        return out

    def resolve_stmt(self, stmt: Stmt, scope: set[str]) -> Stmt:
        prog = self.prog
        if isinstance(stmt, Let):
            self.resolve_expr(stmt.value, scope)
            scope.add(stmt.name)
            return stmt
        if isinstance(stmt, AssignLocal):
            self.resolve_expr(stmt.value, scope)
            decl = self.storage_names.get(stmt.name)
            if decl is not None:
                if decl.kind != "cell":
                    raise ParseError(f"cannot assign to array {stmt.name!r} without an index", 0, 0)
                return StoreCell(stmt.name, stmt.value, site=self.site(prog.store_sites))
            if stmt.name not in scope:
                raise ParseError(f"undeclared identifier {stmt.name!r}", 0, 0)
            return stmt
        if isinstance(stmt, StoreElem):
            self.check_array(stmt.name)
            self.resolve_expr(stmt.index, scope)
            self.resolve_expr(stmt.value, scope)
            stmt.check_site = self.site(prog.check_sites)
            stmt.site = self.site(prog.store_sites)
            return stmt
        if isinstance(stmt, Push):
            self.check_array(stmt.name)
            self.resolve_expr(stmt.value, scope)
            stmt.site = self.site(prog.store_sites)
            return stmt
        if isinstance(stmt, SetLen):
            self.check_array(stmt.name)
            self.resolve_expr(stmt.value, scope)
            stmt.site = self.site(prog.store_sites)
            return stmt
        if isinstance(stmt, If):
            self.resolve_cmp(stmt.cond, scope)
            stmt.site = self.site(prog.branch_sites)
            stmt.then = self.resolve_block(stmt.then, set(scope))
            stmt.els = self.resolve_block(stmt.els, set(scope))
            return stmt
        if isinstance(stmt, While):
            self.resolve_cmp(stmt.cond, scope)
            stmt.site = self.site(prog.branch_sites)
            stmt.body = self.resolve_block(stmt.body, set(scope))
            return stmt
        if isinstance(stmt, (Require, Assert)):
            self.resolve_cmp(stmt.cond, scope)
            stmt.site = self.site(prog.branch_sites)
            return stmt
        if isinstance(stmt, Return):
            self.resolve_expr(stmt.value, scope)
            return stmt
        raise AssertionError(stmt)

    def resolve_cmp(self, cmp: CmpExpr, scope: set[str]) -> None:
        self.resolve_expr(cmp.left, scope)
        self.resolve_expr(cmp.right, scope)

    def resolve_expr(self, expr: Expr, scope: set[str]) -> None:
        prog = self.prog
        if isinstance(expr, Lit):
            return
        if isinstance(expr, Var):
            if expr.name in scope:
                return
            decl = self.storage_names.get(expr.name)
            if decl is None:
                raise ParseError(f"undeclared identifier {expr.name!r}", 0, 0)
            if decl.kind != "cell":
                raise ParseError(f"array {expr.name!r} used without an index", 0, 0)
            # rewrite in place: Var over a declared cell is a storage read
            expr.__class__ = LoadCell
            return
        if isinstance(expr, LoadElem):
            self.check_array(expr.name)
            self.resolve_expr(expr.index, scope)
            expr.check_site = self.site(prog.check_sites)
            return
        if isinstance(expr, Len):
            self.check_array(expr.name)
            return
        if isinstance(expr, Scramble):
            self.resolve_expr(expr.arg, scope)
            return
        if isinstance(expr, BinOp):
            self.resolve_expr(expr.left, scope)
            self.resolve_expr(expr.right, scope)
            expr.site = self.site(prog.arith_sites)
            return
        if isinstance(expr, Neg):
            self.resolve_expr(expr.arg, scope)
            expr.site = self.site(prog.arith_sites)
            return
        raise AssertionError(expr)

    def check_array(self, name: str) -> None:
        decl = self.storage_names.get(name)
        if decl is None:
            raise ParseError(f"undeclared identifier {name!r}", 0, 0)
        if decl.kind != "array":
            raise ParseError(f"{name!r} is not an array", 0, 0)


def parse_program(text: str, name: str = "", source_path: str = "") -> TargetProgram:
    """Parse IR source text into a TargetProgram with numbered sites."""
    functions, decls = _Parser(_tokenize(text)).program()
    if not functions:
        raise ParseError("no functions", 1, 1)
    seen = set()
    for fn in functions:
        if fn.name in seen:
            raise ParseError(f"duplicate function name {fn.name!r}", 1, 1)
        seen.add(fn.name)
    names = set()
    array_index = 0
    for i, decl in enumerate(decls):
        if decl.name in names:
            raise ParseError(f"duplicate storage name {decl.name!r}", 1, 1)
        names.add(decl.name)
        decl.base_addr = i
        if decl.kind == "array":
            decl.elem_base = (ARRAY_ELEM_BASE + array_index * ARRAY_ELEM_STRIDE) % (1 << 64)
            array_index += 1
    prog = TargetProgram(functions=functions, storage_decls=decls,
                         name=name, source_path=source_path)
    _Resolver(prog).run()
    return prog

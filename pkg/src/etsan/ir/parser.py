"""Parser for the C-like surface language, lowering directly to IR.

Top level::

    struct Tag (: Base, ...)? { type decl (@off)?; ... } (@size(n))?;
    union Tag { ... };  class Tag : Base { ... };
    typedef type name;   enum Name { A, B = 3 };
    fn name(p: type, ...) -> type { stmts }

Statements: ``let x: T = e;``, ``lvalue = e;``, ``if``/``else``,
``while``, ``for``, ``return e;`` and call statements.
"""

from __future__ import annotations

import re
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Optional

from ..types import (
    Array,
    Forward,
    Fundamental,
    Pointer,
    Record,
    TypeDeclError,
    TypeDesc,
    TypeUniverse,
    natural_layout,
)
from .instrs import (
    AllocHeap,
    AllocStack,
    Assign,
    BinOp,
    Call,
    Cast,
    FieldAddr,
    Free,
    Function,
    If,
    IndexAddr,
    Load,
    Memcpy,
    Print,
    Program,
    Return,
    Store,
    UnOp,
    While,
)


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0, source: str = "<input>"):
        super().__init__(f"{source}:{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*|\#[^\n]*|/\*.*?\*/)
  | (?P<float>\d+\.\d*(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+)
  | (?P<int>0[xX][0-9a-fA-F]+|\d+)
  | (?P<char>'(?:\\.|[^'\\])')
  | (?P<ident>[A-Za-z_]\w*)
  | (?P<op>->|==|!=|<=|>=|&&|\|\||[{}()\[\];,:.*&+\-/%<>=!@])
    """,
    re.X | re.S,
)

_ESCAPES = {"n": "\n", "t": "\t", "0": "\0", "\\": "\\", "'": "'"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, source: str = "<input>") -> list:
    out = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, source)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "nl", "comment"):
            out.append(Token(kind, chunk, line, pos - line_start + 1))
        nls = chunk.count("\n")
        if nls:
            line += nls
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


RECORD_KWS = ("struct", "class", "union")
INT_PRIMS = ("char", "short", "int", "long")


def is_int(t: Optional[TypeDesc]) -> bool:
    return isinstance(t, Fundamental) and t.prim in INT_PRIMS


def is_float(t: Optional[TypeDesc]) -> bool:
    return isinstance(t, Fundamental) and t.is_float


def is_numeric(t) -> bool:
    return is_int(t) or is_float(t)


@dataclass
class Val:
    kind: str  # rv | mem | var
    op: object
    type: Optional[TypeDesc]


def _rv(op, t) -> Val:
    return Val("rv", op, t)


class _Parser:
    def __init__(self, text: str, source: str, universe: Optional[TypeUniverse]):
        self.source = source
        self.toks = tokenize(text, source)
        self.pos = 0
        self.universe = universe or TypeUniverse()
        self.program = Program(self.universe, source=source)
        self.type_names = set()
        self.signatures = {}
        self._prescan()

    # token helpers ---------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, n: int = 1) -> Token:
        return self.toks[min(self.pos + n, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col, self.source)

    def next(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "ident")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.next()

    def ident(self) -> str:
        if self.tok.kind != "ident":
            self.error(f"expected a name, found {self.tok.text or 'end of input'!r}")
        return self.next().text

    def number(self) -> int:
        neg = self.accept("-")
        if self.tok.kind != "int":
            self.error("expected an integer")
        v = int(self.next().text, 0)
        return -v if neg else v

    def _prescan(self):
        depth = 0
        for i, t in enumerate(self.toks):
            if t.text == "{":
                depth += 1
            elif t.text == "}":
                depth -= 1
            elif depth == 0 and t.kind == "ident":
                nxt = self.toks[i + 1] if i + 1 < len(self.toks) else t
                if t.text in RECORD_KWS + ("enum",) and nxt.kind == "ident":
                    self.type_names.add(nxt.text)
                elif t.text == "typedef":
                    j = i + 1
                    while j < len(self.toks) and self.toks[j].text != ";":
                        j += 1
                    k = j - 1
                    while k > i and self.toks[k].kind != "ident":
                        k -= 1
                    self.type_names.add(self.toks[k].text)

    # types -----------------------------------------------------------------
    def is_type_name(self, tok: Token) -> bool:
        if tok.kind != "ident":
            return False
        return (tok.text in RECORD_KWS or tok.text == "enum" or tok.text in self.universe.prims
                or self.universe.lookup(tok.text) is not None or tok.text in self.type_names)

    def base_type(self) -> TypeDesc:
        tok = self.tok
        if self.tok.text in RECORD_KWS + ("enum",):
            self.next()
        name = self.ident()
        t = self.universe.lookup(name)
        if t is not None:
            return t
        if name in self.type_names:
            return Forward(name)
        self.error(f"unknown type {name!r}", tok)

    def parse_type(self, arrays: bool = True) -> TypeDesc:
        if self.accept("*"):
            return Pointer(self.parse_type(arrays))
        t = self.base_type()
        while self.accept("*"):
            t = Pointer(t)
        if arrays:
            dims = []
            while self.at("[") and self.peek().kind == "int":
                self.next()
                dims.append(self.number())
                self.expect("]")
            t = self._array(t, dims)
        return t

    def _array(self, t: TypeDesc, dims: list, fam: bool = False) -> TypeDesc:
        t = self.universe.resolve(t)
        try:
            for i, n in enumerate(reversed(dims)):
                t = Array(t, n, fam=fam and i == len(dims) - 1)
        except TypeDeclError as exc:
            self.error(str(exc))
        return t

    def complete(self, t: TypeDesc, tok: Token) -> TypeDesc:
        try:
            t = self.universe.resolve(t)
            t.size
        except TypeDeclError as exc:
            self.error(str(exc), tok)
        return t

    # declarations ----------------------------------------------------------
    def parse_top(self):
        fns = []
        while self.tok.kind != "eof":
            if self.at("fn"):
                fns.append(self.fn_header())
            elif self.tok.text in RECORD_KWS:
                self.record_decl()
            elif self.at("typedef"):
                self.typedef_decl()
            elif self.at("enum"):
                self.enum_decl()
            else:
                self.error(f"unexpected {self.tok.text!r} at top level")
        for header in fns:
            self.fn_body(*header)
        return self.program

    def declarator(self, base: TypeDesc) -> tuple:
        t = base
        while self.accept("*"):
            t = Pointer(t)
        tok = self.tok
        name = self.ident()
        dims, fam = [], False
        while self.accept("["):
            if self.accept("]"):
                fam = True
                dims.append(1)
                continue
            dims.append(self.number())
            self.expect("]")
        if fam and len(dims) > 1:
            self.error("only the outer dimension may be flexible", tok)
        if dims:
            t = self._array(self.complete(t, tok), dims, fam)
        return name, t, tok

    def record_decl(self):
        kind = self.next().text
        tag_tok = self.tok
        tag = self.ident()
        bases = []
        if self.accept(":"):
            while True:
                btok = self.tok
                b = self.universe.lookup(self.ident())
                if not isinstance(b, Record):
                    self.error("base must be a declared record", btok)
                bases.append(b)
                if not self.accept(","):
                    break
        self.expect("{")
        members = []
        while not self.accept("}"):
            base = self.base_type()
            while True:
                name, t, tok = self.declarator(base)
                off = None
                if self.accept("@"):
                    off = self.number()
                if not isinstance(t, Pointer):
                    t = self.complete(t, tok)
                members.append((name, t, off))
                if not self.accept(","):
                    break
            self.expect(";")
        size = None
        if self.accept("@"):
            if self.ident() != "size":
                self.error("expected @size(n)")
            self.expect("(")
            size = self.number()
            self.expect(")")
        self.expect(";")
        try:
            self.universe.declare(natural_layout(kind, tag, members, size, bases))
        except TypeDeclError as exc:
            self.error(str(exc), tag_tok)

    def typedef_decl(self):
        self.next()
        base = self.base_type()
        name, t, tok = self.declarator(base)
        self.expect(";")
        if t.key == ("rec", name):
            return  # ``typedef struct node node;``
        try:
            self.universe.alias(name, t)
        except TypeDeclError as exc:
            self.error(str(exc), tok)

    def enum_decl(self):
        self.next()
        if self.tok.kind == "ident":
            name = self.next().text
            if self.universe.lookup(name) is None:
                self.universe.alias(name, self.universe.prims["int"])
        self.expect("{")
        value = 0
        while not self.accept("}"):
            cname = self.ident()
            if self.accept("="):
                value = self.number()
            self.program.constants[cname] = value
            value += 1
            if not self.accept(","):
                self.expect("}")
                break
        self.expect(";")

    def fn_header(self):
        line = self.next().line
        name_tok = self.tok
        name = self.ident()
        if name in self.signatures:
            self.error(f"redefinition of function {name}", name_tok)
        self.expect("(")
        params = []
        while not self.accept(")"):
            ptok = self.tok
            pname = self.ident()
            self.expect(":")
            ptype = self.parse_type(arrays=False)
            if not isinstance(ptype, Pointer):
                ptype = self.complete(ptype, ptok)
            params.append((pname, ptype))
            if not self.accept(","):
                self.expect(")")
                break
        ret = None
        if self.accept("->"):
            ret = self.parse_type(arrays=False)
            if isinstance(ret, Fundamental) and ret.prim == "void":
                ret = None
        self.signatures[name] = (params, ret)
        start = self.pos
        self.expect("{")
        depth = 1
        while depth:
            t = self.next()
            if t.kind == "eof":
                self.error("unterminated function body", name_tok)
            depth += {"{": 1, "}": -1}.get(t.text, 0)
        return (name, params, ret, start, line)

    # function bodies -------------------------------------------------------
    def fn_body(self, name, params, ret, start, line):
        self.pos = start
        self.vars = {}
        for pname, ptype in params:
            if pname in self.vars:
                self.error(f"duplicate parameter {pname}")
            self.vars[pname] = ptype
        self.ret = ret
        self.ntemp = 0
        body: list = []
        self.block = body
        self.parse_block()
        if not body or not isinstance(body[-1], Return):
            self.emit(Return(None))
        self.program.functions[name] = Function(name, list(params), ret, body, self.vars, line)

    def emit(self, ins):
        ins.line = self.toks[max(self.pos - 1, 0)].line
        self.block.append(ins)
        return ins

    @contextmanager
    def into(self, block: list):
        saved = self.block
        self.block = block
        try:
            yield block
        finally:
            self.block = saved

    def temp(self, t: TypeDesc) -> str:
        self.ntemp += 1
        name = f"%t{self.ntemp}"
        self.vars[name] = t
        return name

    def parse_block(self):
        self.expect("{")
        while not self.accept("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            self.statement()

    def statement(self):
        if self.at("let"):
            self.let_stmt()
            self.expect(";")
        elif self.accept("if"):
            self.if_rest()
        elif self.accept("while"):
            self.expect("(")
            pre = []
            with self.into(pre):
                cond = self.cond_operand()
            self.expect(")")
            body = []
            with self.into(body):
                self.parse_block()
            self.emit(While(pre, cond, body))
        elif self.accept("for"):
            self.for_rest()
        elif self.accept("return"):
            if self.accept(";"):
                if self.ret is not None:
                    self.error("missing return value")
                self.emit(Return(None))
                return
            v = self.rvalue(self.expr())
            if self.ret is None:
                self.error("void function returns a value")
            self.emit(Return(self.convert(v, self.ret).op))
            self.expect(";")
        elif self.at("{"):
            self.parse_block()
        else:
            self.simple()
            self.expect(";")

    def let_stmt(self):
        self.expect("let")
        tok = self.tok
        name = self.ident()
        self.expect(":")
        t = self.parse_type(arrays=False)
        if isinstance(t, Fundamental) and t.prim == "void":
            self.error("variable of type void", tok)
        if not isinstance(t, Pointer):
            t = self.complete(t, tok)
            if not isinstance(t, Fundamental):
                self.error("locals hold scalars and addresses; use 'stack T' for objects", tok)
        if name in self.vars and self.vars[name].key != t.key:
            self.error(f"{name} redeclared with a different type", tok)
        if name in self.program.constants:
            self.error(f"{name} shadows an enum constant", tok)
        self.vars[name] = t
        if self.accept("="):
            self.assign_var(name, self.convert(self.rvalue(self.expr()), t))
        else:
            self.emit(Assign(name, 0.0 if is_float(t) else 0))

    def simple(self):
        if self.at("let"):
            self.let_stmt()
            return
        lhs = self.expr()
        if self.accept("="):
            self.assign(lhs, self.rvalue(self.expr()))

    def if_rest(self):
        self.expect("(")
        cond = self.cond_operand()
        self.expect(")")
        then, orelse = [], []
        with self.into(then):
            self.parse_block()
        if self.accept("else"):
            with self.into(orelse):
                if self.accept("if"):
                    self.if_rest()
                else:
                    self.parse_block()
        self.emit(If(cond, then, orelse))

    def for_rest(self):
        self.expect("(")
        if not self.accept(";"):
            self.simple()
            self.expect(";")
        pre = []
        with self.into(pre):
            cond = 1 if self.at(";") else self.cond_operand()
        self.expect(";")
        step = []
        with self.into(step):
            if not self.at(")"):
                self.simple()
        self.expect(")")
        body = []
        with self.into(body):
            self.parse_block()
        body.extend(step)
        self.emit(While(pre, cond, body))

    def cond_operand(self):
        v = self.rvalue(self.expr())
        if v.type is None or not (is_numeric(v.type) or isinstance(v.type, Pointer)):
            self.error("condition must be a scalar")
        return v.op

    # assignment ------------------------------------------------------------
    def assign_var(self, name: str, v: Val):
        last = self.block[-1] if self.block else None
        if (isinstance(v.op, str) and v.op.startswith("%") and last is not None
                and getattr(last, "dst", None) == v.op and v.type.key == self.vars[name].key):
            last.dst = name
            return
        self.emit(Assign(name, v.op))

    def assign(self, lhs: Val, rhs: Val):
        if lhs.kind == "var":
            self.assign_var(lhs.op, self.convert(rhs, lhs.type))
        elif lhs.kind == "mem":
            if isinstance(lhs.type, (Record, Array)):
                self.error("aggregate assignment is not supported; use memcpy")
            v = self.convert(rhs, lhs.type)
            self.emit(Store(lhs.op, v.op, lhs.type))
        else:
            self.error("left side is not assignable")

    # conversions -----------------------------------------------------------
    def convert(self, v: Val, target: TypeDesc, explicit: bool = False) -> Val:
        src = v.type
        if src is None:
            self.error("void value used")
        if isinstance(target, Pointer):
            if src.key == target.key and not explicit:
                return v
            if v.op == 0 and not explicit:
                return _rv(0, target)
            if isinstance(src, Pointer) or is_int(src):
                t = self.temp(target)
                self.emit(Cast(t, v.op, target, explicit))
                return _rv(t, target)
        elif is_numeric(target):
            if src.key == target.key:
                return v
            if not isinstance(v.op, str) and is_numeric(src):
                return _rv(float(v.op) if is_float(target) else int(v.op), target)
            if is_numeric(src) or (isinstance(src, Pointer) and is_int(target)):
                t = self.temp(target)
                self.emit(Cast(t, v.op, target, explicit))
                return _rv(t, target)
        self.error(f"cannot convert {src.name} to {target.name}")

    def materialize(self, v: Val) -> str:
        if isinstance(v.op, str):
            return v.op
        t = self.temp(v.type)
        self.emit(Assign(t, v.op))
        return t

    def rvalue(self, v: Val) -> Val:
        if v.kind == "rv":
            return v
        if v.kind == "var":
            return _rv(v.op, v.type)
        t = v.type
        if isinstance(t, Array):
            elem_ptr = Pointer(t.elem)
            if self.vars[v.op].key == elem_ptr.key:
                return _rv(v.op, elem_ptr)
            d = self.temp(elem_ptr)
            self.emit(Assign(d, v.op))
            return _rv(d, elem_ptr)
        if isinstance(t, Record):
            self.error(f"{t.name} value used; access its members instead")
        d = self.temp(t)
        self.emit(Load(d, v.op, t))
        return _rv(d, t)

    def pointee(self, v: Val) -> TypeDesc:
        if not isinstance(v.type, Pointer):
            self.error(f"{v.type.name if v.type else 'void'} is not an address")
        t = self.universe.resolve(v.type.target)
        if isinstance(t, Fundamental) and t.prim == "void":
            self.error("cannot dereference void *")
        return t

    # expressions -----------------------------------------------------------
    def expr(self) -> Val:
        return self.logic_or()

    def _short_circuit(self, left: Val, op: str, sub) -> Val:
        int_t = self.universe.prims["int"]
        t = self.temp(int_t)
        self.emit(BinOp(t, "!=", left.op, 0))
        inner = []
        with self.into(inner):
            r = self.rvalue(sub())
            self.emit(BinOp(t, "!=", r.op, 0))
        if op == "&&":
            self.emit(If(t, inner, []))
        else:
            self.emit(If(t, [], inner))
        return _rv(t, int_t)

    def logic_or(self) -> Val:
        v = self.logic_and()
        while self.accept("||"):
            v = self._short_circuit(self.rvalue(v), "||", self.logic_and)
        return v

    def logic_and(self) -> Val:
        v = self.equality()
        while self.accept("&&"):
            v = self._short_circuit(self.rvalue(v), "&&", self.equality)
        return v

    def _binary_level(self, ops, sub) -> Val:
        v = sub()
        while self.tok.kind == "op" and self.tok.text in ops:
            op = self.next().text
            v = self.binary(op, self.rvalue(v), self.rvalue(sub()))
        return v

    def equality(self):
        return self._binary_level(("==", "!="), self.relational)

    def relational(self):
        return self._binary_level(("<", "<=", ">", ">="), self.additive)

    def additive(self):
        return self._binary_level(("+", "-"), self.multiplicative)

    def multiplicative(self):
        return self._binary_level(("*", "/", "%"), self.unary)

    def binary(self, op: str, a: Val, b: Val) -> Val:
        ta, tb = a.type, b.type
        if ta is None or tb is None:
            self.error("void value used")
        int_t = self.universe.prims["int"]
        long_t = self.universe.prims["long"]
        pa, pb = isinstance(ta, Pointer), isinstance(tb, Pointer)
        if op in ("+", "-") and pa and is_int(tb):
            idx = b
            if op == "-":
                idx = self.binary("-", _rv(0, int_t), b)
            return self.index(a, idx)
        if op == "+" and is_int(ta) and pb:
            return self.index(b, a)
        if op == "-" and pa and pb:
            scale = self.pointee(a).size
            d = self.temp(long_t)
            self.emit(BinOp(d, "-", a.op, b.op))
            q = self.temp(long_t)
            self.emit(BinOp(q, "/", d, scale))
            return _rv(q, long_t)
        if op in ("==", "!=", "<", "<=", ">", ">="):
            if pa or pb:
                if not ((pa or b.op == 0 or is_int(tb)) and (pb or a.op == 0 or is_int(ta))):
                    self.error("comparison between address and non-integer")
            else:
                a, b = self._balance(a, b)
            t = self.temp(int_t)
            self.emit(BinOp(t, op, a.op, b.op))
            return _rv(t, int_t)
        if pa or pb:
            self.error(f"invalid operands to {op!r}")
        if op == "%" and not (is_int(ta) and is_int(tb)):
            self.error("'%' needs integer operands")
        a, b = self._balance(a, b)
        rt = a.type
        if not isinstance(a.op, str) and not isinstance(b.op, str) and is_int(rt):
            if op == "+":
                return _rv(a.op + b.op, rt)
            if op == "-":
                return _rv(a.op - b.op, rt)
            if op == "*":
                return _rv(a.op * b.op, rt)
        t = self.temp(rt)
        self.emit(BinOp(t, op, a.op, b.op))
        return _rv(t, rt)

    def _balance(self, a: Val, b: Val) -> tuple:
        if not (is_numeric(a.type) and is_numeric(b.type)):
            self.error("arithmetic on non-numeric values")
        if is_float(a.type) or is_float(b.type):
            floats = [t for t in (a.type, b.type) if is_float(t)]
            rt = max(floats, key=lambda t: t.size)
        else:
            rt = max((a.type, b.type, self.universe.prims["int"]), key=lambda t: t.size)
        return self.convert(a, rt), self.convert(b, rt)

    def index(self, base: Val, idx: Val) -> Val:
        elem = self.pointee(base)
        if not is_int(idx.type):
            self.error("index must be an integer")
        try:
            scale = elem.size
        except TypeDeclError as exc:
            self.error(str(exc))
        src = self.materialize(base)
        d = self.temp(Pointer(elem))
        self.emit(IndexAddr(d, src, idx.op, scale))
        return _rv(d, Pointer(elem))

    def unary(self) -> Val:
        tok = self.tok
        if self.accept("-"):
            v = self.rvalue(self.unary())
            if not is_numeric(v.type):
                self.error("negation of a non-number", tok)
            if not isinstance(v.op, str):
                return _rv(-v.op, v.type)
            t = self.temp(v.type)
            self.emit(UnOp(t, "-", v.op))
            return _rv(t, v.type)
        if self.accept("!"):
            v = self.rvalue(self.unary())
            int_t = self.universe.prims["int"]
            t = self.temp(int_t)
            self.emit(UnOp(t, "!", v.op))
            return _rv(t, int_t)
        if self.accept("*"):
            v = self.rvalue(self.unary())
            target = self.pointee(v)
            return Val("mem", self.materialize(v), target)
        if self.accept("&"):
            v = self.unary()
            if v.kind != "mem":
                self.error("'&' needs a memory location (locals have no address)", tok)
            return _rv(v.op, self.vars[v.op])
        if self.at("(") and self.is_type_name(self.peek()) and self._looks_like_cast():
            self.expect("(")
            t = self.parse_type(arrays=False)
            self.expect(")")
            v = self.rvalue(self.unary())
            return self.convert(v, t, explicit=True)
        return self.postfix()

    def _looks_like_cast(self) -> bool:
        name = self.peek().text
        return name not in self.vars and name not in self.program.constants

    def postfix(self) -> Val:
        v = self.primary()
        while True:
            tok = self.tok
            if self.accept("["):
                idx = self.rvalue(self.expr())
                self.expect("]")
                p = self.index(self.rvalue(v), idx)
                v = Val("mem", p.op, p.type.target)
            elif self.accept("->"):
                base = self.rvalue(v)
                rec = self.pointee(base)
                v = self.field(self.materialize(base), rec, tok)
            elif self.accept("."):
                if v.kind != "mem":
                    self.error("'.' needs a record in memory", tok)
                v = self.field(v.op, v.type, tok)
            else:
                return v

    def field(self, src: str, rec: TypeDesc, tok: Token) -> Val:
        name = self.ident()
        if not isinstance(rec, Record):
            self.error(f"{rec.name} has no members", tok)
        path = _member_path(rec, name)
        if path is None:
            self.error(f"{rec.name} has no member {name!r}", tok)
        for owner, f in path:
            ft = f.type
            d = self.temp(Pointer(ft.elem) if isinstance(ft, Array) else Pointer(ft))
            self.emit(FieldAddr(d, src, owner, f.name))
            src = d
        return Val("mem", d, ft)

    def primary(self) -> Val:
        tok = self.tok
        u = self.universe
        if tok.kind == "int":
            self.next()
            v = int(tok.text, 0)
            return _rv(v, u.prims["int"] if v < 2**31 else u.prims["long"])
        if tok.kind == "float":
            self.next()
            return _rv(float(tok.text), u.prims["double"])
        if tok.kind == "char":
            self.next()
            body = tok.text[1:-1]
            ch = _ESCAPES.get(body[1], body[1]) if body.startswith("\\") else body
            return _rv(ord(ch), u.prims["char"])
        if self.accept("("):
            v = self.expr()
            self.expect(")")
            return v
        if tok.kind != "ident":
            self.error(f"unexpected {tok.text or 'end of input'!r}")
        word = tok.text
        if word == "null":
            self.next()
            return _rv(0, Pointer(u.prims["void"]))
        if word == "sizeof":
            self.next()
            self.expect("(")
            t = self.complete(self.parse_type(), tok)
            self.expect(")")
            return _rv(t.size, u.prims["long"])
        if word == "cast":
            self.next()
            self.expect("<")
            t = self.parse_type(arrays=False)
            self.expect(">")
            self.expect("(")
            v = self.rvalue(self.expr())
            self.expect(")")
            return self.convert(v, t, explicit=True)
        if word in ("malloc", "legacy_malloc") and self.peek().text in ("(", "<"):
            return self.malloc_expr()
        if word == "new":
            return self.new_expr()
        if word == "stack":
            return self.stack_expr()
        if self.peek().text == "(" and word not in self.vars:
            return self.call_expr()
        self.next()
        if word in self.vars:
            return Val("var", word, self.vars[word])
        if word in self.program.constants:
            return _rv(self.program.constants[word], u.prims["int"])
        self.error(f"unknown name {word!r}", tok)

    def _size_arg(self) -> Val:
        v = self.rvalue(self.expr())
        if not is_int(v.type):
            self.error("allocation size must be an integer")
        return v

    def malloc_expr(self) -> Val:
        kind = "legacy" if self.next().text == "legacy_malloc" else "malloc"
        t = None
        if kind == "malloc" and self.accept("<"):
            t = self.complete(self.parse_type(), self.tok)
            self.expect(">")
        self.expect("(")
        n = self._size_arg()
        self.expect(")")
        rt = Pointer(t if t is not None else self.universe.prims["void"])
        d = self.temp(rt)
        self.emit(AllocHeap(d, t, n.op, kind))
        return _rv(d, rt)

    def new_expr(self) -> Val:
        tok = self.next()
        t = self.complete(self.parse_type(arrays=False), tok)
        size = _rv(t.size, self.universe.prims["long"])
        if self.accept("["):
            n = self._size_arg()
            self.expect("]")
            size = self.binary("*", n, size)
        d = self.temp(Pointer(t))
        self.emit(AllocHeap(d, t, size.op, "new"))
        return _rv(d, Pointer(t))

    def stack_expr(self) -> Val:
        tok = self.next()
        t = self.complete(self.parse_type(arrays=False), tok)
        n = 1
        if self.accept("["):
            n = self.number()
            self.expect("]")
            if n < 1:
                self.error("stack array length must be >= 1", tok)
        d = self.temp(Pointer(t))
        self.emit(AllocStack(d, t, n * t.size))
        return _rv(d, Pointer(t))

    def call_expr(self) -> Val:
        tok = self.next()
        name = tok.text
        self.expect("(")
        args = []
        while not self.accept(")"):
            args.append(self.rvalue(self.expr()))
            if not self.accept(","):
                self.expect(")")
                break
        void = _rv(None, None)
        if name == "free":
            self._arity(name, args, 1, tok)
            self.emit(Free(args[0].op))
            return void
        if name == "print":
            self._arity(name, args, 1, tok)
            self.emit(Print(args[0].op))
            return void
        if name == "memcpy":
            self._arity(name, args, 3, tok)
            d, s = (self.materialize(a) for a in args[:2])
            if not all(isinstance(a.type, Pointer) for a in args[:2]):
                self.error("memcpy needs two addresses", tok)
            self.emit(Memcpy(d, s, args[2].op))
            return void
        if name not in self.signatures:
            self.error(f"unknown function {name!r}", tok)
        params, ret = self.signatures[name]
        self._arity(name, args, len(params), tok)
        ops = [self.convert(a, pt).op for a, (_, pt) in zip(args, params)]
        d = self.temp(ret) if ret is not None else None
        self.emit(Call(d, name, ops))
        return _rv(d, ret) if ret is not None else void

    def _arity(self, name, args, n, tok):
        if len(args) != n:
            self.error(f"{name} takes {n} argument(s), got {len(args)}", tok)


def _member_path(rec: Record, name: str) -> Optional[list]:
    """``[(record, field), ...]`` selecting ``name``, looking through bases."""
    for f in rec.fields:
        if f.name == name and not f.is_base:
            return [(rec, f)]
    for f in rec.fields:
        if f.is_base and isinstance(f.type, Record):
            sub = _member_path(f.type, name)
            if sub is not None:
                return [(rec, f)] + sub
    return None


def parse_program(text: str, source: str = "<input>", universe: Optional[TypeUniverse] = None) -> Program:
    """Parse and lower a program; allocation types are left for inference."""
    return _Parser(text, source, universe).parse_top()


def parse_types(text: str, source: str = "<types>") -> TypeUniverse:
    return parse_program(text, source).universe


def parse_type_expr(text: str, universe: TypeUniverse) -> TypeDesc:
    """Parse a type such as ``T``, ``int[3]`` or ``*node`` against ``universe``."""
    p = _Parser(text, "<type>", universe)
    t = p.parse_type()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r} after type")
    return p.complete(t, p.tok)

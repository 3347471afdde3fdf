"""Three-address instruction forms with structured control flow.

Operands are either local names (``str``) or Python ``int``/``float``
constants.  Bounds live in a separate namespace keyed ``"<var>.b"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from ..types import Pointer, Record, TypeDesc, TypeUniverse

Operand = Union[str, int, float]


def bounds_name(var: str) -> str:
    return var + ".b"


@dataclass
class Instr:
    line: int = field(default=0, kw_only=True)

    def defs(self) -> tuple:
        return ()

    def uses(self) -> tuple:
        return ()


def _vars(*ops) -> tuple:
    return tuple(o for o in ops if isinstance(o, str))


# ordinary forms ----------------------------------------------------------------

@dataclass
class Assign(Instr):
    dst: str
    src: Operand

    def defs(self):
        return (self.dst,)

    def uses(self):
        return _vars(self.src)


@dataclass
class BinOp(Instr):
    dst: str
    op: str
    a: Operand
    b: Operand

    def defs(self):
        return (self.dst,)

    def uses(self):
        return _vars(self.a, self.b)


@dataclass
class UnOp(Instr):
    dst: str
    op: str
    a: Operand

    def defs(self):
        return (self.dst,)

    def uses(self):
        return _vars(self.a)


@dataclass
class Load(Instr):
    dst: str
    addr: str
    type: TypeDesc

    def defs(self):
        return (self.dst,)

    def uses(self):
        return (self.addr,)


@dataclass
class Store(Instr):
    addr: str
    val: Operand
    type: TypeDesc

    def uses(self):
        return _vars(self.addr, self.val)


@dataclass
class FieldAddr(Instr):
    dst: str
    src: str
    record: Record
    field_name: str

    @property
    def field(self):
        return self.record.field(self.field_name)

    @property
    def offset(self) -> int:
        return 0 if self.record.kind == "union" else self.field.offset

    @property
    def is_fam(self) -> bool:
        return self.record.fam_field is not None and self.record.fam_field.name == self.field_name

    def defs(self):
        return (self.dst,)

    def uses(self):
        return (self.src,)


@dataclass
class IndexAddr(Instr):
    dst: str
    src: str
    index: Operand
    scale: int

    def defs(self):
        return (self.dst,)

    def uses(self):
        return _vars(self.src, self.index)


@dataclass
class Cast(Instr):
    dst: str
    src: Operand
    type: TypeDesc
    explicit: bool = True

    def defs(self):
        return (self.dst,)

    def uses(self):
        return _vars(self.src)


@dataclass
class Call(Instr):
    dst: Optional[str]
    fn: str
    args: list

    def defs(self):
        return (self.dst,) if self.dst else ()

    def uses(self):
        return _vars(*self.args)


@dataclass
class Return(Instr):
    val: Optional[Operand] = None

    def uses(self):
        return _vars(self.val)


@dataclass
class AllocHeap(Instr):
    dst: str
    type: Optional[TypeDesc]  # None until malloc-type inference runs
    size: Operand
    kind: str = "malloc"  # malloc | new | legacy

    def defs(self):
        return (self.dst,)

    def uses(self):
        return _vars(self.size)


@dataclass
class AllocStack(Instr):
    dst: str
    type: TypeDesc
    size: int

    def defs(self):
        return (self.dst,)


@dataclass
class Free(Instr):
    src: Operand

    def uses(self):
        return _vars(self.src)


@dataclass
class Print(Instr):
    src: Operand

    def uses(self):
        return _vars(self.src)


@dataclass
class Memcpy(Instr):
    dst: str
    src: str
    n: Operand

    def uses(self):
        return _vars(self.dst, self.src, self.n)


@dataclass
class If(Instr):
    cond: Operand
    then: list
    orelse: list

    def uses(self):
        return _vars(self.cond)


@dataclass
class While(Instr):
    pre: list  # recomputes ``cond`` before every iteration
    cond: Operand
    body: list

    def uses(self):
        return _vars(self.cond)


# instrumentation-only forms ----------------------------------------------------

@dataclass
class CheckType(Instr):
    bounds: str
    addr: str
    type: TypeDesc

    def defs(self):
        return (self.bounds,)

    def uses(self):
        return (self.addr,)


@dataclass
class BoundsGet(Instr):
    bounds: str
    addr: str

    def defs(self):
        return (self.bounds,)

    def uses(self):
        return (self.addr,)


@dataclass
class BoundsNarrow(Instr):
    bounds: str
    src: str
    addr: str
    size: Optional[int]  # None: open upper end (flexible array member)

    def defs(self):
        return (self.bounds,)

    def uses(self):
        return (self.src, self.addr)


@dataclass
class BoundsCopy(Instr):
    bounds: str
    src: str

    def defs(self):
        return (self.bounds,)

    def uses(self):
        return (self.src,)


@dataclass
class BoundsWide(Instr):
    bounds: str

    def defs(self):
        return (self.bounds,)


@dataclass
class CheckBounds(Instr):
    addr: str
    width: Operand
    bounds: str
    escape: bool = False
    static: str = "?"

    def uses(self):
        return _vars(self.addr, self.width, self.bounds)


CHECK_FORMS = (CheckType, BoundsGet, BoundsNarrow, BoundsCopy, BoundsWide, CheckBounds)


# containers --------------------------------------------------------------------

@dataclass
class Function:
    name: str
    params: list  # [(name, TypeDesc)]
    ret: Optional[TypeDesc]
    body: list
    vars: dict  # name -> TypeDesc, params and temporaries included
    line: int = 0


@dataclass
class Program:
    universe: TypeUniverse
    functions: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    source: str = "<input>"
    variant: Optional[str] = None  # set by instrument()


def walk(block: list) -> Iterator[Instr]:
    """Every instruction in pre-order, descending into nested blocks."""
    for ins in block:
        yield ins
        if isinstance(ins, If):
            yield from walk(ins.then)
            yield from walk(ins.orelse)
        elif isinstance(ins, While):
            yield from walk(ins.pre)
            yield from walk(ins.body)


def assigned_in(block: list) -> set:
    out = set()
    for ins in walk(block):
        out.update(ins.defs())
    return out


def is_addr(t: Optional[TypeDesc]) -> bool:
    return isinstance(t, Pointer)

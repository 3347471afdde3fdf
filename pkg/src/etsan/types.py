"""C-like type algebra.

Types carry explicit sizes and field offsets.  Two types are equal when
their ``key`` is equal: tagged records compare by tag, anonymous records by
layout, everything else structurally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

ADDRESS_SIZE = 8

DEFAULT_SIZES = {
    "char": 1,
    "short": 2,
    "int": 4,
    "long": 8,
    "float": 4,
    "double": 8,
}

FLOAT_NAMES = frozenset({"float", "double"})


class TypeDeclError(ValueError):
    """A type declaration violates the extent/offset invariants."""


def _round_up(n: int, align: int) -> int:
    return -(-n // align) * align


class TypeDesc:
    __slots__ = ()

    size: int

    @property
    def key(self) -> tuple:
        raise NotImplementedError

    @property
    def name(self) -> str:
        raise NotImplementedError

    @property
    def align(self) -> int:
        return 1

    def __eq__(self, other):
        return isinstance(other, TypeDesc) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"

    def __str__(self):
        return self.name


@dataclass(frozen=True, eq=False, repr=False)
class Fundamental(TypeDesc):
    prim: str
    size: int

    @property
    def key(self):
        return ("prim", self.prim)

    @property
    def name(self):
        return self.prim

    @property
    def align(self):
        return max(self.size, 1)

    @property
    def is_float(self) -> bool:
        return self.prim in FLOAT_NAMES


@dataclass(frozen=True, eq=False, repr=False)
class Forward(TypeDesc):
    """Named reference to a record, used for pointer targets (``struct node *``)."""

    tag: str

    @property
    def size(self):
        raise TypeDeclError(f"incomplete type {self.tag}")

    @property
    def key(self):
        return ("rec", self.tag)

    @property
    def name(self):
        return self.tag


@dataclass(frozen=True, eq=False, repr=False)
class Pointer(TypeDesc):
    target: TypeDesc
    size: int = ADDRESS_SIZE

    @property
    def key(self):
        return ("ptr", self.target.key)

    @property
    def name(self):
        inner = self.target.name
        return inner + "*" if inner.endswith("*") else inner + " *"

    @property
    def align(self):
        return ADDRESS_SIZE

    @property
    def is_generic(self) -> bool:
        return isinstance(self.target, Fundamental) and self.target.prim == "void"


@dataclass(frozen=True, eq=False, repr=False)
class Function(TypeDesc):
    # Virtual tables are modeled as arrays of this generic slot type.
    signature: str = "fn"
    size: int = ADDRESS_SIZE

    @property
    def key(self):
        return ("fn", self.signature)

    @property
    def name(self):
        return self.signature if self.signature != "fn" else "fn()"

    @property
    def align(self):
        return ADDRESS_SIZE


@dataclass(frozen=True, eq=False, repr=False)
class Array(TypeDesc):
    elem: TypeDesc
    count: int
    # U member[] lowered to U member[1]
    fam: bool = False

    def __post_init__(self):
        if self.count < 1:
            raise TypeDeclError("array length must be >= 1")
        if self.elem.size <= 0:
            raise TypeDeclError(f"array of zero-sized type {self.elem.name}")

    @property
    def size(self):
        return self.count * self.elem.size

    @property
    def key(self):
        return ("arr", self.elem.key, self.count)

    @property
    def name(self):
        dims = []
        t: TypeDesc = self
        while isinstance(t, Array):
            dims.append("[]" if t.fam else f"[{t.count}]")
            t = t.elem
        return t.name + "".join(dims)

    @property
    def align(self):
        return self.elem.align


@dataclass(frozen=True)
class Field:
    name: str
    type: TypeDesc
    offset: int
    is_base: bool = False

    @property
    def end(self) -> int:
        return self.offset + self.type.size


@dataclass(frozen=True, eq=False, repr=False)
class Record(TypeDesc):
    kind: str  # struct | class | union
    tag: Optional[str]
    fields: tuple
    size: int
    bases: tuple = ()
    _align: int = field(default=1, compare=False)

    def __post_init__(self):
        if self.kind not in ("struct", "class", "union"):
            raise TypeDeclError(f"unknown record kind {self.kind!r}")
        what = self.tag or f"anonymous {self.kind}"
        if self.size < 1:
            raise TypeDeclError(f"{what}: size must be >= 1")
        seen = set()
        for i, f in enumerate(self.fields):
            if f.name in seen:
                raise TypeDeclError(f"{what}: duplicate member {f.name}")
            seen.add(f.name)
            if f.type.size <= 0:
                raise TypeDeclError(f"{what}.{f.name}: zero-sized member")
            if f.offset < 0 or f.end > self.size:
                raise TypeDeclError(
                    f"{what}.{f.name}: extent [{f.offset}, {f.end}) outside [0, {self.size})"
                )
            if self.kind == "union" and f.offset != 0:
                raise TypeDeclError(f"{what}.{f.name}: union members live at offset 0")
            if isinstance(f.type, Array) and f.type.fam and i != len(self.fields) - 1:
                raise TypeDeclError(f"{what}.{f.name}: flexible array member must be last")
        if self.kind != "union":
            spans = sorted((f.offset, f.end, f.name) for f in self.fields)
            for (_, end_a, a), (start_b, _, b) in zip(spans, spans[1:]):
                if start_b < end_a:
                    raise TypeDeclError(f"{what}: members {a} and {b} overlap")
        if self.tag is None:
            key = ("anon", self.kind, self.size,
                   tuple((f.offset, f.type.key) for f in self.fields))
        else:
            key = ("rec", self.tag)
        object.__setattr__(self, "_key", key)

    @property
    def key(self):
        return self._key

    @property
    def name(self):
        return self.tag if self.tag else f"<anon {self.kind} {self.size}B>"

    @property
    def align(self):
        return self._align

    @property
    def fam_field(self) -> Optional[Field]:
        if self.fields:
            last = self.fields[-1]
            if isinstance(last.type, Array) and last.type.fam:
                return last
        return None

    def field(self, name: str) -> Field:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(f"{self.name} has no member {name!r}")


class _FreeType(TypeDesc):
    """Sentinel bound to deallocated memory; matches no user type."""

    __slots__ = ()
    size = 0

    @property
    def key(self):
        return ("FREE",)

    @property
    def name(self):
        return "FREE"


FREE = _FreeType()


def sizeof_type(t: TypeDesc) -> int:
    return t.size


def offset_of(container: TypeDesc, member: str) -> int:
    if not isinstance(container, Record):
        raise TypeDeclError(f"{container.name} has no members")
    try:
        f = container.field(member)
    except KeyError as exc:
        raise TypeDeclError(str(exc)) from None
    return 0 if container.kind == "union" else f.offset


def types_equal(a: TypeDesc, b: TypeDesc) -> bool:
    return a.key == b.key


def element_type(t: TypeDesc) -> TypeDesc:
    """The type ``S`` such that ``t`` is checked as ``S[]``."""
    return t.elem if isinstance(t, Array) else t


def is_address(t: TypeDesc) -> bool:
    return isinstance(t, Pointer)


def is_scalar(t: TypeDesc) -> bool:
    return isinstance(t, (Fundamental, Pointer, Function)) and t.size > 0


def natural_layout(
    kind: str,
    tag: Optional[str],
    members: Sequence[tuple],
    size: Optional[int] = None,
    bases: Iterable[Record] = (),
) -> Record:
    """Build a record from ``(name, type, offset_or_None)`` members.

    Members without an explicit offset are placed at the next address
    aligned to their natural alignment.  Base classes become leading
    embedded members.  ``size`` defaults to the extent rounded up to the
    largest member alignment.
    """
    bases = tuple(bases)
    entries = [(b.tag, b, None, True) for b in bases]
    entries += [(name, t, off, False) for name, t, off in members]
    fields = []
    cursor = 0
    max_align = 1
    for name, t, off, is_base in entries:
        if isinstance(t, Forward):
            raise TypeDeclError(f"member {name} has incomplete type {t.tag}")
        a = t.align
        max_align = max(max_align, a)
        if kind == "union":
            place = 0 if off is None else off
        else:
            place = _round_up(cursor, a) if off is None else off
        fields.append(Field(name, t, place, is_base))
        cursor = max(cursor, place + t.size)
    if size is None:
        size = _round_up(max(cursor, 1), max_align)
    return Record(kind, tag, tuple(fields), size,
                  tuple(b.tag for b in bases), max_align)


def base_chain(rec: Record, universe: "TypeUniverse") -> list:
    """Bases reachable at offset 0 (the upcasts that need no adjustment)."""
    out = []
    cur = rec
    while cur.fields and cur.fields[0].is_base and cur.fields[0].offset == 0:
        cur = universe.resolve(cur.fields[0].type)
        out.append(cur)
    return out


@dataclass(frozen=True, eq=False)
class TypeMeta:
    """Per-type runtime descriptor for the incomplete type ``T[]``."""

    type: TypeDesc
    size: int
    name: str
    id: int
    table: object = field(default=None, repr=False)

    def __eq__(self, other):
        return isinstance(other, TypeMeta) and self.type.key == other.type.key

    def __hash__(self):
        return hash(self.type.key)


FREE_META_ID = 1


class TypeUniverse:
    """Registry of named types and their runtime descriptors."""

    def __init__(self, sizes: Optional[dict] = None):
        sizes = {**DEFAULT_SIZES, **(sizes or {})}
        self.prims = {n: Fundamental(n, s) for n, s in sizes.items()}
        self.prims["void"] = Fundamental("void", 0)
        self.records: dict = {}
        self.aliases: dict = {}
        self._metas: dict = {}
        self._by_id: dict = {}
        free = TypeMeta(FREE, 0, "FREE", FREE_META_ID)
        self._metas[FREE.key] = free
        self._by_id[FREE_META_ID] = free
        self._next_id = FREE_META_ID + 1

    # naming ----------------------------------------------------------------
    def lookup(self, name: str) -> Optional[TypeDesc]:
        if name in self.prims:
            return self.prims[name]
        if name in self.aliases:
            return self.aliases[name]
        return self.records.get(name)

    def declare(self, rec: Record) -> Record:
        if rec.tag is None:
            raise TypeDeclError("only tagged records can be declared")
        if rec.tag in self.records or rec.tag in self.prims or rec.tag in self.aliases:
            raise TypeDeclError(f"redefinition of {rec.tag}")
        self.records[rec.tag] = rec
        return rec

    def alias(self, name: str, t: TypeDesc) -> None:
        if self.lookup(name) is not None:
            raise TypeDeclError(f"redefinition of {name}")
        self.aliases[name] = t

    def resolve(self, t: TypeDesc) -> TypeDesc:
        if isinstance(t, Forward):
            rec = self.records.get(t.tag)
            if rec is None:
                raise TypeDeclError(f"incomplete type {t.tag}")
            return rec
        return t

    def pointee(self, t: TypeDesc) -> TypeDesc:
        if not isinstance(t, Pointer):
            raise TypeDeclError(f"{t.name} is not an address type")
        return self.resolve(t.target)

    # runtime descriptors ---------------------------------------------------
    def meta(self, t: TypeDesc) -> TypeMeta:
        t = self.resolve(t)
        m = self._metas.get(t.key)
        if m is None:
            from .layout import build_layout_table

            m = TypeMeta(t, t.size, t.name, self._next_id, build_layout_table(t))
            self._metas[t.key] = m
            self._by_id[m.id] = m
            self._next_id += 1
        return m

    def meta_by_id(self, ident: int) -> Optional[TypeMeta]:
        return self._by_id.get(ident)

    @property
    def free_meta(self) -> TypeMeta:
        return self._by_id[FREE_META_ID]

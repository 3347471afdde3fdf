"""Sub-object layout relation and its hash-table encoding.

``layout(t, k)`` is the rule-by-rule reference relation: every sub-object
pointed to by ``base + k`` as ``(type, delta)`` pairs.  ``build_layout_table``
produces the finite lookup table consulted by the runtime; it is derived
from an independent flattening of the type so that the two can be checked
against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .types import (
    FREE,
    Array,
    Pointer,
    Record,
    TypeDesc,
    TypeMeta,
)

CHAR_KEY = ("prim", "char")
VOID_PTR_KEY = ("ptr", ("prim", "void"))


@dataclass(frozen=True)
class SubObject:
    type: TypeDesc
    delta: int

    @property
    def is_end(self) -> bool:
        return self.delta > 0 and self.delta == self.type.size

    def __str__(self):
        return f"<{self.type.name}, {self.delta}>"


@dataclass(frozen=True)
class RelBounds:
    """Bounds relative to a queried offset; ``None`` is unbounded."""

    lo: Optional[int]
    hi: Optional[int]

    @property
    def width(self) -> float:
        if self.lo is None or self.hi is None:
            return math.inf
        return self.hi - self.lo

    def __str__(self):
        lo = "-inf" if self.lo is None else str(self.lo)
        hi = "inf" if self.hi is None else str(self.hi)
        return f"{lo}..{hi}"


WIDE = RelBounds(None, None)


class Candidate(NamedTuple):
    sub: SubObject
    path: tuple
    fam: bool = False


def _rank(c: Candidate) -> tuple:
    # Non-end matches first, then wider, then shallower, then declaration order.
    width = math.inf if c.fam else c.sub.type.size
    return (c.sub.is_end, -width, len(c.path), c.path)


def match_keys(t: TypeDesc) -> tuple:
    """Keys ``S`` such that a sub-object of type ``t`` matches a check against ``S[]``."""
    if isinstance(t, Array):
        return (t.key, t.elem.key)
    return (t.key,)


# reference relation --------------------------------------------------------

def layout_candidates(t: TypeDesc, k: int, path: tuple = ()) -> list:
    """All ``(sub-object, path)`` matches at offset ``k``, rule by rule."""
    if t is FREE:
        return [Candidate(SubObject(FREE, 0), path)]
    size = t.size
    out = []
    if k == 0:
        out.append(Candidate(SubObject(t, 0), path))
    if k == size:
        out.append(Candidate(SubObject(t, size), path))
    if not 0 <= k < size:
        return out
    if isinstance(t, Array):
        es = t.elem.size
        i, r = divmod(k, es)
        out += layout_candidates(t.elem, r, path + (i,))
        if r == 0:
            if i > 0:
                # element i-1 ends where element i begins
                out += layout_candidates(t.elem, es, path + (i - 1,))
            out.append(Candidate(SubObject(t, k), path))
    elif isinstance(t, Record):
        for idx, f in enumerate(t.fields):
            off = 0 if t.kind == "union" else f.offset
            sub_path = path + (idx,)
            for c in layout_candidates(f.type, k - off, sub_path):
                if c.path == sub_path and c.sub.type is f.type and _is_fam(f.type):
                    c = c._replace(fam=True)
                out.append(c)
    return out


def _is_fam(t: TypeDesc) -> bool:
    return isinstance(t, Array) and t.fam


def layout(t: TypeDesc, k: int) -> frozenset:
    return frozenset(c.sub for c in layout_candidates(t, k))


def type_bounds(addr: int, sub: SubObject) -> tuple:
    lo = addr - sub.delta
    return (lo, lo + sub.type.size)


# hash table ----------------------------------------------------------------

class _Occ(NamedTuple):
    type: TypeDesc
    base: int
    path: tuple
    limit: Optional[int]  # end of the innermost enclosing object
    fam: bool


def _occurrences(t: TypeDesc):
    stack = [_Occ(t, 0, (), None, False)]
    while stack:
        occ = stack.pop()
        yield occ
        u = occ.type
        end = occ.base + u.size
        if isinstance(u, Array):
            es = u.elem.size
            for i in range(u.count):
                stack.append(_Occ(u.elem, occ.base + i * es, occ.path + (i,), end, False))
        elif isinstance(u, Record):
            for idx, f in enumerate(u.fields):
                off = 0 if u.kind == "union" else f.offset
                stack.append(_Occ(f.type, occ.base + off, occ.path + (idx,), end, _is_fam(f.type)))


def flattened_candidates(t: TypeDesc) -> dict:
    """Map offset -> candidates, built by walking every member/element chain."""
    by_k: dict = {}

    def add(k, occ, delta):
        by_k.setdefault(k, []).append(Candidate(SubObject(occ.type, delta), occ.path, occ.fam))

    for occ in _occurrences(t):
        u = occ.type
        add(occ.base, occ, 0)
        end = occ.base + u.size
        if occ.limit is None or end < occ.limit:
            add(end, occ, u.size)
        if isinstance(u, Array):
            es = u.elem.size
            for j in range(1, u.count):
                add(occ.base + j * es, occ, j * es)
    return by_k


def _bounds_of(c: Candidate) -> RelBounds:
    lo = -c.sub.delta
    return RelBounds(lo, None if c.fam else lo + c.sub.type.size)


@dataclass(frozen=True)
class TableEntry:
    sub_type: TypeDesc  # the S of the S[] check
    bounds: RelBounds
    winner: SubObject


class LayoutTable:
    """(S, k) -> relative bounds for one containing type."""

    def __init__(self, owner: TypeDesc, entries: dict, addr_entries: dict):
        self.owner = owner
        self.entries = entries
        self.addr_entries = addr_entries
        fam = owner.fam_field if isinstance(owner, Record) else None
        self.fam_offset = fam.offset if fam else None
        self.fam_elem_size = fam.type.elem.size if fam else None

    def __len__(self):
        return len(self.entries)

    def get(self, s: TypeDesc, k: int) -> Optional[RelBounds]:
        e = self.entries.get((s.key, k))
        return e.bounds if e else None

    def rows(self):
        """Entries sorted by (offset, sub-type name)."""
        items = sorted(self.entries.items(), key=lambda kv: (kv[0][1], kv[1].sub_type.name))
        return [(e.sub_type, k, e.bounds) for (_, k), e in items]

    def normalize(self, k: int, alloc_size: int) -> int:
        size = self.owner.size
        if k > size or (k == size and alloc_size > size):
            if self.fam_offset is not None:
                return (k - self.fam_offset) % self.fam_elem_size + self.fam_offset
            return k % size
        return k


def build_layout_table(t: TypeDesc) -> LayoutTable:
    if t is FREE:
        raise ValueError("FREE has no layout table")
    best: dict = {}
    key_types: dict = {}
    best_addr: dict = {}
    for k, cands in flattened_candidates(t).items():
        for c in cands:
            u = c.sub.type
            keys = match_keys(u)
            if isinstance(u, Array):
                key_types.setdefault(keys[1], u.elem)
            key_types.setdefault(keys[0], u)
            for key in keys:
                cur = best.get((key, k))
                if cur is None or _rank(c) < _rank(cur):
                    best[(key, k)] = c
            if isinstance(u, Pointer):
                cur = best_addr.get(k)
                if cur is None or _rank(c) < _rank(cur):
                    best_addr[k] = c
    entries = {
        (key, k): TableEntry(key_types[key], _bounds_of(c), c.sub)
        for (key, k), c in best.items()
    }
    top = entries[(t.key, 0)]
    entries[(t.key, 0)] = TableEntry(t, WIDE, top.winner)
    addr_entries = {k: _bounds_of(c) for k, c in best_addr.items()}
    return LayoutTable(t, entries, addr_entries)


def table_lookup(
    meta: TypeMeta,
    s: TypeDesc,
    k: int,
    alloc_size: int,
    coerce: bool = True,
) -> Optional[RelBounds]:
    """Bounds of the sub-object of type ``s`` at offset ``k``, or ``None``.

    ``k`` is normalised into ``[0, sizeof(T)]`` first.  With ``coerce`` the
    char-buffer and generic-address coercions are tried after a miss.
    """
    table: LayoutTable = meta.table
    if table is None or k < 0:
        return None
    norm = table.normalize(k, alloc_size)
    found = _lookup_normalized(table, s, norm, coerce)
    if found is not None and found.hi is None and found.lo is not None and norm != k:
        # an open-ended (flexible array) match spans back to the array start,
        # not just to the element the offset was folded onto
        found = RelBounds(found.lo - (k - norm), None)
    return found


def _lookup_normalized(table: LayoutTable, s: TypeDesc, k: int, coerce: bool):
    e = table.entries.get((s.key, k))
    if e is not None:
        return e.bounds
    if not coerce:
        return None
    e = table.entries.get((CHAR_KEY, k))
    if e is not None:
        return e.bounds
    if s.key == CHAR_KEY:
        return WIDE
    if isinstance(s, Pointer):
        if s.is_generic:
            return table.addr_entries.get(k)
        e = table.entries.get((VOID_PTR_KEY, k))
        if e is not None:
            return e.bounds
    return None

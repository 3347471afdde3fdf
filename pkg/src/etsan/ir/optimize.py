"""Check-removal rewrites over instrumented programs.

1. casts    a type check after a cast to the same type, or to a base class
            at offset 0, becomes a bounds copy/narrow of the source bounds.
2. bounds   a bounds check dominated by a check on the same address value,
            same bounds and at least the same width is dropped.
3. narrow   narrowing to a member that starts at offset 0 and spans the
            whole container is dropped when the source bounds are already
            exactly that container.

Address and bounds equality is decided by local value numbering over the
structured code, so two loads of ``a[i]`` share one check.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..runtime import META_SIZE
from ..types import Pointer, Record, base_chain
from .instrs import (
    AllocHeap,
    AllocStack,
    Assign,
    BoundsCopy,
    BoundsGet,
    BoundsNarrow,
    Cast,
    CheckBounds,
    CheckType,
    FieldAddr,
    Function,
    If,
    IndexAddr,
    Program,
    While,
    assigned_in,
    bounds_name,
)

REWRITES = ("casts", "bounds", "narrow")
DEFAULT_EXACT_LIMIT = 2**26 - META_SIZE


@dataclass
class OptStats:
    type_checks_removed: int = 0
    bounds_checks_removed: int = 0
    narrows_removed: int = 0

    def total(self) -> int:
        return self.type_checks_removed + self.bounds_checks_removed + self.narrows_removed

    def as_dict(self) -> dict:
        return {
            "type_checks_removed": self.type_checks_removed,
            "bounds_checks_removed": self.bounds_checks_removed,
            "narrows_removed": self.narrows_removed,
        }


# 1. cast checks ------------------------------------------------------------------

def _bounded_vars(fn: Function) -> set:
    out = set()
    for ins in _walk(fn.body):
        for d in ins.defs():
            if d.endswith(".b"):
                out.add(d[:-2])
    return out


def _walk(block):
    for ins in block:
        yield ins
        if isinstance(ins, If):
            yield from _walk(ins.then)
            yield from _walk(ins.orelse)
        elif isinstance(ins, While):
            yield from _walk(ins.pre)
            yield from _walk(ins.body)


def _rewrite_casts(fn: Function, universe, stats: OptStats) -> list:
    bounded = _bounded_vars(fn)

    def pointee(var):
        t = fn.vars.get(var)
        return universe.resolve(t.target) if isinstance(t, Pointer) else None

    def go(block):
        out = []
        prev = None
        for ins in block:
            if isinstance(ins, If):
                ins = replace(ins, then=go(ins.then), orelse=go(ins.orelse))
            elif isinstance(ins, While):
                ins = replace(ins, pre=go(ins.pre), body=go(ins.body))
            elif (isinstance(ins, CheckType) and isinstance(prev, Cast) and prev.dst == ins.addr
                  and isinstance(prev.src, str) and prev.src in bounded):
                src_t, dst_t = pointee(prev.src), pointee(prev.dst)
                if src_t is not None and dst_t is not None:
                    if src_t.key == dst_t.key:
                        ins = BoundsCopy(ins.bounds, bounds_name(prev.src), line=ins.line)
                        stats.type_checks_removed += 1
                    elif isinstance(src_t, Record) and any(
                            b.key == dst_t.key for b in base_chain(src_t, universe)):
                        ins = BoundsNarrow(ins.bounds, bounds_name(prev.src), ins.addr,
                                           dst_t.size, line=ins.line)
                        stats.type_checks_removed += 1
            out.append(ins)
            prev = ins
        return out

    return go(fn.body)


# value numbering shared by rewrites 2 and 3 -----------------------------------------

@dataclass
class _State:
    version: dict = field(default_factory=dict)
    key: dict = field(default_factory=dict)  # var -> value key at its current version
    checks: dict = field(default_factory=dict)  # (addr key, bounds key, label) -> width
    exact: dict = field(default_factory=dict)  # bounds key -> (addr key, size)

    def copy(self) -> "_State":
        return _State(dict(self.version), dict(self.key), dict(self.checks), dict(self.exact))

    def val(self, op):
        if not isinstance(op, str):
            return ("c", op)
        return self.key.get(op, ("v", op, self.version.get(op, 0)))

    def clobber(self, names):
        for n in names:
            self.version[n] = self.version.get(n, 0) + 1
            self.key.pop(n, None)
        self._prune()

    def define(self, name, key):
        self.version[name] = self.version.get(name, 0) + 1
        self.key[name] = key
        self._prune()

    def _prune(self):
        def fresh(k):
            if isinstance(k, tuple):
                if k and k[0] == "v":
                    return k[2] == self.version.get(k[1], 0)
                return all(fresh(x) for x in k)
            return True

        self.checks = {k: w for k, w in self.checks.items() if fresh(k)}
        self.exact = {k: v for k, v in self.exact.items() if fresh(k) and fresh(v)}


def _leaf_key(name, state):
    # a key that is only valid while ``name`` keeps its current version
    return ("v", name, state.version.get(name, 0) + 1)


def _dominance(fn: Function, stats: OptStats, drop_bounds: bool, drop_narrow: bool,
               exact_limit: int):
    def go(block, st: _State):
        out = []
        fresh_alloc = None  # (dst, type, size) of an allocation awaiting its check
        for ins in block:
            just_allocated, fresh_alloc = fresh_alloc, None
            if isinstance(ins, If):
                then = go(ins.then, st.copy())
                orelse = go(ins.orelse, st.copy())
                st.clobber(assigned_in(ins.then) | assigned_in(ins.orelse))
                out.append(replace(ins, then=then, orelse=orelse))
                continue
            if isinstance(ins, While):
                st.clobber(assigned_in(ins.pre) | assigned_in(ins.body))
                inner = st.copy()
                pre = go(ins.pre, inner)
                body = go(ins.body, inner.copy())
                st.clobber(assigned_in(ins.pre) | assigned_in(ins.body))
                out.append(replace(ins, pre=pre, body=body))
                continue
            if isinstance(ins, CheckBounds):
                k = (st.val(ins.addr), st.val(ins.bounds), ins.static)
                width = -1 if ins.escape else ins.width
                prior = st.checks.get(k)
                if (drop_bounds and prior is not None and isinstance(width, int)
                        and isinstance(prior, int) and prior >= width):
                    stats.bounds_checks_removed += 1
                    continue
                if isinstance(width, int) and (prior is None or not isinstance(prior, int)
                                               or width > prior):
                    st.checks[k] = width
                out.append(ins)
                continue
            if isinstance(ins, BoundsNarrow) and ins.size is not None:
                src = st.val(ins.src)
                addr = st.val(ins.addr)
                if drop_narrow and st.exact.get(src) == (addr, ins.size):
                    stats.narrows_removed += 1
                    ins = BoundsCopy(ins.bounds, ins.src, line=ins.line)
                    st.define(ins.bounds, src)
                else:
                    st.define(ins.bounds, _leaf_key(ins.bounds, st))
                    st.exact[st.val(ins.bounds)] = (addr, ins.size)
                out.append(ins)
                continue
            if isinstance(ins, (CheckType, BoundsGet)):
                st.define(ins.bounds, _leaf_key(ins.bounds, st))
                if just_allocated is not None and just_allocated[0] == ins.addr and (
                        isinstance(ins, BoundsGet) or ins.type.key == just_allocated[1].key):
                    st.exact[st.val(ins.bounds)] = (st.val(ins.addr), just_allocated[2])
                out.append(ins)
                continue
            # ordinary definitions
            if isinstance(ins, FieldAddr):
                src = st.val(ins.src)
                st.define(ins.dst, src if ins.offset == 0 else ("f", src, ins.offset))
            elif isinstance(ins, IndexAddr):
                src = st.val(ins.src)
                if ins.index == 0:
                    st.define(ins.dst, src)
                else:
                    st.define(ins.dst, ("i", src, st.val(ins.index), ins.scale))
            elif isinstance(ins, (Assign, BoundsCopy)):
                dst = ins.dst if isinstance(ins, Assign) else ins.bounds
                src = st.val(ins.src)
                if dst == ins.src:
                    pass
                else:
                    st.define(dst, src)
            else:
                st.clobber(ins.defs())
                if (isinstance(ins, (AllocStack, AllocHeap)) and ins.type is not None
                        and getattr(ins, "kind", "stack") != "legacy"
                        and isinstance(ins.size, int) and 0 < ins.size <= exact_limit):
                    fresh_alloc = (ins.dst, ins.type, ins.size)
            out.append(ins)
        return out

    return go(fn.body, _State())


def optimize(
    program: Program,
    casts: bool = True,
    bounds: bool = True,
    narrow: bool = True,
    exact_limit: int = DEFAULT_EXACT_LIMIT,
):
    """Return ``(optimized program, OptStats)``; each rewrite can be toggled.

    ``exact_limit`` is the largest allocation known to be served by a managed
    size class (larger ones may fall back to legacy memory with wide bounds).
    """
    stats = OptStats()
    fns = {}
    for name, fn in program.functions.items():
        body = fn.body
        if casts:
            body = _rewrite_casts(fn, program.universe, stats)
        if bounds or narrow:
            body = _dominance(replace(fn, body=body), stats, bounds, narrow, exact_limit)
        fns[name] = replace(fn, body=body)
    return replace(program, functions=fns), stats

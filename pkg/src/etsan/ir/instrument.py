"""Insert type and bounds checks into a lowered program.

Variants:
  full    type checks on every input address that is later used, bounds
          narrowing on member selection, bounds checks on use and escape.
  bounds  allocation bounds only (``bounds_get`` instead of type checks,
          no member narrowing).
  type    a type check after every explicit cast to an address type and
          nothing else.
"""

from __future__ import annotations

from dataclasses import replace

from ..types import Fundamental, Pointer, TypeUniverse
from .instrs import (
    AllocHeap,
    AllocStack,
    Assign,
    BoundsCopy,
    BoundsGet,
    BoundsNarrow,
    BoundsWide,
    Call,
    Cast,
    CheckBounds,
    CheckType,
    FieldAddr,
    Function,
    If,
    IndexAddr,
    Load,
    Memcpy,
    Program,
    Return,
    Store,
    While,
    bounds_name,
    is_addr,
    walk,
)

VARIANTS = ("full", "bounds", "type")

# definitions whose result is an input address (needs a fresh type check)
_INPUT_DEFS = (Call, Load, Cast, AllocHeap, AllocStack)


def used_addresses(fn: Function) -> set:
    """Address variables dereferenced directly or through a derived address."""
    used, edges = set(), {}
    for ins in walk(fn.body):
        if isinstance(ins, (Load, Store)):
            used.add(ins.addr)
        elif isinstance(ins, Memcpy):
            used.update((ins.dst, ins.src))
        elif isinstance(ins, (FieldAddr, IndexAddr)):
            edges.setdefault(ins.dst, set()).add(ins.src)
        elif isinstance(ins, Assign) and isinstance(ins.src, str) \
                and is_addr(fn.vars.get(ins.dst)) and is_addr(fn.vars.get(ins.src)):
            edges.setdefault(ins.dst, set()).add(ins.src)
    work = list(used)
    while work:
        for src in edges.get(work.pop(), ()):
            if src not in used:
                used.add(src)
                work.append(src)
    return {v for v in used if is_addr(fn.vars.get(v))}


def check_type_for(t: Pointer, universe: TypeUniverse):
    target = universe.resolve(t.target)
    if isinstance(target, Fundamental) and target.prim == "void":
        return universe.prims["char"]
    return target


class _Instrumenter:
    def __init__(self, fn: Function, universe: TypeUniverse, variant: str):
        self.fn = fn
        self.universe = universe
        self.variant = variant
        self.used = used_addresses(fn) if variant != "type" else set()

    def addr_type(self, var) -> bool:
        return isinstance(var, str) and is_addr(self.fn.vars.get(var))

    def label(self, var: str) -> str:
        return check_type_for(self.fn.vars[var], self.universe).name

    def input_check(self, var: str, line: int):
        if self.variant == "bounds":
            return BoundsGet(bounds_name(var), var, line=line)
        return CheckType(bounds_name(var), var, check_type_for(self.fn.vars[var], self.universe),
                         line=line)

    def escape(self, var, line: int, out: list):
        if self.addr_type(var) and var in self.used:
            out.append(CheckBounds(var, 0, bounds_name(var), True, self.label(var), line=line))

    def entry(self) -> list:
        out = []
        for name, t in self.fn.params:
            if is_addr(t) and name in self.used:
                out.append(self.input_check(name, self.fn.line))
        return out

    def block(self, instrs: list) -> list:
        out = []
        for ins in instrs:
            if self.variant == "type":
                self.type_only(ins, out)
            else:
                self.full(ins, out)
        return out

    def type_only(self, ins, out: list):
        if isinstance(ins, If):
            ins = replace(ins, then=self.block(ins.then), orelse=self.block(ins.orelse))
        elif isinstance(ins, While):
            ins = replace(ins, pre=self.block(ins.pre), body=self.block(ins.body))
        out.append(ins)
        if isinstance(ins, Cast) and ins.explicit and is_addr(ins.type):
            out.append(self.input_check(ins.dst, ins.line))

    def full(self, ins, out: list):
        line = ins.line
        if isinstance(ins, If):
            out.append(replace(ins, then=self.block(ins.then), orelse=self.block(ins.orelse)))
            return
        if isinstance(ins, While):
            out.append(replace(ins, pre=self.block(ins.pre), body=self.block(ins.body)))
            return
        # uses: bounds checks before the instruction
        if isinstance(ins, (Load, Store)):
            if isinstance(ins, Store):
                self.escape(ins.val, line, out)
            out.append(CheckBounds(ins.addr, ins.type.size, bounds_name(ins.addr), False,
                                   ins.type.name, line=line))
        elif isinstance(ins, Memcpy):
            for var in (ins.dst, ins.src):
                out.append(CheckBounds(var, ins.n, bounds_name(var), False, self.label(var),
                                       line=line))
        elif isinstance(ins, Call):
            for a in ins.args:
                self.escape(a, line, out)
        elif isinstance(ins, Return):
            self.escape(ins.val, line, out)
        out.append(ins)
        # definitions: (re)compute the bounds of a used address
        for d in ins.defs():
            if d not in self.used:
                continue
            b = bounds_name(d)
            if isinstance(ins, _INPUT_DEFS):
                out.append(self.input_check(d, line))
            elif isinstance(ins, FieldAddr):
                if self.variant == "bounds":
                    out.append(BoundsCopy(b, bounds_name(ins.src), line=line))
                else:
                    size = None if ins.is_fam else ins.field.type.size
                    out.append(BoundsNarrow(b, bounds_name(ins.src), d, size, line=line))
            elif isinstance(ins, IndexAddr):
                out.append(BoundsCopy(b, bounds_name(ins.src), line=line))
            elif isinstance(ins, Assign):
                if self.addr_type(ins.src):
                    out.append(BoundsCopy(b, bounds_name(ins.src), line=line))
                else:
                    out.append(BoundsWide(b, line=line))
            else:
                out.append(BoundsWide(b, line=line))


def instrument(program: Program, variant: str = "full") -> Program:
    """Return an instrumented copy; the input program is not modified."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    fns = {}
    for name, fn in program.functions.items():
        ins = _Instrumenter(fn, program.universe, variant)
        body = ins.entry() + ins.block(fn.body)
        fns[name] = replace(fn, body=body)
    return replace(program, functions=fns, variant=variant)


def audit_guards(fn: Function) -> list:
    """Loads/stores not dominated by an access check on the same address.

    Returns the offending instructions; an empty list means every memory
    access is guarded on every path.
    """
    bad = []

    def scan(block, avail):
        for ins in block:
            if isinstance(ins, If):
                scan(ins.then, set(avail))
                scan(ins.orelse, set(avail))
                _kill(avail, _assigned(ins.then) | _assigned(ins.orelse))
                continue
            if isinstance(ins, While):
                inner = _assigned(ins.pre) | _assigned(ins.body)
                _kill(avail, inner)
                head = set(avail)
                scan(ins.pre, head)  # the condition block dominates the body
                scan(ins.body, head)
                continue
            if isinstance(ins, CheckBounds) and not ins.escape:
                avail.add((ins.addr, ins.bounds))
            elif isinstance(ins, (Load, Store)):
                if (ins.addr, bounds_name(ins.addr)) not in avail:
                    bad.append(ins)
            _kill(avail, set(ins.defs()))

    scan(fn.body, set())
    return bad


def _assigned(block) -> set:
    out = set()
    for ins in walk(block):
        out.update(ins.defs())
    return out


def _kill(avail: set, names: set):
    for pair in list(avail):
        if pair[0] in names or pair[1] in names:
            avail.discard(pair)

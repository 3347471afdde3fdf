"""Bind untyped ``malloc`` results to the type of their first lvalue use."""

from __future__ import annotations

from .instrs import AllocHeap, Assign, Cast, FieldAddr, IndexAddr, Load, Program, Store, walk


def first_use_type(order: list, start: int, universe):
    aliases = {order[start].dst}
    for ins in order[start + 1:]:
        if isinstance(ins, (Assign, Cast)) and ins.src in aliases:
            aliases.add(ins.dst)
        elif isinstance(ins, IndexAddr) and ins.src in aliases:
            aliases.add(ins.dst)
        elif isinstance(ins, (Load, Store)) and ins.addr in aliases:
            return ins.type
        elif isinstance(ins, FieldAddr) and ins.src in aliases:
            return ins.record
    return universe.prims["char"]


def infer_malloc_type(program: Program) -> Program:
    """Fill in the type of every untyped heap allocation (in place)."""
    for fn in program.functions.values():
        order = list(walk(fn.body))
        for i, ins in enumerate(order):
            if isinstance(ins, AllocHeap) and ins.type is None and ins.kind == "malloc":
                ins.type = first_use_type(order, i, program.universe)
    return program

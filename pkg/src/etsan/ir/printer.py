"""Human-readable listing of IR programs."""

from __future__ import annotations

from .instrs import (
    AllocHeap,
    AllocStack,
    Assign,
    BinOp,
    BoundsCopy,
    BoundsGet,
    BoundsNarrow,
    BoundsWide,
    Call,
    Cast,
    CheckBounds,
    CheckType,
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


def _op(x) -> str:
    return x if isinstance(x, str) else repr(x)


def format_instr(ins) -> str:
    if isinstance(ins, Assign):
        return f"{ins.dst} = {_op(ins.src)}"
    if isinstance(ins, BinOp):
        return f"{ins.dst} = {_op(ins.a)} {ins.op} {_op(ins.b)}"
    if isinstance(ins, UnOp):
        return f"{ins.dst} = {ins.op}{_op(ins.a)}"
    if isinstance(ins, Load):
        return f"{ins.dst} = load {ins.type.name}, {ins.addr}"
    if isinstance(ins, Store):
        return f"store {ins.type.name} {_op(ins.val)}, {ins.addr}"
    if isinstance(ins, FieldAddr):
        return f"{ins.dst} = &{ins.src}->{ins.field_name}  ; +{ins.offset}"
    if isinstance(ins, IndexAddr):
        return f"{ins.dst} = {ins.src} + {_op(ins.index)}*{ins.scale}"
    if isinstance(ins, Cast):
        how = "cast" if ins.explicit else "convert"
        return f"{ins.dst} = {how}<{ins.type.name}>({_op(ins.src)})"
    if isinstance(ins, Call):
        call = f"{ins.fn}({', '.join(_op(a) for a in ins.args)})"
        return f"{ins.dst} = {call}" if ins.dst else call
    if isinstance(ins, Return):
        return "return" if ins.val is None else f"return {_op(ins.val)}"
    if isinstance(ins, AllocHeap):
        t = ins.type.name if ins.type is not None else "?"
        return f"{ins.dst} = {ins.kind}<{t}>({_op(ins.size)})"
    if isinstance(ins, AllocStack):
        return f"{ins.dst} = stack<{ins.type.name}>({ins.size})"
    if isinstance(ins, Free):
        return f"free({_op(ins.src)})"
    if isinstance(ins, Print):
        return f"print({_op(ins.src)})"
    if isinstance(ins, Memcpy):
        return f"memcpy({ins.dst}, {ins.src}, {_op(ins.n)})"
    if isinstance(ins, CheckType):
        return f"{ins.bounds} = type_check({ins.addr}, {ins.type.name}[])"
    if isinstance(ins, BoundsGet):
        return f"{ins.bounds} = bounds_get({ins.addr})"
    if isinstance(ins, BoundsNarrow):
        size = "..." if ins.size is None else str(ins.size)
        return f"{ins.bounds} = bounds_narrow({ins.src}, {ins.addr}, {size})"
    if isinstance(ins, BoundsCopy):
        return f"{ins.bounds} = {ins.src}"
    if isinstance(ins, BoundsWide):
        return f"{ins.bounds} = WIDE"
    if isinstance(ins, CheckBounds):
        kind = "escape" if ins.escape else f"{_op(ins.width)}"
        return f"bounds_check({ins.addr}, {kind}, {ins.bounds})"
    return repr(ins)


def _block(instrs, indent: int, out: list):
    pad = "  " * indent
    for ins in instrs:
        if isinstance(ins, If):
            out.append(f"{pad}if {_op(ins.cond)} {{")
            _block(ins.then, indent + 1, out)
            if ins.orelse:
                out.append(f"{pad}}} else {{")
                _block(ins.orelse, indent + 1, out)
            out.append(f"{pad}}}")
        elif isinstance(ins, While):
            out.append(f"{pad}loop {{")
            _block(ins.pre, indent + 1, out)
            out.append(f"{pad}  break unless {_op(ins.cond)}")
            _block(ins.body, indent + 1, out)
            out.append(f"{pad}}}")
        else:
            out.append(pad + format_instr(ins))


def format_function(fn: Function) -> str:
    params = ", ".join(f"{n}: {t.name}" for n, t in fn.params)
    ret = f" -> {fn.ret.name}" if fn.ret is not None else ""
    out = [f"fn {fn.name}({params}){ret} {{"]
    _block(fn.body, 1, out)
    out.append("}")
    return "\n".join(out)


def format_program(program: Program) -> str:
    return "\n\n".join(format_function(fn) for fn in program.functions.values()) + "\n"

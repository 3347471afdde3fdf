"""Interpreter for (instrumented) programs over the simulated runtime."""

from __future__ import annotations

import json
import struct
import sys
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from ..lowfat import WIDE_BOUNDS, AbsBounds, AddressSpace, HeapError, MemoryFault, SpaceConfig
from ..runtime import META_SIZE, AbortExecution, Mode, Reporter, Runtime, bounds_narrow
from ..types import Fundamental, Pointer, TypeDesc
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

REPORT_SCHEMA = 1
COMPLETED, ABORTED, FAULT = "Completed", "AbortAfterN", "Fault"
EXIT_CODES = {COMPLETED: 0, ABORTED: 1, FAULT: 2}
MASK64 = 2**64 - 1


class Fault(Exception):
    """Interpreter fault, distinct from sanitizer errors."""


class StepLimit(Fault):
    pass


@dataclass
class ExecReport:
    buckets: list  # [{kind, static, dynamic, offset, count, first_site}]
    counters: dict
    function_counters: dict
    return_value: object
    output: list
    halted_by: str
    log: list = field(default_factory=list)
    fault: Optional[str] = None
    memory_digest: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.halted_by]

    @property
    def bucket_keys(self) -> set:
        return {(b["kind"], b["static"], b["dynamic"], b["offset"]) for b in self.buckets}

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "buckets": self.buckets,
            "counters": self.counters,
            "function_counters": self.function_counters,
            "return_value": self.return_value,
            "output": self.output,
            "halted_by": self.halted_by,
            "log": self.log,
            "fault": self.fault,
            "memory_digest": self.memory_digest,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExecReport":
        d = json.loads(text)
        if d.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        d.pop("schema")
        return cls(**d)


def _wrap(value, t: Optional[TypeDesc]):
    if isinstance(t, Pointer):
        return int(value) & MASK64
    if isinstance(t, Fundamental):
        if t.is_float:
            v = float(value)
            return struct.unpack("<f", struct.pack("<f", v))[0] if t.size == 4 else v
        bits = 8 * t.size
        v = int(value) & ((1 << bits) - 1)
        return v - (1 << bits) if v >> (bits - 1) else v
    return value


def _cdiv(a, b):
    if isinstance(a, float) or isinstance(b, float):
        return a / b
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _cmod(a, b):
    return a - _cdiv(a, b) * b


_BINOPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _cdiv,
    "%": _cmod,
    "==": lambda a, b: int(a == b),
    "!=": lambda a, b: int(a != b),
    "<": lambda a, b: int(a < b),
    "<=": lambda a, b: int(a <= b),
    ">": lambda a, b: int(a > b),
    ">=": lambda a, b: int(a >= b),
}


class _Frame:
    __slots__ = ("fn", "vars", "bounds", "id")

    def __init__(self, fn, ident):
        self.fn = fn
        self.vars = {}
        self.bounds = {}
        self.id = ident


class _Ret(Exception):
    def __init__(self, value):
        self.value = value


class Interpreter:
    def __init__(
        self,
        program: Program,
        space: Optional[SpaceConfig] = None,
        mode: Mode = Mode(),
        step_limit: int = 5_000_000,
        max_depth: int = 256,
        meta_size: int = META_SIZE,
    ):
        self.program = program
        self.space = AddressSpace(space or SpaceConfig())
        self.reporter = Reporter(mode)
        self.runtime = Runtime(self.space, program.universe, self.reporter, meta_size)
        self.step_limit = step_limit
        self.max_depth = max_depth
        self.steps = 0
        self.depth = 0
        self.frames = 0
        self.fn_counters: dict = {}
        self.output: list = []

    def site(self, ins) -> str:
        return f"{self.program.source}:{ins.line}"

    # driver ----------------------------------------------------------------
    def run(self, entry: str = "main", args: tuple = ()) -> ExecReport:
        if entry not in self.program.functions:
            raise ValueError(f"no function named {entry!r}")
        halted, ret, fault = COMPLETED, None, None
        old_limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(old_limit, 20 * self.max_depth + 1000))
        try:
            ret = self.call(entry, list(args))
        except AbortExecution:
            halted = ABORTED
        except (Fault, MemoryFault, HeapError, ZeroDivisionError) as exc:
            halted = FAULT
            fault = f"{type(exc).__name__}: {exc}"
        finally:
            sys.setrecursionlimit(old_limit)
        buckets = [
            {"kind": k[0], "static": k[1], "dynamic": k[2], "offset": k[3],
             "count": b.count, "first_site": b.first_site}
            for k, b in sorted(self.reporter.buckets.items(), key=lambda kv: tuple(map(str, kv[0])))
        ]
        counters = {name: self.reporter.counters.get(name, 0)
                    for name in ("type_checks", "bounds_checks", "legacy_checks", "bounds_gets")}
        fn_counters = {name: dict(sorted(c.items())) for name, c in sorted(self.fn_counters.items())}
        return ExecReport(
            buckets=buckets,
            counters=counters,
            function_counters=fn_counters,
            return_value=ret,
            output=list(self.output),
            halted_by=halted,
            log=list(self.reporter.log),
            fault=fault,
            memory_digest=self.space.digest(),
            meta={"program": self.program.source, "variant": self.program.variant or "none",
                  "mode": str(self.reporter.mode), "steps": self.steps},
        )

    def call(self, name: str, args: list):
        fn = self.program.functions.get(name)
        if fn is None:
            raise Fault(f"call to unknown function {name!r}")
        if len(args) != len(fn.params):
            raise Fault(f"{name} expects {len(fn.params)} arguments")
        if self.depth >= self.max_depth:
            raise Fault(f"call depth exceeded {self.max_depth}")
        self.frames += 1
        frame = _Frame(fn, ("frame", self.frames))
        for (pname, ptype), a in zip(fn.params, args):
            frame.vars[pname] = _wrap(a, ptype)
        self.fn_counters.setdefault(name, Counter())
        self.depth += 1
        try:
            self.block(fn.body, frame)
            value = None
        except _Ret as r:
            value = r.value
        finally:
            self.depth -= 1
            if self.space.has_frame(frame.id):
                self.runtime.release_frame(frame.id)
        return value

    # execution -------------------------------------------------------------
    def val(self, op, frame):
        if isinstance(op, str):
            try:
                return frame.vars[op]
            except KeyError:
                raise Fault(f"{frame.fn.name}: {op} used before assignment") from None
        return op

    def set(self, frame, name, value):
        frame.vars[name] = _wrap(value, frame.fn.vars.get(name))

    def bounds(self, frame, name) -> AbsBounds:
        return frame.bounds.get(name, WIDE_BOUNDS)

    def tick(self):
        self.steps += 1
        if self.steps > self.step_limit:
            raise StepLimit(f"step limit {self.step_limit} exceeded")

    def block(self, instrs, frame):
        for ins in instrs:
            self.tick()
            self.exec(ins, frame)

    def exec(self, ins, frame):
        v = self.val
        if isinstance(ins, Assign):
            self.set(frame, ins.dst, v(ins.src, frame))
        elif isinstance(ins, BinOp):
            a, b = v(ins.a, frame), v(ins.b, frame)
            self.set(frame, ins.dst, _BINOPS[ins.op](a, b))
        elif isinstance(ins, UnOp):
            a = v(ins.a, frame)
            self.set(frame, ins.dst, -a if ins.op == "-" else int(not a))
        elif isinstance(ins, Load):
            self.set(frame, ins.dst, self.load(v(ins.addr, frame), ins.type))
        elif isinstance(ins, Store):
            self.store(v(ins.addr, frame), ins.type, v(ins.val, frame))
        elif isinstance(ins, FieldAddr):
            self.set(frame, ins.dst, v(ins.src, frame) + ins.offset)
        elif isinstance(ins, IndexAddr):
            self.set(frame, ins.dst, v(ins.src, frame) + v(ins.index, frame) * ins.scale)
        elif isinstance(ins, Cast):
            x = v(ins.src, frame)
            if isinstance(ins.type, Fundamental) and not ins.type.is_float and isinstance(x, float):
                x = int(x)
            self.set(frame, ins.dst, x)
        elif isinstance(ins, If):
            self.block(ins.then if v(ins.cond, frame) else ins.orelse, frame)
        elif isinstance(ins, While):
            while True:
                self.block(ins.pre, frame)
                if not v(ins.cond, frame):
                    break
                self.block(ins.body, frame)
                self.tick()  # an empty loop still has to run out of steps
        elif isinstance(ins, Call):
            r = self.call(ins.fn, [v(a, frame) for a in ins.args])
            if ins.dst is not None:
                self.set(frame, ins.dst, r if r is not None else 0)
        elif isinstance(ins, Return):
            raise _Ret(None if ins.val is None else v(ins.val, frame))
        elif isinstance(ins, AllocHeap):
            size = v(ins.size, frame)
            if size <= 0:
                raise Fault(f"allocation of {size} bytes")
            if ins.kind == "legacy":
                addr = self.space.legacy_alloc(size)
            else:
                addr = self.runtime.type_malloc(size, ins.type or self.program.universe.prims["char"])
            self.set(frame, ins.dst, addr)
        elif isinstance(ins, AllocStack):
            self.set(frame, ins.dst, self.runtime.stack_malloc(frame.id, ins.size, ins.type))
        elif isinstance(ins, Free):
            self.runtime.type_free(v(ins.src, frame), self.site(ins))
        elif isinstance(ins, Print):
            x = v(ins.src, frame)
            self.output.append(repr(x) if isinstance(x, float) else str(x))
        elif isinstance(ins, Memcpy):
            n = v(ins.n, frame)
            if n > 0:
                self.space.write(v(ins.dst, frame), self.space.read(v(ins.src, frame), n))
        # instrumentation forms
        elif isinstance(ins, CheckType):
            counters = self.fn_counters[frame.fn.name]
            before = self.reporter.counters["legacy_checks"]
            frame.bounds[ins.bounds] = self.runtime.type_check(v(ins.addr, frame), ins.type,
                                                               self.site(ins))
            counters["type_checks"] += 1
            counters["legacy_checks"] += self.reporter.counters["legacy_checks"] - before
        elif isinstance(ins, BoundsGet):
            self.fn_counters[frame.fn.name]["bounds_gets"] += 1
            frame.bounds[ins.bounds] = self.runtime.bounds_get(v(ins.addr, frame))
        elif isinstance(ins, BoundsNarrow):
            addr = v(ins.addr, frame)
            hi = MASK64 if ins.size is None else addr + ins.size
            frame.bounds[ins.bounds] = bounds_narrow(self.bounds(frame, ins.src), AbsBounds(addr, hi))
        elif isinstance(ins, BoundsCopy):
            frame.bounds[ins.bounds] = self.bounds(frame, ins.src)
        elif isinstance(ins, BoundsWide):
            frame.bounds[ins.bounds] = WIDE_BOUNDS
        elif isinstance(ins, CheckBounds):
            self.fn_counters[frame.fn.name]["bounds_checks"] += 1
            self.runtime.bounds_check(v(ins.addr, frame), v(ins.width, frame),
                                      self.bounds(frame, ins.bounds), ins.escape, ins.static,
                                      self.site(ins))
        else:
            raise Fault(f"unknown instruction {type(ins).__name__}")

    # memory ----------------------------------------------------------------
    def load(self, addr: int, t: TypeDesc):
        if isinstance(t, Fundamental) and t.is_float:
            return self.space.load_float(addr, t.size)
        return self.space.mem_load(addr, t.size, signed=not isinstance(t, Pointer))

    def store(self, addr: int, t: TypeDesc, value) -> None:
        if isinstance(t, Fundamental) and t.is_float:
            self.space.store_float(addr, t.size, float(value))
        else:
            self.space.mem_store(addr, t.size, int(value))


def interpret(
    program: Program,
    space: Optional[SpaceConfig] = None,
    mode: Mode = Mode(),
    entry: str = "main",
    **kwargs,
) -> ExecReport:
    return Interpreter(program, space, mode, **kwargs).run(entry)

"""Typed-allocation runtime: META headers, type/bounds checks, error reporting."""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .layout import table_lookup
from .lowfat import UINTPTR_MAX, WIDE_BOUNDS, AbsBounds, AddressSpace, HeapError
from .types import FREE_META_ID, TypeDesc, TypeMeta, TypeUniverse

META_SIZE = 16


class ErrorKind(str, Enum):
    TYPE = "TypeError"
    BOUNDS = "BoundsError"
    USE_AFTER_FREE = "UseAfterFree"
    DOUBLE_FREE = "DoubleFree"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SanError:
    kind: ErrorKind
    static_type: str
    dynamic_type: str
    offset: int
    site: str = "?"

    @property
    def bucket(self) -> tuple:
        return (str(self.kind), self.static_type, self.dynamic_type, self.offset)

    def log_line(self) -> str:
        return (f"ETSAN {self.kind} static={self.static_type} dynamic={self.dynamic_type} "
                f"offset={self.offset} site={self.site}")


class AbortExecution(Exception):
    def __init__(self, error: SanError):
        super().__init__(error.log_line())
        self.error = error


@dataclass(frozen=True)
class Mode:
    """``log`` (default), ``count``, or ``abort`` after ``n`` distinct buckets."""

    kind: str = "log"
    n: int = 0

    @classmethod
    def parse(cls, text: str) -> "Mode":
        text = text.strip()
        if text in ("log", "count"):
            return cls(text)
        if text.startswith("abort="):
            n = int(text.split("=", 1)[1])
            if n < 1:
                raise ValueError("abort=N needs N >= 1")
            return cls("abort", n)
        raise ValueError(f"unknown reporter mode {text!r}")

    def __str__(self):
        return f"abort={self.n}" if self.kind == "abort" else self.kind


LOG_ALL = Mode("log")
COUNT_ONLY = Mode("count")


@dataclass
class Bucket:
    count: int
    first_site: str


@dataclass
class Reporter:
    mode: Mode = LOG_ALL
    buckets: dict = field(default_factory=dict)
    log: list = field(default_factory=list)
    counters: Counter = field(default_factory=Counter)

    def __post_init__(self):
        self._lock = threading.Lock()

    def tick(self, name: str, n: int = 1) -> None:
        with self._lock:
            self.counters[name] += n

    def report(self, err: SanError) -> None:
        with self._lock:
            key = err.bucket
            b = self.buckets.get(key)
            fresh = b is None
            if fresh:
                self.buckets[key] = Bucket(1, err.site)
            else:
                b.count += 1
            if self.mode.kind != "count":
                self.log.append(err.log_line())
            if self.mode.kind == "abort" and fresh and len(self.buckets) >= self.mode.n:
                raise AbortExecution(err)

    @property
    def total_errors(self) -> int:
        return sum(b.count for b in self.buckets.values())


TypeLike = Union[TypeDesc, TypeMeta]


def _as_type(s: TypeLike) -> TypeDesc:
    return s.type if isinstance(s, TypeMeta) else s


class Runtime:
    """Runtime half of the sanitizer, bound to one address space."""

    def __init__(
        self,
        space: AddressSpace,
        universe: TypeUniverse,
        reporter: Optional[Reporter] = None,
        meta_size: int = META_SIZE,
    ):
        if meta_size < 16:
            raise ValueError("META needs two 8-byte words")
        self.space = space
        self.universe = universe
        self.reporter = reporter or Reporter()
        self.meta_size = meta_size

    # META ------------------------------------------------------------------
    def read_meta(self, base: int) -> tuple:
        return (self.space.mem_load(base, 8), self.space.mem_load(base + 8, 8))

    def _write_meta(self, base: int, type_id: int, size: int) -> None:
        self.space.mem_store(base, 8, type_id)
        self.space.mem_store(base + 8, 8, size)

    def meta_of(self, addr: int) -> Optional[tuple]:
        """``(TypeMeta or None, size, object base)`` for a managed address."""
        base = self.space.lf_base(addr)
        if base is None:
            return None
        type_id, size = self.read_meta(base)
        return (self.universe.meta_by_id(type_id), size, base + self.meta_size)

    @staticmethod
    def _dyn_name(meta: Optional[TypeMeta]) -> str:
        return meta.name if meta is not None else "<unallocated>"

    # allocation ------------------------------------------------------------
    def type_malloc(self, size: int, t: TypeLike) -> int:
        if size <= 0:
            raise HeapError("allocation size must be positive")
        meta = t if isinstance(t, TypeMeta) else self.universe.meta(t)
        base = self.space.lf_alloc(self.meta_size + size)
        self._write_meta(base, meta.id, size)
        return base + self.meta_size

    def stack_malloc(self, frame, size: int, t: TypeLike) -> int:
        meta = t if isinstance(t, TypeMeta) else self.universe.meta(t)
        base = self.space.stack_alloc(frame, self.meta_size + size)
        self._write_meta(base, meta.id, size)
        return base + self.meta_size

    def release_frame(self, frame) -> None:
        for base in self.space.frame_objects(frame):
            _, size = self.read_meta(base)
            self._write_meta(base, FREE_META_ID, size)
        self.space.stack_release(frame)

    def type_free(self, addr: int, site: str = "?") -> None:
        if addr == 0:
            return
        base = self.space.lf_base(addr)
        if base is None:
            legacy = self.space._legacy_live
            for cand in (addr - self.meta_size, addr):
                if cand in legacy:
                    del legacy[cand]
                    return
            self.reporter.report(SanError(ErrorKind.TYPE, "void", "<legacy>", 0, site))
            return
        type_id, size = self.read_meta(base)
        bptr = base + self.meta_size
        meta = self.universe.meta_by_id(type_id)
        if type_id == FREE_META_ID:
            self.reporter.report(SanError(ErrorKind.DOUBLE_FREE, "void", "FREE", addr - bptr, site))
            return
        if addr != bptr or meta is None or not self.space.is_live(base):
            self.reporter.report(
                SanError(ErrorKind.TYPE, "void", self._dyn_name(meta), addr - bptr, site))
            return
        self._write_meta(base, FREE_META_ID, size)
        self.space.lf_free(base)

    # checks ----------------------------------------------------------------
    def type_check(self, addr: int, s: TypeLike, site: str = "?") -> AbsBounds:
        st = _as_type(s)
        self.reporter.tick("type_checks")
        base = self.space.lf_base(addr)
        if base is None:
            self.reporter.tick("legacy_checks")
            return WIDE_BOUNDS
        type_id, size = self.read_meta(base)
        bptr = base + self.meta_size
        k = addr - bptr
        meta = self.universe.meta_by_id(type_id)
        rel = None
        if meta is not None and type_id != FREE_META_ID and k >= 0:
            rel = table_lookup(meta, st, k, size)
        if rel is None:
            kind = ErrorKind.USE_AFTER_FREE if type_id == FREE_META_ID else ErrorKind.TYPE
            self.reporter.report(SanError(kind, st.name, self._dyn_name(meta), k, site))
            return WIDE_BOUNDS
        lo = 0 if rel.lo is None else addr + rel.lo
        hi = UINTPTR_MAX if rel.hi is None else addr + rel.hi
        return bounds_narrow(AbsBounds(bptr, bptr + size), AbsBounds(lo, hi))

    def bounds_get(self, addr: int) -> AbsBounds:
        self.reporter.tick("bounds_gets")
        base = self.space.lf_base(addr)
        if base is None:
            return WIDE_BOUNDS
        type_id, size = self.read_meta(base)
        bptr = base + self.meta_size
        if type_id == FREE_META_ID or self.universe.meta_by_id(type_id) is None:
            return AbsBounds(bptr, bptr)
        return AbsBounds(bptr, bptr + size)

    def bounds_check(
        self,
        addr: int,
        width: int,
        b: AbsBounds,
        escape: bool = False,
        static: str = "?",
        site: str = "?",
    ) -> bool:
        self.reporter.tick("bounds_checks")
        ok = b.lo <= addr <= b.hi if escape else b.lo <= addr and addr + width <= b.hi
        if not ok:
            dyn, k = "<legacy>", addr
            info = self.meta_of(b.lo)
            if info is not None:
                meta, _, bptr = info
                dyn, k = self._dyn_name(meta), addr - bptr
            self.reporter.report(SanError(ErrorKind.BOUNDS, static, dyn, k, site))
        return ok


def bounds_narrow(b: AbsBounds, sub: AbsBounds) -> AbsBounds:
    lo, hi = max(b.lo, sub.lo), min(b.hi, sub.hi)
    if lo > hi:
        return AbsBounds(sub.lo, sub.lo)
    return AbsBounds(lo, hi)

"""Simulated low-fat address space.

Region ``i + 1`` serves the ``i``-th power-of-two size class; every slot is
aligned to its class size, so ``base`` and ``size`` of any interior address
are pure arithmetic.  Region 0 is left unmapped (null page).  Addresses from
``legacy_base`` upward belong to the unmanaged legacy region.
"""

from __future__ import annotations

import hashlib
import random
import struct
from dataclasses import dataclass
from typing import Optional

UINTPTR_MAX = 2**64 - 1
SIZE_MAX = UINTPTR_MAX
PAGE = 4096


class HeapError(Exception):
    """Misuse of the allocator (bad free, exhausted region)."""


class MemoryFault(Exception):
    """Access to unmapped memory."""

    def __init__(self, addr: int, width: int = 1):
        super().__init__(f"unmapped access at {addr:#x} (width {width})")
        self.addr = addr
        self.width = width


@dataclass(frozen=True)
class AbsBounds:
    lo: int
    hi: int

    def contains(self, lo: int, hi: int) -> bool:
        return self.lo <= lo and hi <= self.hi

    def __str__(self):
        return f"{self.lo:#x}..{self.hi:#x}"


WIDE_BOUNDS = AbsBounds(0, UINTPTR_MAX)


@dataclass
class SpaceConfig:
    region_size: int = 2**32
    min_class: int = 16
    max_class: int = 2**26
    legacy_base: Optional[int] = None
    seed: int = 0
    # random number of slots skipped at the start of each region
    max_start_skew: int = 16

    def classes(self) -> list:
        out = []
        c = self.min_class
        while c <= self.max_class:
            out.append(c)
            c *= 2
        return out


class _Region:
    __slots__ = ("size", "start", "end", "bump", "free")

    def __init__(self, size: int, start: int, end: int, skew: int):
        self.size = size
        self.start = start
        self.end = end
        self.bump = start + skew * size
        self.free: list = []


class AddressSpace:
    def __init__(self, config: Optional[SpaceConfig] = None):
        self.config = cfg = config or SpaceConfig()
        rs = cfg.region_size
        if rs & (rs - 1):
            raise ValueError("region_size must be a power of two")
        self.classes = cfg.classes()
        if not self.classes or self.classes[-1] > rs:
            raise ValueError("size classes must fit inside a region")
        rng = random.Random(cfg.seed)
        self._regions = []
        for i, c in enumerate(self.classes):
            start = (i + 1) * rs
            skew = rng.randrange(cfg.max_start_skew + 1) if cfg.max_start_skew else 0
            skew = min(skew, rs // c - 1)
            self._regions.append(_Region(c, start, start + rs, skew))
        self.managed_end = (len(self.classes) + 1) * rs
        self.legacy_base = cfg.legacy_base if cfg.legacy_base is not None else self.managed_end + rs
        if self.legacy_base < self.managed_end:
            raise ValueError("legacy region overlaps managed regions")
        self._legacy_bump = self.legacy_base
        self._legacy_live: dict = {}
        self._legacy_pages: set = set()
        self._pages: dict = {}
        self._live: dict = {}  # base -> class size
        self._frames: dict = {}  # frame -> [bases]

    # size classes ----------------------------------------------------------
    def _region_index(self, addr: int) -> int:
        return addr // self.config.region_size - 1

    def is_managed(self, addr: int) -> bool:
        return 0 <= self._region_index(addr) < len(self._regions)

    def class_for(self, size: int) -> Optional[int]:
        for c in self.classes:
            if c >= size:
                return c
        return None

    # allocation ------------------------------------------------------------
    def lf_alloc(self, size: int) -> int:
        if size <= 0:
            raise HeapError("allocation size must be positive")
        c = self.class_for(size)
        if c is None:
            return self.legacy_alloc(size)
        region = self._regions[self.classes.index(c)]
        if region.free:
            addr = region.free.pop()
        else:
            if region.bump + c > region.end:
                raise HeapError(f"size class {c} exhausted")
            addr = region.bump
            region.bump += c
        self._zero(addr, c)
        self._live[addr] = c
        return addr

    def lf_free(self, addr: int) -> None:
        c = self._live.pop(addr, None)
        if c is None:
            if self.is_managed(addr):
                raise HeapError(f"free of non-allocated address {addr:#x}")
            raise HeapError(f"free of legacy address {addr:#x}")
        # bytes are preserved until the slot is handed out again
        self._regions[self.classes.index(c)].free.append(addr)

    def legacy_alloc(self, size: int) -> int:
        addr = self._legacy_bump
        self._legacy_bump += -(-size // 16) * 16 + 16
        self._legacy_live[addr] = size
        first, last = addr // PAGE, (addr + size - 1) // PAGE
        self._legacy_pages.update(range(first, last + 1))
        self._zero(addr, size)
        return addr

    def stack_alloc(self, frame, size: int) -> int:
        addr = self.lf_alloc(size)
        self._frames.setdefault(frame, []).append(addr)
        return addr

    def frame_objects(self, frame) -> list:
        """Bases of the frame's live objects, most recent first."""
        if frame not in self._frames:
            raise HeapError(f"unknown frame {frame!r}")
        return list(reversed(self._frames[frame]))

    def stack_release(self, frame) -> list:
        bases = self.frame_objects(frame)
        for addr in bases:
            if addr in self._live:
                self.lf_free(addr)
            else:
                self._legacy_live.pop(addr, None)
        del self._frames[frame]
        return bases

    def has_frame(self, frame) -> bool:
        return frame in self._frames

    # low-fat operations ----------------------------------------------------
    def lf_size(self, addr: int) -> int:
        i = self._region_index(addr)
        if 0 <= i < len(self._regions):
            return self.classes[i]
        return SIZE_MAX

    def lf_base(self, addr: int) -> Optional[int]:
        i = self._region_index(addr)
        if 0 <= i < len(self._regions):
            c = self.classes[i]
            return addr - addr % c
        return None

    def classify(self, addr: int) -> str:
        if not self.is_managed(addr):
            return "legacy"
        return "managed-live" if self.lf_base(addr) in self._live else "managed-free"

    def is_live(self, base: int) -> bool:
        return base in self._live

    @property
    def live_count(self) -> int:
        return len(self._live)

    # backing store ---------------------------------------------------------
    def _mapped(self, addr: int, width: int) -> bool:
        if self.is_managed(addr) and self.is_managed(addr + width - 1):
            return True
        if addr >= self.legacy_base:
            return all(p in self._legacy_pages
                       for p in range(addr // PAGE, (addr + width - 1) // PAGE + 1))
        return False

    def _zero(self, addr: int, n: int) -> None:
        end = addr + n
        p = addr // PAGE
        while p * PAGE < end:
            lo = max(addr, p * PAGE)
            hi = min(end, (p + 1) * PAGE)
            if lo == p * PAGE and hi == (p + 1) * PAGE:
                self._pages.pop(p, None)
            elif p in self._pages:
                page = self._pages[p]
                page[lo - p * PAGE:hi - p * PAGE] = bytes(hi - lo)
            p += 1

    def read(self, addr: int, n: int) -> bytes:
        if n <= 0:
            return b""
        if not self._mapped(addr, n):
            raise MemoryFault(addr, n)
        out = bytearray()
        end = addr + n
        while addr < end:
            p, off = divmod(addr, PAGE)
            take = min(end - addr, PAGE - off)
            page = self._pages.get(p)
            out += page[off:off + take] if page is not None else bytes(take)
            addr += take
        return bytes(out)

    def write(self, addr: int, data: bytes) -> None:
        if not data:
            return
        if not self._mapped(addr, len(data)):
            raise MemoryFault(addr, len(data))
        i = 0
        while i < len(data):
            p, off = divmod(addr + i, PAGE)
            take = min(len(data) - i, PAGE - off)
            page = self._pages.get(p)
            if page is None:
                page = self._pages[p] = bytearray(PAGE)
            page[off:off + take] = data[i:i + take]
            i += take

    def mem_load(self, addr: int, width: int, signed: bool = False) -> int:
        if width not in (1, 2, 4, 8):
            raise ValueError(f"bad access width {width}")
        return int.from_bytes(self.read(addr, width), "little", signed=signed)

    def mem_store(self, addr: int, width: int, value: int) -> None:
        if width not in (1, 2, 4, 8):
            raise ValueError(f"bad access width {width}")
        value &= (1 << (8 * width)) - 1
        self.write(addr, value.to_bytes(width, "little"))

    def load_float(self, addr: int, width: int) -> float:
        fmt = "<f" if width == 4 else "<d"
        return struct.unpack(fmt, self.read(addr, width))[0]

    def store_float(self, addr: int, width: int, value: float) -> None:
        fmt = "<f" if width == 4 else "<d"
        self.write(addr, struct.pack(fmt, value))

    def digest(self) -> str:
        """Hash of every non-zero page, for comparing two executions."""
        h = hashlib.sha256()
        for p in sorted(self._pages):
            page = self._pages[p]
            if any(page):
                h.update(p.to_bytes(8, "little"))
                h.update(page)
        return h.hexdigest()

"""Effective-type sanitizer: layouts, low-fat allocation, runtime checks and an
instrumenting interpreter for a small C-like IR."""

from .config import Config, compile_source, run_file, run_source
from .layout import LayoutTable, RelBounds, SubObject, WIDE, build_layout_table, layout, table_lookup
from .lowfat import AddressSpace, SpaceConfig
from .runtime import ErrorKind, Mode, Reporter, Runtime, SanError
from .types import TypeUniverse

__all__ = [
    "AddressSpace",
    "Config",
    "ErrorKind",
    "LayoutTable",
    "Mode",
    "RelBounds",
    "Reporter",
    "Runtime",
    "SanError",
    "SpaceConfig",
    "SubObject",
    "TypeUniverse",
    "WIDE",
    "build_layout_table",
    "compile_source",
    "layout",
    "run_file",
    "run_source",
    "table_lookup",
]

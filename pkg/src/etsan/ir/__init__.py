from .instrument import instrument
from .interp import ExecReport, Interpreter, interpret
from .optimize import OptStats, optimize
from .parser import ParseError, parse_program, parse_type_expr, parse_types
from .printer import format_program

__all__ = [
    "ExecReport",
    "Interpreter",
    "OptStats",
    "ParseError",
    "format_program",
    "instrument",
    "interpret",
    "optimize",
    "parse_program",
    "parse_type_expr",
    "parse_types",
]

import pytest

from etsan.harness import type_file
from etsan.ir.parser import parse_type_expr, parse_types


@pytest.fixture(scope="session")
def nested():
    """Universe holding S (20 bytes) and T (24 bytes, S at offset 4)."""
    u = parse_types(type_file().read_text())
    return u, parse_type_expr("T", u), parse_type_expr("S", u)

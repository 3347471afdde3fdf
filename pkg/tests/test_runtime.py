import pytest

from etsan.layout import build_layout_table
from etsan.lowfat import UINTPTR_MAX, WIDE_BOUNDS, AbsBounds, AddressSpace, SpaceConfig
from etsan.runtime import (
    COUNT_ONLY,
    META_SIZE,
    AbortExecution,
    ErrorKind,
    Mode,
    Reporter,
    Runtime,
    bounds_narrow,
)
from etsan.types import Array, natural_layout


@pytest.fixture
def rt(nested):
    u, _, _ = nested
    return Runtime(AddressSpace(), u)


def kinds(rt):
    return [b[0] for b in rt.reporter.buckets]


def test_type_check_interior_int(rt, nested):
    _, T, _ = nested
    p = rt.type_malloc(T.size, T)
    i = rt.universe.prims["int"]
    assert rt.type_check(p + 12, i) == AbsBounds(p + 4, p + 16)
    assert rt.reporter.total_errors == 0


def test_type_check_wrong_type(rt, nested):
    _, T, _ = nested
    p = rt.type_malloc(T.size, T)
    b = rt.type_check(p + 12, rt.universe.prims["double"])
    assert b == WIDE_BOUNDS == AbsBounds(0, UINTPTR_MAX)
    assert list(rt.reporter.buckets) == [(ErrorKind.TYPE, "double", "T", 12)]


def test_whole_object_check_narrows_to_allocation(rt, nested):
    _, T, _ = nested
    p = rt.type_malloc(3 * T.size, T)
    assert rt.type_check(p, T) == AbsBounds(p, p + 72)
    assert rt.type_check(p + 24, T) == AbsBounds(p, p + 72)


def test_legacy_check_passes(rt):
    a = rt.space.legacy_alloc(64)
    assert rt.type_check(a, rt.universe.prims["int"]) == WIDE_BOUNDS
    assert rt.reporter.counters["legacy_checks"] == 1
    assert rt.reporter.total_errors == 0


def test_use_after_free(rt, nested):
    _, T, _ = nested
    p = rt.type_malloc(T.size, T)
    rt.type_free(p)
    rt.type_check(p + 4, rt.universe.prims["int"])
    assert list(rt.reporter.buckets) == [(ErrorKind.USE_AFTER_FREE, "int", "FREE", 4)]


def test_double_free(rt, nested):
    _, T, _ = nested
    p = rt.type_malloc(T.size, T)
    rt.type_free(p)
    rt.type_free(p)
    assert kinds(rt) == [ErrorKind.DOUBLE_FREE]


def test_free_of_interior_pointer(rt, nested):
    _, T, _ = nested
    p = rt.type_malloc(T.size, T)
    rt.type_free(p + 4)
    assert list(rt.reporter.buckets) == [(ErrorKind.TYPE, "void", "T", 4)]
    assert rt.space.is_live(rt.space.lf_base(p))


def test_free_null_is_noop(rt):
    rt.type_free(0)
    assert rt.reporter.total_errors == 0


def test_reuse_at_other_type_is_type_error(rt, nested):
    _, T, S = nested
    p = rt.type_malloc(T.size, T)
    rt.type_free(p)
    q = rt.type_malloc(S.size, S)
    assert q == p
    rt.type_check(p, rt.universe.prims["float"])
    assert list(rt.reporter.buckets) == [(ErrorKind.TYPE, "float", "S", 0)]


def test_bounds_get(rt, nested):
    _, T, _ = nested
    p = rt.type_malloc(T.size, T)
    assert rt.bounds_get(p + 5) == AbsBounds(p, p + 24)
    rt.type_free(p)
    assert rt.bounds_get(p) == AbsBounds(p, p)


def test_bounds_check_reports_dynamic_type(rt, nested):
    _, T, _ = nested
    p = rt.type_malloc(T.size, T)
    b = rt.type_check(p + 4, rt.universe.prims["int"])
    assert rt.bounds_check(p + 8, 4, b)
    assert not rt.bounds_check(p + 16, 4, b, static="int")
    assert list(rt.reporter.buckets) == [(ErrorKind.BOUNDS, "int", "T", 16)]


def test_escape_check_allows_one_past_end(rt, nested):
    _, T, _ = nested
    p = rt.type_malloc(T.size, T)
    b = AbsBounds(p, p + 24)
    assert rt.bounds_check(p + 24, 0, b, escape=True)
    assert not rt.bounds_check(p + 25, 0, b, escape=True)


def test_bounds_narrow():
    assert bounds_narrow(AbsBounds(0, 100), AbsBounds(10, 20)) == AbsBounds(10, 20)
    assert bounds_narrow(AbsBounds(0, 15), AbsBounds(10, 20)) == AbsBounds(10, 15)
    assert bounds_narrow(AbsBounds(0, 5), AbsBounds(10, 20)) == AbsBounds(10, 10)


def test_stack_objects_become_free(rt, nested):
    _, T, _ = nested
    p = rt.stack_malloc("f", T.size, T)
    rt.release_frame("f")
    rt.type_check(p, T)
    assert kinds(rt) == [ErrorKind.USE_AFTER_FREE]


def test_oversize_type_malloc_is_legacy(nested):
    u, _, _ = nested
    rt = Runtime(AddressSpace(SpaceConfig(max_class=1024)), u)
    arr = Array(u.prims["int"], 1000)
    p = rt.type_malloc(arr.size, arr)
    assert rt.type_check(p, u.prims["double"]) == WIDE_BOUNDS
    rt.type_free(p)
    assert rt.reporter.total_errors == 0


def test_meta_header_layout(rt, nested):
    u, T, _ = nested
    p = rt.type_malloc(T.size, T)
    base = rt.space.lf_base(p)
    assert p - base == META_SIZE
    assert rt.read_meta(base) == (u.meta(T).id, 24)


def test_errors_are_bucketed(rt, nested):
    _, T, _ = nested
    p = rt.type_malloc(T.size, T)
    for site in ("a", "b", "c"):
        rt.type_check(p + 12, rt.universe.prims["double"], site=site)
    (bucket,) = rt.reporter.buckets.values()
    assert bucket.count == 3 and bucket.first_site == "a"
    assert len(rt.reporter.log) == 3


def test_count_mode_does_not_log(nested):
    u, T, _ = nested
    rt = Runtime(AddressSpace(), u, Reporter(COUNT_ONLY))
    p = rt.type_malloc(T.size, T)
    rt.type_check(p + 12, u.prims["double"])
    assert rt.reporter.log == [] and rt.reporter.total_errors == 1


def test_abort_after_n_distinct_buckets(nested):
    u, T, _ = nested
    rt = Runtime(AddressSpace(), u, Reporter(Mode.parse("abort=2")))
    p = rt.type_malloc(T.size, T)
    rt.type_check(p + 12, u.prims["double"])
    rt.type_check(p + 12, u.prims["double"])
    with pytest.raises(AbortExecution):
        rt.type_check(p + 12, u.prims["long"])


def test_mode_parse_round_trip():
    for text in ("log", "count", "abort=3"):
        assert str(Mode.parse(text)) == text
    with pytest.raises(ValueError):
        Mode.parse("abort=0")
    with pytest.raises(ValueError):
        Mode.parse("loud")


def test_log_line_format(rt, nested):
    _, T, _ = nested
    p = rt.type_malloc(T.size, T)
    rt.type_check(p + 12, rt.universe.prims["double"], site="x.etir:3")
    assert rt.reporter.log == ["ETSAN TypeError static=double dynamic=T offset=12 site=x.etir:3"]


def test_fam_allocation_bounds(nested):
    u, _, _ = nested
    i = u.prims["int"]
    vec = u.declare(natural_layout("struct", "fv", [("n", i, None), ("d", Array(i, 1, fam=True), None)]))
    rt = Runtime(AddressSpace(), u)
    p = rt.type_malloc(4 + 8 * 4, vec)
    b = rt.type_check(p + 4 + 5 * 4, i)
    assert b == AbsBounds(p + 4, p + 36)
    assert build_layout_table(vec).fam_offset == 4

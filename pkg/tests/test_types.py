import pytest

from etsan.types import (
    FREE,
    FREE_META_ID,
    Array,
    Pointer,
    Record,
    TypeDeclError,
    TypeUniverse,
    base_chain,
    natural_layout,
    offset_of,
)


def test_natural_layout_aligns_members():
    u = TypeUniverse()
    rec = natural_layout("struct", "r", [("c", u.prims["char"], None), ("d", u.prims["double"], None)])
    assert [f.offset for f in rec.fields] == [0, 8]
    assert rec.size == 16 and rec.align == 8


def test_union_members_share_offset_zero():
    u = TypeUniverse()
    rec = natural_layout("union", "n", [("i", u.prims["int"], None), ("d", u.prims["double"], None)])
    assert rec.size == 8
    assert offset_of(rec, "d") == 0


def test_explicit_offsets_and_size(nested):
    _, T, S = nested
    assert S.size == 20 and T.size == 24
    assert offset_of(T, "t") == 4
    assert S.field("s").offset == 12


def test_overlapping_members_rejected():
    u = TypeUniverse()
    i = u.prims["int"]
    with pytest.raises(TypeDeclError):
        natural_layout("struct", "bad", [("a", i, 0), ("b", i, 2)])


def test_member_outside_record_rejected():
    u = TypeUniverse()
    with pytest.raises(TypeDeclError):
        natural_layout("struct", "bad", [("a", u.prims["long"], None)], size=4)


def test_fam_must_be_last():
    u = TypeUniverse()
    fam = Array(u.prims["int"], 1, fam=True)
    with pytest.raises(TypeDeclError):
        natural_layout("struct", "bad", [("data", fam, None), ("n", u.prims["int"], None)])


def test_zero_length_array_rejected():
    with pytest.raises(TypeDeclError):
        Array(TypeUniverse().prims["int"], 0)


def test_type_equality_is_structural_for_scalars():
    u = TypeUniverse()
    assert Pointer(u.prims["int"]) == Pointer(u.prims["int"])
    assert Array(u.prims["int"], 3) != Array(u.prims["int"], 4)
    assert Pointer(u.prims["void"]).is_generic


def test_base_chain_follows_leading_bases():
    u = TypeUniverse()
    a = u.declare(natural_layout("class", "A", [("x", u.prims["int"], None)]))
    b = u.declare(natural_layout("class", "B", [("y", u.prims["int"], None)], bases=[a]))
    c = u.declare(natural_layout("class", "C", [], bases=[b]))
    assert [r.tag for r in base_chain(c, u)] == ["B", "A"]


def test_meta_ids_are_stable_and_distinct(nested):
    u, T, S = nested
    mt, ms = u.meta(T), u.meta(S)
    assert u.meta(T) is mt
    assert mt.id != ms.id and FREE_META_ID not in (mt.id, ms.id)
    assert u.meta_by_id(mt.id) is mt
    assert u.meta_by_id(FREE_META_ID).type is FREE


def test_record_key_by_tag():
    u = TypeUniverse()
    r1 = natural_layout("struct", "p", [("a", u.prims["int"], None)])
    r2 = natural_layout("struct", "p", [("a", u.prims["int"], None)])
    assert isinstance(r1, Record) and r1 == r2

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etsan.lowfat import SIZE_MAX, AddressSpace, HeapError, MemoryFault, SpaceConfig


def test_classes_are_powers_of_two():
    cls = SpaceConfig().classes()
    assert cls[0] == 16 and cls[-1] == 2**26
    assert all(b == 2 * a for a, b in zip(cls, cls[1:]))


def test_allocation_is_size_aligned():
    sp = AddressSpace()
    for n in (1, 16, 17, 100, 4096, 5000):
        a = sp.lf_alloc(n)
        c = sp.class_for(n)
        assert a % c == 0
        assert sp.lf_size(a) == c and sp.lf_base(a + n - 1) == a


def test_free_list_is_lifo_and_zeroes():
    sp = AddressSpace()
    a = sp.lf_alloc(32)
    b = sp.lf_alloc(32)
    sp.mem_store(b, 8, 0xDEAD)
    sp.lf_free(a)
    sp.lf_free(b)
    assert sp.mem_load(b, 8) == 0xDEAD  # freed bytes linger
    assert sp.lf_alloc(32) == b
    assert sp.mem_load(b, 8) == 0
    assert sp.lf_alloc(32) == a


def test_bad_free_raises():
    sp = AddressSpace()
    a = sp.lf_alloc(64)
    with pytest.raises(HeapError):
        sp.lf_free(a + 8)
    sp.lf_free(a)
    with pytest.raises(HeapError):
        sp.lf_free(a)


def test_oversize_falls_back_to_legacy():
    sp = AddressSpace(SpaceConfig(max_class=1024))
    a = sp.lf_alloc(4096)
    assert not sp.is_managed(a)
    assert sp.lf_base(a) is None and sp.lf_size(a) == SIZE_MAX
    sp.mem_store(a + 4000, 4, 7)
    assert sp.mem_load(a + 4000, 4) == 7


def test_unmapped_access_faults():
    sp = AddressSpace()
    with pytest.raises(MemoryFault):
        sp.mem_load(8, 4)
    with pytest.raises(MemoryFault):
        sp.mem_load(sp.legacy_base + 10**6, 4)


def test_classify():
    sp = AddressSpace()
    a = sp.lf_alloc(16)
    assert sp.classify(a + 3) == "managed-live"
    sp.lf_free(a)
    assert sp.classify(a) == "managed-free"
    assert sp.classify(sp.legacy_alloc(8)) == "legacy"


def test_stack_frames_release_objects():
    sp = AddressSpace()
    a = sp.stack_alloc("f", 24)
    b = sp.stack_alloc("f", 40)
    assert sp.frame_objects("f") == [b, a]
    sp.stack_release("f")
    assert not sp.is_live(a) and not sp.is_live(b)
    assert not sp.has_frame("f")


def test_same_seed_same_addresses():
    def trace(seed):
        sp = AddressSpace(SpaceConfig(seed=seed))
        return [sp.lf_alloc(n) for n in (8, 100, 3000, 20)]

    assert trace(5) == trace(5)


def test_region_size_must_be_power_of_two():
    with pytest.raises(ValueError):
        AddressSpace(SpaceConfig(region_size=3 * 2**20))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 70000), st.integers(0, 2**31), st.booleans()),
                min_size=1, max_size=60), st.integers(0, 100))
def test_base_and_size_recovered_from_interior(ops, seed):
    sp = AddressSpace(SpaceConfig(seed=seed))
    live = []
    for size, off, free_one in ops:
        a = sp.lf_alloc(size)
        live.append((a, size))
        inner = a + off % size
        assert sp.lf_base(inner) == a
        assert sp.lf_size(inner) == sp.class_for(size)
        if free_one and live:
            b, _ = live.pop(0)
            sp.lf_free(b)
    assert sp.live_count == len(live)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 2**20), min_size=1, max_size=20))
def test_legacy_addresses_have_no_bounds(sizes):
    sp = AddressSpace()
    for n in sizes:
        a = sp.legacy_alloc(n)
        for p in (a, a + n - 1):
            assert sp.lf_base(p) is None and sp.lf_size(p) == SIZE_MAX


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 512), min_size=2, max_size=30))
def test_live_objects_never_overlap(sizes):
    sp = AddressSpace()
    spans = sorted((a, a + sp.class_for(n)) for n in sizes for a in [sp.lf_alloc(n)])
    assert all(e1 <= s2 for (_, e1), (s2, _) in zip(spans, spans[1:]))

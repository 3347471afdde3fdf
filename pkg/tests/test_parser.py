import pytest

from etsan.ir.instrs import AllocHeap, Cast, FieldAddr, IndexAddr, Load, Store, walk
from etsan.ir.parser import ParseError, parse_program, parse_type_expr, parse_types
from etsan.types import Array, Pointer, Record


@pytest.mark.parametrize(
    "src, fragment",
    [
        ("fn main() -> int { return x; }", "unknown name 'x'"),
        ("fn main() -> int { let p: *foo = null; return 0; }", "unknown type 'foo'"),
        ("fn f(a: int) -> int { return a; } fn main() -> int { return f(1, 2); }", "takes 1 argument"),
        ("struct p { int a; }; fn main() -> int { let q: *p = new p; let r: int = *q; return 0; }",
         "value used"),
        ("fn main() -> int { return 0;", "unterminated"),
        ("struct p { int a; int a; };", "duplicate member"),
        ("fn main() -> int { return 0 $ 1; }", "unexpected character"),
        ("fn main() -> int { return g(); }", "unknown function 'g'"),
    ],
)
def test_parse_errors(src, fragment):
    with pytest.raises(ParseError) as err:
        parse_program(src, "t.etir")
    assert fragment in str(err.value)
    assert str(err.value).startswith("t.etir:1:")


def test_error_position_is_reported():
    with pytest.raises(ParseError) as err:
        parse_program("fn main() -> int {\n  let a: int = 1;\n  return b;\n}\n")
    assert (err.value.line, err.value.col) == (3, 10)


def test_records_and_typedefs():
    u = parse_types("""
        struct node { int val; node *next; };
        typedef node *list;
        union num { int i; double d; };
        enum color { RED, GREEN = 5, BLUE };
    """)
    node = u.lookup("node")
    assert isinstance(node, Record) and node.size == 16
    assert node.field("next").type.name == "node *"
    assert parse_type_expr("list", u).name == "node *"
    assert u.lookup("num").size == 8
    assert parse_type_expr("int[2][3]", u) == Array(Array(u.prims["int"], 3), 2)


def test_class_inheritance_places_base_first():
    u = parse_types("class A { int x; }; class B : A { double y; };")
    b = u.lookup("B")
    assert b.fields[0].is_base and b.fields[0].offset == 0
    assert b.field("y").offset == 8


def test_member_access_through_base():
    prog = parse_program("""
        class A { int x; };
        class B : A { int y; };
        fn main() -> int { let b: *B = new B; return b->x; }
    """)
    addrs = [i for i in walk(prog.functions["main"].body) if isinstance(i, FieldAddr)]
    assert [a.field_name for a in addrs] == ["A", "x"]


def test_pointer_arithmetic_lowers_to_index():
    prog = parse_program("fn f(p: *long, i: int) -> long { return *(p + i); }")
    body = list(walk(prog.functions["f"].body))
    idx = [i for i in body if isinstance(i, IndexAddr)]
    assert idx and idx[0].scale == 8
    assert any(isinstance(i, Load) and i.type.name == "long" for i in body)


def test_casts_are_explicit_or_implicit():
    prog = parse_program("""
        struct a { int x; };
        fn main() -> int {
          let v: *void = malloc(8);
          let p: *a = v;
          let q: *a = cast<*a>(v);
          return 0;
        }
    """)
    casts = [i for i in walk(prog.functions["main"].body) if isinstance(i, Cast)]
    assert [c.explicit for c in casts] == [False, True]


def test_allocation_forms():
    prog = parse_program("""
        struct a { int x; };
        fn main() -> int {
          let p: *a = new a[4];
          let q: *char = legacy_malloc(10);
          let r: *a = malloc<a>(sizeof(a));
          return 0;
        }
    """)
    allocs = [i for i in walk(prog.functions["main"].body) if isinstance(i, AllocHeap)]
    assert [(a.kind, a.type.name if a.type else None) for a in allocs] == [
        ("new", "a"), ("legacy", None), ("malloc", "a")]


def test_store_through_array_field():
    prog = parse_program("""
        struct m { int v[4]; };
        fn main() -> int { let p: *m = new m; p->v[2] = 7; return p->v[2]; }
    """)
    stores = [i for i in walk(prog.functions["main"].body) if isinstance(i, Store)]
    assert len(stores) == 1 and stores[0].type.name == "int"


def test_forward_calls_resolve():
    prog = parse_program("fn main() -> int { return g(); } fn g() -> int { return 3; }")
    assert set(prog.functions) == {"main", "g"}


def test_comments_are_ignored():
    prog = parse_program("/* x */ fn main() -> int { // y\n # z\n return 1; }")
    assert "main" in prog.functions


def test_pointer_syntax_variants_agree():
    u = parse_types("struct n { int a; };")
    assert parse_type_expr("*n", u) == parse_type_expr("n*", u) == Pointer(u.lookup("n"))

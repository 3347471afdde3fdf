from etsan.config import Config, compile_source, run_source
from etsan.harness import load_corpus
from etsan.ir.infer import infer_malloc_type
from etsan.ir.instrs import BoundsNarrow, CheckBounds, CheckType, walk
from etsan.ir.instrument import instrument
from etsan.ir.optimize import optimize
from etsan.ir.parser import parse_program
from programs import REDUNDANT


def prepared(src):
    return instrument(infer_malloc_type(parse_program(src, "t.etir")))


def count(prog, kind):
    return sum(1 for fn in prog.functions.values() for i in walk(fn.body) if isinstance(i, kind))


def test_duplicate_access_check_removed():
    prog = prepared(REDUNDANT)
    _, stats = optimize(prog, casts=False, narrow=False)
    assert stats.bounds_checks_removed >= 1
    assert stats.type_checks_removed == stats.narrows_removed == 0


def test_upcast_check_becomes_narrow():
    prog = prepared(REDUNDANT)
    out, stats = optimize(prog, bounds=False, narrow=False)
    assert stats.type_checks_removed == 1
    assert count(out, CheckType) == count(prog, CheckType) - 1


def test_whole_member_narrow_removed():
    prog = prepared(REDUNDANT)
    out, stats = optimize(prog, casts=False, bounds=False)
    assert stats.narrows_removed >= 1
    assert count(out, BoundsNarrow) < count(prog, BoundsNarrow)


def test_all_rewrites_together():
    out, stats = optimize(prepared(REDUNDANT))
    assert stats.total() >= 3
    assert count(out, CheckBounds) < count(prepared(REDUNDANT), CheckBounds)


def test_optimized_program_behaves_the_same():
    a = run_source(REDUNDANT, "t.etir", Config())
    b = run_source(REDUNDANT, "t.etir", Config().without_opt())
    assert a.return_value == b.return_value == 44
    assert a.bucket_keys == b.bucket_keys == set()
    assert a.counters["bounds_checks"] < b.counters["bounds_checks"]


def test_disabled_rewrites_remove_nothing():
    _, stats = optimize(prepared(REDUNDANT), casts=False, bounds=False, narrow=False)
    assert stats.total() == 0


def test_checks_inside_branches_do_not_leak():
    src = """
        fn f(p: *int, c: int) -> int {
          let s: int = 0;
          if (c) { s = p[0]; }
          return s + p[0];
        }
        fn main() -> int { let p: *int = new int[2]; return f(p, 0); }
    """
    out, stats = optimize(prepared(src))
    assert stats.bounds_checks_removed == 0


def test_corpus_buckets_unchanged_by_optimization():
    for prog in load_corpus():
        for variant in ("full", "bounds", "type"):
            cfg = Config(variant=variant)
            a = run_source(prog.path.read_text(), prog.name, cfg)
            b = run_source(prog.path.read_text(), prog.name, cfg.without_opt())
            assert a.bucket_keys == b.bucket_keys, (prog.name, variant)


def test_large_allocations_keep_their_narrows():
    cfg = Config()
    small = compile_source(REDUNDANT, "t.etir", cfg).stats.narrows_removed
    cfg.space.max_class = 16
    assert compile_source(REDUNDANT, "t.etir", cfg).stats.narrows_removed < small

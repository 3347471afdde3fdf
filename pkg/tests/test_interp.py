import pytest

from etsan.config import Config, run_source
from etsan.runtime import Mode
from etsan.ir.interp import REPORT_SCHEMA, ExecReport
from programs import list_and_array


def run(src, **kw):
    return run_source(src, "t.etir", Config(**kw))


def test_integer_semantics():
    r = run("""
        fn main() -> int {
          let a: int = -7;
          print(a / 2); print(a % 2);
          let b: int = 2147483647; b = b + 1; print(b);
          let c: char = 200; print(c);
          let f: float = 0.1; print(f);
          let d: double = 0.1; print(d);
          return 0;
        }
    """)
    assert r.output == ["-3", "-1", "-2147483648", "-56", "0.10000000149011612", "0.1"]


def test_short_circuit():
    r = run("""
        fn main() -> int {
          let p: *int = null;
          if (p != null && *p > 0) { return 1; }
          if (p == null || *p > 0) { return 2; }
          return 3;
        }
    """)
    assert r.return_value == 2 and r.halted_by == "Completed"


def test_null_dereference_faults():
    r = run("fn main() -> int { let p: *int = null; return *p; }", variant="none")
    assert r.halted_by == "Fault" and r.exit_code == 2
    assert "MemoryFault" in r.fault


def test_division_by_zero_faults():
    r = run("fn main() -> int { let z: int = 0; return 1 / z; }")
    assert r.halted_by == "Fault"


def test_step_limit_stops_empty_loop():
    r = run("fn main() -> int { while (1) { } return 0; }", step_limit=500)
    assert r.halted_by == "Fault" and "step limit" in r.fault


def test_recursion_depth_limit():
    r = run("fn f(n: int) -> int { return f(n + 1); } fn main() -> int { return f(0); }", max_depth=50)
    assert r.halted_by == "Fault" and "depth" in r.fault


def test_missing_entry_point():
    with pytest.raises(ValueError):
        run("fn f() -> int { return 1; }")


def test_abort_stops_at_first_bucket():
    src = """
        fn main() -> int {
          let a: *int = new int[2];
          let x: int = a[2];
          let y: int = a[3];
          return 0;
        }
    """
    r = run(src, mode=Mode.parse("abort=1"))
    assert r.halted_by == "AbortAfterN" and r.exit_code == 1
    assert len(r.buckets) == 1 and r.return_value is None


def test_per_function_counters():
    r = run(list_and_array(3))
    fc = r.function_counters
    assert fc["sum"]["type_checks"] == 1
    assert fc["length"]["type_checks"] == 4
    assert sum(c.get("type_checks", 0) for c in fc.values()) == r.counters["type_checks"]


def test_report_json_round_trip():
    r = run(list_and_array(3))
    text = r.to_json()
    assert text.endswith("\n")
    again = ExecReport.from_json(text)
    assert again.to_json() == text
    assert again.to_dict()["schema"] == REPORT_SCHEMA


def test_report_rejects_other_schema():
    text = run(list_and_array(0)).to_json().replace('"schema": 1', '"schema": 99')
    with pytest.raises(ValueError):
        ExecReport.from_json(text)


def test_stack_objects_die_with_their_frame():
    r = run("""
        fn leak() -> *int { let a: *int = stack int[4]; return a; }
        fn main() -> int { let p: *int = leak(); return *p; }
    """)
    assert {b["kind"] for b in r.buckets} == {"UseAfterFree"}


def test_memcpy_copies_bytes():
    r = run("""
        fn main() -> int {
          let a: *long = new long[2];
          let b: *long = new long[2];
          a[1] = 99;
          memcpy(b, a, 16);
          return cast<int>(b[1]);
        }
    """)
    assert r.return_value == 99 and not r.buckets

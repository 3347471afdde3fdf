import json

from etsan.cli import main
from etsan.harness import corpus_dir, type_file
from etsan.ir.interp import ExecReport

BUGS = corpus_dir() / "bugs"
CLEAN = corpus_dir() / "clean"


def test_run_logs_error_and_exits_zero(capsys):
    assert main(["run", str(BUGS / "account_overflow.etir")]) == 0
    out = capsys.readouterr().out
    assert "ETSAN BoundsError static=int dynamic=account offset=32" in out
    assert "buckets=1" in out


def test_run_abort_exits_one(capsys):
    assert main(["run", str(BUGS / "account_overflow.etir"), "--mode=abort=1"]) == 1


def test_run_clean_program(capsys):
    assert main(["run", str(CLEAN / "quicksort.etir")]) == 0
    assert "buckets=0" in capsys.readouterr().out


def test_run_writes_json(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["run", str(BUGS / "double_free.etir"), "--json", str(out), "--seed", "3"]) == 0
    report = ExecReport.from_json(out.read_text())
    assert report.meta["seed"] == 3
    assert report.bucket_keys == {("DoubleFree", "void", "FREE", 0)}


def test_run_parse_error_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.etir"
    bad.write_text("fn main() -> int { return 1 +; }")
    assert main(["run", str(bad)]) == 1
    assert "bad.etir:1:" in capsys.readouterr().err


def test_run_fault_exits_two(tmp_path, capsys):
    f = tmp_path / "null.etir"
    f.write_text("fn main() -> int { let p: *int = null; return *p; }")
    assert main(["run", str(f), "--variant", "none"]) == 2


def test_variant_flag(capsys):
    main(["run", str(BUGS / "account_overflow.etir"), "--variant=bounds"])
    assert "buckets=0" in capsys.readouterr().out


def test_layout_command(capsys):
    assert main(["layout", str(type_file()), "T", "4"]) == 0
    assert capsys.readouterr().out.strip() == "{<S, 0>, <int, 0>, <int[3], 0>, <float, 4>}"
    main(["layout", str(type_file()), "T", "100"])
    assert capsys.readouterr().out.strip() == "{}"


def test_table_command(capsys):
    assert main(["table", str(type_file()), "T"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert "(T, int, 12) -> -8..4" in lines
    assert "(T, T, 0) -> -inf..inf" in lines


def test_table_json(capsys):
    main(["table", str(type_file()), "T", "--json"])
    rows = json.loads(capsys.readouterr().out)
    assert {"type": "T", "sub": "S", "offset": 4, "lo": 0, "hi": 20} in rows


def test_unknown_type_is_an_error(capsys):
    assert main(["table", str(type_file()), "Nope"]) == 1


def test_stats_command(tmp_path, capsys):
    empty = tmp_path / "empty.etir"
    empty.write_text("fn main() -> int { return 0; }")
    assert main(["stats", str(empty), str(CLEAN / "tagged_union.etir")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["program", "#type", "#bounds", "#legacy", "#buckets", "halted"]
    assert lines[1].split() == ["empty.etir", "0", "0", "0", "0", "Completed"]


def test_stats_json_is_deterministic(capsys):
    files = [str(p) for p in sorted(CLEAN.glob("*.etir"))]
    main(["stats", "--json", *files])
    first = capsys.readouterr().out
    main(["stats", "--json", *files])
    assert capsys.readouterr().out == first


def test_instrument_command(capsys):
    assert main(["instrument", str(CLEAN / "sum_length.etir")]) == 0
    assert "a.b = type_check(a, int[])" in capsys.readouterr().out


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[run]\nmode = count\n")
    main(["run", str(BUGS / "account_overflow.etir"), "--config", str(cfg)])
    out = capsys.readouterr().out
    assert "ETSAN" not in out and "buckets=1" in out

"""``etsan`` command line: run, instrument, layout, table and stats."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import Config, compile_source, run_file
from .harness import format_stats, stats_row
from .ir.parser import ParseError, parse_type_expr, parse_types
from .ir.printer import format_program
from .layout import build_layout_table, layout
from .runtime import Mode
from .types import TypeDeclError


def _config(args) -> Config:
    cfg = Config.load(args.config) if getattr(args, "config", None) else Config()
    if getattr(args, "mode", None):
        cfg.mode = Mode.parse(args.mode)
    if getattr(args, "variant", None):
        cfg.variant = args.variant
    if getattr(args, "seed", None) is not None:
        cfg.space = replace(cfg.space, seed=args.seed)
    if getattr(args, "no_opt", False):
        cfg = cfg.without_opt()
    cfg.validate()
    return cfg


def _load_type(typefile: str, name: str):
    universe = parse_types(Path(typefile).read_text(), Path(typefile).name)
    return parse_type_expr(name, universe)


def cmd_run(args) -> int:
    report = run_file(args.file, _config(args))
    for line in report.log:
        print(line)
    if report.fault:
        print(f"fault: {report.fault}", file=sys.stderr)
    for b in report.buckets:
        print(f"bucket {b['kind']} static={b['static']} dynamic={b['dynamic']} "
              f"offset={b['offset']} count={b['count']} first={b['first_site']}")
    for line in report.output:
        print(f"out: {line}")
    print(f"halted_by={report.halted_by} return={report.return_value} "
          f"buckets={len(report.buckets)}")
    if args.json:
        Path(args.json).write_text(report.to_json())
    return report.exit_code


def cmd_instrument(args) -> int:
    path = Path(args.file)
    compiled = compile_source(path.read_text(), path.name, _config(args))
    sys.stdout.write(format_program(compiled.program))
    removed = compiled.stats.as_dict()
    if any(removed.values()):
        print("; removed " + ", ".join(f"{k}={v}" for k, v in removed.items()))
    return 0


def cmd_layout(args) -> int:
    t = _load_type(args.typefile, args.type)
    subs = sorted(layout(t, args.k), key=lambda s: (s.delta, s.type.name))
    print("{" + ", ".join(str(s) for s in subs) + "}")
    return 0


def cmd_table(args) -> int:
    t = _load_type(args.typefile, args.type)
    rows = build_layout_table(t).rows()
    if args.json:
        data = [{"type": t.name, "sub": s.name, "offset": k, "lo": b.lo, "hi": b.hi}
                for s, k, b in rows]
        print(json.dumps(data, indent=2))
    else:
        for s, k, b in rows:
            print(f"({t.name}, {s.name}, {k}) -> {b}")
    return 0


def cmd_stats(args) -> int:
    cfg = _config(args)
    rows = []
    for f in args.files:
        row, _ = stats_row(f, cfg)
        rows.append(row)
    if args.json:
        print(json.dumps([r.as_dict() for r in rows], indent=2, sort_keys=True))
    else:
        sys.stdout.write(format_stats(rows))
    return 0


def _run_options(p, variants=("full", "bounds", "type", "none")):
    p.add_argument("--mode", help="log | count | abort=N")
    p.add_argument("--variant", choices=variants)
    p.add_argument("--no-opt", action="store_true", help="disable check removal")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="configuration file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="etsan", description="Typed sanitizer for a small C-like IR.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="instrument and interpret a program")
    p.add_argument("file")
    _run_options(p)
    p.add_argument("--json", metavar="PATH", help="write the JSON report here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("instrument", help="print the instrumented program")
    p.add_argument("file")
    _run_options(p)
    p.set_defaults(func=cmd_instrument)

    p = sub.add_parser("layout", help="print the sub-objects of T at offset k")
    p.add_argument("typefile")
    p.add_argument("type")
    p.add_argument("k", type=int)
    p.set_defaults(func=cmd_layout)

    p = sub.add_parser("table", help="dump the layout table of T")
    p.add_argument("typefile")
    p.add_argument("type")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("stats", help="check counts per program")
    p.add_argument("files", nargs="+")
    _run_options(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TypeDeclError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Bundled example programs and the per-program statistics table."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .config import Config, run_file
from .ir.interp import ExecReport

_EXPECT = re.compile(r"^\s*//\s*expect:\s*(.+?)\s*$", re.M)
_CATEGORY = re.compile(r"^\s*//\s*category:\s*(\S+)", re.M)


@dataclass(frozen=True)
class CorpusProgram:
    path: Path
    group: str  # bugs | clean
    category: str
    expect: Optional[tuple]  # (kind, static, dynamic, offset), None when clean

    @property
    def name(self) -> str:
        return self.path.stem


def _parse_expect(text: str):
    m = _EXPECT.search(text)
    if m is None:
        raise ValueError("missing '// expect:' header")
    words = m.group(1).split()
    if words == ["clean"]:
        return None
    if len(words) != 4:
        raise ValueError(f"malformed expect header {m.group(1)!r}")
    kind, static, dynamic, offset = words
    return (kind, static, dynamic, int(offset))


def corpus_dir() -> Path:
    return Path(str(resources.files("etsan") / "corpus"))


def load_corpus(group: Optional[str] = None) -> list:
    """All bundled programs, optionally restricted to ``bugs`` or ``clean``."""
    out = []
    for g in ("bugs", "clean"):
        if group is not None and g != group:
            continue
        for path in sorted((corpus_dir() / g).glob("*.etir")):
            text = path.read_text()
            m = _CATEGORY.search(text)
            out.append(CorpusProgram(path, g, m.group(1) if m else g, _parse_expect(text)))
    return out


def type_file(name: str = "nested_T") -> Path:
    return corpus_dir() / "types" / f"{name}.etir"


@dataclass
class StatsRow:
    name: str
    type_checks: int
    bounds_checks: int
    legacy_checks: int
    buckets: int
    halted_by: str

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def stats_row(path, cfg: Optional[Config] = None) -> tuple:
    report: ExecReport = run_file(path, cfg)
    c = report.counters
    row = StatsRow(
        Path(path).name,
        c.get("type_checks", 0),
        c.get("bounds_checks", 0),
        c.get("legacy_checks", 0),
        len(report.buckets),
        report.halted_by,
    )
    return row, report


def format_stats(rows: list) -> str:
    head = ("program", "#type", "#bounds", "#legacy", "#buckets", "halted")
    body = [(r.name, str(r.type_checks), str(r.bounds_checks), str(r.legacy_checks),
             str(r.buckets), r.halted_by) for r in rows]
    widths = [max(len(x[i]) for x in [head] + body) for i in range(len(head))]
    lines = []
    for cells in [head] + body:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                               for i, (c, w) in enumerate(zip(cells, widths))).rstrip())
    return "\n".join(lines) + "\n"

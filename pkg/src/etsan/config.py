"""Run configuration and the parse -> instrument -> optimize -> run pipeline."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .ir.infer import infer_malloc_type
from .ir.instrument import VARIANTS, instrument
from .ir.interp import ExecReport, Interpreter
from .ir.optimize import OptStats, optimize
from .ir.parser import parse_program
from .lowfat import SpaceConfig
from .runtime import META_SIZE, Mode


@dataclass
class Config:
    space: SpaceConfig = field(default_factory=SpaceConfig)
    mode: Mode = field(default_factory=Mode)
    variant: str = "full"  # full | bounds | type | none
    opt_casts: bool = True
    opt_bounds: bool = True
    opt_narrow: bool = True
    meta_size: int = META_SIZE
    step_limit: int = 5_000_000
    max_depth: int = 256

    @property
    def optimizing(self) -> bool:
        return self.opt_casts or self.opt_bounds or self.opt_narrow

    def without_opt(self) -> "Config":
        return replace(self, opt_casts=False, opt_bounds=False, opt_narrow=False)

    # file format -----------------------------------------------------------
    @classmethod
    def from_text(cls, text: str) -> "Config":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        cfg = cls()
        sp = cfg.space
        if cp.has_section("space"):
            s = cp["space"]
            sp = SpaceConfig(
                region_size=s.getint("region_size", sp.region_size),
                min_class=s.getint("min_class", sp.min_class),
                max_class=s.getint("max_class", sp.max_class),
                legacy_base=s.getint("legacy_base") if s.get("legacy_base", "").strip() else None,
                seed=s.getint("seed", sp.seed),
                max_start_skew=s.getint("max_start_skew", sp.max_start_skew),
            )
        cfg.space = sp
        if cp.has_section("run"):
            r = cp["run"]
            cfg.mode = Mode.parse(r.get("mode", "log"))
            cfg.variant = r.get("variant", cfg.variant)
            cfg.meta_size = r.getint("meta_size", cfg.meta_size)
            cfg.step_limit = r.getint("step_limit", cfg.step_limit)
            cfg.max_depth = r.getint("max_depth", cfg.max_depth)
        if cp.has_section("opt"):
            o = cp["opt"]
            cfg.opt_casts = o.getboolean("casts", cfg.opt_casts)
            cfg.opt_bounds = o.getboolean("bounds", cfg.opt_bounds)
            cfg.opt_narrow = o.getboolean("narrow", cfg.opt_narrow)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "Config":
        return cls.from_text(Path(path).read_text())

    def to_text(self) -> str:
        sp = self.space
        cp = configparser.ConfigParser()
        cp["space"] = {
            "region_size": str(sp.region_size),
            "min_class": str(sp.min_class),
            "max_class": str(sp.max_class),
            "legacy_base": "" if sp.legacy_base is None else str(sp.legacy_base),
            "seed": str(sp.seed),
            "max_start_skew": str(sp.max_start_skew),
        }
        cp["run"] = {
            "mode": str(self.mode),
            "variant": self.variant,
            "meta_size": str(self.meta_size),
            "step_limit": str(self.step_limit),
            "max_depth": str(self.max_depth),
        }
        cp["opt"] = {
            "casts": str(self.opt_casts).lower(),
            "bounds": str(self.opt_bounds).lower(),
            "narrow": str(self.opt_narrow).lower(),
        }
        lines = []
        for section in cp.sections():
            lines.append(f"[{section}]")
            lines += [f"{k} = {v}" for k, v in cp[section].items()]
            lines.append("")
        return "\n".join(lines)

    def validate(self) -> None:
        if self.variant not in VARIANTS + ("none",):
            raise ValueError(f"unknown variant {self.variant!r}")


@dataclass
class Compiled:
    program: object
    stats: OptStats


def compile_source(text: str, source: str, cfg: Config) -> Compiled:
    """Parse, infer allocation types, instrument and optimize."""
    prog = infer_malloc_type(parse_program(text, source))
    stats = OptStats()
    if cfg.variant != "none":
        prog = instrument(prog, cfg.variant)
        if cfg.optimizing:
            prog, stats = optimize(prog, cfg.opt_casts, cfg.opt_bounds, cfg.opt_narrow,
                                   exact_limit=cfg.space.max_class - cfg.meta_size)
    return Compiled(prog, stats)


def run_source(text: str, source: str = "<input>", cfg: Optional[Config] = None) -> ExecReport:
    cfg = cfg or Config()
    compiled = compile_source(text, source, cfg)
    report = Interpreter(
        compiled.program,
        cfg.space,
        cfg.mode,
        step_limit=cfg.step_limit,
        max_depth=cfg.max_depth,
        meta_size=cfg.meta_size,
    ).run()
    report.meta.update(
        seed=cfg.space.seed,
        variant=cfg.variant,
        optimized=cfg.optimizing and cfg.variant != "none",
        removed=compiled.stats.as_dict(),
    )
    return report


def run_file(path, cfg: Optional[Config] = None) -> ExecReport:
    path = Path(path)
    return run_source(path.read_text(), path.name, cfg)

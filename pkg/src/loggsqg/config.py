"""Plain-text run configuration files.

The format is INI-style (read with :mod:`configparser`)::

    [grid]
    n = 64
    box = 6.283185307179586
    dealias = 0.6666666666666666

    [suite]
    beta = 1.0
    gamma = 0.75
    m = logpow(1.0)
    p_a = identity()
    ...

    [run]
    t_final = 1.0
    dt = auto

    [init]
    kind = random

    [output]
    dir = out

Unknown sections or keys, duplicate keys, malformed numbers and malformed
symbol expressions raise :class:`ParseError` carrying the line and column
of the offending value.  :meth:`ConfigFile.to_text` writes a canonical form
that parses back to an equal object.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ParseError
from .multipliers import MultiplierSuite
from .solver import RunConfig
from .spectral import GridSpec, SpectralField, named_field, random_field, read_snapshot
from .symbols import Identity, LogPower, Symbol, parse_symbol


@dataclass(frozen=True)
class GridSection:
    n: int = 64
    box: float = 2.0 * math.pi
    dealias: float = 2.0 / 3.0


@dataclass(frozen=True)
class SuiteSection:
    beta: float = 1.0
    gamma: float = 0.75
    m: Symbol = field(default_factory=lambda: LogPower(1.0))
    p_a: Symbol = field(default_factory=Identity)
    p_b: Symbol = field(default_factory=Identity)
    omega_a: Symbol = field(default_factory=Identity)
    omega_b: Symbol = field(default_factory=Identity)
    nu: Symbol | None = None


@dataclass(frozen=True)
class RunSection:
    t_final: float = 1.0
    dt: float | str = "auto"
    scheme: str = "IFRK4"
    eps_visc: float = 0.0
    lambda_track: float = 0.0
    seed: int = 0
    cadence: int = 1
    snapshot_cadence: int = 0


@dataclass(frozen=True)
class InitSection:
    kind: str = "random"
    name: str = "sinsin"
    path: str = ""
    slope: float = 3.0
    amplitude: float = 1.0


@dataclass(frozen=True)
class OutputSection:
    dir: str = "out"


_SECTIONS = {
    "grid": GridSection,
    "suite": SuiteSection,
    "run": RunSection,
    "init": InitSection,
    "output": OutputSection,
}
_SYMBOL_KEYS = {"m", "p_a", "p_b", "omega_a", "omega_b", "nu"}
_INT_KEYS = {"n", "seed", "cadence", "snapshot_cadence"}
_STR_KEYS = {"scheme", "kind", "name", "path", "dir"}
_CHOICES = {"scheme": ("IFRK4", "IFEuler"), "kind": ("random", "file", "named")}


@dataclass(frozen=True)
class ConfigFile:
    grid: GridSection = field(default_factory=GridSection)
    suite: SuiteSection = field(default_factory=SuiteSection)
    run: RunSection = field(default_factory=RunSection)
    init: InitSection = field(default_factory=InitSection)
    output: OutputSection = field(default_factory=OutputSection)

    # -- conversions -----------------------------------------------------

    def grid_spec(self) -> GridSpec:
        return GridSpec(self.grid.n, self.grid.box, self.grid.dealias)

    def multiplier_suite(self) -> MultiplierSuite:
        s = self.suite
        return MultiplierSuite(
            m=s.m, p_a=s.p_a, p_b=s.p_b, omega_a=s.omega_a, omega_b=s.omega_b, nu=s.nu, gamma=s.gamma, beta=s.beta
        )

    def run_config(self) -> RunConfig:
        r = self.run
        return RunConfig(
            self.grid_spec(),
            self.multiplier_suite(),
            T=r.t_final,
            dt=r.dt,
            scheme=r.scheme,
            eps_visc=r.eps_visc,
            lambda_track=r.lambda_track,
            cadence=r.cadence,
            snapshot_cadence=r.snapshot_cadence,
        )

    def initial_field(self, base_dir: str | Path | None = None) -> SpectralField:
        """Initial datum; ``file`` paths are resolved against ``base_dir``.

        Raises ``FileNotFoundError`` when the snapshot file is missing.
        """
        grid = self.grid_spec()
        i = self.init
        if i.kind == "random":
            return random_field(grid, self.run.seed, slope=i.slope, amplitude=i.amplitude)
        if i.kind == "named":
            return named_field(grid, i.name)
        path = Path(i.path)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        f = read_snapshot(path, grid.dealias_fraction)
        if f.grid.N != grid.N or f.grid.L_box != grid.L_box:
            raise ParseError(f"snapshot {path} has N={f.grid.N}, L={f.grid.L_box}, config says N={grid.N}, L={grid.L_box}")
        c = f.coeffs.copy()
        c[0, 0] = 0.0
        return f.with_coeffs(c, zero_mean=True)

    # -- text --------------------------------------------------------------

    def to_text(self) -> str:
        out = []
        for name in _SECTIONS:
            sec = getattr(self, name)
            out.append(f"[{name}]")
            for f in fields(sec):
                v = getattr(sec, f.name)
                if v is None:
                    continue
                out.append(f"{f.name} = {_fmt(v)}")
            out.append("")
        return "\n".join(out)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


_KEY_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*[=:]\s*")


def _locate(text: str, section: str, key: str) -> tuple[int | None, int]:
    """Line (1-based) and zero-based column of ``key``'s value in ``section``."""
    current = None
    for n, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip().lower()
            continue
        if current == section:
            m = _KEY_RE.match(raw)
            if m and m.group(1).lower() == key:
                return n, m.end()
    return None, 0


def _parse_value(key: str, raw: str, line: int | None, col: int):
    def bad(msg):
        raise ParseError(msg, line, col + 1)

    if key in _SYMBOL_KEYS:
        return parse_symbol(raw, line=line, column=col)
    if key in _STR_KEYS:
        if key in _CHOICES and raw not in _CHOICES[key]:
            bad(f"{key} must be one of {', '.join(_CHOICES[key])}, got {raw!r}")
        return raw
    if key == "dt" and raw == "auto":
        return "auto"
    if key in _INT_KEYS:
        if not re.fullmatch(r"[+-]?\d+", raw):
            bad(f"{key} expects an integer, got {raw!r}")
        return int(raw)
    try:
        v = float(raw)
    except ValueError:
        bad(f"{key} expects a real number, got {raw!r}")
    if not math.isfinite(v):
        bad(f"{key} must be finite, got {raw!r}")
    return v


def parse_config(text: str) -> ConfigFile:
    """Parse configuration text with strict validation."""
    cp = configparser.ConfigParser(interpolation=None, strict=True, empty_lines_in_values=False)
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("key outside of any section", exc.lineno, 1) from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section [{exc.section}]", exc.lineno, 1) from None
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ParseError(f"cannot parse {line.strip()!r}", lineno, 1) from None
    sections = {}
    for name in cp.sections():
        key = name.strip().lower()
        if key not in _SECTIONS:
            line, _ = _locate_section(text, name)
            raise ParseError(f"unknown section [{name}]", line, 1)
        cls = _SECTIONS[key]
        allowed = {f.name for f in fields(cls)}
        values = {}
        for k, raw in cp.items(name):
            line, col = _locate(text, key, k)
            if k not in allowed:
                raise ParseError(f"unknown key {k!r} in [{key}]", line, 1)
            values[k] = _parse_value(k, raw.strip(), line, col)
        try:
            sections[key] = cls(**values)
        except (TypeError, ValueError) as exc:  # pragma: no cover - defensive
            raise ParseError(str(exc)) from None
    cfg = ConfigFile(**sections)
    _validate(cfg, text)
    return cfg


def _locate_section(text: str, name: str) -> tuple[int | None, int]:
    for n, raw in enumerate(text.splitlines(), start=1):
        if raw.strip() == f"[{name}]":
            return n, 0
    return None, 0


def _validate(cfg: ConfigFile, text: str):
    def bad(section, key, msg):
        line, col = _locate(text, section, key)
        raise ParseError(msg, line, col + 1 if line else None)

    g, s, r = cfg.grid, cfg.suite, cfg.run
    if g.n < 4 or g.n % 2:
        bad("grid", "n", f"n must be an even integer >= 4, got {g.n}")
    if g.box <= 0:
        bad("grid", "box", "box must be positive")
    if not 0 < g.dealias <= 1:
        bad("grid", "dealias", "dealias must lie in (0, 1]")
    if not 0 <= s.beta <= 2:
        bad("suite", "beta", f"beta must lie in [0, 2], got {s.beta}")
    if not 0 < s.gamma < 1:
        bad("suite", "gamma", f"gamma must lie in (0, 1), got {s.gamma}")
    if r.t_final < 0:
        bad("run", "t_final", "t_final must be nonnegative")
    if r.dt != "auto" and r.dt <= 0:
        bad("run", "dt", "dt must be positive or auto")
    if r.eps_visc < 0:
        bad("run", "eps_visc", "eps_visc must be nonnegative")
    if r.lambda_track < 0:
        bad("run", "lambda_track", "lambda_track must be nonnegative")
    if r.seed < 0 or r.seed >= 2**64:
        bad("run", "seed", "seed must be an unsigned 64-bit integer")
    if r.cadence < 1:
        bad("run", "cadence", "cadence must be at least 1")
    if r.snapshot_cadence < 0:
        bad("run", "snapshot_cadence", "snapshot_cadence must be nonnegative")
    if cfg.init.kind == "file" and not cfg.init.path:
        bad("init", "kind", "kind = file needs a path")


def load_config(path: str | Path) -> ConfigFile:
    return parse_config(Path(path).read_text())


def with_seed(cfg: ConfigFile, seed: int) -> ConfigFile:
    return replace(cfg, run=replace(cfg.run, seed=int(seed)))

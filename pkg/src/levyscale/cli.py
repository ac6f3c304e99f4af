"""Command-line experiment driver.

Each subcommand writes one CSV whose comment header echoes the resolved
configuration, so that the header plus the seed reproduce the file.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 event cap.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import sys
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import __version__
from .errors import (ConfigError, DomainError, EventCapError, InsufficientSignalError, QuadratureError,
                     RangeError)
from .mc import (HarmonicProbe, est_far_exit, est_harmonic, est_hitting,
                 exit_time_summary, fit_regularity_exponent, grid_oscillation, half_space_indicator)
from .scale import FAMILIES, ScaleCalculus, ScaleFunction
from .sim import JumpProcessModel, default_eps
from .symbol import SymbolEvaluator

SUBCOMMANDS = ("scale-table", "symbol-check", "exit-time", "far-exit", "hitting", "regularity")

# per-subcommand defaults for keys left unset
DEFAULTS = {
    "scale-table": {"points": 40, "a": [2.0]},
    "symbol-check": {"points": 40},
    "exit-time": {"radii": [0.05, 0.1, 0.2, 0.4], "t": [0.1, 1.0]},
    "far-exit": {"radii": [0.02, 0.05], "s": [0.2, 0.4]},
    "hitting": {"r": 0.05, "a": [2.0, 4.0, 8.0, 16.0]},
    "regularity": {
        "r": 0.4,
        "a": [4.0],
        "grid": [-0.095, -0.07, -0.05, -0.035, -0.02, -0.01, 0.0, 0.01, 0.02, 0.035, 0.05, 0.07, 0.095],
    },
}


@dataclass
class ExperimentConfig:
    ell: str = "power"
    beta: float = 1.0
    dim: int = 1
    eps: Optional[float] = None  # None: chosen by the small-jump bias gate
    mode: str = "drop"
    seed: int = 0
    paths: int = 2000
    out: str = "-"
    radii: Optional[List[float]] = None
    s: Optional[List[float]] = None
    t: Optional[List[float]] = None  # in units of 1/L(r)
    a: Optional[List[float]] = None
    r: Optional[float] = None
    grid: Optional[List[float]] = None  # offsets along the first axis
    points: Optional[int] = None
    s_min: float = 1e-6
    s_max: float = 0.9
    xi_min: float = 5.0
    xi_max: float = 1e4
    quad_rel_tol: float = 1e-10
    inv_abs_tol: float = 1e-12
    max_events: int = 10**7
    workers: int = 1
    emit_gnu: bool = False


FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
LIST_KEYS = {"radii", "s", "t", "a", "grid"}
INT_KEYS = {"dim", "seed", "paths", "points", "max_events", "workers"}
FLOAT_KEYS = {"beta", "eps", "r", "s_min", "s_max", "xi_min", "xi_max", "quad_rel_tol", "inv_abs_tol"}
# not echoed: they do not affect the numbers
NON_ECHO = {"out", "emit_gnu", "workers"}


def _convert(key, raw, where):
    if key not in FIELDS:
        raise ConfigError(f"{where}: unknown key {key!r}")
    raw = str(raw).strip()
    try:
        if raw.lower() in ("", "none", "auto") and key in {"eps", "r", "points"} | LIST_KEYS:
            return None
        if key in LIST_KEYS:
            return [float(v) for v in raw.split(",") if v.strip()]
        if key in INT_KEYS:
            return int(raw)
        if key in FLOAT_KEYS:
            return float(raw)
        if key == "emit_gnu":
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
    except ValueError:
        raise ConfigError(f"{where}: bad value {raw!r} for key {key!r}") from None
    return raw


def read_config_file(path) -> dict:
    """Parse flat ``key=value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key=value, got {line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        values[key] = _convert(key, raw, f"{path}:{no}")
    return values


def resolve_config(command: str, file_values: dict, flag_values: dict) -> ExperimentConfig:
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    cfg = ExperimentConfig(**merged)
    for key, value in DEFAULTS[command].items():
        if getattr(cfg, key) is None:
            setattr(cfg, key, value)
    validate(command, cfg)
    return cfg


def validate(command: str, cfg: ExperimentConfig):
    if cfg.ell not in FAMILIES or cfg.ell == "custom":
        raise ConfigError(f"key 'ell': unknown family {cfg.ell!r}")
    if cfg.dim not in (1, 2, 3):
        raise ConfigError("key 'dim': must be 1, 2 or 3")
    if cfg.mode not in ("drop", "gaussian"):
        raise ConfigError("key 'mode': must be drop or gaussian")
    if cfg.paths < 2:
        raise ConfigError("key 'paths': need at least 2")
    if not 0.0 <= cfg.seed < 2**64:
        raise ConfigError("key 'seed': must be a 64-bit unsigned integer")
    if cfg.eps is not None and not 0.0 <= cfg.eps < 1.0:
        raise ConfigError("key 'eps': outside [0, 1)")
    if cfg.points is not None and cfg.points < 2:
        raise ConfigError("key 'points': need at least 2")
    if cfg.emit_gnu and cfg.out == "-":
        raise ConfigError("key 'emit_gnu': needs a file for 'out'")
    for key in ("radii", "s", "grid"):
        vals = getattr(cfg, key)
        if vals and key != "grid" and any(not 0.0 < v < 1.0 for v in vals):
            raise ConfigError(f"key {key!r}: values must lie in (0, 1)")
    if cfg.a and any(v <= 1.0 for v in cfg.a):
        raise ConfigError("key 'a': values must exceed 1")
    if command in ("hitting", "regularity") and not 0.0 < cfg.r < (0.5 if command == "hitting" else 1.0):
        raise ConfigError(f"key 'r': out of range for {command}")
    if command == "regularity" and any(abs(g) >= cfg.r / 4.0 for g in cfg.grid):
        raise ConfigError("key 'grid': offsets must lie inside B_{r/4}")
    if command == "far-exit" and not any(2 * r < s < 1 for r in cfg.radii for s in cfg.s):
        raise ConfigError("keys 'radii'/'s': no pair with 2r < s < 1")
    if command == "symbol-check" and not 5.0 <= cfg.xi_min < cfg.xi_max:
        raise ConfigError("keys 'xi_min'/'xi_max': need 5 <= xi_min < xi_max")
    if command == "scale-table" and not 0.0 < cfg.s_min < cfg.s_max < 1.0:
        raise ConfigError("keys 's_min'/'s_max': need 0 < s_min < s_max < 1")


def build_calc(cfg: ExperimentConfig) -> ScaleCalculus:
    beta = cfg.beta if FAMILIES[cfg.ell] in (1, 2) else None
    try:
        ell = ScaleFunction(cfg.ell, beta=beta)
    except DomainError as exc:
        raise ConfigError(f"key 'beta': {exc}") from None
    return ScaleCalculus(ell, quad_rel_tol=cfg.quad_rel_tol, inv_abs_tol=cfg.inv_abs_tol)


def build_model(cfg: ExperimentConfig, calc: ScaleCalculus, r_ref: float) -> JumpProcessModel:
    if cfg.eps is None:
        cfg.eps = default_eps(calc, cfg.dim, r_ref)
    try:
        return JumpProcessModel(cfg.dim, calc, cfg.eps, cfg.mode, cfg.max_events)
    except (DomainError, RangeError) as exc:
        raise ConfigError(f"key 'eps': {exc}") from None


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ",".join(repr(float(x)) for x in v)
    return "none" if v is None else str(v)


class CsvOut:
    """Collects header, rows and trailing summary lines; written once at the end."""

    def __init__(self, command, cfg, columns):
        self.buf = io.StringIO()
        self.buf.write(f"# levyscale {__version__} {command}\n")
        for name in FIELDS:
            if name not in NON_ECHO:
                self.buf.write(f"# {name}={_fmt(getattr(cfg, name))}\n")
        self.writer = csv.writer(self.buf, lineterminator="\n")
        self.columns = columns
        self.writer.writerow(columns)
        self.summary = []

    def row(self, *values):
        self.writer.writerow([_fmt(v) if isinstance(v, float) else v for v in values])

    def note(self, text):
        self.summary.append(text)

    def text(self):
        return self.buf.getvalue() + "".join(f"# {line}\n" for line in self.summary)


def _est_cols():
    return ["n", "mean", "stderr", "ci95_low", "ci95_high"]


def _est_vals(e):
    return [e.n, e.mean, e.stderr, e.ci95_low, e.ci95_high]


def run_scale_table(cfg, calc, out):
    a = cfg.a[0]
    for s in np.geomspace(cfg.s_min, cfg.s_max, cfg.points).tolist():
        Lq = calc.big_L(s, method="quad")
        Lc = calc.big_L(s, method="closed")
        out.row(s, calc.ell_eval(s), Lq, Lc, abs(Lq - Lc) / Lc, calc.phi(a, s))


def run_symbol_check(cfg, calc, out):
    scan = SymbolEvaluator(cfg.dim, calc).comparability_scan(cfg.xi_min, cfg.xi_max, cfg.points)
    for row in scan.rows():
        out.row(*row)
    out.note(f"min_ratio={scan.min_ratio!r} max_ratio={scan.max_ratio!r} constant={scan.constant!r}")


def run_exit_time(cfg, calc, out):
    model = build_model(cfg, calc, min(cfg.radii))
    origin = np.zeros(cfg.dim)
    kw = {"seed": cfg.seed, "workers": cfg.workers}
    for r in cfg.radii:
        L = calc.big_L(r)
        times = [mult / L for mult in cfg.t]
        e, tails = exit_time_summary(model, origin, r, times, cfg.paths, **kw)
        out.row("mean_exit", r, "", *_est_vals(e), L, e.mean * L, cfg.seed)
        for t, e in zip(times, tails):
            out.row("exit_tail", r, t, *_est_vals(e), L, e.mean / (t * L), cfg.seed)


def run_far_exit(cfg, calc, out):
    model = build_model(cfg, calc, min(cfg.radii))
    origin = np.zeros(cfg.dim)
    for r in cfg.radii:
        for s in cfg.s:
            if not 2 * r < s < 1:
                continue
            e = est_far_exit(model, origin, r, s, cfg.paths, seed=cfg.seed, workers=cfg.workers)
            ratio = calc.big_L(s) / calc.big_L(r)
            out.row(r, s, *_est_vals(e), ratio, e.mean / ratio, cfg.seed)


def run_hitting(cfg, calc, out):
    model = build_model(cfg, calc, cfg.r)
    origin = np.zeros(cfg.dim)
    for a in cfg.a:
        e = est_hitting(model, origin, cfg.r, a, cfg.paths, seed=cfg.seed, workers=cfg.workers)
        rate = math.log(a) / a
        out.row(a, cfg.r, calc.phi(a, cfg.r), *_est_vals(e), rate, e.mean / rate, cfg.seed)


def run_regularity(cfg, calc, out):
    model = build_model(cfg, calc, cfg.r)
    # fails early (range error) when L(0+) is finite and the depth is unreachable
    radii = calc.dyadic_radii(cfg.r, cfg.a[0], 3)
    d = cfg.dim
    origin = np.zeros(d)
    grid = np.zeros((len(cfg.grid), d))
    grid[:, 0] = cfg.grid
    probe = HarmonicProbe(half_space_indicator(origin), 1.0, origin, cfg.r, grid)
    probe = est_harmonic(model, probe, cfg.paths, seed=cfg.seed, workers=cfg.workers)
    for x, e in zip(grid.tolist(), probe.values):
        out.row(*x, *_est_vals(e), cfg.seed)
    fit = fit_regularity_exponent(probe, calc, seed=cfg.seed)
    out.note(f"gamma_hat={fit.gamma!r} ci95=[{fit.ci_low!r},{fit.ci_high!r}] pairs={fit.n_pairs}")
    osc = [grid_oscillation(probe, origin, q) for q in radii]
    out.note("dyadic_radii=" + ",".join(repr(q) for q in radii))
    out.note("oscillation=" + ",".join(repr(o) for o in osc))


COLUMNS = {
    "scale-table": ["s", "ell", "L", "L_closed", "rel_dev", "phi_a"],
    "symbol-check": ["xi", "psi", "L_inv_xi", "ratio"],
    "exit-time": ["kind", "r", "t"] + _est_cols() + ["L_r", "scaled", "seed"],
    "far-exit": ["r", "s"] + _est_cols() + ["L_s_over_L_r", "scaled", "seed"],
    "hitting": ["a", "r", "phi_a"] + _est_cols() + ["ln_a_over_a", "scaled", "seed"],
    "regularity": None,
}
RUNNERS = {
    "scale-table": run_scale_table,
    "symbol-check": run_symbol_check,
    "exit-time": run_exit_time,
    "far-exit": run_far_exit,
    "hitting": run_hitting,
    "regularity": run_regularity,
}
GNU_COLUMNS = {
    "scale-table": (1, 3, "logscale x", "L(s)"),
    "symbol-check": (1, 4, "logscale x", "psi(xi)/L(1/xi)"),
    "exit-time": (2, 9, "", "E[tau] L(r)"),
    "far-exit": (1, 4, "", "P(far exit)"),
    "hitting": (1, 10, "logscale x", "P(hit) a/ln a"),
    "regularity": (1, 3, "", "u(x)"),
}


def gnuplot_script(command, csv_path):
    xcol, ycol, opts, label = GNU_COLUMNS[command]
    lines = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key off",
        f"set ylabel '{label}'",
    ]
    if opts:
        lines.append(f"set {opts}")
    lines.append(f"plot '{csv_path}' every ::1 using {xcol}:{ycol} with linespoints")
    return "\n".join(lines) + "\n"


def build_parser():
    p = argparse.ArgumentParser(prog="levyscale", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"levyscale {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key=value file; flags override it")
        sp.add_argument("--ell", choices=[k for k in FAMILIES if k != "custom"])
        sp.add_argument("--beta", type=float)
        sp.add_argument("--dim", type=int)
        sp.add_argument("--eps", type=float)
        sp.add_argument("--mode", choices=["drop", "gaussian"])
        sp.add_argument("--seed", type=int)
        sp.add_argument("--paths", type=int)
        sp.add_argument("--out")
        sp.add_argument("--emit-gnu", dest="emit_gnu", action="store_const", const=True)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="any other config key, e.g. --set radii=0.05,0.1")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        file_values = read_config_file(args.config) if args.config else {}
        flags = {k: getattr(args, k) for k in ("ell", "beta", "dim", "eps", "mode", "seed", "paths", "out",
                                               "emit_gnu")}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set {item!r}: expected KEY=VALUE")
            key, raw = item.split("=", 1)
            flags[key.strip()] = _convert(key.strip(), raw, "--set")
        cfg = resolve_config(command, file_values, flags)
        calc = build_calc(cfg)
        if command in ("exit-time", "far-exit", "hitting", "regularity"):
            build_model(cfg, calc, min(cfg.radii) if cfg.radii else cfg.r)
        columns = COLUMNS[command] or [f"x{j + 1}" for j in range(cfg.dim)] + _est_cols() + ["seed"]
        out = CsvOut(command, cfg, columns)
        RUNNERS[command](cfg, calc, out)
    except ConfigError as exc:
        print(f"levyscale: config error: {exc}", file=sys.stderr)
        return 2
    except EventCapError as exc:
        print(f"levyscale: event cap exceeded: {exc}", file=sys.stderr)
        return 4
    except (DomainError, RangeError, QuadratureError, InsufficientSignalError) as exc:
        print(f"levyscale: numerical failure: {exc}", file=sys.stderr)
        return 3
    text = out.text()
    if cfg.out == "-":
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
        for line in out.summary:
            print(line)
        if cfg.emit_gnu:
            with open(cfg.out + ".gp", "w") as fh:
                fh.write(gnuplot_script(command, cfg.out))
    return 0


def main():
    sys.exit(run())

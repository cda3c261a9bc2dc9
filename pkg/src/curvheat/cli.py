"""Command-line front end.

    curvheat <coeff|bounds|trace|verify|sweep|fit> [--geometry SPEC] [--manifest PATH]
             [--u LIST] [--p RANGE] [--q LIST] [--k INT] [--zero-tol REAL]
             [--format csv|tree] [--out PATH]

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 input
validation error.  Errors go to stderr as ``ERROR <code>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import asymptotics, coefficients, morse, spectra
from .coefficients import DEFAULT_ZERO_TOL
from .errors import (
    ConditioningError,
    CurvheatError,
    OracleInconsistencyError,
    VerificationError,
)
from .geometry import CP1, TORUS, ModelGeometry, integrate, load_sampled, parse_geometry_spec

log = logging.getLogger("curvheat")

COMMANDS = ("coeff", "bounds", "trace", "verify", "sweep", "fit")
EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_INPUT = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    geometry: ModelGeometry
    u: list[float] = field(default_factory=list)
    p: list[int] = field(default_factory=list)
    q: list[int] = field(default_factory=list)
    k: int = 1
    zero_tol: float = DEFAULT_ZERO_TOL
    fmt: str = "csv"
    out: Optional[str] = None
    cutoff: Optional[float] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not 0 <= self.k <= 3:
            raise UsageError(f"--k must be in 0..3, got {self.k}")
        if not self.zero_tol > 0:
            raise UsageError(f"--zero-tol must be positive, got {self.zero_tol}")
        if any(not (math.isfinite(u) and u > 0) for u in self.u):
            raise UsageError("every --u value must be positive and finite")
        if any(p < 1 for p in self.p):
            raise UsageError("every --p value must be a positive integer")
        if any(not 0 <= q <= self.geometry.n for q in self.q):
            raise UsageError(f"--q values must lie in 0..{self.geometry.n}")


# ------------------------------------------------------------ parsing


def parse_p_range(text: str) -> list[int]:
    """``5``, ``5,10,20``, ``start:stop:step``, ``start:stop:log`` or ``start:stop:logN``.

    ``log`` keeps the integers ``2^a`` and ``3*2^(a-1)`` in range (a
    half-octave grid); ``logN`` gives N geometrically spaced integers.
    """
    text = text.strip()
    if ":" not in text:
        try:
            values = [int(x) for x in text.split(",")]
        except ValueError:
            raise UsageError(f"bad --p value {text!r}") from None
        return sorted(set(values))
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--p range must be start:stop:step or start:stop:log, got {text!r}")
    try:
        start, stop = int(parts[0]), int(parts[1])
    except ValueError:
        raise UsageError(f"bad --p range {text!r}") from None
    if start < 1 or stop < start:
        raise UsageError(f"--p range needs 1 <= start <= stop, got {text!r}")
    mode = parts[2]
    if mode == "log":
        vals = set()
        a = 0
        while 2**a <= 2 * stop:
            for v in (2**a, 3 * 2 ** (a - 1) if a >= 1 else None):
                if v is not None and start <= v <= stop:
                    vals.add(v)
            a += 1
        if not vals:
            raise UsageError(f"no half-octave grid points in {text!r}")
        return sorted(vals)
    if mode.startswith("log"):
        try:
            count = int(mode[3:])
        except ValueError:
            raise UsageError(f"bad geometric count in {text!r}") from None
        if count < 2:
            raise UsageError("geometric grids need at least 2 points")
        ratio = (stop / start) ** (1.0 / (count - 1))
        return sorted({int(round(start * ratio**i)) for i in range(count)})
    try:
        step = int(mode)
    except ValueError:
        raise UsageError(f"bad --p step in {text!r}") from None
    if step < 1:
        raise UsageError("--p step must be positive")
    return list(range(start, stop + 1, step))


def _float_list(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad {what} list {text!r}") from None


def _int_list(text: str, what: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad {what} list {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="curvheat", description="Heat kernel coefficients, Morse bounds and spectral checks.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--geometry", help="torus:d=<ints>,A=<reals> | cp1 | file:<path>")
    ap.add_argument("--manifest", help="path to a sampled-curvature manifest, or - for stdin")
    ap.add_argument("--u", help="comma-separated list of u values")
    ap.add_argument("--p", help="p values or range")
    ap.add_argument("--q", help="comma-separated degrees (default: all)")
    ap.add_argument("--k", type=int, default=1, help="expansion depth for fit (0..3)")
    ap.add_argument("--zero-tol", type=float, default=DEFAULT_ZERO_TOL)
    ap.add_argument("--format", dest="fmt", choices=("csv", "tree"), default="csv")
    ap.add_argument("--out", help="output path (default: stdout)")
    ap.add_argument("--cutoff", type=float, help="eigenvalue cutoff for 'trace' without --u")
    ap.add_argument("--log-level", default="WARNING", help="level for the stderr log stream")
    return ap


_DEFAULTS = {
    "coeff": {"u": [1.0]},
    "bounds": {"u": [1.0]},
    "trace": {"p": [10]},
    "verify": {"u": [1.0], "p": [5]},
    "sweep": {"u": [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0]},
    "fit": {"u": [0.5], "p": [32, 48, 64, 96, 128, 192, 256]},
}


def make_config(argv: Sequence[str]) -> RunConfig:
    args = build_parser().parse_args(list(argv))
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING), stream=sys.stderr)
    if args.geometry and args.manifest:
        raise UsageError("give either --geometry or --manifest, not both")
    if args.manifest == "-":
        geom = load_sampled(sys.stdin.read())
    elif args.manifest:
        geom = parse_geometry_spec("file:" + args.manifest)
    elif args.geometry:
        geom = parse_geometry_spec(args.geometry)
    else:
        raise UsageError("a geometry is required (--geometry or --manifest)")
    defaults = _DEFAULTS[args.command]
    u = _float_list(args.u, "--u") if args.u else list(defaults.get("u", []))
    p = parse_p_range(args.p) if args.p else list(defaults.get("p", []))
    q = _int_list(args.q, "--q") if args.q else list(range(geom.n + 1))
    return RunConfig(args.command, geom, u, p, sorted(set(q)), args.k, args.zero_tol, args.fmt, args.out, args.cutoff)


# ------------------------------------------------------------ output


def fmt_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


@dataclass
class Table:
    header: list[str]
    rows: list[list] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([fmt_value(v) for v in row])
        return buf.getvalue()

    def to_tree(self) -> str:
        records = [dict(zip(self.header, row)) for row in self.rows]
        return json.dumps({"rows": records, "failures": self.failures}, indent=1, allow_nan=False) + "\n"


def _threads() -> int:
    raw = os.environ.get("CURVHEAT_THREADS")
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"CURVHEAT_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"CURVHEAT_THREADS must be a positive integer, got {raw!r}")
    return n


def _pmap(fn: Callable, cells: list) -> list:
    """Evaluate cells concurrently; results keep the input order."""
    workers = _threads()
    if workers == 1 or len(cells) < 2:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, cells))


# ------------------------------------------------------------ commands


def _per_volume_e0(geom: ModelGeometry, u: float, q: int) -> float:
    return integrate(geom, lambda pt: coefficients.e0_trace(pt.alphas, u, q, geom.rank_e)) / geom.volume


def _per_volume_e1(geom: ModelGeometry, u: float, q: int) -> Optional[float]:
    preds = asymptotics.predicted_coefficients(geom, u, q, 1)
    return preds[1]


def cmd_coeff(cfg: RunConfig) -> Table:
    geom = cfg.geometry
    t = Table(["geometry", "q", "u", "e0_trace", "e0_bochner", "e1_kahler"])
    cells = [(q, u) for q in cfg.q for u in cfg.u]

    def run(cell):
        q, u = cell
        bochner = integrate(geom, lambda pt: geom.rank_e * coefficients.e0_bochner(pt.alphas, u)) / geom.volume
        return [geom.label(), q, u, _per_volume_e0(geom, u, q), bochner, _per_volume_e1(geom, u, q)]

    t.rows = _pmap(run, cells)
    return t


def cmd_bounds(cfg: RunConfig) -> Table:
    geom = cfg.geometry
    t = Table(["geometry", "q", "u", "weak_bound", "strong_bound", "u_bound", "degenerate_fraction"])
    frac = morse.degenerate_fraction(geom, cfg.zero_tol)
    for q in cfg.q:
        wb = morse.weak_bound(geom, q, cfg.zero_tol)
        sb = morse.strong_bound(geom, q, cfg.zero_tol)
        for u in cfg.u:
            t.rows.append([geom.label(), q, u, wb, sb, morse.u_bound(geom, q, u), frac])
    return t


def cmd_sweep(cfg: RunConfig) -> Table:
    geom = cfg.geometry
    t = Table(["geometry", "q", "u", "scaled_e0_trace", "u_bound", "strong_bound"])
    cells = [(q, u) for q in cfg.q for u in cfg.u]

    def run(cell):
        q, u = cell
        scaled = integrate(geom, lambda pt: u**-geom.n * coefficients.e0_trace(pt.alphas, u, q, geom.rank_e))
        return [geom.label(), q, u, scaled, morse.u_bound(geom, q, u), morse.strong_bound(geom, q, cfg.zero_tol)]

    t.rows = _pmap(run, cells)
    return t


def cmd_trace(cfg: RunConfig) -> Table:
    geom = cfg.geometry
    if not cfg.u:
        t = Table(["p", "q", "lambda", "multiplicity"])
        for p in cfg.p:
            cutoff = cfg.cutoff if cfg.cutoff is not None else 50.0 * math.pi * p
            for q in cfg.q:
                s = spectra.spectrum_for(geom, p, q, cutoff)
                mult = geom.rank_e
                t.rows.extend([p, q, lam, m * mult] for lam, m in s.levels)
        return t
    t = Table(["geometry", "p", "q", "u", "trace", "truncation_bound", "leading_term"])
    cells = [(p, q, u) for p in cfg.p for q in cfg.q for u in cfg.u]

    def run(cell):
        p, q, u = cell
        s = spectra.graded_heat_trace(geom, p, q, u)
        lead = (p / u) ** geom.n * integrate(geom, lambda pt: coefficients.e0_trace(pt.alphas, u, q, geom.rank_e))
        return [geom.label(), p, q, u, s.value, s.truncation_bound, lead]

    t.rows = _pmap(run, cells)
    return t


def cmd_verify(cfg: RunConfig) -> Table:
    """Run every applicable invariant suite; failures are collected, not raised."""
    geom = cfg.geometry
    t = Table(["suite", "p", "q", "u", "value", "reference", "deviation", "verdict"])

    def record(suite, p, q, u, value, ref, dev, ok):
        t.rows.append([suite, p, q, u, value, ref, dev, "pass" if ok else "fail"])
        if not ok:
            t.failures.append(f"{suite} p={p} q={q} u={u}")

    for u in cfg.u:
        for i, pt in enumerate(geom.points):
            lhs = (4 * math.pi * u) ** -pt.n * coefficients.phi0(pt.alphas, 2 * u).real
            rhs = u**-pt.n * coefficients.e0_bochner(pt.alphas, u)
            dev = abs(lhs - rhs) / abs(rhs)
            record("phi0_identity", None, None, u, lhs, rhs, dev, dev <= 1e-12)
    if geom.kind not in (TORUS, CP1):
        return t
    for p in cfg.p:
        chi = sum((-1) ** q * spectra.exact_hq(geom, p, q) for q in range(geom.n + 1))
        for u in cfg.u:
            try:
                st = spectra.mckean_singer(geom, p, u)
                dev = abs(st - chi)
                record("mckean_singer", p, None, u, st, chi, dev, dev <= 1e-8 * max(1, abs(chi)))
            except OracleInconsistencyError as exc:
                log.error("%s", exc)
                record("mckean_singer", p, None, u, None, chi, None, False)
            if geom.kind == TORUS:
                for q in range(geom.n + 1):
                    s = spectra.graded_heat_trace(geom, p, q, u)
                    lead = (p / u) ** geom.n * _per_volume_e0(geom, u, q) * geom.volume
                    dev = abs(s.value - lead)
                    record("torus_exactness", p, q, u, s.value, lead, dev, dev <= 1e-10 * abs(lead) + s.truncation_bound)
            res = morse.verify_inequalities(geom, p, u, cfg.zero_tol, strict=False)
            for rep in res.reports:
                for c in rep.checks:
                    record("morse_" + c.kind, p, rep.q, u, c.lhs, c.rhs, c.lhs - c.rhs, c.passed)
    return t


def cmd_fit(cfg: RunConfig) -> Table:
    geom = cfg.geometry
    t = Table(
        ["geometry", "u", "q", "r", "fitted", "predicted", "abs_diff", "rel_diff", "residual_order", "remainder_order", "condition"]
    )
    cells = [(u, q) for u in cfg.u for q in cfg.q]

    def run(cell):
        u, q = cell
        try:
            return asymptotics.expansion_report(geom, u, cfg.p, cfg.k, q=q, strict=False), None
        except ConditioningError as exc:
            return None, exc

    for (u, q), (rep, exc) in zip(cells, _pmap(run, cells)):
        if exc is not None:
            raise exc
        for row in rep.rows():
            t.rows.append(
                [geom.label(), u, q, row["r"], row["fitted"], row["predicted"], row["abs_diff"], row["rel_diff"],
                 rep.residual_order, rep.remainder_order, rep.condition]
            )
        t.failures.extend(f"u={u} q={q}: {note}" for note in rep.notes if "not within" in note)
    return t


HANDLERS = {
    "coeff": cmd_coeff,
    "bounds": cmd_bounds,
    "trace": cmd_trace,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
}


def _emit(text: str, path: Optional[str]):
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def run(argv: Sequence[str]) -> int:
    try:
        cfg = make_config(argv)
        start = time.perf_counter()
        table = HANDLERS[cfg.command](cfg)
        log.info("%s finished in %.3f s", cfg.command, time.perf_counter() - start)
        _emit(table.to_csv() if cfg.fmt == "csv" else table.to_tree(), cfg.out)
    except UsageError as exc:
        print(f"ERROR {EXIT_USAGE}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (VerificationError, OracleInconsistencyError) as exc:
        print(f"ERROR {EXIT_VERIFY}: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (CurvheatError, OSError) as exc:
        print(f"ERROR {EXIT_INPUT}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if table.failures:
        print(f"ERROR {EXIT_VERIFY}: {len(table.failures)} check(s) failed: {table.failures[0]}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def main() -> None:
    sys.exit(run(sys.argv[1:]))

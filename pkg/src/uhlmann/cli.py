"""Command-line driver: sweeps, transport checks, phase diagrams, QASM export.

Every data file starts with ``#`` provenance lines (tool version, the full flag
set as JSON, and the noise configuration hash) followed by CSV, or a JSON
document when ``--json`` is given. Identical flags give byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .analytics import overlap_analytic, phase_diagram, purity_weight
from .band import GapClosedError, GaugeSingularityError, ModelParams, QuadratureError, transport_integral
from .circuits import (
    ProbeReadout,
    build_from_angles,
    build_state_independent,
    extract_phase,
    readout,
    state_dependent_angles,
    state_independent_angles,
    transport_check_angles,
)
from .noise import PRESETS, NoiseConfig, PhysicalityError, load_noise, run_noisy
from .purification import parallel_transport_residuals, steps_for
from .qasm import emit

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3
ENGINES = ("analytic", "ideal-circuit", "noisy", "noisy+shots")
DEFAULT_NOISE = "ibmqx2-errormodel"
NUMERICAL_ERRORS = (GapClosedError, GaugeSingularityError, QuadratureError, PhysicalityError, FloatingPointError)


class UsageError(Exception):
    pass


@dataclass
class Row:
    M: float
    r: float
    t_f: float
    p_a_mode: str
    p_a: float
    engine: str
    exp_x: float
    exp_y: float
    stderr_x: float
    stderr_y: float
    phase_rad: float
    defined: bool
    seed: int | None
    shots: int | None
    step: int | None = None

    def csv_cells(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "phase_rad" and not self.defined:
                out.append("")
            elif isinstance(v, bool):
                out.append("true" if v else "false")
            elif v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out

    def as_json(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        if not self.defined:
            d["phase_rad"] = None
        return d


ROW_COLUMNS = tuple(f.name for f in fields(Row))


# -- grids and parsing helpers ----------------------------------------------

def default_r_grid(r_min: float, r_max: float) -> np.ndarray:
    """0.01 spacing, refined to 0.005 inside [0.04, 0.10]."""
    coarse = np.arange(0.0, 1.0 + 1e-9, 0.01)
    fine = np.arange(0.04, 0.10 + 1e-9, 0.005)
    grid = np.unique(np.round(np.concatenate([coarse, fine]), 10))
    return grid[(grid >= r_min - 1e-12) & (grid <= r_max + 1e-12)]


def r_grid(args) -> np.ndarray:
    if not 0.0 <= args.r_min <= args.r_max <= 1.0:
        raise UsageError(f"need 0 <= r-min <= r-max <= 1, got [{args.r_min}, {args.r_max}]")
    if args.r_steps is None:
        grid = default_r_grid(args.r_min, args.r_max)
        if grid.size == 0:
            raise UsageError("r range contains no default grid points; pass --r-steps")
        return grid
    if args.r_steps < 1:
        raise UsageError("--r-steps must be >= 1")
    return np.linspace(args.r_min, args.r_max, args.r_steps)


def parse_weight(text: str) -> float | None:
    """``pr`` selects the parallel-transport weight; otherwise a number in [0, 1]."""
    if text.lower() in ("pr", "p_r"):
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'pr' or a number, got {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"ancillary weight must lie in [0, 1], got {value}")
    return value


def row_rng(seed: int, index: int) -> np.random.Generator:
    # one independent stream per row, so rows do not depend on evaluation order
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def resolve_noise(args) -> tuple[NoiseConfig, str]:
    try:
        if args.noise in PRESETS:
            cfg = NoiseConfig.from_preset(args.noise, angular_m=not args.m_plain)
        else:
            cfg = load_noise(args.noise)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc).strip("'\"")) from None
    return cfg, cfg.digest()


def flag_dict(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}


def provenance(args, noise_label: str | None, extra: Sequence[str] = ()) -> list[str]:
    lines = [
        f"tool: uhlmann {__version__}",
        f"command: {args.command}",
        "flags: " + json.dumps(flag_dict(args), sort_keys=True),
        f"noise: {noise_label}" if noise_label else "noise: none",
    ]
    return lines + list(extra)


def write_output(args, header: list[str], write_csv: Callable[[io.StringIO], None], as_json: dict) -> None:
    buf = io.StringIO()
    if args.json:
        doc = {"provenance": header, **as_json}
        buf.write(json.dumps(doc, indent=2, allow_nan=False, default=_json_default) + "\n")
    else:
        for line in header:
            buf.write(f"# {line}\n")
        write_csv(buf)
    text = buf.getvalue()
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_rows(args, header: list[str], rows: list[Row]) -> None:
    def to_csv(buf):
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        for row in rows:
            w.writerow(row.csv_cells())

    write_output(args, header, to_csv, {"rows": [r.as_json() for r in rows]})


def _row(base: dict, engine: str, ro: ProbeReadout, seed: int | None) -> Row:
    defined = not math.isnan(ro.phase)
    return Row(
        engine=engine,
        exp_x=float(ro.exp_x),
        exp_y=float(ro.exp_y),
        stderr_x=float(ro.stderr_x),
        stderr_y=float(ro.stderr_y),
        phase_rad=float(ro.phase),
        defined=defined,
        seed=seed if ro.shots is not None else None,
        shots=ro.shots,
        **base,
    )


def _analytic_readout(overlap: complex) -> ProbeReadout:
    # the probe sees the complex conjugate of the branch overlap
    ex, ey = overlap.real + 0.0, -overlap.imag + 0.0
    return ProbeReadout(exp_x=ex, exp_y=ey, phase=extract_phase(ex, ey))


def run_engines(
    engines: Sequence[str],
    points: Sequence[dict],
    analytic: Callable[[dict], ProbeReadout],
    circuit_for: Callable[[dict], object],
    args,
    noise: NoiseConfig | None,
) -> list[Row]:
    rows = []
    for engine in engines:
        for i, pt in enumerate(points):
            base = pt["base"]
            if engine == "analytic":
                ro = analytic(pt)
            elif engine == "ideal-circuit":
                ro = readout(circuit_for(pt))
            elif engine == "noisy":
                ro = run_noisy(circuit_for(pt), noise)
            else:
                ro = run_noisy(circuit_for(pt), noise, n_shots=args.shots, seed=row_rng(args.seed, i))
            rows.append(_row(base, engine, ro, args.seed))
    return rows


def subtract_offset(rows: list[Row], offset_y: float | None) -> dict[str, float]:
    """Re-extract phases with the sweep-averaged (or given) probe y offset."""
    used = {}
    for engine in dict.fromkeys(r.engine for r in rows):
        sel = [r for r in rows if r.engine == engine]
        off = float(np.mean([r.exp_y for r in sel])) if offset_y is None else offset_y
        used[engine] = off
        for r in sel:
            r.phase_rad = extract_phase(r.exp_x, r.exp_y, off)
            r.defined = not math.isnan(r.phase_rad)
    return used


def _needs_noise(engines: Sequence[str]) -> bool:
    return any(e.startswith("noisy") for e in engines)


def _engines(args) -> list[str]:
    return list(dict.fromkeys(args.engine or ["analytic"]))


def _noise_for(args, engines):
    if not _needs_noise(engines):
        return None, None
    cfg, digest = resolve_noise(args)
    return cfg, f"{args.noise}{' (plain m)' if args.m_plain else ''} sha256={digest}"


# -- commands ------------------------------------------------------------------

def cmd_sweep(args) -> int:
    engines = _engines(args)
    noise, label = _noise_for(args, engines)
    params = ModelParams(args.M)
    I = transport_integral(0.0, 1.0, params)
    points = []
    for r in r_grid(args):
        r = float(r)
        weight = purity_weight(r) if args.p_a is None else args.p_a
        base = dict(M=args.M, r=r, t_f=1.0, p_a_mode="p_r" if args.p_a is None else "fixed", p_a=weight)
        points.append({"base": base, "angles": state_dependent_angles(r, params, p_a=weight)})
    rows = run_engines(
        engines,
        points,
        lambda pt: _analytic_readout(complex(overlap_analytic(I, purity_weight(pt["base"]["r"]), pt["base"]["p_a"]))),
        lambda pt: build_from_angles(pt["angles"], basis=None),
        args,
        noise,
    )
    write_rows(args, provenance(args, label), rows)
    return EXIT_OK


def cmd_transport_check(args) -> int:
    engines = _engines(args)
    try:
        n_steps = steps_for(args.dt)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    noise, label = _noise_for(args, engines)
    params = ModelParams(args.M)
    weight = purity_weight(args.r) if args.p_a is None else args.p_a
    residuals = parallel_transport_residuals(params, args.r, dt=args.dt, p_a=weight)
    points = []
    for n in range(n_steps):
        base = dict(
            M=args.M,
            r=args.r,
            t_f=round(min((n + 1) * args.dt, 1.0), 12),
            p_a_mode="p_r" if args.p_a is None else "fixed",
            p_a=weight,
            step=n,
        )
        angles = transport_check_angles(args.r, params, n, dt=args.dt, p_a=weight)
        points.append({"base": base, "angles": angles, "residual": residuals[n]})

    def analytic(pt):
        res = pt["residual"]
        phase = 0.0 if math.isnan(res.phase) else res.phase
        return _analytic_readout(res.magnitude * complex(math.cos(phase), math.sin(phase)))

    rows = run_engines(engines, points, analytic, lambda pt: build_from_angles(pt["angles"], basis=None), args, noise)
    write_rows(args, provenance(args, label), rows)
    return EXIT_OK


def cmd_state_independent(args) -> int:
    engines = _engines(args)
    try:
        angles0, I, weight = state_independent_angles(0.0, ModelParams(args.M), args.tf)
    except ValueError as exc:
        if isinstance(exc, NUMERICAL_ERRORS):
            raise
        raise UsageError(str(exc)) from None
    noise, label = _noise_for(args, engines)
    beta_line = f"beta1={angles0.beta1!r} beta2={angles0.beta2!r} p_T={weight!r}"
    print(beta_line, file=sys.stderr)
    points = []
    for r in r_grid(args):
        r = float(r)
        base = dict(M=args.M, r=r, t_f=args.tf, p_a_mode="p_T", p_a=weight)
        points.append({"base": base, "r": r})
    rows = run_engines(
        engines,
        points,
        lambda pt: _analytic_readout(complex(overlap_analytic(I, purity_weight(pt["r"]), weight))),
        lambda pt: build_state_independent(state_independent_angles(pt["r"], ModelParams(args.M), args.tf)[0].gamma, I, weight, basis=None),
        args,
        noise,
    )
    extra = [beta_line]
    if args.offset_subtract or args.offset_y is not None:
        used = subtract_offset(rows, args.offset_y)
        extra.append("offset_y: " + json.dumps(used, sort_keys=True))
    write_rows(args, provenance(args, label, extra), rows)
    return EXIT_OK


def cmd_phase_diagram(args) -> int:
    if args.M_steps < 1 or args.r_steps < 1:
        raise UsageError("grid sizes must be >= 1")
    if not 0.0 <= args.r_min <= args.r_max <= 1.0:
        raise UsageError("need 0 <= r-min <= r-max <= 1")
    if args.M_min < 0 or args.M_max < args.M_min:
        raise UsageError("need 0 <= M-min <= M-max")
    M_grid = np.linspace(args.M_min, args.M_max, args.M_steps)
    r_vals = np.linspace(args.r_min, args.r_max, args.r_steps)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        grid = phase_diagram(M_grid, r_vals)
    extra = []
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
        extra.append(f"warning: {w.message}")
    header = provenance(args, None, extra)
    rows = [
        {"M": M, "r": r, "R": R, "phase_rad": ph if ok else None, "defined": ok}
        for M, r, R, ph, ok in grid.rows()
    ]
    write_output(args, header, lambda buf: grid.write_csv(buf), {"rows": rows})
    return EXIT_OK


def _suffixed(path: Path, basis: str) -> Path:
    return path.with_name(f"{path.stem}_{basis}{path.suffix or '.qasm'}")


def cmd_emit_qasm(args) -> int:
    if args.M is None:
        args.M = 0.6 if args.protocol == "state-independent" else 0.2
    params = ModelParams(args.M)
    try:
        if args.protocol == "state-dependent":
            angles = state_dependent_angles(args.r, params, p_a=args.p_a, t_f=args.tf or 1.0)
        elif args.protocol == "state-independent":
            angles = state_independent_angles(args.r, params, args.tf or 0.6)[0]
        else:
            angles = transport_check_angles(args.r, params, args.step, dt=args.dt, p_a=args.p_a)
    except ValueError as exc:
        if isinstance(exc, NUMERICAL_ERRORS):
            raise
        raise UsageError(str(exc)) from None
    bases = ("x", "y") if args.basis == "both" else (args.basis,)
    if len(bases) > 1 and args.out in (None, "-"):
        raise UsageError("--basis both needs --out")
    for basis in bases:
        text = emit(build_from_angles(angles, basis), full_precision=args.full_precision, n_wires=args.wires)
        if args.provenance:
            prov = provenance(args, None, [f"basis: {basis}"])
            text = "".join(f"// {line}\n" for line in prov) + text
        if args.out in (None, "-"):
            sys.stdout.write(text)
        else:
            target = _suffixed(Path(args.out), basis) if len(bases) > 1 else Path(args.out)
            target.write_text(text, encoding="utf-8", newline="\n")
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------

def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--json", action="store_true", help="write JSON instead of CSV")


def _add_engines(p: argparse.ArgumentParser) -> None:
    p.add_argument("--engine", action="append", choices=ENGINES, help="repeatable; default analytic")
    p.add_argument("--shots", type=int, default=8192)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", default=DEFAULT_NOISE, help=f"preset {sorted(PRESETS)} or JSON file")
    p.add_argument("--m-plain", action="store_true", help="read the residual IX strength as 0.4 rad/us")


def _add_r_grid(p: argparse.ArgumentParser, r_max: float = 0.25) -> None:
    p.add_argument("--r-min", type=float, default=0.0)
    p.add_argument("--r-max", type=float, default=r_max)
    p.add_argument("--r-steps", type=int, default=None, help="uniform grid; default is the refined grid")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uhlmann", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"uhlmann {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="closed-loop phase against mixedness")
    p.add_argument("--M", type=float, default=0.2)
    p.add_argument("--p-a", type=parse_weight, default=None, help="'pr' (default) or a fixed weight")
    _add_r_grid(p)
    _add_engines(p)
    _add_output(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("transport-check", help="adjacent-step phases along the path")
    p.add_argument("--M", type=float, default=0.2)
    p.add_argument("--r", type=float, default=0.02)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--p-a", type=parse_weight, default=None, help="'pr' (default) or a fixed weight")
    _add_engines(p)
    _add_output(p)
    p.set_defaults(func=cmd_transport_check)

    p = sub.add_parser("state-independent", help="open-path protocol with p_a = p_T")
    p.add_argument("--M", type=float, default=0.6)
    p.add_argument("--tf", type=float, default=0.6)
    _add_r_grid(p)
    p.add_argument("--offset-subtract", action="store_true", help="subtract the sweep-mean <sigma_y>")
    p.add_argument("--offset-y", type=float, default=None, help="subtract this fixed <sigma_y> offset")
    _add_engines(p)
    _add_output(p)
    p.set_defaults(func=cmd_state_independent)

    p = sub.add_parser("phase-diagram", help="closed-loop phase over an (M, r) grid")
    p.add_argument("--M-min", type=float, default=0.0)
    p.add_argument("--M-max", type=float, default=2.0)
    p.add_argument("--M-steps", type=int, default=151)
    p.add_argument("--r-min", type=float, default=0.0)
    p.add_argument("--r-max", type=float, default=1.0)
    p.add_argument("--r-steps", type=int, default=101)
    _add_output(p)
    p.set_defaults(func=cmd_phase_diagram)

    p = sub.add_parser("emit-qasm", help="write protocol circuits as OPENQASM 2.0")
    p.add_argument("--protocol", choices=("state-dependent", "transport-check", "state-independent"), default="state-dependent")
    p.add_argument("--r", type=float, default=0.15)
    p.add_argument("--M", type=float, default=None, help="default 0.2, or 0.6 for state-independent")
    p.add_argument("--tf", type=float, default=None, help="final time (default 1, or 0.6 for state-independent)")
    p.add_argument("--step", type=int, default=0)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--p-a", type=parse_weight, default=None, help="'pr' (default) or a fixed weight")
    p.add_argument("--basis", choices=("x", "y", "both"), default="x")
    p.add_argument("--wires", type=int, default=5)
    p.add_argument("--full-precision", action="store_true")
    p.add_argument("--provenance", action="store_true", help="prepend // provenance comments")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_emit_qasm)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"uhlmann {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERICAL_ERRORS as exc:
        print(f"uhlmann {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"uhlmann {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Every command evaluates one parameter point or a sweep over up to two
variables and writes long-format rows as CSV or JSON. Exit codes: 0 success,
2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np

from . import averaged, critical, interferometer, limits, montecarlo, postselected, trajectories
from .errors import NumericalError, ParameterError, WMPhaseError
from .measurement import KRAUS_MODELS, ProtocolParams

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
WORKERS_ENV = "WMPHASE_WORKERS"
SWEEPABLE = ("C", "A", "theta", "d", "N")

_ANGLE = re.compile(r"^\s*([+-]?)((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_angle(text) -> float:
    """Radians, or a multiple of pi written as ``0.75pi``, ``pi/2``, ``3pi/4``."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower()
    m = _ANGLE.match(s)
    if m:
        sign, coef, denom = m.groups()
        value = (-1.0 if sign == "-" else 1.0) * (float(coef) if coef else 1.0) * math.pi
        if denom:
            value /= float(denom)
        return value
    try:
        return float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an angle: {text!r}") from None


def _n_value(text) -> Optional[int]:
    if text is None or str(text).lower() in ("inf", "infinite", "none"):
        return None
    value = float(text)
    if value != int(value) or value < 0:
        raise argparse.ArgumentTypeError(f"N must be a non-negative integer or 'inf', got {text!r}")
    return int(value)


# ---------------------------------------------------------------- emission

def _cell_text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit(records: Sequence[dict], fmt: str, columns: Optional[Sequence[str]] = None) -> bytes:
    """CSV (header row, RFC 4180 quoting, shortest round-trip floats) or JSON array bytes."""
    records = list(records)
    if fmt == "json":
        return (json.dumps(records, indent=2) + "\n").encode()
    if fmt != "csv":
        raise ParameterError(f"unknown format {fmt!r}")
    if columns is None:
        columns = list(records[0].keys()) if records else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in records:
        w.writerow([_cell_text(r.get(c)) for c in columns])
    return buf.getvalue().encode()


def write_atomic(path: str, data: bytes) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".wmphase-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- per-cell computations

def _pp(p: dict) -> ProtocolParams:
    for key in ("C", "A", "theta"):
        if p.get(key) is None:
            raise ParameterError(f"missing parameter {key}")
    return ProtocolParams(float(p["C"]), float(p["A"]), float(p["theta"]), int(p.get("d", 1)), p.get("N"))


def _base_row(p: dict) -> dict:
    return {k: p.get(k) for k in ("C", "A", "theta", "d", "N")}


def _curve_rows(p: dict, o: dict, tracer: Callable) -> list[dict]:
    for key in ("C", "A"):
        if p.get(key) is None:
            raise ParameterError(f"missing parameter {key}")
    return tracer(float(p["C"]), float(p["A"]), int(p.get("d", 1)), o["grid_hint"]).rows()


def cell_postselected(p: dict, o: dict) -> list[dict]:
    if o.get("curve"):
        return _curve_rows(p, o, postselected.phase_curve)
    pp = _pp(p)
    res = (postselected.amplitude_closed_form(pp) if pp.n is None
           else postselected.amplitude_finite_n(pp, o["model"]))
    z = res.amplitude
    return [dict(_base_row(p), re=z.real, im=z.imag, phase=res.phase,
                 magnitude=res.magnitude, prob=res.probability)]


def cell_averaged(p: dict, o: dict) -> list[dict]:
    if o.get("curve"):
        return _curve_rows(p, o, averaged.averaged_phase_curve)
    pp = _pp(p)
    res = (averaged.averaged_amplitude(pp) if pp.n is None
           else averaged.averaged_finite_n(pp, o["method"], o["model"]))
    z = res.amplitude
    return [dict(_base_row(p), re=z.real, im=z.imag, chi_bar=res.chi_bar, alpha=res.alpha)]


def _winding(c: float, a: float, d: int, o: dict) -> int:
    if o["protocol"] == "postselected":
        return postselected.winding_at(c, a, d, o["grid_hint"])
    if o["protocol"] == "averaged":
        return averaged.averaged_winding_at(c, a, d, o["grid_hint"])
    return trajectories.family_winding_classifier(c, a, d, max(o["grid_hint"], 64), o["n_family"])


def cell_winding(p: dict, o: dict) -> list[dict]:
    pp = _pp(dict(p, theta=0.0))
    row = {k: p.get(k) for k in ("C", "A", "d")}
    return [dict(row, protocol=o["protocol"], winding=_winding(pp.c, pp.a, pp.d, o))]


def _diagram_value(pp: ProtocolParams, quantity: str, o: dict) -> float:
    if quantity in ("P", "logP", "chi"):
        z = complex(postselected.closed_form(pp.c, pp.a, pp.theta, pp.d))
        if quantity == "chi":
            return postselected.principal_arg(z)
        prob = abs(z) ** 2
        if quantity == "P":
            return prob
        return math.log(prob) if prob > 0 else -math.inf
    if quantity in ("chibar", "alpha"):
        z = averaged.limit_amplitude(pp.c, pp.a, pp.theta, pp.d)
        if quantity == "alpha":
            return -math.log(abs(z)) if z != 0 else math.inf
        return 0.5 * postselected.principal_arg(z)
    if quantity == "n":
        return postselected.winding_at(pp.c, pp.a, pp.d, o["grid_hint"])
    if quantity == "nbar":
        return averaged.averaged_winding_at(pp.c, pp.a, pp.d, o["grid_hint"])
    raise ParameterError(f"unknown quantity {quantity!r}")


DIAGRAM_QUANTITIES = ("logP", "P", "chi", "chibar", "alpha", "n", "nbar")


def cell_phase_diagram(p: dict, o: dict) -> list[dict]:
    pp = _pp(dict(p, theta=p.get("theta", 0.0) if p.get("theta") is not None else 0.0))
    q = o["quantity"]
    row = _base_row(p)
    row.pop("N")
    return [dict(row, quantity=q, value=_diagram_value(pp, q, o))]


def cell_critical_line(p: dict, o: dict) -> list[dict]:
    d = int(p.get("d", 1))
    if o["protocol"] == "postselected":
        pts = critical.postselected_critical_line(d, o["points"], o["negative_a"])
    else:
        if p.get("A") is None:
            raise ParameterError("the averaged critical search needs --A (or a sweep over A)")
        pts = critical.averaged_critical_points(float(p["A"]), d, o["c_max"], o["c_step"], o["n_theta"])
    return [pt.row() for pt in pts]


def cell_trajectory(p: dict, o: dict) -> list[dict]:
    pp = _pp(p)
    if pp.n is None or pp.n < 1:
        raise ParameterError("a trajectory needs a finite N >= 1")
    seq = (trajectories.ReadoutSequence.parse(o["readouts"], o["final"]) if o["readouts"]
           else trajectories.ReadoutSequence((0,) * pp.n, o["final"]))
    traj = trajectories.evolve(pp, seq, o["model"])
    pts = traj.bloch_points
    return [dict(theta=pp.theta, k=k, x=float(v[0]), y=float(v[1]), z=float(v[2]))
            for k, v in enumerate(pts)]


def cell_montecarlo(p: dict, o: dict) -> list[dict]:
    pp = _pp(p)
    if pp.n is None:
        raise ParameterError("Monte Carlo sampling needs a finite N")
    est = montecarlo.estimate_averaged(pp, o["samples"], o["seed"], o["model"])
    exact = averaged.averaged_finite_n_value(pp, "transfer", o["model"])
    return [est.record(pp, exact)]


def cell_interferometer(p: dict, o: dict) -> list[dict]:
    pp = _pp(p)
    if pp.n is None:
        raise ParameterError("interferometer intensities need a finite N")
    fn = (interferometer.intensities_postselected if o["setup"] == "postselected"
          else interferometer.intensities_averaged)
    pair = fn(pp, o["i0"], o["model"])
    s = interferometer.surviving_weight(pp, o["model"])
    return [dict(_base_row(p), setup=o["setup"], i1=pair.i1, i2=pair.i2, i0=pair.i0, S=s)]


def cell_scaling(p: dict, o: dict) -> list[dict]:
    theta, d = float(p["theta"]), int(p.get("d", 1))
    n = p.get("N") or 10_000
    st = limits.scaling_study(o["a_exp"], o["b_exp"], o["c_prime"], o["a_prime"], theta, d, int(n))
    return [dict(a_exp=o["a_exp"], b_exp=o["b_exp"], c_prime=o["c_prime"], a_prime=o["a_prime"],
                 theta=theta, d=d, n=int(n), C=st.c, A=st.a, phase=st.result.phase,
                 prob=st.result.probability, berry_phase=-math.pi * d * (1 - math.cos(theta)))]


COMMANDS: dict[str, tuple[Callable, str, Optional[list]]] = {
    "postselected": (cell_postselected, "json", None),
    "averaged": (cell_averaged, "json", None),
    "winding": (cell_winding, "json", None),
    "phase-diagram": (cell_phase_diagram, "csv", None),
    "critical-line": (cell_critical_line, "csv", ["branch", "theta_crit", "a_crit", "c_crit"]),
    "trajectory": (cell_trajectory, "csv", ["theta", "k", "x", "y", "z"]),
    "montecarlo": (cell_montecarlo, "json", None),
    "interferometer": (cell_interferometer, "json", None),
    "scaling": (cell_scaling, "json", None),
}


def _describe(p: dict) -> str:
    theta = p.get("theta")
    t = f"{theta:.10g}" if isinstance(theta, float) else str(theta)
    n = "inf" if p.get("N") is None else str(p.get("N"))
    return f"(C={p.get('C')}, A={p.get('A')}, theta={t}, d={p.get('d')}, N={n})"


def _run_cell(args) -> list[dict]:
    command, params, opts = args
    try:
        return COMMANDS[command][0](params, opts)
    except WMPhaseError as exc:
        raise type(exc)(f"{exc} at {_describe(params)}") from exc


# ---------------------------------------------------------------- sweeps

def sweep_values(var: str, lo: str, hi: str, steps: str) -> list:
    if var not in SWEEPABLE:
        raise ParameterError(f"cannot sweep {var!r}; choose from {SWEEPABLE}")
    n = int(steps)
    if n < 2:
        raise ParameterError("a sweep needs at least 2 steps")
    conv = parse_angle if var == "theta" else float
    values = np.linspace(conv(lo), conv(hi), n)
    if var in ("d", "N"):
        return [int(round(v)) for v in values]
    return [float(v) for v in values]


def build_cells(base: dict, sweeps: Sequence[Sequence[str]]) -> list[dict]:
    if len(sweeps) > 2:
        raise ParameterError("at most two swept variables")
    names = [s[0] for s in sweeps]
    if len(set(names)) != len(names):
        raise ParameterError("swept variables must be distinct")
    cells = [dict(base)]
    for var, lo, hi, steps in sweeps:
        cells = [dict(c, **{var: v}) for c in cells for v in sweep_values(var, lo, hi, steps)]
    return cells


def workers_from_env() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ParameterError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def evaluate(command: str, cells: Sequence[dict], opts: dict, workers: int = 1) -> list[dict]:
    jobs = [(command, c, opts) for c in cells]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        chunks = [_run_cell(j) for j in jobs]
    return [row for chunk in chunks for row in chunk]


# ---------------------------------------------------------------- argument parsing

def read_config(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; repeated ``sweep`` lines accumulate."""
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key == "sweep":
                out.setdefault("sweep", []).append(value.split())
            else:
                out[key] = value
    return out


def _add_point_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--C", type=float, help="measurement strength C >= 0")
    p.add_argument("--A", type=float, help="asymmetry parameter A")
    p.add_argument("--theta", type=parse_angle, help="polar angle of the parallel (radians, or e.g. 0.75pi)")
    p.add_argument("--d", type=int, help="direction +1 or -1 (default +1)")
    p.add_argument("--N", type=_n_value, help="number of weak measurements (default: N -> infinity)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--config", help="key = value file supplying defaults for any flag")
    common.add_argument("--sweep", nargs=4, action="append", metavar=("VAR", "MIN", "MAX", "STEPS"),
                        help=f"sweep one of {', '.join(SWEEPABLE)} (repeat for a 2-D grid)")
    common.add_argument("--model", choices=KRAUS_MODELS, help="finite-N Kraus model")
    common.add_argument("--seed", type=int)
    common.add_argument("--grid-hint", type=int, help="initial theta nodes for phase curves")

    parser = argparse.ArgumentParser(prog="wmphase", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("postselected", "averaged"):
        sp = sub.add_parser(name, parents=[common])
        _add_point_args(sp)
        sp.add_argument("--curve", action="store_true", default=None,
                        help="emit the unwrapped phase curve over theta in [0, pi] instead of one point")
        if name == "averaged":
            sp.add_argument("--method", choices=("transfer", "bruteforce"))

    sp = sub.add_parser("winding", parents=[common])
    _add_point_args(sp)
    sp.add_argument("--protocol", choices=("postselected", "averaged", "family"))
    sp.add_argument("--n-family", type=int, help="N of the trajectories for --protocol family")

    sp = sub.add_parser("phase-diagram", parents=[common])
    _add_point_args(sp)
    sp.add_argument("--quantity", choices=DIAGRAM_QUANTITIES)

    sp = sub.add_parser("critical-line", parents=[common])
    _add_point_args(sp)
    sp.add_argument("--protocol", choices=("postselected", "averaged"))
    sp.add_argument("--points", type=int, help="samples along the postselected line")
    sp.add_argument("--negative-a", action="store_true", default=None, help="include the A < 0 half")
    sp.add_argument("--c-max", type=float)
    sp.add_argument("--c-step", type=float)
    sp.add_argument("--n-theta", type=int)

    sp = sub.add_parser("trajectory", parents=[common])
    _add_point_args(sp)
    sp.add_argument("--readouts", help="weak readouts as a 0/1 string (default all zeros)")
    sp.add_argument("--final", type=int, choices=(0, 1), help="final projective readout")

    sp = sub.add_parser("montecarlo", parents=[common])
    _add_point_args(sp)
    sp.add_argument("--samples", type=int, help="number of sampled readout sequences")

    sp = sub.add_parser("interferometer", parents=[common])
    _add_point_args(sp)
    sp.add_argument("--setup", choices=("postselected", "averaged"))
    sp.add_argument("--I0", type=float, dest="i0", help="input beam intensity")

    sp = sub.add_parser("scaling", parents=[common])
    _add_point_args(sp)
    sp.add_argument("--a-exp", type=float)
    sp.add_argument("--b-exp", type=float)
    sp.add_argument("--c-prime", type=float)
    sp.add_argument("--a-prime", type=float)
    return parser


DEFAULTS = dict(d=1, curve=False, model=None, seed=0, grid_hint=64, method="transfer", protocol="postselected",
                n_family=1000, quantity="logP", points=200, negative_a=False, c_max=8.0, c_step=0.05,
                n_theta=256, readouts=None, final=0, samples=100, setup="postselected", i0=1.0,
                a_exp=0.5, b_exp=0.5, c_prime=2.0, a_prime=-1.0)

# commands whose physics needs complete Kraus operators by default
_COMPLETE_BY_DEFAULT = ("montecarlo", "interferometer")


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def resolve(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> tuple[dict, dict, list]:
    """Merge flags, config file and defaults into (params, options, sweeps)."""
    values = vars(ns).copy()
    if ns.config:
        sp = _subparser(parser, ns.command)
        by_dest = {a.dest: a for a in sp._actions}
        for key, raw in read_config(ns.config).items():
            if key == "sweep":
                if not values.get("sweep"):
                    values["sweep"] = raw
                continue
            if key not in by_dest:
                raise ParameterError(f"unknown config key {key!r} for {ns.command}")
            if values.get(key) is not None:
                continue
            action = by_dest[key]
            if isinstance(action, argparse._StoreTrueAction):
                values[key] = raw.lower() in ("1", "true", "yes", "on")
            else:
                try:
                    values[key] = action.type(raw) if action.type else raw
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise ParameterError(f"config key {key}: {exc}") from None
    for key, default in DEFAULTS.items():
        if values.get(key) is None:
            values[key] = default
    if values["model"] is None:
        values["model"] = "complete" if ns.command in _COMPLETE_BY_DEFAULT else "scaled"
    params = {k: values.get(k) for k in ("C", "A", "theta", "d", "N")}
    opts = {k: v for k, v in values.items() if k not in params and k not in ("sweep", "config", "output")}
    return params, opts, list(values.get("sweep") or [])


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        params, opts, sweeps = resolve(ns, parser)
        _, default_fmt, columns = COMMANDS[ns.command]
        fmt = ns.format or default_fmt
        cells = build_cells(params, sweeps)
        rows = evaluate(ns.command, cells, opts, workers_from_env())
        data = emit(rows, fmt, columns)
        if ns.output and ns.output != "-":
            write_atomic(ns.output, data)
            target = ns.output
        else:
            sys.stdout.buffer.write(data)
            sys.stdout.flush()
            target = "stdout"
    except NumericalError as exc:
        print(f"wmphase {ns.command}: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        name = type(exc).__name__
        print(f"wmphase {ns.command}: invalid input: {name}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"wmphase {ns.command}: {len(rows)} row(s) from {len(cells)} cell(s) -> {target}",
          file=sys.stderr)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

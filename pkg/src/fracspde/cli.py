"""Command-line front end: ``fracspde <subcommand> [flags]``.

Every subcommand prints machine-readable output (JSON, or CSV for sweeps) on
standard output unless ``--out`` names a directory, and emits one run
manifest.  Exit codes: 0 success, 1 failed check, 2 usage or domain error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import chaos, kernels, mlf, regimes, sim, verify
from .errors import FracSPDEError, NonConvergence
from .params import PARAM_NAMES, ModelParams

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
THREADS_ENV = "FRACSPDE_THREADS"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- serialization

def _num(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if not math.isfinite(v):
        return "null"
    return format(v, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits; non-finite floats become null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, float, bool, np.integer, np.floating)) or obj is None:
        return _num(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _version() -> str:
    try:
        v = metadata.version("fracspde")
    except metadata.PackageNotFoundError:
        v = "unknown"
    return f"fracspde {v}; numpy {np.__version__}; python {sys.version.split()[0]}"


@dataclass
class RunManifest:
    command: str
    params: dict
    outputs: list = field(default_factory=list)
    wall_time: float = 0.0
    versions: str = field(default_factory=_version)
    seed: int | None = None

    def as_dict(self) -> dict:
        return {"command": self.command, "params": {k: _flat(v) for k, v in self.params.items()},
                "outputs": list(self.outputs), "wall_time": self.wall_time,
                "versions": self.versions, "seed": self.seed}


def _flat(v):
    return v if isinstance(v, (int, float, str, bool)) or v is None else str(v)


def threads() -> int:
    cap = os.environ.get(THREADS_ENV)
    n = os.cpu_count() or 1
    if cap:
        try:
            n = max(1, min(n, int(cap)))
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {cap!r}")
    return n


# ---------------------------------------------------------------- configuration

def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}")
    for i, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{i}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise UsageError(f"{path}:{i}: empty key")
        out[k.replace("-", "_")] = v
    return out


def _add_param_flags(ap: argparse.ArgumentParser):
    for name in PARAM_NAMES:
        ap.add_argument(f"--{name}", type=float, default=None)
    ap.add_argument("--config", default=None, help="flat key = value file; flags take precedence")


def resolve(args, keys: dict[str, type], defaults: dict) -> dict:
    """Merge defaults < config file < explicit flags for the given keys."""
    vals = dict(defaults)
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    known = set(keys)
    for k, v in cfg.items():
        if k not in known:
            raise UsageError(f"unknown config key {k!r}")
        try:
            vals[k] = keys[k](v)
        except ValueError:
            raise UsageError(f"bad value for {k}: {v!r}")
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            vals[k] = v
    return vals


def _param_keys() -> dict[str, type]:
    return {k: float for k in PARAM_NAMES}


def params_from(vals: dict) -> ModelParams:
    return ModelParams(**{k: vals[k] for k in PARAM_NAMES if k in vals})


def _emit(args, name: str, text: str, manifest: RunManifest):
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        f = d / name
        f.write_text(text)
        manifest.outputs.append(str(f))
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _finish(args, manifest: RunManifest, t0: float):
    manifest.wall_time = time.perf_counter() - t0
    text = dumps(manifest.as_dict()) + "\n"
    if args.out:
        f = Path(args.out) / "manifest.json"
        manifest.outputs.append(str(f))
        text = dumps(manifest.as_dict()) + "\n"
        f.write_text(text)
    else:
        sys.stderr.write(text)


# ---------------------------------------------------------------- subcommands

def cmd_mlf(args) -> int:
    t0 = time.perf_counter()
    q = mlf.MLQuery(args.a, args.b, args.z, args.tol)
    r = mlf.ml_eval(q)
    out = {"value": r.value, "method": r.method.value, "err_estimate": r.err_estimate,
           "terms_used": r.terms_used}
    m = RunManifest("mlf", {"a": args.a, "b": args.b, "z": args.z, "tol": args.tol})
    _emit(args, "mlf.json", dumps(out), m)
    _finish(args, m, t0)
    return EXIT_OK


_KERNEL_KINDS = ("fourier_Y", "fourier_Z", "fourier_Zstar", "weighted_energy", "cross_energy",
                 "time_increment_energy")


def cmd_kernel(args) -> int:
    t0 = time.perf_counter()
    vals = resolve(args, _param_keys(), {})
    p = params_from(vals)
    kind = args.kind
    if kind.startswith("fourier"):
        xi = [float(s) for s in args.xi.split(",")]
        fn = getattr(kernels, kind)
        out = {"t": args.t, "xi": xi, "value": [fn(p, args.t, x) for x in xi]}
    elif kind == "weighted_energy":
        out = _energy(kernels.weighted_energy(p, args.t, args.a))
    elif kind == "cross_energy":
        out = _energy(kernels.cross_energy(p, args.r, args.s, args.a))
    else:
        out = _energy(kernels.time_increment_energy(p, args.r, args.s, args.t, args.a))
    m = RunManifest("kernel", {"kind": kind, "t": args.t, "a": args.a, "r": args.r, "s": args.s,
                               "xi": args.xi, **vals})
    _emit(args, "kernel.json", dumps(out), m)
    _finish(args, m, t0)
    return EXIT_OK


def _energy(e: kernels.EnergyResult) -> dict:
    return {"value": e.value, "abs_err": e.abs_err, "cutoff": e.cutoff, "tail_bound": e.tail_bound}


def cmd_regime(args) -> int:
    t0 = time.perf_counter()
    vals = resolve(args, _param_keys(), {})
    rep = regimes.regime_report(params_from(vals))
    m = RunManifest("regime", vals)
    _emit(args, "regime.json", dumps(rep.as_dict()), m)
    _finish(args, m, t0)
    return EXIT_OK


def parse_grid(text: str) -> list[tuple[str, np.ndarray]]:
    """``H=0.05:0.45:0.05,H0=0.5:0.95:0.05`` -> [(name, values), ...], end points inclusive."""
    axes = []
    for part in text.split(","):
        if "=" not in part:
            raise UsageError(f"bad grid axis {part!r}")
        name, rng_ = (s.strip() for s in part.split("=", 1))
        if name not in PARAM_NAMES:
            raise UsageError(f"unknown parameter {name!r}")
        try:
            lo, hi, step = (float(s) for s in rng_.split(":"))
        except ValueError:
            raise UsageError(f"bad range {rng_!r}; expected lo:hi:step")
        if not step > 0 or hi < lo or not all(map(math.isfinite, (lo, hi, step))):
            raise UsageError(f"invalid range {rng_!r}")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        if n > 100000:
            raise UsageError(f"range {rng_!r} has too many points")
        axes.append((name, np.round(lo + step * np.arange(n), 12)))
    if len({a[0] for a in axes}) != len(axes):
        raise UsageError("repeated grid axis")
    return axes


SWEEP_FIELDS = ("exists", "margin", "theta", "lambda_exp", "p_exp", "t_exp", "rho", "kappa",
                "rho_capped", "kappa_capped", "time_holder_valid")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return format(float(v), ".17g")


def sweep_rows(base: dict, axes) -> list[dict]:
    names = [a[0] for a in axes]
    mesh = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    points = [dict(zip(names, map(float, vals))) for vals in zip(*[m.ravel() for m in mesh])]

    def one(pt):
        p = params_from({**base, **pt})
        return {**pt, **regimes.regime_report(p).as_dict()}

    with ThreadPoolExecutor(max_workers=threads()) as ex:
        return list(ex.map(one, points))


def region_svg(rows: list[dict], x: str, y: str, cell: int = 12) -> str:
    """Two-tone map of the exists flag over a 2-D grid."""
    xs = sorted({r[x] for r in rows})
    ys = sorted({r[y] for r in rows})
    w, h = cell * len(xs), cell * len(ys)
    pad = 40
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w + 2 * pad}" height="{h + 2 * pad}">',
           f'<rect x="0" y="0" width="{w + 2 * pad}" height="{h + 2 * pad}" fill="white"/>']
    for r in rows:
        i, j = xs.index(r[x]), ys.index(r[y])
        colour = "#2b6cb0" if r["exists"] else "#e2e8f0"
        out.append(f'<rect x="{pad + i * cell}" y="{pad + h - (j + 1) * cell}" width="{cell}" '
                   f'height="{cell}" fill="{colour}"/>')
    out.append(f'<text x="{pad + w / 2}" y="{h + 2 * pad - 10}" text-anchor="middle" '
               f'font-size="14">{x} ({xs[0]:g} to {xs[-1]:g})</text>')
    out.append(f'<text x="14" y="{pad + h / 2}" text-anchor="middle" font-size="14" '
               f'transform="rotate(-90 14 {pad + h / 2})">{y} ({ys[0]:g} to {ys[-1]:g})</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    vals = resolve(args, _param_keys(), {})
    axes = parse_grid(args.grid)
    rows = sweep_rows(vals, axes)
    cols = [a[0] for a in axes] + list(SWEEP_FIELDS)
    lines = [",".join(cols)] + [",".join(_csv_cell(r[c]) for c in cols) for r in rows]
    m = RunManifest("sweep", {"grid": args.grid, **vals})
    _emit(args, "sweep.csv", "\n".join(lines) + "\n", m)
    if args.svg:
        if len(axes) != 2:
            raise UsageError("--svg needs a two-axis grid")
        Path(args.svg).write_text(region_svg(rows, axes[0][0], axes[1][0]))
        m.outputs.append(args.svg)
    _finish(args, m, t0)
    return EXIT_OK


def cmd_chaos(args) -> int:
    t0 = time.perf_counter()
    vals = resolve(args, _param_keys(), {})
    p = params_from(vals)
    kw = {}
    if p.H0 == 0.5 and args.method:
        kw["method"] = args.method
    total, terms = chaos.second_moment_truncated(p, args.t, args.n, **kw)
    out = {"t": args.t, "n": args.n, "terms": [r.as_dict() for r in terms],
           "second_moment_truncated": total}
    m = RunManifest("chaos", {"n": args.n, "t": args.t, "method": args.method, **vals})
    _emit(args, "chaos.json", dumps(out), m)
    _finish(args, m, t0)
    return EXIT_OK


_SIM_KEYS = {"t_max": float, "n_time": int, "L": float, "n_modes": int, "n_paths": int,
             "seed": int, "n_chaos_ref": int}


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    keys = {**_param_keys(), **_SIM_KEYS}
    vals = resolve(args, keys, {"H0": 0.5})
    p = params_from(vals)
    cfg_kw = {k: vals[k] for k in _SIM_KEYS if k in vals}
    cfg = sim.SimConfig(p, workers=threads(), **cfg_kw)
    ens = sim.simulate_paths(cfg)
    est = sim.estimate_moments(ens, (2, 4), x=None if args.x is None else args.x)
    m = RunManifest("simulate", {**cfg.as_dict(), "x": args.x}, seed=cfg.seed)
    if args.out:
        _emit(args, "ensemble.csv", ens.to_csv(args.x_stride), m)
    _emit(args, "estimate.json", dumps(est.as_dict()), m)
    _finish(args, m, t0)
    return EXIT_OK


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    suites = list(verify.SUITES) if args.suite == "all" else [args.suite]
    res = verify.run(suites)
    m = RunManifest("verify", {"suite": args.suite})
    _emit(args, "verify.txt", verify.format_table(res), m)
    _finish(args, m, t0)
    return EXIT_OK if all(r.passed for r in res) else EXIT_FAIL


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracspde", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=_version())
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--out", default=None, help="write files into this directory")
        sp.set_defaults(func=fn)
        return sp

    sp = add("mlf", cmd_mlf, "Mittag-Leffler function E_{a,b}(z)")
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--b", type=float, required=True)
    sp.add_argument("--z", type=float, required=True)
    sp.add_argument("--tol", type=float, default=mlf.DEFAULT_TOL)

    sp = add("kernel", cmd_kernel, "Fourier kernels and their weighted energies")
    _add_param_flags(sp)
    sp.add_argument("--kind", choices=_KERNEL_KINDS, default="weighted_energy")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--xi", default="1.0", help="comma-separated frequencies")
    sp.add_argument("--a", type=float, default=0.0, help="weight exponent")
    sp.add_argument("--r", type=float, default=0.0)
    sp.add_argument("--s", type=float, default=1.0)

    sp = add("regime", cmd_regime, "existence, growth and Hoelder exponents")
    _add_param_flags(sp)

    sp = add("sweep", cmd_sweep, "regime report over a parameter grid, as CSV")
    _add_param_flags(sp)
    sp.add_argument("--grid", required=True, help="e.g. H=0.05:0.45:0.05,H0=0.5:0.95:0.05")
    sp.add_argument("--svg", default=None, help="write a two-tone existence map")

    sp = add("chaos", cmd_chaos, "chaos terms and the truncated second moment")
    _add_param_flags(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--method", choices=[m.value for m in chaos.Method], default=None)

    sp = add("simulate", cmd_simulate, "Monte Carlo paths and moment estimates")
    _add_param_flags(sp)
    sp.add_argument("--t-max", dest="t_max", type=float, default=None)
    sp.add_argument("--n-time", dest="n_time", type=int, default=None)
    sp.add_argument("--L", type=float, default=None)
    sp.add_argument("--n-modes", dest="n_modes", type=int, default=None)
    sp.add_argument("--n-paths", dest="n_paths", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--n-chaos-ref", dest="n_chaos_ref", type=int, default=None)
    sp.add_argument("--x", type=float, default=None, help="moment location; default averages over x")
    sp.add_argument("--x-stride", dest="x_stride", type=int, default=1)

    sp = add("verify", cmd_verify, "run the identity and property checks")
    sp.add_argument("--suite", choices=list(verify.SUITES) + ["all"], default="all")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, FracSPDEError, ValueError) as e:
        if isinstance(e, NonConvergence):
            print(f"error: {e}", file=sys.stderr)
            return EXIT_FAIL
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

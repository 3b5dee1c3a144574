"""
Command-line front end.

Commands
--------
solve     one wave per branch at a single omega
sweep     continuation over an omega range with L+- spectra and stability
evans     root of the half-line Evans function and its finite-difference check
counts    negative / zero eigenvalue counts of L- and L+
figures   plot-ready datasets (profiles, spectra versus omega, stability)

Every command writes into the output directory (``--out``, overridden by the
``TADPOLE_OUT`` environment variable). Exit status is 0 on success, 2 when a
solve or continuation stopped early (whatever was computed is still written),
and 1 on configuration or other errors.
"""

import argparse
import csv
import hashlib
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, ContinuationStalled, NewtonDiverged, TadpoleError)
from .graph import build_grid
from .scalar_waves import omega_n
from .spectra import (evans_F, find_Lambda0, halfline_neumann_eigs, spectrum_rows,
                      wave_spectrum)
from .stability import stability_rows, stability_spectrum, sweep_stability
from .stationary import Branch, continue_branch, profile_rows, solve_wave

SCHEMA = 1
EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2
N_EIGS = 6

FIGURES = {
    "1": "vanishing-tail profiles (n = 1, 2) at omega = -1",
    "1c": "coupled profiles (primary, higher n = 1, 2, both signs) at omega = -1",
    "2": "lowest six eigenvalues of L- and L+ versus omega, vanishing-tail n = 1, 2",
    "3": "lowest six eigenvalues of L- and L+ versus omega, higher branches n = 1, 2",
    "4": "stability spectrum on the complex plane at omega = -1, vanishing-tail n = 1, 2",
    "5": "unstable eigenvalues versus omega, vanishing-tail n = 1, 2",
}
FIGURE_RANGE = (-0.05, -4.0, 80)


# --- configuration -----------------------------------------------------------

@dataclass
class RunConfig:
    p: float = 1.0
    L: float = math.pi
    L_inf: float = 2.0 * math.pi
    n_ring: int = 100
    branches: list = field(default_factory=list)
    omega: float = None
    omega_grid: dict = None  # {"start", "end", "steps"}
    newton_tol: float = 1e-10
    zero_tol: float = None
    tol_re: float = None
    tol_im: float = None
    out: str = "tadpole_out"
    workers: int = 1
    which: list = field(default_factory=list)
    shift_a: float = 0.0

    def omegas(self):
        if self.omega_grid is not None:
            g = self.omega_grid
            return [float(w) for w in np.linspace(g["start"], g["end"], g["steps"])]
        if self.omega is not None:
            return [float(self.omega)]
        return []

    def canonical(self):
        """Everything that influences numerical output (not out/workers)."""
        return {"p": self.p, "L": self.L, "L_inf": self.L_inf, "n_ring": self.n_ring,
                "branches": [str(b) for b in self.branches], "omega": self.omega,
                "omega_grid": self.omega_grid, "newton_tol": self.newton_tol,
                "zero_tol": self.zero_tol, "tol_re": self.tol_re, "tol_im": self.tol_im,
                "which": list(self.which), "shift_a": self.shift_a}

    def config_hash(self):
        blob = json.dumps(_jsonable(self.canonical()), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_KEYS = {"p", "L", "L_inf", "n_ring", "branch", "branches", "omega", "omega_grid",
         "omega_range", "tolerances", "newton_tol", "zero_tol", "tol_re", "tol_im", "out",
         "workers", "which", "shift_a"}
_TOL_KEYS = ("newton_tol", "zero_tol", "tol_re", "tol_im")


def _line_of(text, key):
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def parse_omega_range(text):
    """``a:b:steps`` into a start/end/steps dict."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"omega range {text!r} must look like start:end:steps")
    try:
        start, end, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"omega range {text!r} has a non-numeric field") from None
    return {"start": start, "end": end, "steps": steps}


def _parse_branch(spec):
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "primary":
            return Branch("primary")
        sign = spec.get("sign", 1)
        sign = {"+": 1, "-": -1}.get(sign, sign)
        return Branch(kind, int(spec.get("n", 0)), int(sign))
    return Branch.parse(str(spec))


def load_config_file(path):
    """Read a JSON config into a dict of RunConfig field values.

    Errors carry ``path:line`` so a bad entry can be found directly.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}:1: top level must be a JSON object")

    def fail(key, msg):
        line = _line_of(text, key)
        where = f"{path}:{line}" if line else path
        raise ConfigError(f"{where}: {key}: {msg}")

    values = {}
    for key, val in raw.items():
        if key not in _KEYS:
            fail(key, "unknown key")
        try:
            if key in ("branch", "branches"):
                items = val if isinstance(val, list) else [val]
                values["branches"] = [_parse_branch(b) for b in items]
            elif key in ("omega_grid", "omega_range"):
                if isinstance(val, str):
                    values["omega_grid"] = parse_omega_range(val)
                else:
                    values["omega_grid"] = {"start": float(val["start"]),
                                            "end": float(val["end"]),
                                            "steps": int(val["steps"])}
            elif key == "tolerances":
                for tk, tv in val.items():
                    if tk not in _TOL_KEYS:
                        fail(tk, "unknown tolerance")
                    values[tk] = float(tv)
            elif key in ("n_ring", "workers"):
                if int(val) != val:
                    fail(key, f"expected an integer, got {val!r}")
                values[key] = int(val)
            elif key == "out":
                values[key] = str(val)
            elif key == "which":
                values[key] = [str(v) for v in (val if isinstance(val, list) else [val])]
            else:
                values[key] = float(val)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError, TadpoleError) as exc:
            fail(key, str(exc) or type(exc).__name__)
    return values


def validate(cfg, command):
    """Range checks; raises ConfigError with the offending field named."""
    if not cfg.p > 0:
        raise ConfigError(f"p must be positive, got {cfg.p}")
    if not cfg.L > 0:
        raise ConfigError(f"L must be positive, got {cfg.L}")
    if not cfg.L_inf > cfg.L:
        raise ConfigError(f"L_inf must exceed L, got L={cfg.L}, L_inf={cfg.L_inf}")
    if cfg.n_ring < 4:
        raise ConfigError(f"n_ring must be at least 4, got {cfg.n_ring}")
    for name in _TOL_KEYS:
        v = getattr(cfg, name)
        if v is not None and not v > 0:
            raise ConfigError(f"{name} must be positive, got {v}")
    if cfg.workers < 1:
        raise ConfigError(f"workers must be at least 1, got {cfg.workers}")
    if cfg.omega_grid is not None and cfg.omega_grid["steps"] < 1:
        raise ConfigError(f"omega range needs at least one step, got {cfg.omega_grid['steps']}")
    if command in ("solve", "sweep", "counts"):
        if not cfg.branches:
            raise ConfigError(f"{command} needs at least one --branch")
        if not cfg.omegas():
            raise ConfigError(f"{command} needs --omega or --omega-range")
        if command == "sweep" and len(cfg.omegas()) < 2:
            raise ConfigError("sweep needs --omega-range with at least two steps")
        for b in cfg.branches:
            for w in cfg.omegas():
                if b.kind == "vanishing_tail":
                    wn = omega_n(b.n, cfg.L)
                    if not w < wn:
                        raise ConfigError(f"{b} needs omega < {wn:.15g}, got {w}")
                elif not w < 0:
                    raise ConfigError(f"{b} needs omega < 0, got {w}")
    if command == "figures":
        for w in cfg.which:
            if w not in FIGURES:
                raise ConfigError(f"unknown figure {w!r}; choose from {sorted(FIGURES)}")


def build_config(args):
    """Defaults, then the JSON config, then explicit flags."""
    values = load_config_file(args.config) if args.config else {}
    flags = {"p": args.p, "L": args.L, "L_inf": args.L_inf, "n_ring": args.n_ring,
             "newton_tol": args.newton_tol, "zero_tol": args.zero_tol,
             "tol_re": args.tol_re, "tol_im": args.tol_im, "out": args.out,
             "workers": args.workers, "shift_a": args.shift_a}
    values.update({k: v for k, v in flags.items() if v is not None})
    try:
        if args.branch:
            values["branches"] = [Branch.parse(b) for b in args.branch]
    except TadpoleError as exc:
        raise ConfigError(f"--branch: {exc}") from None
    if args.omega is not None:
        values["omega"] = args.omega
        values.pop("omega_grid", None)
    if args.omega_range is not None:
        values["omega_grid"] = parse_omega_range(args.omega_range)
    if args.which:
        values["which"] = list(args.which)
    env_out = os.environ.get("TADPOLE_OUT")
    if env_out:
        values["out"] = env_out
    cfg = RunConfig(**values)
    if args.command == "figures" and not cfg.which:
        cfg.which = sorted(FIGURES)
    return cfg


# --- artifact writing --------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (Branch,)):
        return str(obj)
    return obj


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.15g" % float(v)
    return str(v)


class Writer:
    """Serialized artifact output with self-describing headers."""

    def __init__(self, cfg, command):
        self.cfg = cfg
        self.command = command
        self.outdir = cfg.out
        self.grid = build_grid(cfg.L, cfg.L_inf, cfg.n_ring)
        self.files = []
        os.makedirs(self.outdir, exist_ok=True)

    def header(self):
        g = self.grid
        return [f"# tadpole {self.command} schema={SCHEMA}",
                f"# config_hash={self.cfg.config_hash()} p={_fmt(self.cfg.p)}",
                f"# grid L={_fmt(g.L)} L_inf={_fmt(g.L_inf)} h={_fmt(g.h)}"
                f" n_ring={g.n_ring} n_tail={g.n_tail}"]

    def csv(self, name, columns, rows):
        path = os.path.join(self.outdir, name)
        rows = sorted(rows, key=_sort_key)
        with open(path, "w", newline="") as fh:
            for line in self.header():
                fh.write(line + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
        self.files.append(name)
        return path

    def summary(self, payload, status):
        doc = {"schema": SCHEMA, "command": self.command, "status": status,
               "config": self.cfg.canonical(), "config_hash": self.cfg.config_hash(),
               "grid": self.grid.describe(), "artifacts": sorted(self.files)}
        doc.update(payload)
        path = os.path.join(self.outdir, "summary.json")
        with open(path, "w") as fh:
            json.dump(_jsonable(doc), fh, sort_keys=True, indent=2)
            fh.write("\n")
        return path


def _sort_key(row):
    # strings compare as strings, numbers as numbers, NaN last
    key = []
    for v in row:
        if isinstance(v, str):
            key.append((0, v, 0.0))
        else:
            f = float(v)
            key.append((1, "", f) if math.isfinite(f) else (2, "", 0.0))
    return key


# --- computations ------------------------------------------------------------

def _grid(cfg):
    return build_grid(cfg.L, cfg.L_inf, cfg.n_ring)


def branch_waves(cfg, branch, omegas, grid):
    """Waves along ``omegas`` and an error record (None on full success)."""
    try:
        if len(omegas) == 1:
            return [solve_wave(branch, omegas[0], cfg.p, grid, tol=cfg.newton_tol)], None
        return continue_branch(branch, omegas[0], omegas[-1], len(omegas), cfg.p, grid,
                               tol=cfg.newton_tol), None
    except ContinuationStalled as exc:
        return list(exc.partial), _error_record(branch, exc, omegas)
    except NewtonDiverged as exc:
        return [], _error_record(branch, exc, omegas)


def _error_record(branch, exc, omegas):
    rec = {"branch": str(branch), "error": type(exc).__name__, "message": str(exc),
           "omega_range": [omegas[0], omegas[-1]]}
    for attr in ("residual_norm", "iterations"):
        if getattr(exc, attr, None) is not None:
            rec[attr] = getattr(exc, attr)
    return rec


def _map(cfg, fn, items):
    if cfg.workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _spectra(cfg, wave):
    return [wave_spectrum(wave, which, zero_tol=cfg.zero_tol) for which in ("minus", "plus")]


def _spectrum_csv_rows(branch, reports):
    return [[str(branch)] + spectrum_rows(r, N_EIGS) for r in reports]


SPECTRA_COLUMNS = ["branch", "operator", "omega"] + \
    [f"lambda_{i}" for i in range(1, N_EIGS + 1)] + ["n_neg", "n_zero"]
PROFILE_COLUMNS = ["branch", "omega", "x", "value", "segment"]
STABILITY_COLUMNS = ["branch", "omega", "re", "im", "class"]


def _profile_csv_rows(wave):
    return [(str(wave.branch), wave.omega, x, v, seg) for x, v, seg in profile_rows(wave)]


def _stability_csv_rows(branch, report):
    return [(str(branch),) + tuple(r) for r in stability_rows(report)]


def _wave_summary(wave):
    s = wave.summary()
    for key in ("a_error", "b_error"):
        if key in wave.meta:
            s[key] = wave.meta[key]
    return s


def cmd_solve(cfg, writer):
    grid = _grid(cfg)
    omegas = cfg.omegas()
    results = _map(cfg, lambda b: (b, branch_waves(cfg, b, omegas, grid)), cfg.branches)
    rows, waves, errors = [], [], []
    for b, (ws, err) in results:
        for w in ws:
            rows += _profile_csv_rows(w)
            waves.append(_wave_summary(w))
        if err:
            errors.append(err)
    writer.csv("profiles.csv", PROFILE_COLUMNS, rows)
    return {"waves": waves, "errors": errors}, bool(errors)


def cmd_sweep(cfg, writer):
    grid = _grid(cfg)
    omegas = cfg.omegas()

    def run(branch):
        waves, err = branch_waves(cfg, branch, omegas, grid)
        spectra = [_spectra(cfg, w) for w in waves]
        sweep = sweep_stability(waves, cfg.tol_re, cfg.tol_im, cfg.zero_tol)
        return branch, waves, err, spectra, sweep

    profiles, spec_rows, stab_rows, branches, errors = [], [], [], [], []
    for branch, waves, err, spectra, sweep in _map(cfg, run, cfg.branches):
        samples = []
        for w, (sm, sp), rep in zip(waves, spectra, sweep.reports):
            profiles += _profile_csv_rows(w)
            spec_rows += _spectrum_csv_rows(branch, (sm, sp))
            stab_rows += _stability_csv_rows(branch, rep)
            samples.append({"wave": _wave_summary(w), "L_minus": sm.counts(),
                            "L_plus": sp.counts(), "stability": rep.summary()})
        branches.append({"branch": str(branch), "samples": samples,
                         "transitions": [dict(zip(("omega_before", "omega_after", "field",
                                                   "before", "after"), t))
                                         for t in sweep.transitions],
                         "omega_star": sweep.omega_star})
        if err:
            errors.append(err)
    writer.csv("profiles.csv", PROFILE_COLUMNS, profiles)
    writer.csv("spectra.csv", SPECTRA_COLUMNS, spec_rows)
    writer.csv("stability.csv", STABILITY_COLUMNS, stab_rows)
    return {"branches": branches, "errors": errors}, bool(errors)


def cmd_counts(cfg, writer):
    grid = _grid(cfg)
    omegas = cfg.omegas()

    def run(branch):
        waves, err = branch_waves(cfg, branch, omegas, grid)
        return branch, waves, err, [_spectra(cfg, w) for w in waves]

    table, rows, errors = [], [], []
    for branch, waves, err, spectra in _map(cfg, run, cfg.branches):
        for w, (sm, sp) in zip(waves, spectra):
            table.append({"branch": str(branch), "omega": w.omega, "L_minus": sm.counts(),
                          "L_plus": sp.counts(), "zero_tol": sm.zero_tol})
            rows += _spectrum_csv_rows(branch, (sm, sp))
        if err:
            errors.append(err)
    writer.csv("spectra.csv", SPECTRA_COLUMNS, rows)
    payload = {"counts": table, "errors": errors}
    if len(table) == 1 and not errors:
        payload["L_minus"] = table[0]["L_minus"]
        payload["L_plus"] = table[0]["L_plus"]
    return payload, bool(errors)


def cmd_evans(cfg, writer):
    # L+ carries the negative root; for L- the zero of F sits at Lambda = 0
    plus = {"Lambda0": find_Lambda0(cfg.p, a=cfg.shift_a, variant="plus")}
    if cfg.shift_a == 0.0:
        plus["finite_difference_check"] = float(halfline_neumann_eigs(cfg.p, "plus")[0])
    minus = {"Lambda0": None,
             "F_at_minus_1e-8": evans_F(-1e-8, cfg.p, a=cfg.shift_a, variant="minus").F}
    return {"evans": {"p": cfg.p, "a": cfg.shift_a,
                      "roots": {"plus": plus, "minus": minus}}}, False


def _figure_sweep(cfg, branches, grid, rng):
    omegas = [float(w) for w in np.linspace(*rng)]
    return _map(cfg, lambda b: (b,) + branch_waves(cfg, b, omegas, grid), branches)


def cmd_figures(cfg, writer):
    grid = _grid(cfg)
    rng = FIGURE_RANGE
    if cfg.omega_grid is not None:
        g = cfg.omega_grid
        rng = (g["start"], g["end"], g["steps"])
    vt = [Branch("vanishing_tail", n, 1) for n in (1, 2)]
    higher = [Branch("higher", n, 1) for n in (1, 2)]
    coupled = [Branch("primary")] + [Branch("higher", n, s) for n in (1, 2) for s in (1, -1)]
    errors, datasets = [], {}

    def name(prefix, b):
        return f"{prefix}_{b.kind}_n{b.n}.csv" if b.kind != "primary" else f"{prefix}_primary.csv"

    def single(branches):
        res = _map(cfg, lambda b: (b,) + branch_waves(cfg, b, [-1.0], grid), branches)
        for b, ws, err in res:
            if err:
                errors.append(err)
        return [(b, ws[0]) for b, ws, err in res if ws]

    for which in cfg.which:
        files = []
        if which in ("1", "1c"):
            for b, w in single(vt if which == "1" else coupled):
                if which == "1c" and b.kind == "higher":
                    fname = f"figure1c_higher_n{b.n}{'p' if b.sign > 0 else 'm'}.csv"
                else:
                    fname = name(f"figure{which}", b)
                files.append(writer.csv(fname, PROFILE_COLUMNS, _profile_csv_rows(w)))
        elif which in ("2", "3"):
            for b, ws, err in _figure_sweep(cfg, vt if which == "2" else higher, grid, rng):
                if err:
                    errors.append(err)
                rows = []
                for w in ws:
                    rows += _spectrum_csv_rows(b, _spectra(cfg, w))
                files.append(writer.csv(name(f"figure{which}", b), SPECTRA_COLUMNS, rows))
        elif which == "4":
            for b, w in single(vt):
                rep = stability_spectrum(w, cfg.tol_re, cfg.tol_im, cfg.zero_tol)
                files.append(writer.csv(name("figure4", b), STABILITY_COLUMNS,
                                        _stability_csv_rows(b, rep)))
        elif which == "5":
            for b, ws, err in _figure_sweep(cfg, vt, grid, rng):
                if err:
                    errors.append(err)
                rows = []
                for w in ws:
                    rep = stability_spectrum(w, cfg.tol_re, cfg.tol_im, cfg.zero_tol)
                    rows += [r for r in _stability_csv_rows(b, rep)
                             if r[4] in ("real", "quartet")]
                files.append(writer.csv(name("figure5", b), STABILITY_COLUMNS, rows))
        datasets[which] = {"description": FIGURES[which],
                           "files": sorted(os.path.basename(f) for f in files)}
    return {"figures": datasets, "errors": errors}, bool(errors)


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "counts": cmd_counts,
            "evans": cmd_evans, "figures": cmd_figures}


# --- entry point -------------------------------------------------------------

def make_parser():
    parser = argparse.ArgumentParser(prog="tadpole",
                                     description="Standing waves on a tadpole graph.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config file; flags override its entries")
    parser.add_argument("--p", type=float, help="nonlinearity power (default 1)")
    parser.add_argument("--L", type=float, help="ring half-length (default pi)")
    parser.add_argument("--L-inf", dest="L_inf", type=float,
                        help="truncation point of the tail (default 2 pi)")
    parser.add_argument("--n-ring", dest="n_ring", type=int,
                        help="grid intervals on the ring (default 100)")
    parser.add_argument("--branch", action="append",
                        help="primary, vanishing_tail:n:+/-, or higher:n:+/- (repeatable)")
    parser.add_argument("--omega", type=float, help="single frequency")
    parser.add_argument("--omega-range", dest="omega_range", help="start:end:steps")
    parser.add_argument("--out", help="output directory (TADPOLE_OUT overrides)")
    parser.add_argument("--workers", type=int, help="thread pool size")
    parser.add_argument("--zero-tol", dest="zero_tol", type=float)
    parser.add_argument("--newton-tol", dest="newton_tol", type=float)
    parser.add_argument("--tol-re", dest="tol_re", type=float)
    parser.add_argument("--tol-im", dest="tol_im", type=float)
    parser.add_argument("--shift-a", dest="shift_a", type=float,
                        help="soliton shift for the evans command (default 0)")
    parser.add_argument("--which", action="append", help="figure id (repeatable)")
    return parser


def run(command, cfg):
    """Execute ``command`` under ``cfg``; returns the exit status."""
    validate(cfg, command)
    writer = Writer(cfg, command)
    try:
        payload, partial = COMMANDS[command](cfg, writer)
    except TadpoleError as exc:
        writer.summary({"errors": [{"error": type(exc).__name__, "message": str(exc)}]},
                       "error")
        raise
    status = "partial" if partial else "ok"
    writer.summary(payload, status)
    for err in payload.get("errors", []):
        print(f"tadpole: {err['branch']} over omega {err['omega_range']}: "
              f"{err['error']}: {err['message']}", file=sys.stderr)
    return EXIT_PARTIAL if partial else EXIT_OK


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        return run(args.command, cfg)
    except ConfigError as exc:
        print(f"tadpole: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except TadpoleError as exc:
        print(f"tadpole: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

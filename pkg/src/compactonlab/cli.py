"""Command-line front end: ``compactonlab {pattern,tables,spectrum,orbit,flow,blowup}``.

Every command writes CSV for arrays and JSON for scalar reports into the
output directory (``--out`` or $COMPACTONLAB_OUT). Floats in CSV use 17
significant digits, JSON keys are sorted and no timestamps are written, so
equal configs give byte-identical files. On solver failure a diagnostics JSON
is written and the exit code is 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("compactonlab")

EXIT_FAILURE = 2

# Critical values printed for the genus-two and genus-three classes (m = 2, n = 1)
REFERENCE_TABLES = {
    "1": [("+2", 1.6203), ("-2,1,+2", 1.8855), ("+2,2,+2", 1.9255), ("-2,3,+2", 1.9268),
          ("+2,4,+2", 1.9269), ("+2,inf,+2", 1.9269), ("+4", 1.9488)],
    "2": [("+2,1,-2,1,+2", 2.0710), ("+2,2,+2,2,+2", 2.1305), ("+2,3,-2,3,+2", 2.1322),
          ("+2,inf,+2,inf,+2", 2.1324), ("+6", 2.1647)],
}

DEFAULTS = {
    "pattern": {"m": 2, "n": 1.0, "sigma": "+2", "R": None, "h": None, "npts": None,
                "eps_schedule": [1e-2, 1e-3, 1e-4, 1e-7], "tol": 1e-9, "max_iter": 60},
    "tables": {"table": "all", "m": 2, "n": 1.0, "h": None, "eps_schedule": [1e-2, 1e-3, 1e-4, 1e-7], "tol": 1e-9},
    "spectrum": {"m": 1, "n": 1.0, "R": 2.5 * math.pi, "npts": 401, "kmax": 8},
    "orbit": {"m": 2, "n": 1.0, "limit": "none", "stationary": False, "periods": 3, "rtol": 1e-10},
    "flow": {"m": 2, "n": 1.0, "sigma": "+2", "R": None, "h": 0.02, "eps": 1e-4, "tol": 1e-6,
             "tau_max": 2000.0, "dtau": 0.1, "noise": 0.0},
    "blowup": {"n": 1.0, "L": 3 * math.pi, "npts": 301, "t_end": 2.0, "blowcap": 1e6, "amplitude": 1.0,
               "source": "auto", "control_L": 0.9 * math.pi, "sup_max": 1e3},
}


# ---------------------------------------------------------------- config

@dataclass
class RunConfig:
    command: str
    options: dict = field(default_factory=dict)
    out: str = "out"
    jobs: int = 1
    seed: int = 0

    def to_dict(self) -> dict:
        return {"command": self.command, "options": dict(self.options), "out": self.out,
                "jobs": self.jobs, "seed": self.seed, "version": __version__}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(command=d["command"], options=dict(d.get("options", {})), out=d.get("out", "out"),
                   jobs=int(d.get("jobs", 1)), seed=int(d.get("seed", 0)))

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


def resolve_config(command: str, file_cfg: dict | None, cli_opts: dict, out: str | None, jobs, seed) -> RunConfig:
    """Defaults, then the config file, then explicit flags; $COMPACTONLAB_OUT wins for the directory."""
    opts = dict(DEFAULTS[command])
    base = RunConfig.from_dict(file_cfg) if file_cfg else RunConfig(command)
    if file_cfg and base.command != command:
        raise SystemExit(f"config file is for {base.command!r}, not {command!r}")
    opts.update(base.options)
    opts.update({k: v for k, v in cli_opts.items() if v is not None})
    unknown = set(opts) - set(DEFAULTS[command])
    if unknown:
        raise SystemExit(f"unknown options for {command}: {sorted(unknown)}")
    out_dir = os.environ.get("COMPACTONLAB_OUT") or out or base.out
    return RunConfig(command, opts, out_dir, int(jobs if jobs is not None else base.jobs),
                     int(seed if seed is not None else base.seed))


# ---------------------------------------------------------------- emission

def _plain(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))
    return path


def write_csv(path: Path, columns: dict) -> Path:
    """Columns of equal length; header row, %.17g floats, LF endings."""
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], float) for k in names])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=",".join(names), comments="", newline="\n")
    return path


def write_table_csv(path: Path, rows: list[dict], keys: list[str]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow(["%.17g" % v if isinstance(v, float) else ("" if v is None else v)
                        for v in (r.get(k) for k in keys)])
    return path


def write_gnuplot(path: Path, csv_name: str, title: str, xlabel: str, ylabel: str, using: str = "1:2") -> Path:
    text = (f"set datafile separator ','\nset key autotitle columnhead\nset xlabel '{xlabel}'\n"
            f"set ylabel '{ylabel}'\nset title '{title}'\nplot '{csv_name}' using {using} with lines\n")
    path.write_text(text, encoding="utf-8")
    return path


def slug(sigma: str) -> str:
    return sigma.replace("+", "p").replace("-", "m").replace(",", "_")


class CommandFailed(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


# ---------------------------------------------------------------- commands

def _schedule(opts):
    s = opts["eps_schedule"]
    if isinstance(s, str):
        s = [float(x) for x in s.split(",")]
    return tuple(float(x) for x in s)


def _solve_one(sigma, m, n, R, h, schedule, tol, max_iter=60):
    from .bvp import solve_pattern
    from .variational import energy
    rep = solve_pattern(sigma, m, n, R=R, h=h, schedule=schedule, newton_tol=tol, max_iter=max_iter)
    return rep, energy(rep.final_profile)


def cmd_pattern(cfg: RunConfig) -> list[Path]:
    from .bvp import MaxIterExceeded, NewtonDiverged
    from .core import DomainTooSmall, MultiIndex
    o = cfg.options
    out = Path(cfg.out)
    sig = str(MultiIndex.parse(o["sigma"]))
    m, n = int(o["m"]), float(o["n"])
    h = o["h"]
    if o["npts"] is not None and o["R"] is not None:
        h = 2 * float(o["R"]) / (int(o["npts"]) - 1)
    stem = f"pattern_m{m}_{slug(sig)}"
    try:
        rep, e = _solve_one(sig, m, n, o["R"], h, _schedule(o), float(o["tol"]), int(o["max_iter"]))
    except (NewtonDiverged, MaxIterExceeded) as err:
        diag = {"error": f"{type(err).__name__}: {err}"}
        if getattr(err, "report", None) is not None:
            diag["report"] = err.report.summary()
        raise CommandFailed(str(err), dict(diag, stem=stem))
    except DomainTooSmall as err:
        raise CommandFailed(str(err), {"error": f"DomainTooSmall: {err}", "stem": stem})
    p = rep.final_profile
    files = [write_csv(out / f"{stem}.csv", {"y": p.y, "F": p.values})]
    report = {"report": rep.summary(), "energy": e.as_dict(), "cF": e.cF, "config": cfg.to_dict()}
    if m == 1 and sig == "+2":
        from .core import explicit_profile_m1
        try:
            ex = explicit_profile_m1(n, p.grid, "s2")
            report["explicit_sup_error"] = float(np.abs(p.values - ex.values).max())
        except DomainTooSmall:
            pass
    if not rep.converged:
        raise CommandFailed("not converged", dict(report, stem=stem))
    files.append(write_json(out / f"{stem}.json", report))
    files.append(write_gnuplot(out / f"{stem}.gp", f"{stem}.csv", f"F {sig}, m={m}, n={n:g}", "y", "F"))
    return files


def _table_job(args):
    sigma, m, n, h, schedule, tol = args
    try:
        rep, e = _solve_one(sigma, m, n, None, h, schedule, tol)
        return {"label": sigma, "cF": e.cF, "converged": rep.converged, "sign_changes": rep.sign_changes,
                "residual_inf": rep.residual_inf, "error": None}
    except Exception as err:  # one failing row must not abort the table
        return {"label": sigma, "cF": None, "converged": False, "sign_changes": None, "residual_inf": None,
                "error": f"{type(err).__name__}: {err}"}


def cmd_tables(cfg: RunConfig) -> list[Path]:
    from .variational import ordering_preserved
    o = cfg.options
    out = Path(cfg.out)
    which = ["1", "2"] if str(o["table"]) == "all" else [str(o["table"])]
    files = []
    failed = []
    for t in which:
        ref = REFERENCE_TABLES[t]
        jobs = [(s, int(o["m"]), float(o["n"]), o["h"], _schedule(o), float(o["tol"])) for s, _ in ref]
        if cfg.jobs > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
                rows = list(ex.map(_table_job, jobs))
        else:
            rows = [_table_job(j) for j in jobs]
        for r, (_, v) in zip(rows, ref):
            r["reference"] = v
            r["abs_diff"] = None if r["cF"] is None else abs(r["cF"] - v)
        vals = [r["cF"] if r["cF"] is not None else math.nan for r in rows]
        ok = all(r["converged"] for r in rows)
        order = ordering_preserved(vals, [v for _, v in ref], atol=5e-4) if ok else False
        files.append(write_table_csv(out / f"table{t}.csv", rows,
                                     ["label", "cF", "reference", "abs_diff", "converged", "sign_changes"]))
        files.append(write_json(out / f"table{t}.json", {"rows": rows, "ordering_preserved": order,
                                                          "config": cfg.to_dict()}))
        if not ok:
            failed += [r["label"] for r in rows if not r["converged"]]
    if failed:
        raise CommandFailed(f"rows failed: {failed}", {"failed": failed, "stem": "tables"})
    return files


def cmd_spectrum(cfg: RunConfig) -> list[Path]:
    from .variational import InsufficientSpectrum, ls_category, nonlocal_explicit, polyharmonic_spectrum
    o = cfg.options
    out = Path(cfg.out)
    m, R, npts, kmax = int(o["m"]), float(o["R"]), int(o["npts"]), int(o["kmax"])
    beta = (float(o["n"]) + 2) / (float(o["n"]) + 1)
    sp_ = polyharmonic_spectrum(m, R, npts, kmax)
    k = np.arange(1, sp_.count + 1)
    cols = {"k": k, "lambda": sp_.eigenvalues}
    if m == 1:
        cols["lambda_continuum"] = (k * np.pi / (2 * R)) ** 2
    stem = f"spectrum_m{m}"
    files = [write_csv(out / f"{stem}.csv", cols)]
    try:
        cat = ls_category(sp_)
    except InsufficientSpectrum as err:
        raise CommandFailed(str(err), {"error": str(err), "stem": stem})
    rep = {"category": cat, "eigenvalues": sp_.eigenvalues, "nonlocal": [{"l": l, "c": c} for l, c in
                                                                         nonlocal_explicit(sp_, beta)],
           "config": cfg.to_dict()}
    files.append(write_json(out / f"{stem}.json", rep))
    files.append(write_gnuplot(out / f"{stem}.gp", f"{stem}.csv", f"spectrum m={m}", "k", "lambda", "1:2"))
    return files


def _trajectory(eq, y0, periods, period, rtol):
    from scipy.integrate import solve_ivp
    from .tails import EPS_REL, _vector_field
    scale = float(np.abs(y0).max())
    S = periods * period
    s = np.linspace(0.0, S, 200 * periods + 1)
    sol = solve_ivp(_vector_field(eq, EPS_REL * scale), (0.0, S), y0, method="DOP853", rtol=rtol,
                    atol=1e-6 * rtol * scale, t_eval=s)
    return sol.t, sol.y


def cmd_orbit(cfg: RunConfig) -> list[Path]:
    from . import tails
    from .core import ProblemParams
    o = cfg.options
    out = Path(cfg.out)
    m, n = int(o["m"]), float(o["n"])
    if o["stationary"]:
        rec = tails.full_periodic_orbit_stationary(ProblemParams(m=m, n=n))
        stem = f"orbit_stationary_m{m}"
        d = rec.to_dict()
        files = [write_json(out / f"{stem}.json", dict(d, config=cfg.to_dict()))]
        from scipy.integrate import solve_ivp
        y = np.linspace(0, o["periods"] * rec.period, 400 * int(o["periods"]) + 1)
        sol = solve_ivp(tails._stationary_rhs(n), (0, y[-1]), rec.cauchy_data, method="DOP853",
                        rtol=1e-12, atol=1e-14, t_eval=y)
        files.append(write_csv(out / f"{stem}.csv", {"y": sol.t, "F": sol.y[0]}))
        return files
    limit = o["limit"]
    if limit == "inf":
        eq = tails.limit_infinite_n(m)
    elif limit == "small-n":
        eq = tails.scale_small_n(ProblemParams(m=m, n=n)).equation
    else:
        eq = tails.tail_equation(ProblemParams(m=m, n=n))
    try:
        if m % 2 == 0:
            rec = tails.periodic_even(eq, multipliers=True)
        else:
            rec = tails.periodic_odd_shoot(eq, d2_range=(-3e-3, 0.0) if limit == "small-n" else (-1e-3, 0.0))
    except (tails.NoConvergence, tails.BracketFailed) as err:
        raise CommandFailed(str(err), {"error": f"{type(err).__name__}: {err}", "stem": f"orbit_m{m}"})
    stem = f"orbit_m{m}_{limit}"
    d = rec.to_dict()
    if limit == "small-n":
        sc = tails.scale_small_n(ProblemParams(m=m, n=n))
        d["unscaled_amplitude"] = tails.unscaled_amplitude(rec, sc)
        d["unscaled_amplitude_matched"] = tails.unscaled_amplitude(rec, sc, matched=True)
    files = [write_json(out / f"{stem}.json", dict(d, config=cfg.to_dict()))]
    s, Y = _trajectory(eq, rec.cauchy_data, int(o["periods"]), rec.period, float(o["rtol"]))
    cols = {"s": s}
    cols.update({f"d{j}": Y[j] for j in range(Y.shape[0])})
    files.append(write_csv(out / f"{stem}.csv", cols))
    files.append(write_gnuplot(out / f"{stem}.gp", f"{stem}.csv", f"orbit m={m}", "s", "phi"))
    return files


def cmd_flow(cfg: RunConfig) -> list[Path]:
    from .bvp import pattern_guess
    from .flow import NotConverged, flow_to_steady
    from .variational import energy
    o = cfg.options
    out = Path(cfg.out)
    m, n = int(o["m"]), float(o["n"])
    g = pattern_guess(o["sigma"], m, n, R=o["R"], h=o["h"], epsilon=float(o["eps"]))
    w = g.values
    if o["noise"]:
        rng = np.random.default_rng(cfg.seed)
        w = w + float(o["noise"]) * rng.standard_normal(w.size)
        w[0] = w[-1] = 0.0
    from .core import Profile
    from .flow import to_flow_form
    w0 = to_flow_form(Profile(g.grid, w, g.params))
    stem = f"flow_m{m}_{slug(str(o['sigma']))}"
    try:
        rep, tr = flow_to_steady(w0, dtau0=float(o["dtau"]), tol=float(o["tol"]), tau_max=float(o["tau_max"]))
    except NotConverged as err:
        diag = {"error": str(err), "stem": stem}
        if err.report is not None:
            diag["report"] = err.report.summary()
        raise CommandFailed(str(err), diag)
    p = rep.final_profile
    e = energy(p)
    lyap_monotone = tr.monotone()
    files = [write_csv(out / f"{stem}.csv", {"y": p.y, "F": p.values}),
             write_csv(out / f"{stem}_lyapunov.csv", {"tau": tr.tau, "L": tr.lyapunov}),
             write_json(out / f"{stem}.json", {"report": rep.summary(), "energy": e.as_dict(), "cF": e.cF,
                                               "rejected": tr.rejected, "lyapunov_monotone": lyap_monotone,
                                               "lyapunov_min_increment": tr.min_increment(),
                                               "config": cfg.to_dict()}),
             write_gnuplot(out / f"{stem}.gp", f"{stem}.csv", "flow steady state", "y", "F")]
    return files


def cmd_blowup(cfg: RunConfig) -> list[Path]:
    from . import blowup as bu
    o = cfg.options
    out = Path(cfg.out)
    n, L, npts = float(o["n"]), float(o["L"]), int(o["npts"])
    theta = bu.separable_profile(n, L, npts, o["source"])
    u0 = float(o["amplitude"]) * theta
    stem = f"blowup_n{n:g}"
    try:
        run = bu.evolve_m1(u0, n, L, float(o["t_end"]), float(o["blowcap"]))
    except bu.StepCollapse as err:
        raise CommandFailed(str(err), {"error": str(err), "stem": stem})
    audit = bu.fourier_audit(run)
    drift = bu.selfsim_invariance(run, theta, sup_max=float(o["sup_max"]))
    ctrl = None
    if o["control_L"]:
        Lc = float(o["control_L"])
        x = np.linspace(0.0, Lc, npts)
        uc = 0.5 * np.sin(np.pi * x / Lc)
        rc = bu.evolve_m1(uc, n, Lc, float(o["t_end"]), float(o["blowcap"]))
        ctrl = {"L": Lc, "lambda1": rc.lambda1, "blown_up": rc.blown_up, "final_sup": float(rc.sup[-1]),
                "t_final": float(rc.J_times[-1])}
    files = [write_csv(out / f"{stem}_J.csv", {"t": run.J_times, "J": run.J, "sup": run.sup}),
             write_json(out / f"{stem}.json", {"audit": audit, "drift": drift, "blown_up": run.blown_up,
                                               "T_est": run.T_est, "control": ctrl, "config": cfg.to_dict()}),
             write_gnuplot(out / f"{stem}.gp", f"{stem}_J.csv", "J(t)", "t", "J")]
    return files


COMMANDS = {"pattern": cmd_pattern, "tables": cmd_tables, "spectrum": cmd_spectrum, "orbit": cmd_orbit,
            "flow": cmd_flow, "blowup": cmd_blowup}


# ---------------------------------------------------------------- parser

def _floats(text):
    return [float(x) for x in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="compactonlab", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON run config (see README for the schema)")
    p.add_argument("--out", help="output directory (COMPACTONLAB_OUT overrides)")
    p.add_argument("--jobs", type=int, help="worker processes for independent solves")
    p.add_argument("--seed", type=int, help="seed for optional random perturbations")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command")

    def ps(name, help_):
        return sub.add_parser(name, help=help_, argument_default=None)

    a = ps("pattern", "solve one pattern F_sigma")
    a.add_argument("--m", type=int)
    a.add_argument("--n", type=float)
    a.add_argument("--sigma", help='multiindex such as "+2,2,+2"')
    a.add_argument("--R", type=float)
    a.add_argument("--h", type=float)
    a.add_argument("--npts", type=int)
    a.add_argument("--eps-schedule", dest="eps_schedule", type=_floats)
    a.add_argument("--tol", type=float)
    a.add_argument("--max-iter", dest="max_iter", type=int)

    a = ps("tables", "critical values of the genus-two/three classes against reference values")
    a.add_argument("--table", choices=["1", "2", "all"])
    a.add_argument("--h", type=float)
    a.add_argument("--eps-schedule", dest="eps_schedule", type=_floats)
    a.add_argument("--tol", type=float)

    a = ps("spectrum", "Dirichlet polyharmonic eigenvalues, category count, non-local amplitudes")
    a.add_argument("--m", type=int)
    a.add_argument("--n", type=float)
    a.add_argument("--R", type=float)
    a.add_argument("--npts", type=int)
    a.add_argument("--kmax", type=int)

    a = ps("orbit", "periodic oscillatory component of the tail equation")
    a.add_argument("--m", type=int)
    a.add_argument("--n", type=float)
    a.add_argument("--limit", choices=["none", "small-n", "inf"])
    a.add_argument("--stationary", action="store_const", const=True)
    a.add_argument("--periods", type=int)
    a.add_argument("--rtol", type=float)

    a = ps("flow", "rescaled gradient flow to a steady state")
    a.add_argument("--m", type=int)
    a.add_argument("--n", type=float)
    a.add_argument("--sigma")
    a.add_argument("--R", type=float)
    a.add_argument("--h", type=float)
    a.add_argument("--eps", type=float)
    a.add_argument("--tol", type=float)
    a.add_argument("--tau-max", dest="tau_max", type=float)
    a.add_argument("--dtau", type=float)
    a.add_argument("--noise", type=float)

    a = ps("blowup", "m = 1 blow-up run with Fourier audit")
    a.add_argument("--n", type=float)
    a.add_argument("--L", type=float)
    a.add_argument("--npts", type=int)
    a.add_argument("--t-end", dest="t_end", type=float)
    a.add_argument("--blowcap", type=float)
    a.add_argument("--amplitude", type=float)
    a.add_argument("--source", choices=["auto", "explicit", "discrete"])
    a.add_argument("--control-L", dest="control_L", type=float)
    a.add_argument("--sup-max", dest="sup_max", type=float)
    return p


_GLOBAL = {"config", "out", "jobs", "seed", "verbose", "command"}


def _join_sigma(argv):
    """Glue "--sigma -2,1,+2" into one token; argparse would read -2,1,+2 as a flag."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--sigma" and i + 1 < len(argv):
            out.append(f"--sigma={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_sigma(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    file_cfg = None
    if args.config:
        file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    command = args.command or (file_cfg or {}).get("command")
    if command is None:
        parser.print_help()
        return 1
    cli_opts = {k: v for k, v in vars(args).items() if k not in _GLOBAL}
    cfg = resolve_config(command, file_cfg, cli_opts, args.out, args.jobs, args.seed)
    out = Path(cfg.out)
    try:
        files = COMMANDS[command](cfg)
    except CommandFailed as err:
        stem = err.diagnostics.pop("stem", command)
        path = write_json(out / f"{stem}_diagnostics.json", dict(err.diagnostics, config=cfg.to_dict()))
        print(f"{command} failed: {err} (diagnostics in {path})", file=sys.stderr)
        return EXIT_FAILURE
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())

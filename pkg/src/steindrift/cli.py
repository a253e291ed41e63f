"""Command-line experiment runner.

Settings merge as built-in defaults < ``--config`` file < flags. The config
file holds flat ``key = value`` lines whose keys are the long flag names.
Every output CSV starts with ``#`` lines echoing the effective settings.
``--workers`` is left out of the echo because it never changes results.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path as FsPath

from . import __version__
from . import estimators as est
from . import verify as V
from .basis import BasisSpec, TimeGrid
from .functionals import SingularityError, SteinFamilyParams
from .io import write_table
from .process import DriftSpec, render_path, simulate_noise
from .risk import (
    UNIVERSAL_CONSTANT_REFERENCE,
    MCConfig,
    bayes_risk,
    empirical_risk,
    gain,
    gain_curve,
    gain_table,
    stein_risk_closed_form,
    summarize,
    universal_constant,
    write_reports,
)

OUT_ENV = "STEINDRIFT_OUT"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# key -> (type, default); None means "required where used"
COMMON = {
    "sigma": (float, 1.0),
    "T": (float, 1.0),
    "alpha": (float, 1.0),
    "n": (int, 4),
    "n_max": (int, 20),
    "samples": (int, 10_000),
    "grid": (int, 4096),
    "terms": (int, 1000),
    "seed": (int, 0),
    "workers": (int, 1),
}

EXTRA = {
    "simulate": {"estimator": (str, "stein"), "tau": (float, 1.0)},
    "gain-curve": {},
    "surface": {"sweep": (str, "sigma"), "values": (str, "")},
    "risk": {},
    "constant": {"method": (str, "all"), "resolution": (int, 100_000)},
    "bayes": {"tau": (float, 1.0)},
    "verify": {"only": (str, ""), "min_power": (int, 2000)},
}

COMMAND_DEFAULTS = {
    "simulate": {"n": 5, "seed": None},
    "gain-curve": {"n": 3},
    "surface": {"n": 3, "samples": 2000},
    "verify": {"seed": 7},
}

ESTIMATORS = ("stein", "james_stein", "minimax", "bayes")


class UsageError(Exception):
    pass


# --- configuration --------------------------------------------------------


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def _schema(command: str) -> dict:
    return {**COMMON, **EXTRA[command]}


def read_config(path: str, command: str) -> dict:
    schema = _schema(command)
    out = {}
    try:
        lines = FsPath(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise UsageError(f"{path}:{num}: expected 'key = value'")
        if key not in schema:
            raise UsageError(f"{path}:{num}: unknown key {key!r} for {command}")
        out[key] = _convert(schema[key][0], value.strip(), f"{path}:{num}: {key}")
    return out


def _convert(kind, value: str, where: str):
    try:
        return kind(value)
    except ValueError:
        raise UsageError(f"{where}: cannot parse {value!r} as {kind.__name__}") from None


def effective_settings(command: str, args: argparse.Namespace) -> dict:
    schema = _schema(command)
    cfg = {k: d for k, (_, d) in schema.items()}
    cfg.update(COMMAND_DEFAULTS.get(command, {}))
    if args.config:
        cfg.update(read_config(args.config, command))
    for key in schema:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    missing = [_flag(k) for k, v in cfg.items() if v is None]
    if missing:
        raise UsageError(f"{command} requires {', '.join(missing)}")
    for key in ("samples", "grid", "terms", "workers"):
        if cfg[key] < 1:
            raise UsageError(f"{_flag(key)} must be positive")
    for key in ("sigma", "T"):
        if not cfg[key] > 0:
            raise UsageError(f"{_flag(key)} must be positive")
    if cfg["seed"] < 0:
        raise UsageError("--seed must be non-negative")
    return cfg


def metadata(command: str, cfg: dict, **extra) -> dict:
    meta = {"command": command}
    meta.update({k: v for k, v in cfg.items() if k != "workers"})
    meta.update(extra)
    return meta


def output_dir(args) -> FsPath:
    out = FsPath(args.out or os.environ.get(OUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def mc_config(cfg: dict, **over) -> MCConfig:
    c = {**cfg, **over}
    return MCConfig.standard(
        c["alpha"], c["sigma"], c["T"], c["samples"], c["seed"], c["grid"], c["terms"], workers=c["workers"]
    )


def _n_range(cfg: dict) -> tuple[int, int]:
    lo, hi = cfg["n"], cfg["n_max"]
    if lo < 3 or hi < lo:
        raise UsageError(f"need 3 <= --n <= --n-max, got {lo}..{hi}")
    if hi > cfg["terms"]:
        raise UsageError(f"--n-max {hi} exceeds --terms {cfg['terms']}")
    return lo, hi


# --- commands -------------------------------------------------------------


def cmd_simulate(cfg, out: FsPath) -> int:
    if cfg["estimator"] not in ESTIMATORS:
        raise UsageError(f"--estimator must be one of {', '.join(ESTIMATORS)}")
    basis = BasisSpec(cfg["sigma"], cfg["T"], cfg["terms"])
    grid = TimeGrid(cfg["T"], cfg["grid"])
    kind = cfg["estimator"]
    if kind in ("stein", "james_stein") and not 3 <= cfg["n"] <= cfg["terms"]:
        raise UsageError(f"--n must lie in 3..{cfg['terms']}")
    path = render_path(basis, simulate_noise(basis, cfg["seed"]), DriftSpec.linear(cfg["alpha"]), grid)
    if kind == "stein":
        u_hat = est.stein(path, basis, SteinFamilyParams.james_stein(cfg["n"]))
    elif kind == "james_stein":
        u_hat = est.james_stein(path, basis, cfg["n"])
    elif kind == "bayes":
        u_hat = est.bayes(path, cfg["sigma"], cfg["tau"])
    else:
        u_hat = est.minimax(path)
    meta = metadata("simulate", cfg)
    path.to_csv(out / "path.csv", meta)
    u_hat.to_csv(out / "estimate.csv", meta)
    print(f"wrote {out / 'path.csv'} and {out / 'estimate.csv'}")
    return EXIT_OK


GNUPLOT = """\
# gnuplot script; gains in the CSV are fractions, plotted here in percent
set datafile separator ','
set datafile commentschars '#'
set key autotitle columnhead
set xlabel 'n'
set ylabel 'gain (%)'
set title 'Percentage gain, alpha = {alpha:g}, sigma = {sigma:g}, T = {T:g}, {samples} samples'
plot '{csv}' using 1:($2*100):($3*100) with yerrorlines title 'gain', \\
     '' using 1:($4*100) with lines dashtype 2 title '6/(n pi^2)'
"""


def cmd_gain_curve(cfg, out: FsPath) -> int:
    lo, hi = _n_range(cfg)
    rep = gain_curve(mc_config(cfg), lo, hi, escalate_to=10 * cfg["samples"])
    meta = metadata("gain-curve", cfg, samples_used=rep.samples, n_opt=rep.n_opt)
    write_table(out / "gain.csv", ("n", "gain", "se", "asymptote"), rep.rows(), meta)
    (out / "gain.gp").write_text(GNUPLOT.format(**{**cfg, "csv": "gain.csv", "samples": rep.samples}), encoding="utf-8")
    print(f"n_opt = {rep.n_opt}")
    if not rep.resolved:
        print(f"warning: n={rep.n_opt} and n={rep.runner_up} differ by less than one standard error", file=sys.stderr)
    return EXIT_OK


def _sweep_values(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"--values must be a comma-separated list of numbers, got {text!r}") from None
    if not vals:
        raise UsageError("--values is empty; give a comma-separated list")
    if any(not v > 0 for v in vals):
        raise UsageError("sweep values must be positive")
    return vals


def cmd_surface(cfg, out: FsPath) -> int:
    axis = cfg["sweep"]
    if axis not in ("T", "sigma"):
        raise UsageError("--sweep must be T or sigma")
    vals = _sweep_values(cfg["values"])
    lo, hi = _n_range(cfg)
    rows = []
    for v in vals:
        table = gain_table(mc_config(cfg, **{axis: v}), lo, hi)
        for j, n in enumerate(range(lo, hi + 1)):
            m, se = summarize(table[:, j])
            rows.append((n, v, m, se))
    write_table(out / "surface.csv", ("n", axis, "gain", "se"), rows, metadata("surface", cfg))
    print(f"wrote {out / 'surface.csv'} ({len(rows)} cells)")
    return EXIT_OK


def cmd_risk(cfg, out: FsPath) -> int:
    n = cfg["n"]
    if not 3 <= n <= cfg["terms"]:
        raise UsageError(f"--n must lie in 3..{cfg['terms']}")
    config = mc_config(cfg)
    reports = [
        empirical_risk(est.EstimatorSpec.minimax(config.basis), config),
        empirical_risk(est.EstimatorSpec.stein(config.basis, n), config),
        stein_risk_closed_form(config, n),
        gain(config, n),
    ]
    write_reports(out / "risk.csv", [(r, config) for r in reports], metadata("risk", cfg))
    for r in reports:
        print(f"{r.quantity:20s} {r.mean:.6f} +/- {r.se:.6f}")
    return EXIT_OK


def cmd_constant(cfg, out: FsPath) -> int:
    methods = ("mc", "quadrature", "laplace") if cfg["method"] == "all" else (cfg["method"],)
    if any(m not in ("mc", "quadrature", "laplace") for m in methods):
        raise UsageError("--method must be mc, quadrature, laplace or all")
    rows = []
    for m in methods:
        res = cfg["resolution"] if m == "mc" else (40 if cfg["resolution"] > 200 else cfg["resolution"])
        r = universal_constant(m, res, seed=cfg["seed"], workers=cfg["workers"])
        rows.append((m, r.resolution, r.expectation, r.error, r.gain_limit, r.prefactor_16, UNIVERSAL_CONSTANT_REFERENCE))
        print(f"{m:10s} E = {r.expectation:.10f} +/- {r.error:.2e}  gain limit {r.gain_limit:.6f}  16/pi^4 form {r.prefactor_16:.6f}")
    cols = ("method", "resolution", "expectation", "error", "gain_limit", "prefactor_16", "reference")
    write_table(out / "constant.csv", cols, rows, metadata("constant", cfg))
    return EXIT_OK


def cmd_bayes(cfg, out: FsPath) -> int:
    if not cfg["tau"] > 0:
        raise UsageError("--tau must be positive")
    config = mc_config(cfg, alpha=0.0)
    reports = bayes_risk(config, cfg["tau"])
    write_reports(out / "bayes.csv", [(r, config) for r in reports], metadata("bayes", cfg))
    for r in reports:
        print(f"{r.quantity:20s} {r.mean:.6f} +/- {r.se:.6f} (closed form {r.closed_form:.6f})")
    return EXIT_OK


def cmd_verify(cfg, out: FsPath) -> int:
    only = [c.strip().upper() for c in cfg["only"].split(",") if c.strip()] or None
    unknown = [c for c in only or () if c not in V.CHECKS]
    if unknown:
        raise UsageError(f"unknown criteria {', '.join(unknown)}; choose from {', '.join(V.CHECKS)}")
    settings = V.Settings(cfg["samples"], cfg["seed"], cfg["workers"], cfg["grid"], cfg["terms"], cfg["min_power"])
    results = V.run(settings, only, echo=print)
    V.write_results(out / "verify.csv", results, metadata("verify", cfg))
    counts = {k: sum(r.status == k for r in results) for k in (V.PASS, V.FAIL, V.SKIP)}
    failed = [r.cid for r in results if r.status == V.FAIL]
    print(", ".join(f"{v} {k}" for k, v in counts.items()) + (f"; failing: {', '.join(failed)}" if failed else ""))
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "simulate one path and its drift estimate"),
    "gain-curve": (cmd_gain_curve, "gain of the Stein estimator over a range of n"),
    "surface": (cmd_surface, "gain over n and a sweep of T or sigma"),
    "risk": (cmd_risk, "empirical risks of the minimax and Stein estimators"),
    "constant": (cmd_constant, "large-variance constant E[1/sum (2l-1)^2 eta_l^2]"),
    "bayes": (cmd_bayes, "Bayes risk under a Brownian prior"),
    "verify": (cmd_verify, "run the acceptance checks"),
}


# --- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    for key, (kind, _) in COMMON.items():
        g.add_argument(_flag(key), dest=key, type=kind, default=None, metavar=key.upper())
    g.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
    g.add_argument("--config", default=None, help="flat 'key = value' settings file")
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="steindrift", description="Stein-type drift estimation experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        for key, (kind, _) in EXTRA[name].items():
            p.add_argument(_flag(key), dest=key, type=kind, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    fn, _ = COMMANDS[args.command]
    try:
        cfg = effective_settings(args.command, args)
        out = output_dir(args)
        return fn(cfg, out)
    except UsageError as exc:
        parser.error(f"{args.command}: {exc}")
    except SingularityError as exc:
        print(f"steindrift: singular replicate: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"steindrift: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"steindrift: numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

"""Config-driven command line front end.

Exit status: 0 success, 1 validation failure, 2 numerical failure,
3 configuration error (including bad flags).
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import os
import sys

import numpy as np

from . import io
from .asymptotics import Constants, MCConfig, compare
from .classify import classify_field, stationary_report
from .constants import ChiFieldSpec, pickands_H, pickands_H_limit, piterbarg_P, piterbarg_P_limit
from .errors import ConfigError, GaussMaxError, MissingConstantError, ModelError, NumericalError
from .mc import estimates_to_csv, mc_exceedance
from .model import validate_model
from .simulate import GridSpec, make_sampler

SUBCOMMANDS = ("validate", "classify", "constants", "simulate", "estimate", "compare")
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2, 3
MIN_REPS = 10_000


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    p = _Parser(prog="gaussmax", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="experiment file (TOML or JSON)")
        s.add_argument("--seed", type=int, default=None, help="overrides the seed in the config")
        s.add_argument("--threads", type=int, default=None, help="worker count (default: all cores)")
        s.add_argument("--out", default=None, help="output directory")
    return p


# -- config -----------------------------------------------------------------


class Experiment:
    """Parsed experiment file with resolved model, seed and output directory."""

    def __init__(self, path, seed=None, out=None, threads=None):
        self.path = path
        self.data = io.read_mapping(path)
        self.base = os.path.dirname(os.path.abspath(path))
        self.hash = io.config_hash(self.data)
        s = seed if seed is not None else self.data.get("seed")
        if s is None:
            raise ConfigError(f"{path}: a seed is required (config key `seed` or --seed)")
        if not isinstance(s, int) or isinstance(s, bool) or s < 0:
            raise ConfigError(f"{path}: seed must be a nonnegative integer")
        self.seed = int(s)
        self.out = out or os.environ.get("GE_OUTPUT_DIR") or self.data.get("out") or "gaussmax_out"
        if not os.path.isabs(self.out) and out is None and not os.environ.get("GE_OUTPUT_DIR"):
            self.out = os.path.join(self.base, self.out)
        self.threads = threads if threads is not None else (os.cpu_count() or 1)
        if self.threads < 1:
            raise ConfigError("--threads must be >= 1")

    def section(self, name, required=True):
        sec = self.data.get(name)
        if sec is None and required:
            raise ConfigError(f"{self.path}: missing [{name}] section")
        return sec or {}

    def model_from(self, holder):
        m = holder.get("model", None)
        if m is None:
            raise ConfigError(f"{self.path}: no model given")
        if isinstance(m, str):
            p = m if os.path.isabs(m) else os.path.join(self.base, m)
            if not os.path.isfile(p):
                raise ConfigError(f"model file not found: {p}")
            return io.load_model(p)
        return io.model_from_dict(m)

    @property
    def model(self):
        return self.model_from(self.data)


def _reps(sec, path, key="reps"):
    r = sec.get(key)
    if not isinstance(r, int) or r < MIN_REPS:
        raise ConfigError(f"{path}: `{key}` must be an integer >= {MIN_REPS}")
    return r


def _u_list(sec, path):
    u = sec.get("u")
    if u is None:
        raise ConfigError(f"{path}: `u` list is required")
    u = [float(x) for x in (u if isinstance(u, list) else [u])]
    if any(b <= a for a, b in zip(u, u[1:])):
        raise ConfigError(f"{path}: u list must be strictly increasing")
    return u


def _grid(sec, model, path):
    g = sec.get("grid", {})
    lo = g.get("lo", list(model.lo))
    hi = g.get("hi", list(model.hi))
    if "step" in g:
        return GridSpec.regular(lo, hi, g["step"])
    if "counts" in g:
        return GridSpec.from_counts(lo, hi, g["counts"])
    raise ConfigError(f"{path}: grid needs `step` or `counts`")


# -- output -----------------------------------------------------------------


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if x != x:
            return "nan"
        if x in (float("inf"), float("-inf")):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


class Writer:
    def __init__(self, exp, command):
        self.exp = exp
        self.command = command
        os.makedirs(exp.out, exist_ok=True)
        self.files = []

    def header(self):
        return {"config_hash": self.exp.hash, "seed": self.exp.seed, "command": self.command}

    def json(self, name, payload):
        doc = dict(self.header(), result=_clean(payload))
        path = os.path.join(self.exp.out, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        self.files.append(path)

    def csv(self, name, text):
        path = os.path.join(self.exp.out, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# config_hash={self.exp.hash}\n# seed={self.exp.seed}\n")
            fh.write(text)
        self.files.append(path)


# -- subcommands ------------------------------------------------------------


def cmd_validate(exp, w):
    rep = validate_model(exp.model, seed=exp.seed)
    w.json("validate.json", rep.to_dict())
    return EXIT_OK if rep.ok else EXIT_INVALID


def _report(exp, holder, model):
    charts = holder.get("charts")
    if model.is_stationary and not charts:
        return stationary_report(model)
    if not charts:
        raise ConfigError(f"{exp.path}: charts are required to classify a non-stationary model")
    return classify_field(model, io.charts_from_list(charts), n=int(holder.get("grid_n", 10)))


def cmd_classify(exp, w):
    sec = exp.section("classify")
    cases = sec.get("cases")
    if cases is None:
        model = exp.model
        rep = _report(exp, sec, model)
        w.json("classify.json", rep.to_dict())
        return EXIT_OK
    out = []
    for case in cases:
        model = exp.model_from(case)
        rep = _report(exp, case, model)
        out.append(dict(rep.to_dict(), name=case.get("name", f"case{len(out)}")))
    w.json("classify.json", {"cases": out})
    return EXIT_OK


def cmd_constants(exp, w):
    sec = exp.section("constants")
    target = sec.get("target", "H_limit")
    reps = _reps(sec, exp.path)
    delta = float(sec.get("delta", 0.01))
    if "alphas" in sec:
        spec = ChiFieldSpec.power(sec["alphas"], sec.get("coefs"))
    else:
        spec = ChiFieldSpec.from_model(exp.model, with_h1=target.startswith("P"))
    if target == "H_limit":
        est = pickands_H_limit(spec, sec["T_ladder"], delta, reps, exp.seed, sec.get("estimator", "shift"))
    elif target == "H":
        est = pickands_H(spec, sec["T"], delta, reps, exp.seed, sec.get("estimator", "shift"))
    elif target == "P":
        est = piterbarg_P(spec, sec["K"], delta, reps, exp.seed)
    elif target == "P_limit":
        est = piterbarg_P_limit(spec, sec["K_ladder"], delta, reps, exp.seed)
    else:
        raise ConfigError(f"{exp.path}: unknown constants target {target!r}")
    w.json("constants.json", est.to_dict())
    if est.ladder:
        keys = list(est.ladder[0])
        buf = _io.StringIO()
        cw = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        cw.writeheader()
        for row in est.ladder:
            cw.writerow({k: repr(v) for k, v in row.items()})
        w.csv("constants_ladder.csv", buf.getvalue())
    return EXIT_OK


def cmd_simulate(exp, w):
    sec = exp.section("simulate")
    model = exp.model
    grid = _grid(sec, model, exp.path)
    reps = sec.get("reps")
    if not isinstance(reps, int) or reps < 1:
        raise ConfigError(f"{exp.path}: `reps` must be a positive integer")
    sampler = make_sampler(model, grid, sec.get("method", "auto"))
    batch = sampler.sample(reps, exp.seed, workers=exp.threads)
    summary = {"reps": reps, "method": batch.method, "grid": grid.to_dict(), "info": batch.info,
               "mean": batch.values.mean(axis=0).tolist(), "var": batch.values.var(axis=0).tolist()}
    w.json("simulate.json", summary)
    if sec.get("dump", False):
        path = os.path.join(exp.out, "simulate.f8")
        batch.dump(path)
        with open(path + ".json") as fh:
            side = json.load(fh)
        side.update(w.header())
        with open(path + ".json", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(side, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_estimate(exp, w):
    sec = exp.section("estimate")
    model = exp.model
    u = _u_list(sec, exp.path)
    reps = _reps(sec, exp.path)
    grid = _grid(sec, model, exp.path)
    rows = mc_exceedance(model, grid, u, reps, exp.seed, sec.get("method", "auto"), workers=exp.threads,
                         enforce_grid_rule=sec.get("enforce_grid_rule", True))
    w.csv("estimate.csv", estimates_to_csv(rows))
    w.json("estimate.json", [r.to_dict() for r in rows])
    return EXIT_OK


def _constants(sec):
    c = sec.get("constants", {})
    return Constants(H=c.get("H"), P=c.get("P"), H_alpha={float(k): v for k, v in c.get("H_alpha", {}).items()})


def cmd_compare(exp, w):
    sec = exp.section("compare")
    model = exp.model
    u = _u_list(sec, exp.path)
    reps = _reps(sec, exp.path)
    grid = _grid(sec, model, exp.path)
    report = _report(exp, exp.data.get("classify", {}), model)
    cfg = MCConfig(grid, reps, exp.seed, sec.get("method", "auto"), exp.threads,
                   sec.get("enforce_grid_rule", True))
    table = compare(model, report, u, cfg, _constants(sec))
    w.csv("compare.csv", table.to_csv())
    w.json("compare.json", dict(table.to_dict(), regime=report.to_dict()))
    return EXIT_OK


_DISPATCH = {"validate": cmd_validate, "classify": cmd_classify, "constants": cmd_constants,
             "simulate": cmd_simulate, "estimate": cmd_estimate, "compare": cmd_compare}


def run(argv=None):
    """Run one subcommand; returns the exit status."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        exp = Experiment(args.config, args.seed, args.out, args.threads)
        writer = Writer(exp, args.command)
        status = _DISPATCH[args.command](exp, writer)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except MissingConstantError as exc:
        sys.stderr.write(f"config error: missing constant: {exc}\n")
        return EXIT_CONFIG
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (ModelError, GaussMaxError) as exc:
        sys.stderr.write(f"validation failure: {exc}\n")
        return EXIT_INVALID
    except (KeyError, TypeError, ValueError) as exc:
        sys.stderr.write(f"config error: {exc!r}\n")
        return EXIT_CONFIG
    for f in writer.files:
        sys.stdout.write(f + "\n")
    return status


def main():
    sys.exit(run())

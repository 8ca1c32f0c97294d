"""Batch command line: ``subcir <command> --config FILE [--out FILE] [--format csv|json]``.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 numerical non-convergence. Diagnostics go to stderr as JSON lines.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import sys

import numpy as np

from . import mc, model, pricing, validation
from .config import grid, load_config
from .errors import ConfigError, ConvergenceError, DomainError, SubcirError

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("spectrum", "survival", "spreads", "price", "levy", "intensity", "simulate", "validate")


def _diag(level: str, **fields):
    print(json.dumps({"level": level, **fields}, sort_keys=True), file=sys.stderr)


def _num(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


class Table:
    def __init__(self, columns):
        self.columns = list(columns)
        self.rows = []

    def add(self, *row):
        self.rows.append([_num(v) for v in row])

    def write(self, fh, fmt: str):
        if fmt == "json":
            json.dump([dict(zip(self.columns, r)) for r in self.rows], fh, indent=2)
            fh.write("\n")
            return
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def cmd_spectrum(rc, args):
    m = rc.model()
    n = rc.section("spectrum")["n"]
    t = Table(["beta", "n", "lambda", "phi_lambda", "norm"])
    for beta in (1, 0):
        sd = m.spectra[beta]
        for k in range(1, min(n, sd.nmax) + 1):
            t.add(beta, k, sd.eigenvalues[k - 1], m.sub_eigenvalues[beta][k - 1], sd.norm(k))
    return t


def cmd_survival(rc, args):
    m = rc.model()
    sec = rc.section("survival")
    x = sec.get("x", m.cir.theta)
    t = Table(["T", "Q"])
    for T in grid(sec["horizons"]):
        t.add(T, model.survival_probability(m, float(T), x))
    return t


def cmd_spreads(rc, args):
    m = rc.model()
    sec = rc.section("spreads")
    x = sec.get("x", m.cir.theta)
    t = Table(["T", "S"])
    for T in grid(sec["horizons"]):
        t.add(T, model.credit_spread(m, float(T), x))
    t.add("S_inf", model.asymptotic_spread(m))
    return t


def cmd_price(rc, args):
    m = rc.model()
    t = Table(["id", "t", "T", "x", "d", "price"])
    for i, c in enumerate(rc.section("price")["claims"]):
        timing = pricing.RecoveryTiming(c.get("timing", "at_maturity"))
        rad = c.get("recovery_at_default")
        claim = pricing.Claim(
            maturity=c["maturity"], rate=c.get("rate", 0.0), promised=c.get("promised", 1.0),
            recovery=c.get("recovery", 0.0), timing=timing,
            recovery_at_default=None if rad is None else (lambda z, r=float(rad): np.full(np.shape(z), r)),
        )
        x, t0, d = c.get("x", m.cir.theta), c.get("t", 0.0), c.get("d", 0)
        t.add(c.get("id", str(i)), t0, c["maturity"], x, d, pricing.price_claim(m, claim, t0, x, d))
    return t


def cmd_levy(rc, args):
    m = rc.model()
    sec = rc.section("levy")
    t = Table(["x", "y", "pi0_phi"])
    for x in sec["x"]:
        for y in grid(sec["y"]):
            jump = float(y) - x
            if abs(jump) < model.Y_MIN:
                continue
            t.add(x, y, model.levy_density_state(m, 0, x, jump))
    return t


def cmd_intensity(rc, args):
    m = rc.model()
    xs = grid(rc.section("intensity")["x"])
    t = Table(["x", "k_phi"])
    for x, k in zip(xs, np.atleast_1d(model.killing_rate(m, xs))):
        t.add(x, k)
    return t


def cmd_simulate(rc, args):
    m = rc.model()
    ps = mc.simulate_subcir(m, rc.path_config(), threads=args.threads)
    k = (lambda v: v) if m.sub.is_trivial else model.killing_rate_interpolator(
        m, max(mc.K_GRID_MAX, float(np.max(ps.x_phi)) * 1.01))
    if args.format == "csv":
        buf = io.StringIO()
        ps.to_csv(buf, k_phi=k)
        return buf.getvalue()
    t = Table(["path_id", "t", "T_t", "X_phi", "D_phi", "k_phi_of_X"])
    kv = k(ps.x_phi)
    for i in range(ps.n_paths):
        for j, bt in enumerate(ps.business_times):
            t.add(i, bt, ps.clock[i, j], ps.x_phi[i, j], int(ps.d_phi[i, j]), kv[i, j])
    return t


def cmd_validate(rc, args):
    sec = rc.section("validate")
    mcs = rc.section("mc")
    results = validation.run_all(n_paths=sec["n_paths"], seed=mcs["seed"], h=mcs["h"],
                                 threads=args.threads, sampler_draws=sec["sampler_draws"])
    for r in results:
        _diag("info", event="check", name=r.name, passed=bool(r.passed))
    report = {"passed": all(r.passed for r in results), "checks": [r.as_dict() for r in results]}
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n", report["passed"]


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return _num(v)


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subcir", description="Subordinate CIR default-intensity model")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default="-")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--threads", type=int, default=1)
    return ap


@contextlib.contextmanager
def _open_out(path):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        _diag("error", kind="usage", message="--threads must be >= 1")
        return EXIT_CONFIG
    try:
        rc = load_config(args.config)
    except ConfigError as exc:
        for ptr, msg in exc.problems:
            _diag("error", kind="config", pointer=ptr, message=msg)
        return EXIT_CONFIG
    passed = True
    try:
        out = HANDLERS[args.command](rc, args)
    except ConvergenceError as exc:
        _diag("error", kind="convergence", message=str(exc))
        return EXIT_NUMERIC
    except (DomainError, SubcirError) as exc:
        _diag("error", kind="domain", message=str(exc))
        return EXIT_CONFIG
    if isinstance(out, tuple):
        out, passed = out
    with _open_out(args.out) as fh:
        if isinstance(out, Table):
            out.write(fh, args.format)
        else:
            fh.write(out)
    _diag("info", event="done", command=args.command)
    return EXIT_OK if passed else EXIT_VALIDATION


def run(argv) -> int:
    return main(argv)

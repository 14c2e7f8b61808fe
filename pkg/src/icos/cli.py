"""Command-line interface.

Every subcommand writes plain CSV or JSON with numbers at 17 significant
digits (``--pretty`` rounds to 6). Errors go to stderr as one JSON object and
the process exits non-zero.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .estimator import ICOS, EstimateWithCI
from .exceptions import ICOSError
from .experiments import McDesign, run_mc
from .kernel import KernelSmoother
from .market_data import load_chain
from .order import optimal_N
from .vix import dissect

DEFAULTS = {"quad": "simpson", "terms": "14", "sine_terms": None, "conf": 0.95, "seed": 0, "pretty": False}
ESTIMATE_COLUMNS = ("point", "estimate", "std_err", "lo", "hi")


class CliError(Exception):
    def __init__(self, message, code=2):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _fmt(pretty: bool):
    fmt = ".6g" if pretty else ".17g"
    return lambda v: format(float(v), fmt)


def _terms(value):
    if value is None or value == "auto":
        return value
    try:
        n = int(value)
    except ValueError:
        raise CliError(f"--terms must be an integer or 'auto', got {value!r}") from None
    if n < 1:
        raise CliError("--terms must be positive")
    return n


def _jsonable(obj, fmt):
    if isinstance(obj, dict):
        return {k: _jsonable(v, fmt) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v, fmt) for v in obj]
    if isinstance(obj, (bool, np.bool_)) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    v = float(obj)
    # round-trips through the chosen precision; non-finite values become null
    return float(fmt(v)) if np.isfinite(v) else None


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, args):
    _emit(json.dumps(_jsonable(obj, _fmt(args.pretty)), indent=2) + "\n", args.out)


def _emit_rows(header, rows, args):
    fmt = _fmt(args.pretty)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    _emit(buf.getvalue(), args.out)


def _model(args, chain) -> ICOS:
    return ICOS(n_terms=args.terms, n_sine_terms=args.sine_terms, quad=args.quad, conf=args.conf,
                spot=args.spot).fit(chain)


def _points(args, lo, hi):
    if args.at:
        return np.asarray(args.at, dtype=float)
    return np.linspace(lo, hi, args.points)


def _estimate_rows(points, est: EstimateWithCI):
    return zip(points, est.value, est.std_err, est.lo, est.hi)


def _ks_rows(points, values):
    nan = np.full(len(points), np.nan)
    return zip(points, values, nan, nan, nan)


def cmd_fit(args):
    chain = load_chain(args.chain)
    m = _model(args, chain)
    a = m.a_coeffs()
    out = {
        "n_terms": m.n_terms_,
        "n_strikes": chain.n,
        "forward": chain.forward,
        "maturity": chain.maturity,
        "theta": dict(zip(("bar", "c", "p"), m.theta_)),
        "theta_std_err": dict(zip(("bar", "c", "p"), np.sqrt(np.diag(m.var_theta())))),
        "nu": m.nu_,
        "sigma2": m.sigma2_,
        "a_coeffs": [{"m": j, "value": v, "std_err": s} for j, (v, s) in enumerate(zip(a.value, a.std_err))],
    }
    if hasattr(m, "order_trace_"):
        out["order_trace"] = [dict(zip(("N", "a_bar", "s_a"), row)) for row in m.order_trace_.rows]
    _emit_json(out, args)


def cmd_price(args):
    chain = load_chain(args.chain)
    x = _points(args, chain.alpha, chain.beta)
    if args.baseline == "ks":
        ks = KernelSmoother(c=args.ks_c).fit(chain, spot=args.spot)
        call = ks.price_call(x)
        values = call if args.right == "call" else call - chain.discount * (chain.forward - x)
        rows = _ks_rows(x, values)
    else:
        m = _model(args, chain)
        rows = _estimate_rows(x, m.price_call(x) if args.right == "call" else m.price_put(x))
    _emit_rows(ESTIMATE_COLUMNS, rows, args)


def cmd_rnd(args):
    """Density of ``log S_T`` at log-strikes, or the call gamma ``e^{-rT} x f(log x) / S0^2`` with ``--gamma``."""
    chain = load_chain(args.chain)
    lo, hi = chain.alpha, chain.beta
    if args.baseline == "ks":
        ks = KernelSmoother(c=args.ks_c).fit(chain, spot=args.spot)
        # keep the default grid inside the second-difference stencil
        lo, hi = lo + ks.step_, hi - ks.step_
    y = np.log(args.at) if args.at else np.linspace(np.log(lo), np.log(hi), args.points)
    if args.baseline == "ks":
        f = ks.rnd(y)
        scale = chain.discount * np.exp(y) / ks.spot_**2 if args.gamma else 1.0
        rows = _ks_rows(y, f * scale)
    else:
        m = _model(args, chain)
        est = m.rnd(y)
        if args.gamma:
            s0 = m.fit_.spot
            scale = chain.discount * np.exp(y) / s0**2
            est = EstimateWithCI(est.value * scale, est.std_err * scale, est.lo * scale, est.hi * scale, est.conf)
        rows = _estimate_rows(y, est)
    _emit_rows(ESTIMATE_COLUMNS, rows, args)


def cmd_delta(args):
    chain = load_chain(args.chain)
    x = _points(args, chain.alpha, chain.beta)
    if args.baseline == "ks":
        rows = _ks_rows(x, KernelSmoother(c=args.ks_c).fit(chain, spot=args.spot).delta(x))
    else:
        rows = _estimate_rows(x, _model(args, chain).delta(x))
    _emit_rows(ESTIMATE_COLUMNS, rows, args)


def cmd_simulate(args):
    if args.terms == "auto":
        raise CliError("simulate needs a fixed --terms")
    design = McDesign(model=args.model, tenor=args.t, reps=args.reps, seed=args.seed, noise=args.noise,
                      n_terms=args.terms if args.terms_given else None, n_sine_terms=args.sine_terms, quad=args.quad,
                      conf=args.conf, ks_c=tuple(args.ks_c_list or ()))
    report = run_mc(design)
    header = list(report.rows[0])
    _emit_rows(header, ([r[k] if not isinstance(r[k], int) else str(r[k]) for k in header] for r in report.rows), args)


def _vix_pairs(directory: Path):
    pairs = []
    for near in sorted(directory.glob("*_near.csv")):
        nxt = near.with_name(near.name[: -len("_near.csv")] + "_next.csv")
        pairs.append((near.name[: -len("_near.csv")], near, nxt if nxt.exists() else None))
    if not pairs:
        raise CliError(f"{directory}: no '*_near.csv' files", code=1)
    return pairs


def cmd_vix(args):
    kw = dict(n_terms=args.terms, quad=args.quad, m=args.regrid_m)
    if args.panel:
        out = []
        for day, near, nxt in _vix_pairs(Path(args.panel)):
            d = dissect(load_chain(near), load_chain(nxt) if nxt else None, **kw)
            out.append({"day": day, **d.as_dict()})
    else:
        if not args.near:
            raise CliError("vix needs --near or --panel")
        out = dissect(load_chain(args.near), load_chain(args.next) if args.next else None, **kw).as_dict()
    _emit_json(out, args)


def cmd_optimal_n(args):
    trace = optimal_N(load_chain(args.chain), quad=args.quad)
    rows = ((str(int(n)), a, s, "1" if int(n) == trace.n_star else "0") for n, a, s in trace.rows)
    _emit_rows(("N", "a_bar", "s_a", "selected"), rows, args)


def _global_options(default) -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", default=default, help="JSON file of option values; flags given on the command line override it")
    g.add_argument("--quad", choices=("left", "right", "trap", "simpson"), default=default)
    g.add_argument("--terms", default=default, help="cosine terms N, or 'auto' for the rule-of-thumb order")
    g.add_argument("--sine-terms", type=int, default=default, help="sine terms for the delta (default 2N)")
    g.add_argument("--conf", type=float, default=default)
    g.add_argument("--seed", type=int, default=default)
    g.add_argument("--spot", type=float, default=default, help="spot for the delta (default F e^{-rT})")
    g.add_argument("--pretty", action="store_true", default=default, help="round output to 6 significant digits")
    g.add_argument("--out", default=default, help="output file (stdout when omitted)")
    return common


def build_parser() -> argparse.ArgumentParser:
    # subcommands repeat the global options with suppressed defaults so values
    # given before the subcommand name are not overwritten
    top, common = _global_options(None), _global_options(argparse.SUPPRESS)

    parser = _Parser(prog="icos", description="Option-implied Fourier-cosine estimation.", parents=[top])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def estimates(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--chain", required=True)
        p.add_argument("--points", type=int, default=101)
        p.add_argument("--at", type=float, nargs="+")
        p.add_argument("--baseline", choices=("icos", "ks"), default="icos")
        p.add_argument("--ks-c", type=float, default=0.1)
        p.set_defaults(func=func)
        return p

    p = sub.add_parser("fit", parents=[common], help="fit summary: N, theta, cosine coefficients")
    p.add_argument("--chain", required=True)
    p.set_defaults(func=cmd_fit)
    estimates("price", cmd_price, "option prices with confidence bands").add_argument(
        "--right", choices=("call", "put"), default="call")
    estimates("rnd", cmd_rnd, "risk-neutral density of log S_T").add_argument(
        "--gamma", action="store_true", help="report the call gamma implied by the density instead")
    estimates("delta", cmd_delta, "call deltas with confidence bands")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo study against a reference model")
    p.add_argument("--model", choices=("bs", "svcj"), default="bs")
    p.add_argument("--t", choices=("30d", "1y"), default="30d")
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--noise", type=float, default=0.025)
    p.add_argument("--ks-c", dest="ks_c_list", type=float, nargs="*", help="kernel baseline bandwidth constants")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("vix", parents=[common], help="VIX observation/discretization error split")
    p.add_argument("--near")
    p.add_argument("--next")
    p.add_argument("--panel", help="directory of '<day>_near.csv' / '<day>_next.csv' pairs")
    p.add_argument("--regrid-m", type=int, default=None)
    p.set_defaults(func=cmd_vix)

    p = sub.add_parser("optimal-n", parents=[common], help="trace of the order-selection rule")
    p.add_argument("--chain", required=True)
    p.set_defaults(func=cmd_optimal_n)
    return parser


def _resolve(args):
    """Fill global options: command line first, then the config file, then built-in defaults."""
    config = {}
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise CliError(f"{args.config}: invalid JSON ({exc})", code=1) from exc
        if not isinstance(config, dict):
            raise CliError(f"{args.config}: expected a JSON object", code=1)
        config = {k.replace("-", "_"): v for k, v in config.items()}
    args.terms_given = args.terms is not None or "terms" in config
    for key, default in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, default))
    if args.spot is None:
        args.spot = config.get("spot")
    if args.command == "vix" and args.terms_given is False:
        args.terms = "auto"
    args.terms = _terms(str(args.terms) if args.terms is not None else None)
    return args


def main(argv=None) -> int:
    try:
        args = _resolve(build_parser().parse_args(argv))
        args.func(args)
    except CliError as exc:
        _fail(exc, exc.code)
        return exc.code
    except (ICOSError, ValueError, OSError, KeyError) as exc:
        _fail(exc, 1)
        return 1
    return 0


def _fail(exc, code):
    json.dump({"error": type(exc).__name__, "message": str(exc), "exit_code": code}, sys.stderr)
    sys.stderr.write("\n")


if __name__ == "__main__":
    sys.exit(main())

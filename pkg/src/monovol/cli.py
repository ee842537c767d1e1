"""Command-line driver: ``monovol {marginal,thermo,integrate,probe,sample,check}``.

Every command writes CSV (header row, 17 significant digits) or JSON (one
object per record) to ``--out`` or standard output.  Exit codes: 0 success,
2 usage or domain error, 3 numerical failure (or a failed check).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any, Sequence

import numpy as np

from . import checks, distributions, thermo
from .errors import AccuracyError, DomainError, NumericalError, SingularStateError
from .metrics import VolumeElementKind
from .quadrature import CutoffSchedule, divergence_probe, limiting_ratio_marginal, \
    truncated_full_integral

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
DEFAULT_EPSILONS = (0.2, 0.1, 0.05, 0.025)
# at fixed angles the leading boundary coefficient can be small, so the
# six-dimensional limit needs cutoffs much closer to the boundary
SIX_DIM_EPSILONS = (1e-4, 1e-5, 1e-6, 1e-7)

OBSERVABLE_IDS = {
    "lambda8": "lambda8",
    "lambda3": "lambda3",
    "lambda1": "lambda1_strong",
    "four4": "four_by_four_strong",
    "spin_half_maximal": "spin_half_maximal",
    "spin_half_minimal": "spin_half_minimal",
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v) + 0.0, ".17g")
    return str(v)


def _json_value(v: Any):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v) + 0.0
        return v if math.isfinite(v) else str(v)
    return v


def render(header: Sequence[str], rows: Sequence[Sequence[Any]], fmt: str) -> str:
    if fmt == "json":
        recs = [{h: _json_value(v) for h, v in zip(header, row)} for row in rows]
        return json.dumps(recs, indent=1) + "\n"
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _emit(args, header, rows) -> None:
    text = render(header, rows, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# argument helpers


def _count(text: str) -> int:
    """Integer that may be written in scientific notation, e.g. ``1e6``."""
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if val != int(val) or val < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(val)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from None


def read_config(path: str) -> dict[str, str]:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_marginal(args) -> int:
    which = args.which
    if args.method == "limiting_ratio":
        return _marginal_limiting(args)
    if args.at is not None:
        pts = [args.at]
    elif which == "six":
        raise UsageError("--which six needs --at a,b,theta1,theta2")
    else:
        pts = _marginal_grid(which, args.steps)
    header = {"a": ["a", "density"], "b": ["b", "density"], "c": ["c", "density"],
              "bivariate": ["a", "b", "density"],
              "six": ["a", "b", "theta1", "theta2", "density"]}[which]
    arity = len(header) - 1
    rows = []
    for p in pts:
        if len(p) != arity:
            raise UsageError(f"--at for {which} takes {arity} values, got {len(p)}")
        rows.append([*p, _density(which, p)])
    _emit(args, header, rows)
    return EXIT_OK


def _marginal_grid(which: str, steps: int):
    if steps < 2:
        raise UsageError("--steps must be at least 2")
    if which == "a":
        return [[x] for x in np.linspace(0.0, 1.0, steps)]
    # open grids avoid the inverse-square-root boundary
    h = 1.0 / (steps + 1)
    if which in ("b", "c"):
        return [[k * h] for k in range(1, steps + 1)]
    return [[i * h, j * h] for i in range(0, steps + 1) for j in range(1, steps + 1)
            if i + j < steps + 1]


def _density(which: str, p) -> float:
    try:
        if which == "a":
            return distributions.pdf_a(p[0])
        if which in ("b", "c"):
            return distributions.pdf_b(p[0])
        if which == "bivariate":
            distributions.SimplexPoint3(*p)
            return distributions.pdf_bivariate(*p)
        distributions.SimplexPoint3(p[0], p[1])
        return distributions.pdf_six(*p)
    except SingularStateError as exc:
        raise UsageError(f"{exc} at {p}") from None


def _marginal_limiting(args) -> int:
    if args.which not in ("bivariate", "six"):
        raise UsageError("limiting-ratio evaluation supports --which bivariate or six")
    if args.at is None:
        raise UsageError("limiting-ratio evaluation needs --at")
    arity = 2 if args.which == "bivariate" else 6
    if len(args.at) % arity:
        raise UsageError(f"--at takes groups of {arity} values")
    pts = [tuple(args.at[i:i + arity]) for i in range(0, len(args.at), arity)]
    target = "bivariate_ab" if arity == 2 else "six_dim"
    eps = args.epsilons or (SIX_DIM_EPSILONS if arity == 6 else DEFAULT_EPSILONS)
    est = limiting_ratio_marginal(target, pts, CutoffSchedule(tuple(eps)),
                                  args.samples, args.seed, order=args.order)
    coord = ["a", "b"] if arity == 2 else ["a", "b", "nu", "theta1", "theta2", "theta3"]
    header = [*coord, "value", "std_error", "closed_form", "order"]
    rows = []
    for e in est:
        p = e.point
        closed = _density("bivariate", p) if arity == 2 else _density("six", p[:2] + p[3:5])
        rows.append([*p, e.value, e.std_error, closed, args.order])
        for w in e.warnings:
            print(f"warning: {w}", file=sys.stderr)
    _emit(args, header, rows)
    return EXIT_OK


def cmd_thermo(args) -> int:
    obs = OBSERVABLE_IDS[args.observable]
    if args.beta_steps < 1:
        raise UsageError("--beta-steps must be positive")
    if args.beta_steps == 1:
        betas = [args.beta_min]
    else:
        betas = list(np.linspace(args.beta_min, args.beta_max, args.beta_steps))
    curves = []
    for i, b in enumerate(betas):
        try:
            curves.append(thermo.thermo_curve(obs, [b]))
        except NumericalError as exc:
            print(f"error: row {i} (beta={b!r}): {exc}", file=sys.stderr)
            return EXIT_NUMERIC
    header = curves[0].rows()[0]
    rows = [c.rows()[1][0] for c in curves]
    _emit(args, header, rows)
    return EXIT_OK


def cmd_integrate(args) -> int:
    kind = VolumeElementKind(args.metric)
    est = truncated_full_integral(kind, args.n, args.epsilon, args.samples, args.seed,
                                  delta=args.delta)
    header = ["metric", "n", "epsilon", "value", "std_error", "samples", "seed"]
    _emit(args, header, [[args.metric, args.n, args.epsilon, est.value, est.std_error,
                          est.n_samples, args.seed]])
    return EXIT_OK


def cmd_probe(args) -> int:
    kind = VolumeElementKind(args.metric)
    integrand = args.integrand
    if integrand is None:
        integrand = "full"
    rep = divergence_probe(kind, args.n, CutoffSchedule(tuple(args.epsilons)), args.samples,
                           args.seed, integrand=integrand)
    header = ["metric", "n", "integrand", "epsilon", "value", "std_error", "exponent",
              "exponent_error", "diverges"]
    rows = [[args.metric, args.n, integrand, e, est.value, est.std_error, rep.exponent,
             rep.exponent_error, rep.diverges] for e, est in zip(rep.epsilons, rep.estimates)]
    _emit(args, header, rows)
    return EXIT_OK


def cmd_sample(args) -> int:
    count = args.count if args.count is not None else args.samples
    draws = distributions.sample_bivariate(count, args.seed)
    _emit(args, ["a", "b", "c"], draws.tolist())
    return EXIT_OK


def cmd_check(args) -> int:
    results = checks.run_all(args.seed)
    failures = [r for r in results if not r.passed]
    if args.format == "json":
        _emit(args, ["name", "passed", "observed", "threshold"],
              [[r.name, r.passed, r.observed, r.threshold] for r in results])
    else:
        lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name} observed={_fmt(r.observed)} "
                 f"threshold={_fmt(r.threshold)}" for r in results]
        lines.append(json.dumps({"failures": [r.name for r in failures]}))
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    return EXIT_NUMERIC if failures else EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=_count, default=10**6)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", metavar="PATH")

    p = argparse.ArgumentParser(prog="monovol", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("marginal", parents=[common], help="evaluate marginal densities")
    m.add_argument("--which", choices=("a", "b", "c", "bivariate", "six"), default="a")
    m.add_argument("--steps", type=int, default=101)
    m.add_argument("--at", type=_floats, help="comma-separated coordinates")
    m.add_argument("--method", choices=("closed_form", "limiting_ratio"),
                   default="closed_form")
    m.add_argument("--epsilons", type=_floats,
                   help="cutoff schedule (default 0.2,0.1,0.05,0.025; 1e-4..1e-7 for six)")
    m.add_argument("--order", choices=("joint", "r_first", "s_first"), default="joint")
    m.set_defaults(func=cmd_marginal)

    t = sub.add_parser("thermo", parents=[common], help="partition function curves")
    t.add_argument("--observable", choices=tuple(OBSERVABLE_IDS), default="lambda8")
    t.add_argument("--beta-min", type=float, default=0.0)
    t.add_argument("--beta-max", type=float, default=5.0)
    t.add_argument("--beta-steps", type=int, default=101)
    t.set_defaults(func=cmd_thermo)

    i = sub.add_parser("integrate", parents=[common], help="truncated full integral")
    i.add_argument("--metric", choices=("minimal", "maximal"), default="maximal")
    i.add_argument("--n", type=int, choices=(3, 4), default=3)
    i.add_argument("--epsilon", type=float, default=0.1)
    i.add_argument("--delta", type=float, help="simplex floor for n = 4 (default epsilon)")
    i.set_defaults(func=cmd_integrate)

    pr = sub.add_parser("probe", parents=[common], help="divergence growth exponent")
    pr.add_argument("--metric", choices=("minimal", "maximal"), default="maximal")
    pr.add_argument("--n", type=int, choices=(3, 4), default=3)
    pr.add_argument("--epsilons", type=_floats, default=list(DEFAULT_EPSILONS))
    pr.add_argument("--integrand", choices=("full", "control", "simplex4"))
    pr.set_defaults(func=cmd_probe, samples=2 * 10**5)

    s = sub.add_parser("sample", parents=[common], help="draws from the bivariate density")
    s.add_argument("--n", dest="count", type=_count, help="number of draws (or --samples)")
    s.set_defaults(func=cmd_sample)

    c = sub.add_parser("check", parents=[common], help="run the invariant suites")
    c.set_defaults(func=cmd_check)
    return p


def parse(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for k, v in cfg.items():
            if k not in known or k in ("help", "config", "func"):
                raise UsageError(f"unknown config key {k!r} for {args.command}")
            act = known[k]
            try:
                defaults[k] = act.type(v) if act.type else v
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {k}: {exc}") from None
            if act.choices is not None and defaults[k] not in act.choices:
                raise UsageError(f"config key {k}: {v!r} not in {list(act.choices)}")
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"monovol: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, SingularStateError) as exc:
        print(f"monovol: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AccuracyError, NumericalError) as exc:
        print(f"monovol: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

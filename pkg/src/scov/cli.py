"""Command-line front end.

Subcommands: ``kernel`` (evaluate the kernel at a pair of points), ``bound``
(closed-form or general variance lower bound), ``estimate`` (run one
estimator on an observation vector), and ``sweep`` (SNR sweep to CSV).

Flags and config files use 1-based component indices; the library API is
0-based.  Exit codes: 0 success, 1 usage/config error, 2 numeric-domain
error.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .bounds import BoundRequest, MeanSpec, corollary_unbiased_bound, theorem_bound
from .errors import ConfigError, NumericDomainError, ValidationError
from .estimators import Estimator
from .kernel import KernelContext, kernel_general, kernel_sdcm, unit_multi, zero_multi
from .model import model_from_dict, restrict_support
from .sweep import load_json, load_sweep_config, rows_to_csv, run_sweep


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fmt(value: float) -> str:
    return format(float(value), ".9g")


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()], dtype=float)
    except ValueError:
        raise ConfigError(f"cannot parse vector from {text!r}") from None


def _parse_index_list(text: str) -> tuple[int, ...]:
    try:
        idx = tuple(int(v) - 1 for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"cannot parse index list from {text!r}") from None
    if any(i < 0 for i in idx):
        raise ConfigError(f"indices are 1-based, got {text!r}")
    return idx


def _parse_multi(text: str, n: int) -> tuple[int, ...]:
    text = text.strip()
    if text == "0":
        return zero_multi(n)
    if text.startswith("e"):
        try:
            k = int(text[1:]) - 1
        except ValueError:
            raise ConfigError(f"cannot parse multi-index {text!r}") from None
        if k < 0 or k >= n:
            raise ConfigError(f"multi-index {text!r} out of 1-based range [1, {n}]")
        return unit_multi(n, k)
    try:
        p = tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"cannot parse multi-index {text!r}") from None
    if len(p) != n:
        raise ConfigError(f"multi-index {text!r} must have {n} entries")
    return p


def _load_model(path: str):
    return model_from_dict(load_json(path))


def _cmd_kernel(args) -> int:
    model = _load_model(args.config)
    x1 = _parse_vector(args.x1)
    x2 = _parse_vector(args.x2)
    x0 = _parse_vector(args.x0) if args.x0 else np.zeros(model.n)
    ctx = KernelContext(model, x0)
    value = kernel_general(ctx, x1, x2) if args.general else kernel_sdcm(ctx, x1, x2)
    print(_fmt(value))
    return 0


def _cmd_bound(args) -> int:
    model = _load_model(args.config)
    x0 = _parse_vector(args.x0)
    k = args.k - 1
    if k < 0 or k >= model.n:
        raise ConfigError(f"--k is 1-based in [1, {model.n}], got {args.k}")
    if args.unbiased and not (args.K or args.multis):
        print(_fmt(corollary_unbiased_bound(model, x0, k)))
        return 0
    if not (args.K and args.multis):
        raise ConfigError("general bound needs both --K and --multis (or use --unbiased)")
    k_set = _parse_index_list(args.K)
    multis = tuple(_parse_multi(t, model.n) for t in args.multis.split(";") if t.strip())
    restricted = restrict_support(x0, k_set, model.s)
    derivs = {}
    for p in multis:
        if sum(p) == 0:
            derivs[p] = float(restricted[k])
        elif p == unit_multi(model.n, k):
            derivs[p] = 1.0
        else:
            derivs[p] = 0.0
    gamma0 = float(x0[k])
    if args.gamma0 is not None:
        gamma0 = args.gamma0
    for item in args.deriv or ():
        if "=" not in item:
            raise ConfigError(f"--deriv expects MULTI=VALUE, got {item!r}")
        multi_txt, value_txt = item.split("=", 1)
        derivs[_parse_multi(multi_txt, model.n)] = float(value_txt)
    spec = MeanSpec(gamma_at_x0=gamma0, derivs=derivs)
    req = BoundRequest(ctx=KernelContext(model, x0), k_set=k_set, multis=multis, mean=spec)
    print(_fmt(theorem_bound(req).value))
    return 0


def _read_observation(args) -> np.ndarray:
    if args.y is not None:
        return _parse_vector(args.y)
    if args.y_file and args.y_file != "-":
        with open(args.y_file, encoding="utf-8") as fh:
            return _parse_vector(fh.read())
    return _parse_vector(sys.stdin.read())


def _cmd_estimate(args) -> int:
    model = _load_model(args.config)
    est = Estimator(
        kind=args.estimator,
        tau=args.tau,
        ml_rule=args.ml_rule,
        supp=_parse_index_list(args.supp) if args.supp else None,
        anchor=tuple(_parse_vector(args.x0)) if args.x0 else None,
    )
    y = _read_observation(args)
    values = est.estimate(model, y)
    print(",".join(_fmt(v) for v in np.atleast_1d(values)))
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_sweep_config(args.config)
    rows = run_sweep(cfg)
    csv_text = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="scov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_kernel = sub.add_parser("kernel", help="evaluate the kernel at a pair of points")
    p_kernel.add_argument("--config", required=True, help="model config JSON")
    p_kernel.add_argument("--x1", required=True, help="first point, comma-separated")
    p_kernel.add_argument("--x2", required=True, help="second point, comma-separated")
    p_kernel.add_argument("--x0", help="anchor point (default: all zeros)")
    p_kernel.add_argument(
        "--general", action="store_true", help="use the determinant form instead of the closed form"
    )
    p_kernel.set_defaults(func=_cmd_kernel)

    p_bound = sub.add_parser("bound", help="variance lower bound at an anchor point")
    p_bound.add_argument("--config", required=True)
    p_bound.add_argument("--x0", required=True, help="anchor point, comma-separated")
    p_bound.add_argument("--k", required=True, type=int, help="component index (1-based)")
    p_bound.add_argument(
        "--unbiased", action="store_true", help="closed-form bound for unbiased estimation"
    )
    p_bound.add_argument("--K", help="index set, 1-based comma-separated")
    p_bound.add_argument("--multis", help='multi-indices, ";"-separated ("0", "e2", or full vectors)')
    p_bound.add_argument("--gamma0", type=float, help="mean value at the anchor (default: x0_k)")
    p_bound.add_argument(
        "--deriv",
        action="append",
        metavar="MULTI=VALUE",
        help="override a mean derivative value (default: identity mean)",
    )
    p_bound.set_defaults(func=_cmd_bound)

    p_est = sub.add_parser("estimate", help="run one estimator on an observation")
    p_est.add_argument("--config", required=True)
    p_est.add_argument(
        "--estimator", required=True, choices=["naive", "ht", "ml", "oracle", "s1mvu"]
    )
    p_est.add_argument("--tau", type=float, help="hard threshold (ht only)")
    p_est.add_argument("--ml-rule", choices=["exact", "literal"], default="exact")
    p_est.add_argument("--supp", help="oracle support, 1-based comma-separated")
    p_est.add_argument("--x0", help="anchor vector (s1mvu only)")
    p_est.add_argument("--y", help="observation vector, comma-separated")
    p_est.add_argument("--y-file", help="file with the observation ('-' for stdin)")
    p_est.set_defaults(func=_cmd_estimate)

    p_sweep = sub.add_parser("sweep", help="run an SNR sweep and emit CSV")
    p_sweep.add_argument("--config", required=True, help="sweep config JSON")
    p_sweep.add_argument("--out", help="output CSV path (default: stdout)")
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(parser.format_usage(), file=sys.stderr, end="")
        print(f"scov: error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as exc:
        print(f"scov: error: {exc}", file=sys.stderr)
        return 1
    except NumericDomainError as exc:
        print(f"scov: numeric error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    sys.exit(main())

"""Command-line front end.

    python -m expweights exp theorem-a --n 101 --temperature 0.1 --trials 100000 --seed 42 --out a.csv
    python -m expweights psi --deltas 0,1.5,3 --r 1

Exit status: 0 on success, 2 for invalid arguments or configuration,
1 when a run fails (invariant violation, unwritable output, ...).
Flags take precedence over ``--config`` JSON files, which take precedence
over built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Callable, Optional, Sequence

import numpy as np

from . import complexity as cx
from . import gaussian as ga
from .core import EmpiricalRisks, aew_weights, erm_indices
from .harness import ConfigError, ExperimentConfig, run_experiment
from .serialize import emit_csv, emit_json, emit_svg_rate_plot

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

THEOREMS = {"theorem-a": "A", "theorem-b": "B", "theorem-c": "C"}
DEFAULT_T = {"A": 0.1, "B": 0.05}
PLOT_COLUMN = {"A": "exact_mean_excess", "B": "mean_excess", "C": "mean_excess"}

# keys accepted in a JSON config file, per experiment
EXP_KEYS = {
    "A": {"n", "temperature", "trials", "seed", "workers", "out", "json", "plot", "threshold"},
    "B": {"n", "temperature", "trials", "seed", "workers", "out", "json", "plot", "constants",
          "epsilon", "kappa", "lambda", "M"},
    "C": {"n", "temperature", "trials", "seed", "workers", "out", "json", "plot", "constants",
          "M", "b", "x", "dictionary"},
}
DEFAULTS = {"trials": 1000, "workers": 1, "epsilon": 0.1, "kappa": 1.0, "M": None, "b": 1.0, "x": 3.0,
            "dictionary": "bernstein"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _diag(f"{self.prog}: {message}")
        sys.exit(EXIT_CONFIG)


def _diag(message: str) -> None:
    if sys.stderr.isatty() and "NO_COLOR" not in os.environ:
        message = f"\033[31m{message}\033[0m"
    print(message, file=sys.stderr)


def _int_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    if isinstance(text, (int, float)):
        return [int(text)]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    return [float(v) for v in str(text).split(",") if v.strip()]


def parse_constants(items) -> dict:
    """``["a=1,b=2", "c=3"]`` (or a dict from a config file) -> {"a": 1.0, ...}."""
    if isinstance(items, dict):
        return {str(k): float(v) for k, v in items.items()}
    out = {}
    for item in items or []:
        for pair in str(item).split(","):
            if not pair.strip():
                continue
            key, sep, value = pair.partition("=")
            if not sep:
                raise ConfigError(f"constant {pair!r} is not of the form key=value")
            try:
                out[key.strip()] = float(value)
            except ValueError as exc:
                raise ConfigError(f"constant {key.strip()!r} has a non-numeric value") from exc
    return out


def _load_config(path: Optional[str], allowed: set) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - {k.replace("-", "_") for k in allowed}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def _merge(args: argparse.Namespace, file_cfg: dict, key: str, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in file_cfg:
        return file_cfg[key]
    return default


# ---------------------------------------------------------------------------
# subcommands; each returns a zero-argument runner after validating its input


def _prepare_exp(args) -> Callable[[], int]:
    theorem = THEOREMS[args.experiment]
    cfg = _load_config(args.config, EXP_KEYS[theorem])
    get = lambda key, default=None: _merge(args, cfg, key, DEFAULTS.get(key, default))
    try:
        n_grid = _int_list(get("n") or [])
        T_raw = get("temperature")
        seed = get("seed")
        if seed is None:
            raise ConfigError("--seed is required (all randomness flows from it)")
        b = float(get("b"))
        T_grid = _float_list(T_raw) if T_raw is not None else [DEFAULT_T.get(theorem, 0.2 * max(b, max(1.0, 4 * b)))]
        constants = parse_constants(cfg.get("constants", {}))
        constants.update(parse_constants(args.constants) if getattr(args, "constants", None) else {})
        config = ExperimentConfig(
            theorem=theorem,
            n_grid=n_grid,
            T_grid=T_grid,
            trials=int(get("trials")),
            seed=int(seed),
            epsilon=float(get("epsilon")),
            kappa=float(get("kappa")),
            lambda_override=get("lambda"),
            M_override=get("M") if theorem == "B" else None,
            M=int(get("M") or 50),
            b=b,
            x=float(get("x")),
            dictionary=get("dictionary"),
            threshold=get("threshold"),
            constants=constants,
            workers=int(get("workers")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if not n_grid:
        raise ConfigError("--n is required")
    config.validate()
    out, json_path, plot = get("out"), get("json"), get("plot")

    def run() -> int:
        table = run_experiment(config)
        if out:
            emit_csv(table, out)
        else:
            sys.stdout.write(table.to_csv())
        if json_path:
            emit_json(table, json_path)
        if plot:
            emit_svg_rate_plot(table, plot, "n", PLOT_COLUMN[theorem])
        for key, value in sorted(table.meta.items()):
            print(f"# {key} = {value:.4f}", file=sys.stderr)
        return EXIT_OK

    return run


def _prepare_psi(args) -> Callable[[], int]:
    deltas = _float_list(args.deltas)
    try:
        profile = cx.ExcessRiskProfile(np.array(deltas))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not args.r > 0:
        raise ConfigError("r must be > 0")
    if args.jmax is not None and args.jmax < 1:
        raise ConfigError("--jmax must be >= 1")

    def run() -> int:
        report = cx.psi(profile, args.r, args.jmax)
        print(f"{report.psi_value:.4f}")
        if args.verbose:
            print(json.dumps(report.bucket_counts, sort_keys=True))
        return EXIT_OK

    return run


def _spec(args) -> ga.NormalizedSumSpec:
    try:
        return ga.NormalizedSumSpec(kind=args.kind, inner_n=args.inner_n, A=args.A)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _prepare_gamma1(args) -> Callable[[], int]:
    spec = _spec(args)
    if not spec.continuous:
        raise ConfigError("gamma_1 needs an absolutely continuous summand")
    try:
        query = ga.Gamma1Query(args.ell, args.level_n, spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.method == "mc" and args.seed is None:
        raise ConfigError("--seed is required for Monte Carlo quantiles")

    def run() -> int:
        kwargs = {"method": args.method}
        if args.method == "mc":
            kwargs.update(mc_samples=args.samples, rng=np.random.default_rng(args.seed))
        if args.checks:
            report = ga.lemma_gamma1_checks(query, **kwargs)
            print(json.dumps({k: v for k, v in vars(report).items()}, sort_keys=True, default=str))
        else:
            print(f"{ga.gamma1(query, **kwargs):.10f}")
        return EXIT_OK

    return run


def _prepare_be(args) -> Callable[[], int]:
    spec = _spec(args)
    if args.seed is None:
        raise ConfigError("--seed is required")
    if args.samples < 100_000:
        raise ConfigError("--samples must be >= 100000")

    def run() -> int:
        res = ga.berry_esseen_distance(spec, args.samples, np.random.default_rng(args.seed))
        slack = ga.dkw_epsilon(args.samples)
        ok = res.distance <= res.bound + slack
        print(f"distance={res.distance:.6f} bound={res.bound:.6f} dkw={slack:.6f} within={'yes' if ok else 'no'}")
        return EXIT_OK

    return run


def _prepare_weights(args) -> Callable[[], int]:
    try:
        risks = EmpiricalRisks(np.array(_float_list(args.risks)), args.n)
        if args.method == "aew" and not (math.isfinite(args.temperature) and args.temperature > 0):
            raise ValueError("temperature must be finite and > 0")
        if not np.all(np.isfinite(risks.values)):
            raise ValueError("empirical risks must be finite")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    def run() -> int:
        if args.method == "erm":
            print(",".join(str(int(j) + 1) for j in erm_indices(risks)))
        else:
            print(",".join(f"{w:.10g}" for w in aew_weights(risks, args.temperature)))
        return EXIT_OK

    return run


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="expweights", description="Exponential-weights aggregation experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    exp = sub.add_parser("exp", help="run a Monte Carlo experiment")
    exps = exp.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name, theorem in THEOREMS.items():
        p = exps.add_parser(name)
        p.add_argument("--n", help="comma-separated sample sizes")
        p.add_argument("--temperature", help="comma-separated temperatures")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--config", help="JSON file with flat keys named like the flags")
        p.add_argument("--out", help="CSV output (stdout when omitted)")
        p.add_argument("--json", help="JSON output")
        p.add_argument("--plot", help="SVG log-log rate plot")
        if theorem == "A":
            p.add_argument("--threshold", type=float, help="tail threshold (default 1/(2 sqrt n))")
        if theorem in ("B", "C"):
            p.add_argument("--constants", action="append", help="key=value[,key=value] overrides")
            p.add_argument("--M", type=int)
        if theorem == "B":
            p.add_argument("--epsilon", type=float)
            p.add_argument("--kappa", type=float)
            p.add_argument("--lambda", type=float)
        if theorem == "C":
            p.add_argument("--b", type=float)
            p.add_argument("--x", type=float)
            p.add_argument("--dictionary", choices=["bernstein", "theorem-a"])
        p.set_defaults(prepare=_prepare_exp)

    p = sub.add_parser("psi", help="complexity of an excess-risk profile")
    p.add_argument("--deltas", required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--jmax", type=int)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(prepare=_prepare_psi)

    for name, prep in (("gamma1", _prepare_gamma1), ("be-check", _prepare_be)):
        p = sub.add_parser(name)
        p.add_argument("--kind", choices=["uniform", "gaussian", "rademacher"], default="uniform")
        p.add_argument("--inner-n", type=int, default=1)
        p.add_argument("--A", type=float, default=ga.DEFAULT_A)
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int, default=1_000_000 if name == "be-check" else 10_000_000)
        if name == "gamma1":
            p.add_argument("--ell", type=int, required=True)
            p.add_argument("--level-n", type=float, required=True)
            p.add_argument("--method", choices=["exact", "mc"], default="exact")
            p.add_argument("--checks", action="store_true")
        p.set_defaults(prepare=prep)

    p = sub.add_parser("weights", help="AEW or ERM weights from empirical risks")
    p.add_argument("--risks", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--method", choices=["aew", "erm"], default="aew")
    p.set_defaults(prepare=_prepare_weights)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = args.prepare(args)
    except ValueError as exc:
        _diag(f"error: {exc}")
        return EXIT_CONFIG
    try:
        return run()
    except (RuntimeError, OSError, ValueError) as exc:
        _diag(f"error: {exc}")
        return EXIT_RUNTIME


def parse_and_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    try:
        return main(argv)
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())

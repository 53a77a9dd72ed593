"""Command-line entry point: ``proxlearn train|eval|sweep|gradcheck``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .config import load_config
from .errors import ConfigError, DataError, NumericalError, ProxLearnError
from .trainer import evaluate, format_report, sweep, train

logger = logging.getLogger("proxlearn")


def _cmd_train(args):
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.iterations is not None:
        changes["iterations"] = args.iterations
    if changes:
        cfg = cfg.replace(**changes)
    out = train(cfg, args.out, resume=args.resume, data_path=args.data)
    print(json.dumps(json.loads((out / "summary.json").read_text()), indent=2, sort_keys=True))
    return 0


def _cmd_eval(args):
    report = evaluate(args.checkpoint, args.data, args.mode, args.subset)
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(format_report(report))
    return 0


def _cmd_sweep(args):
    cfg = load_config(args.config)
    values = [v for v in args.values.split(",") if v.strip()]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    try:
        path = sweep(cfg, args.param, values, args.out, seeds)
    except ValueError as exc:
        if isinstance(exc, ProxLearnError):
            raise
        raise ConfigError(f"bad sweep value: {exc}") from exc
    print(path.read_text(), end="")
    return 0


def run_gradcheck(trials=100, seed=0, max_particles=32, max_data=64, max_features=16, max_classes=10):
    """Finite-difference check of both drift heads; returns the worst relative error per head.

    Instance sizes are drawn uniformly up to the given bounds; even trials use
    the binary head and odd trials the multi-class head.
    """
    from .grad import fd_oracle, grad_binary, grad_multiclass
    from .model import BINARY, MULTI, ModelSpec, feature_matrix, targets_for

    rng = np.random.default_rng(seed)
    worst = {BINARY: 0.0, MULTI: 0.0}
    for k in range(trials):
        variant = BINARY if k % 2 == 0 else MULTI
        n_par = int(rng.integers(1, max_particles + 1))
        n_data = int(rng.integers(1, max_data + 1))
        n_x = int(rng.integers(1, max_features + 1))
        m = int(rng.integers(2, max_classes + 1))
        spec = ModelSpec(variant, n_x, m)
        X = rng.uniform(-1, 1, (n_data, n_x))
        rho = rng.uniform(0.1, 2.0, n_par)
        theta = rng.uniform(-1, 1, (n_par, spec.p))
        if variant == BINARY:
            y = rng.choice([-1.0, 1.0], n_data)
            analytic = grad_binary(theta, X, y, rho).flat()
        else:
            y = rng.integers(0, m, n_data)
            analytic = grad_multiclass(theta, X, y, rho, m=m).flat()
        t = targets_for(y, spec)

        def energy(th):
            P = feature_matrix(th, X, spec, None if spec.is_binary else y)
            return float(np.sum(-(2.0 / n_data) * (P @ t) + P @ (P.T @ rho) / n_data))

        numeric = fd_oracle(energy, theta)
        err = np.max(np.abs(analytic - numeric)) / max(np.max(np.abs(numeric)), 1e-12)
        worst[variant] = max(worst[variant], float(err))
    return worst


def _cmd_gradcheck(args):
    worst = run_gradcheck(args.trials, args.seed)
    ok = True
    for variant, err in worst.items():
        status = "ok" if err <= args.tol else "FAIL"
        ok &= err <= args.tol
        print(f"{variant:<14} max relative error {err:.3e}  {status}")
    return 0 if ok else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxlearn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run a configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--data", help="override the dataset path in the config")
    p.add_argument("--resume", action="store_true", help="continue from OUT/checkpoint")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="dataset file (defaults to the path stored with the run)")
    p.add_argument("--mode", choices=("weighted", "unweighted"), default="weighted")
    p.add_argument("--subset", choices=("train", "test", "all"), default="test")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="train once per parameter value")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True, choices=("epsilon", "beta", "N"))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", help="comma-separated seeds (default: the config seed)")
    p.add_argument("--out", default="sweep_out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("gradcheck", help="compare analytic drifts with finite differences")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=_cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NumericalError.exit_code
    except (DataError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return DataError.exit_code
    except ProxLearnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

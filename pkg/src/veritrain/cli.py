"""Command-line entry points.

Three subcommands:

- ``run``: execute an experiment from a JSON config (or task presets) with
  ``key=value`` overrides, writing reports to the output directory;
- ``verify-one``: search one checkpointed model for a minimal adversary
  around one input, printing the outcome as JSON;
- ``export-raster``: dump a model's predicted-class grid over the unit
  square as CSV, optionally rendering it to a PNG.

Exit codes: 0 success, 2 validation problem (bad config, arguments, or
inputs), 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import experiment, nn, verifier
from .config import (ConfigError, apply_overrides, config_from_dict,
                     load_config)
from .labeling import LabelBroker
from .nn import ContractError
from .service import LabelService

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veritrain",
        description="verification-driven training of small ReLU classifiers")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--task", choices=("2d", "mnist", "trajectory"),
                     help="task presets to start from when no config file is given")
    run.add_argument("--seed", type=int, help="override the seed")
    run.add_argument("--epochs", type=int, help="override max_epoch")
    run.add_argument("--method", action="append", metavar="NAME",
                     help="override the method list (repeatable)")
    run.add_argument("--out", help="override the output directory")
    run.add_argument("overrides", nargs="*", metavar="key=value",
                     help="additional config overrides")

    one = sub.add_parser("verify-one", help="minimal adversary for one input")
    one.add_argument("--model", required=True, help="checkpoint JSON")
    one.add_argument("--input", required=True,
                     help='JSON file: {"x": [...], "label": int?, "epsilon": float?}')
    one.add_argument("--epsilon", type=float,
                     help="search radius (overrides the input file)")
    one.add_argument("--node-budget", type=int, default=50000)

    ras = sub.add_parser("export-raster", help="predicted-class grid as CSV")
    ras.add_argument("--model", required=True, help="checkpoint JSON")
    ras.add_argument("--resolution", type=int, required=True)
    ras.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    ras.add_argument("--png", help="also render the raster to this PNG")
    return parser


def _assemble_run_config(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.epochs is not None:
        overrides.append(f"max_epoch={args.epochs}")
    if args.method:
        overrides.append("methods=" + ",".join(args.method))
    if args.out:
        overrides.append(f"out_dir={args.out}")
    if args.config:
        return load_config(args.config, overrides)
    if not args.task:
        raise ConfigError("give --config or --task")
    return config_from_dict(apply_overrides({"task": args.task}, overrides))


def _cmd_run(args) -> int:
    cfg = _assemble_run_config(args)
    if cfg.labeler == "human-service":
        broker = LabelBroker(cfg.class_count)
        with LabelService(broker, port=cfg.service_port) as svc:
            print(f"labeling console: {svc.url}", file=sys.stderr)
            doc = experiment.run_experiment(cfg, broker=broker,
                                            status_sink=broker.set_status)
    else:
        doc = experiment.run_experiment(cfg)
    for method in cfg.methods:
        entry = doc["methods"].get(method)
        if entry:
            print(f"{method}: accuracy {entry['accuracy']:.4f}")
    print(f"reports written to {cfg.out_dir}")
    return EXIT_OK


def _cmd_verify_one(args) -> int:
    params, _ = nn.load_checkpoint(args.model)
    with open(args.input) as f:
        spec = json.load(f)
    if not isinstance(spec, dict) or "x" not in spec:
        raise ConfigError(f"{args.input} must be a JSON object with an 'x' array")
    x = np.asarray(spec["x"], dtype=float)
    epsilon = args.epsilon if args.epsilon is not None else spec.get("epsilon")
    if epsilon is None:
        raise ConfigError("no epsilon: pass --epsilon or put it in the input file")
    label = spec.get("label")
    res = verifier.min_adversary(params, x, float(epsilon),
                                 None if label is None else int(label),
                                 node_budget=args.node_budget)
    out = {
        "outcome": res.outcome,
        "delta": res.delta,
        "adv_class": res.adv_class,
        "nodes": res.nodes,
        "lp_calls": res.lp_calls,
        "time_seconds": round(res.time_seconds, 6),
    }
    if res.x_adv is not None:
        out["x_adv"] = res.x_adv.tolist()
    if res.bound is not None:
        out["bound"] = res.bound
    json.dump(out, sys.stdout)
    print()
    return EXIT_OK


def _cmd_export_raster(args) -> int:
    params, _ = nn.load_checkpoint(args.model)
    raster = experiment.export_boundary_raster(params, args.resolution)
    if args.out == "-":
        np.savetxt(sys.stdout, raster, fmt="%d", delimiter=",")
    else:
        np.savetxt(args.out, raster, fmt="%d", delimiter=",")
    if args.png:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(4, 4))
        ax.imshow(raster, origin="lower", extent=(0, 1, 0, 1),
                  cmap="coolwarm", interpolation="nearest")
        ax.set_title("predicted classes")
        fig.savefig(args.png, dpi=110, bbox_inches="tight")
        plt.close(fig)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify-one":
            return _cmd_verify_one(args)
        return _cmd_export_raster(args)
    except (ConfigError, ContractError, FileNotFoundError,
            json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - defensive
        logging.getLogger("veritrain.cli").exception("run failed")
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands:

* ``train``          run training from a config file (or the desk profile)
* ``eval``           roll out evaluation episodes from a checkpoint
* ``verify``         run the invariant/oracle suite, print a pass/fail table
* ``export-curves``  extract per-episode learning curves from a metrics CSV

``POMPC_SEED`` in the environment overrides the configured seed.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import config as config_mod
from . import trainer


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pompc",
        description="KL-regularized model-based RL with MPPI planning")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training session")
    p_train.add_argument("--config", help="config file (dotted key = value)")
    p_train.add_argument("--profile", default=None,
                         choices=config_mod.PROFILES,
                         help="base profile when no --config is given")
    p_train.add_argument("--set", dest="overrides", action="append",
                         default=[], metavar="KEY=VALUE",
                         help="config override (repeatable)")
    p_train.add_argument("--metrics", default=None,
                         help="metrics CSV path (overrides io.metrics_path)")
    p_train.add_argument("--checkpoint", default=None,
                         help="final checkpoint path (overrides "
                              "io.checkpoint_path)")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=10)
    p_eval.add_argument("--seed", type=int, default=None)

    p_verify = sub.add_parser(
        "verify", help="run the invariant/oracle acceptance suite")
    p_verify.add_argument("--full", action="store_true",
                          help="include the desk-scale end-to-end learning "
                               "run (takes a long time)")
    p_verify.add_argument("--only", default=None,
                          help="comma-separated check names")

    p_exp = sub.add_parser("export-curves",
                           help="episode returns from a metrics CSV")
    p_exp.add_argument("--metrics", required=True)
    p_exp.add_argument("--out", required=True)
    return parser


def _cmd_train(args):
    try:
        if args.config:
            cfg = config_mod.from_file(args.config, args.overrides)
            if args.profile:
                raise ValueError("--profile conflicts with --config "
                                 "(set 'profile = ...' in the file)")
        else:
            cfg = config_mod.make_config(args.profile or "desk")
            for item in args.overrides:
                key, _, val = item.partition("=")
                config_mod.set_key(cfg, key.strip(), val.strip())
            cfg.validate()
    except FileNotFoundError as exc:
        print(f"error: config file not found: {exc.filename}", file=sys.stderr)
        return 2
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    env_seed = os.environ.get("POMPC_SEED")
    if env_seed is not None:
        cfg.seed = int(env_seed)
    state = trainer.run_training(cfg, metrics_path=args.metrics,
                                 checkpoint_path=args.checkpoint)
    print(f"finished: {state.env_step} env steps, {state.n_updates} updates, "
          f"{state.episode_idx} episodes")
    return 0


def _cmd_eval(args):
    try:
        state = trainer.load_checkpoint(args.checkpoint)
    except FileNotFoundError:
        print(f"error: checkpoint not found: {args.checkpoint}",
              file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else state.cfg.seed + 1
    mean, half, returns = trainer.evaluate(
        state, args.episodes, rng=np.random.default_rng(seed))
    if half is None:
        print(f"mean return over {len(returns)} episode(s): {mean:.3f}")
    else:
        print(f"mean return over {len(returns)} episodes: "
              f"{mean:.3f} +/- {half:.3f} (95% CI)")
    return 0


def _cmd_verify(args):
    from . import verify
    names = args.only.split(",") if args.only else None
    results = verify.run_checks(names=names, include_slow=args.full)
    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}  {r.detail}")
        failed += not r.passed
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def _cmd_export_curves(args):
    try:
        with open(args.metrics, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except FileNotFoundError:
        print(f"error: metrics file not found: {args.metrics}",
              file=sys.stderr)
        return 2
    header = lines[0].split(",")
    try:
        idx = [header.index(c) for c in ("step", "episode", "ep_return",
                                         "ep_length")]
        type_idx = header.index("row_type")
    except ValueError as exc:
        print(f"error: not a metrics CSV: {exc}", file=sys.stderr)
        return 2
    out_lines = ["step,episode,ep_return,ep_length"]
    for line in lines[1:]:
        parts = line.split(",")
        if parts[type_idx] == "episode":
            out_lines.append(",".join(parts[i] for i in idx))
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("\n".join(out_lines) + "\n")
    print(f"wrote {len(out_lines) - 1} episode rows to {args.out}")
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    handlers = {"train": _cmd_train, "eval": _cmd_eval,
                "verify": _cmd_verify, "export-curves": _cmd_export_curves}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())

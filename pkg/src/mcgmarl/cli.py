"""Command line entry point: train runs, checkpoint evaluation, self-checks.

Exit codes: 0 success, 1 failed verify checks, 2 configuration errors,
3 numeric divergence during training, 4 unreadable checkpoints.
"""

import argparse
import os
import sys

from . import config as config_mod
from . import verify as verify_mod
from .checkpoint import load_into, save_params
from .errors import CheckpointError, ConfigError, NumericError
from .metrics import MetricsRow, append_row
from .training import Trainer, evaluate

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECKPOINT = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcgmarl")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train one config across seeds")
    _config_flags(run)

    ev = sub.add_parser("eval", help="evaluate a saved checkpoint greedily")
    _config_flags(ev)
    ev.add_argument("--checkpoint", required=True, help="checkpoint file to load")
    ev.add_argument("--episodes", type=int, default=20)

    vf = sub.add_parser("verify", help="run self-check suites")
    vf.add_argument("suite", nargs="?", default="all",
                    help="grads | oracles | envs | reduction | all")
    return parser


def _config_flags(p):
    p.add_argument("--config", default=None, help="TOML config file")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted config override, repeatable")
    p.add_argument("--seeds", default=None, help="comma-separated seed list")
    p.add_argument("--out", default=None, help="output directory root")


def _load(args) -> dict:
    return config_mod.load_config(args.config, overrides=args.override,
                                  seeds=args.seeds, out=args.out)


def _atomic_save(path: str, params):
    tmp = path + ".tmp"
    save_params(tmp, params)
    os.replace(tmp, path)


def run_seed(cfg: dict, seed: int) -> str:
    """Train one seed, streaming metrics and checkpoints into its run directory."""
    run_dir = os.path.join(cfg["out"], cfg["run_id"], f"seed{seed}")
    os.makedirs(run_dir, exist_ok=True)
    per_seed = dict(cfg, seeds=[seed])
    with open(os.path.join(run_dir, "resolved.toml"), "w") as fh:
        fh.write(config_mod.dump_config(per_seed))
    metrics_path = os.path.join(run_dir, "metrics.csv")
    if os.path.exists(metrics_path):
        os.unlink(metrics_path)
    ckpt_path = os.path.join(run_dir, "checkpoint.bin")

    env = config_mod.build_env(cfg, seed=seed)
    eval_env = config_mod.build_env(cfg, seed=seed)
    make_net = config_mod.net_factory(cfg, env.spec, seed=seed)
    tc = config_mod.train_config(cfg, seed)

    def on_eval(event):
        # trainer is bound below, before run() fires the first evaluation
        row = MetricsRow(cfg["run_id"], seed, cfg["env"]["name"], cfg["algo"],
                         event.env_steps, event.episodes, event.loss,
                         event.result.return_mean, event.result.return_std,
                         event.result.metric_name, event.result.metric_value)
        append_row(metrics_path, row)
        _atomic_save(ckpt_path, trainer.net.params)
        print(f"  steps {event.env_steps:>8}  loss {event.loss:.4g}  "
              f"return {event.result.return_mean:.4g}  "
              f"{event.result.metric_name} {event.result.metric_value:.4g}")

    print(f"[{cfg['run_id']}] seed {seed}: {cfg['algo']} on {cfg['env']['name']} "
          f"for {tc.total_steps} steps")
    trainer = Trainer(make_net, env, eval_env, tc, on_eval=on_eval)
    trainer.run()
    return run_dir


def cmd_run(args) -> int:
    cfg = _load(args)
    for seed in cfg["seeds"]:
        run_seed(cfg, seed)
    return 0


def cmd_eval(args) -> int:
    cfg = _load(args)
    seed = cfg["seeds"][0]
    env = config_mod.build_env(cfg, seed=seed)
    net = config_mod.net_factory(cfg, env.spec, seed=seed)()
    load_into(args.checkpoint, net.params)
    result = evaluate(env, net, args.episodes, seed)
    row = MetricsRow(cfg["run_id"], seed, cfg["env"]["name"], cfg["algo"],
                     0, args.episodes, float("nan"),
                     result.return_mean, result.return_std,
                     result.metric_name, result.metric_value)
    print(row.to_line())
    append_row(os.path.join(os.path.dirname(os.path.abspath(args.checkpoint)),
                            "eval.csv"), row)
    return 0


def cmd_verify(args) -> int:
    if args.suite == "all":
        names = list(verify_mod.SUITES)
    elif args.suite in verify_mod.SUITES:
        names = [args.suite]
    else:
        raise ConfigError(f"unknown suite {args.suite!r}, expected one of "
                          f"{tuple(verify_mod.SUITES)} or 'all'", key="suite")
    results = verify_mod.run_suites(names)
    for r in results:
        print(r.line())
    failed = sum(not r.ok for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "eval": cmd_eval, "verify": cmd_verify}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT


if __name__ == "__main__":
    sys.exit(main())

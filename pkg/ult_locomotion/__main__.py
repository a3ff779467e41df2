#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

Command-line entry point.

Exit status: 0 on success, 1 on usage errors, 2 on any other failure.
"""

import argparse
import json
import os
import sys

from . import baselines, checkpoint, evaluation, experiments, log
from .config import load_config, with_overrides
from .errors import ULTError, UsageError
from .trainer import train

logger = log.setup_custom_logger("ult_locomotion")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


class ArgumentParser(argparse.ArgumentParser):
    """
    argparse with usage errors mapped to exit status 1, printing the full help
    """

    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, "{}: error: {}\n".format(self.prog, message))


def _overrides(args):
    overrides = {}
    if getattr(args, "seed", None) is not None:
        if args.command == "eval":
            overrides.setdefault("eval", {})["seed"] = args.seed
        else:
            overrides.setdefault("train", {})["seed"] = args.seed
    if getattr(args, "alpha", None) is not None:
        overrides.setdefault("mixer", {})["alpha"] = args.alpha
    if getattr(args, "episodes", None) is not None:
        overrides.setdefault("eval", {})["episodes"] = args.episodes
    if getattr(args, "updates", None) is not None:
        overrides.setdefault("train", {})["total_updates"] = args.updates
    return overrides


def _config(args):
    return load_config(args.config, _overrides(args))


def _print(data):
    print(json.dumps(data, indent=2, sort_keys=True))


def _load_for_eval(args):
    """
    Checkpoint plus the configuration it runs under: --config if given,
    otherwise the configuration recorded in the checkpoint header
    """
    if args.config is not None:
        cfg = _config(args)
        model, header = checkpoint.load_model(args.checkpoint, cfg["net"])
        return model, header, cfg
    model, header = checkpoint.load_model(args.checkpoint)
    recorded = header.get("metadata", {}).get("config")
    cfg = load_config(None, recorded)
    overrides = _overrides(args)
    if overrides:
        cfg = with_overrides(cfg, overrides)
    return model, header, cfg


def _alpha(header):
    alpha = header.get("metadata", {}).get("alpha")
    return float("nan") if alpha is None else alpha


def run_train(args):
    cfg = _config(args)
    _, final = train(cfg, args.out, resume=args.resume)
    _print({"checkpoint": final})


def run_eval(args):
    model, header, cfg = _load_for_eval(args)
    if args.deploy:
        if not model.deployable:
            raise UsageError(
                "--deploy is not possible for a {} checkpoint, it needs privilege".format(model.kind)
            )
        heads = ["student"]
    else:
        heads = []
        if getattr(model, "teacher_head", None) is not None or model.kind == "oracle":
            heads.append("teacher")
        if model.deployable:
            heads.append("student")

    episodes = cfg["eval"]["episodes"]
    seed = cfg["eval"]["seed"]
    results = {}
    reports = []
    for head in heads:
        metrics = evaluation.evaluate(model, cfg["env"], episodes, seed, head=head)
        results[head] = metrics.as_dict()
        if args.oracle_metrics is not None:
            reference = evaluation.read_regime_metrics(args.oracle_metrics)
            reports.append(
                evaluation.normalize(
                    metrics,
                    reference,
                    scheme=header.get("metadata", {}).get("scheme", model.kind),
                    head=head,
                    alpha=_alpha(header),
                    seed=cfg["train"]["seed"],
                )
            )
    if args.out is not None:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "metrics.json"), "w") as out_f:
            json.dump(results, out_f, indent=2, sort_keys=True)
        if reports:
            evaluation.write_report(os.path.join(args.out, "report.csv"), reports)
    _print(results)


def run_sweep(args):
    cfg = _config(args)
    reports = experiments.alpha_sweep(cfg, args.alphas, args.out, args.oracle_metrics)
    _print(evaluation.report_summary(reports))


def run_ablate(args):
    cfg = _config(args)
    reports = experiments.ablation_suite(cfg, args.out, args.oracle_metrics, args.variants)
    _print(evaluation.report_summary(reports))


def run_baseline(args):
    cfg = _config(args)
    summary = baselines.run_scheme(
        args.scheme,
        cfg,
        args.out,
        oracle_checkpoint=args.oracle,
        ult_checkpoint=args.checkpoint,
    )
    _print(summary)


def run_export(args):
    model, header = checkpoint.load_model(args.checkpoint)
    if model.kind != "ult":
        raise UsageError("Only full unified checkpoints can be exported, got {}".format(model.kind))
    checkpoint.export_student(model, args.out, header.get("metadata"))
    _print({"checkpoint": args.out})


def run_report(args):
    rows = experiments.merge_reports(args.runs, args.out)
    _print({"rows": len(rows), "out": args.out or args.runs})


def build_parser():
    from ult_locomotion import __version__

    parser = ArgumentParser(
        prog="ult-locomotion",
        description="Unified teacher/student locomotion transformer, version " + str(__version__),
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--debug", action="store_true", help="some debug output")
    parser.add_argument("--quiet", action="store_true", help="only critical messages")
    parser.add_argument("--version", action="version", version=str(__version__))
    subparsers = parser.add_subparsers(dest="command", parser_class=ArgumentParser)
    subparsers.required = True

    def add_config(sub):
        sub.add_argument("--config", type=str, default=None, help="configuration JSON file")

    train_parser = subparsers.add_parser("train", help="train a unified model")
    add_config(train_parser)
    train_parser.add_argument("--seed", type=int, default=None, help="training seed")
    train_parser.add_argument("--out", type=str, required=True, help="run directory")
    train_parser.add_argument("--alpha", type=float, default=None, help="mix ratio")
    train_parser.add_argument("--updates", type=int, default=None, help="total updates")
    train_parser.add_argument("--resume", type=str, default=None, help="checkpoint to resume from")
    train_parser.set_defaults(func=run_train)

    eval_parser = subparsers.add_parser("eval", help="evaluate a checkpoint")
    add_config(eval_parser)
    eval_parser.add_argument("--checkpoint", type=str, required=True, help="checkpoint file")
    eval_parser.add_argument("--episodes", type=int, default=None, help="evaluation episodes")
    eval_parser.add_argument("--seed", type=int, default=None, help="evaluation seed")
    eval_parser.add_argument(
        "--deploy", action="store_true", help="student only, through the deploy path"
    )
    eval_parser.add_argument(
        "--oracle-metrics", type=str, default=None, help="oracle regime metrics CSV to normalize against"
    )
    eval_parser.add_argument("--out", type=str, default=None, help="directory for metrics.json / report.csv")
    eval_parser.set_defaults(func=run_eval)

    sweep_parser = subparsers.add_parser("sweep-alpha", help="train and evaluate one model per mix ratio")
    add_config(sweep_parser)
    sweep_parser.add_argument(
        "--alphas", type=float, nargs="+", default=[0.0, 0.2, 0.4, 0.6, 0.8, 1.0], help="mix ratios"
    )
    sweep_parser.add_argument("--seed", type=int, default=None, help="training seed")
    sweep_parser.add_argument("--updates", type=int, default=None, help="total updates per run")
    sweep_parser.add_argument("--episodes", type=int, default=None, help="evaluation episodes")
    sweep_parser.add_argument("--oracle-metrics", type=str, default=None, help="oracle regime metrics CSV")
    sweep_parser.add_argument("--out", type=str, required=True, help="sweep directory")
    sweep_parser.set_defaults(func=run_sweep)

    ablate_parser = subparsers.add_parser("ablate", help="train and evaluate the ablated variants")
    add_config(ablate_parser)
    ablate_parser.add_argument(
        "--variants",
        type=str,
        nargs="+",
        default=list(experiments.ABLATIONS),
        choices=list(experiments.ABLATIONS),
        help="variants to run",
    )
    ablate_parser.add_argument("--seed", type=int, default=None, help="training seed")
    ablate_parser.add_argument("--updates", type=int, default=None, help="total updates per run")
    ablate_parser.add_argument("--episodes", type=int, default=None, help="evaluation episodes")
    ablate_parser.add_argument("--oracle-metrics", type=str, default=None, help="oracle regime metrics CSV")
    ablate_parser.add_argument("--out", type=str, required=True, help="suite directory")
    ablate_parser.set_defaults(func=run_ablate)

    baseline_parser = subparsers.add_parser("baseline", help="run one comparison scheme")
    add_config(baseline_parser)
    baseline_parser.add_argument("--scheme", type=str, required=True, choices=baselines.SCHEMES)
    baseline_parser.add_argument("--seed", type=int, default=None, help="training seed")
    baseline_parser.add_argument("--updates", type=int, default=None, help="total updates")
    baseline_parser.add_argument("--episodes", type=int, default=None, help="evaluation episodes")
    baseline_parser.add_argument("--oracle", type=str, default=None, help="trained oracle checkpoint")
    baseline_parser.add_argument(
        "--checkpoint", type=str, default=None, help="alpha = 1 unified checkpoint (post-hoc)"
    )
    baseline_parser.add_argument("--out", type=str, required=True, help="run directory")
    baseline_parser.set_defaults(func=run_baseline)

    export_parser = subparsers.add_parser("export", help="write a deploy-only student checkpoint")
    export_parser.add_argument("--checkpoint", type=str, required=True, help="full checkpoint")
    export_parser.add_argument("--out", type=str, required=True, help="exported file")
    export_parser.set_defaults(func=run_export)

    report_parser = subparsers.add_parser("report", help="merge report CSVs below a directory")
    report_parser.add_argument("--runs", type=str, required=True, help="directory with runs")
    report_parser.add_argument("--out", type=str, default=None, help="output directory (default: --runs)")
    report_parser.set_defaults(func=run_report)
    return parser


def main(argv=None):
    """
    Run the command line; returns the exit status
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    log.set_verbosity("ult_locomotion", debug=args.debug, quiet=args.quiet)
    try:
        args.func(args)
    except UsageError:
        return EXIT_USAGE
    except ULTError:
        return EXIT_FAILURE
    except Exception as e:
        logger.error("Error during processing, exiting: {}".format(e), exc_info=True)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

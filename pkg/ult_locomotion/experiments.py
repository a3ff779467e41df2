#!/usr/bin/env python3
"""
Copyright 2026 The ult_locomotion authors

Released under the MIT license, see LICENSE.md.

Experiment suites (mix-ratio sweep, loss ablations) and the report merger.
"""

import os

import numpy as np

from . import baselines, evaluation, log, utils
from .config import with_overrides
from .env import LocomotionEnv
from .errors import ConfigurationError, ReportError
from .trainer import train

logger = log.setup_custom_logger("ult_locomotion")

# overrides per ablated variant; no-mixer is the vanilla PPO configuration
ABLATIONS = {
    "full": {},
    "no-L_n": {"losses": {"use_next_prediction": False}},
    "no-L_a": {"losses": {"beta": 0.0}},
    "no-both": {"losses": {"ult_weight": 0.0}},
    "no-mixer": {
        "net": {"use_teacher": False, "value_from_privilege": False},
        "mixer": {"alpha": 0.0},
        "losses": {"ult_weight": 0.0},
    },
}

REPORT_KEY = ["scheme", "head", "alpha", "seed", "regime", "metric"]
TABLE_COLUMNS = ["scheme", "head", "alpha", "seed", "metric", "value"]


def oracle_reference(cfg, out_dir, oracle_metrics=None, env_factory=LocomotionEnv):
    """
    Per-regime oracle metrics: read from a metrics CSV, taken as given, or
    trained from scratch under out_dir/oracle
    """
    if isinstance(oracle_metrics, str):
        return evaluation.read_regime_metrics(oracle_metrics)
    if oracle_metrics is not None:
        return oracle_metrics
    oracle_dir = None if out_dir is None else os.path.join(out_dir, "oracle")
    _, metrics = baselines.train_oracle(cfg, oracle_dir, env_factory=env_factory)
    return metrics.per_regime


def evaluate_run(model, cfg, reference, scheme, alpha, heads=("student",)):
    """
    Evaluate the requested heads of a trained model and normalize them
    """
    episodes = cfg["eval"]["episodes"]
    seed = cfg["eval"]["seed"]
    reports = []
    for head in heads:
        metrics = evaluation.evaluate(model, cfg["env"], episodes, seed, head=head)
        reports.append(
            evaluation.normalize(
                metrics,
                reference,
                scheme=scheme,
                head=head,
                alpha=alpha,
                seed=cfg["train"]["seed"],
            )
        )
    return reports


def _write_reports(out_dir, reports):
    if out_dir is None:
        return
    os.makedirs(out_dir, exist_ok=True)
    evaluation.write_report(os.path.join(out_dir, "report.csv"), reports)
    utils.write_json(evaluation.report_summary(reports), os.path.join(out_dir, "summary.json"))


def alpha_sweep(cfg, alphas, out_dir, oracle_metrics=None, env_factory=LocomotionEnv):
    """
    Train one unified model per mix ratio with everything else fixed, then
    evaluate the teacher (with privilege) and the student (deploy path).
    At alpha = 0 the teacher never acts and is not evaluated.

    Arguments:
        cfg {dict} -- base configuration
        alphas {list} -- mix ratios in [0, 1]
        out_dir {str} -- sweep directory, one sub-directory per ratio

    Keyword Arguments:
        oracle_metrics {str or dict} -- oracle regime metrics CSV or per-regime dict

    Returns:
        list -- NormalizedReports, teacher and student per ratio
    """
    for alpha in alphas:
        if not 0.0 <= alpha <= 1.0:
            raise ConfigurationError("mix ratio {} outside [0, 1]".format(alpha))
    reference = oracle_reference(cfg, out_dir, oracle_metrics, env_factory)
    reports = []
    for alpha in alphas:
        run_cfg = with_overrides(cfg, {"mixer": {"alpha": alpha}})
        run_dir = os.path.join(out_dir, "alpha_{}".format(alpha))
        logger.info("mix ratio sweep: training alpha = {}".format(alpha))
        trainer, _ = train(run_cfg, run_dir, env_factory=env_factory, scheme="ult")
        heads = ("teacher", "student") if alpha > 0 else ("student",)
        run_reports = evaluate_run(trainer.model, run_cfg, reference, "ult", alpha, heads)
        _write_reports(run_dir, run_reports)
        reports += run_reports
    _write_reports(out_dir, reports)
    return reports


def ablation_suite(cfg, out_dir, oracle_metrics=None, variants=None, env_factory=LocomotionEnv):
    """
    Train the full model and its ablated variants with identical seeds and
    evaluate every student.

    Returns:
        list -- one NormalizedReport per variant
    """
    variants = list(ABLATIONS) if variants is None else variants
    unknown = [v for v in variants if v not in ABLATIONS]
    if unknown:
        raise ConfigurationError("Unknown ablation variants: {}".format(unknown))
    reference = oracle_reference(cfg, out_dir, oracle_metrics, env_factory)
    reports = []
    for variant in variants:
        run_cfg = with_overrides(cfg, ABLATIONS[variant])
        run_dir = os.path.join(out_dir, variant)
        logger.info("ablation suite: training {}".format(variant))
        trainer, _ = train(run_cfg, run_dir, env_factory=env_factory, scheme=variant)
        run_reports = evaluate_run(
            trainer.model, run_cfg, reference, variant, run_cfg["mixer"]["alpha"]
        )
        _write_reports(run_dir, run_reports)
        reports += run_reports
    _write_reports(out_dir, reports)
    return reports


def _report_files(runs_dir):
    found = []
    for root, _, files in os.walk(runs_dir):
        for name in files:
            if name in ("report.csv", "merged.csv"):
                found.append(os.path.join(root, name))
    return sorted(found)


def _sort_key(row):
    key = []
    for column in REPORT_KEY:
        value = row[column]
        try:
            number = float(value)
        except ValueError:
            number = float("nan")
        if np.isnan(number):
            key.append((1, 0.0, value))
        else:
            key.append((0, number, value))
    return key


def merge_reports(runs_dir, out_dir=None):
    """
    Merge every report CSV found below runs_dir into merged.csv (one row per
    key, later files win), table.csv (average rows, one per scheme, head,
    ratio, seed and metric) and summary.json. Merging a directory that
    only holds a merged output reproduces it.

    Returns:
        list -- merged rows
    """
    if not os.path.isdir(runs_dir):
        raise ReportError("No such run directory: {}".format(runs_dir))
    out_dir = runs_dir if out_dir is None else out_dir
    files = _report_files(runs_dir)
    if not files:
        raise ReportError("No report.csv found below {}".format(runs_dir))

    merged = {}
    for report_file in files:
        for row in utils.read_csv(report_file):
            missing = [c for c in evaluation.REPORT_COLUMNS if c not in row]
            if missing:
                raise ReportError("{} lacks columns {}".format(report_file, missing))
            merged[tuple(row[c] for c in REPORT_KEY)] = {
                c: row[c] for c in evaluation.REPORT_COLUMNS
            }
    rows = sorted(merged.values(), key=_sort_key)
    os.makedirs(out_dir, exist_ok=True)
    utils.write_csv(os.path.join(out_dir, "merged.csv"), evaluation.REPORT_COLUMNS, rows)

    table = [
        {c: row[c] for c in TABLE_COLUMNS}
        for row in rows
        if row["regime"] == evaluation.AVERAGE
    ]
    utils.write_csv(os.path.join(out_dir, "table.csv"), TABLE_COLUMNS, table)

    summary = {}
    for row in table:
        key = (row["scheme"], row["head"], row["alpha"], row["seed"])
        entry = summary.setdefault(
            key,
            {"scheme": row["scheme"], "head": row["head"], "alpha": row["alpha"], "seed": row["seed"]},
        )
        value = float(row["value"])
        entry[row["metric"]] = None if np.isnan(value) else value
    utils.write_json(list(summary.values()), os.path.join(out_dir, "summary.json"))
    logger.info("Merged {} report files into {} rows".format(len(files), len(rows)))
    return rows


if __name__ == "__main__":
    print("this is only a module")

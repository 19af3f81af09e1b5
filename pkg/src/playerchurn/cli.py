#!/usr/bin/env python3
"""
playerchurn command line: reproducible batch runs over snapshot traces.

Every subcommand writes its artifacts plus manifest.csv and run_log.json to the
output directory. Settings resolve as flag > run-config file > environment >
built-in default.
"""
import argparse
import json
import logging
import sys
import time
import warnings
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .cohorts import cohort_comparisons, summary_frame, sweep_frame
from .config import Config
from .errors import DataError
from .evaluation import (
    confusion, cross_validate, grid_search, predict_rows, random_search, roc_auc, score_rows,
    selection_report, stratified_kfold, train_test_split,
)
from .ingest import ingest_traces, window_filter, write_stats, write_trace, write_trace_chunks
from .learners import MODEL_FAMILIES, ModelBundle, PcaModel, Standardizer, make_model, save_model
from .learners.clustering import KMeansModel, variance_table
from .logger import RunLogger, RunLogHandler, StatusFormatter
from .models import FeatureMatrix
from .profiles import (
    ProfileTable, assemble_dataset, build_profiles, default_vocabularies, filter_trial, label_table,
    read_dataset, write_dataset, write_profiles,
)
from .report import (
    activity_series, bar_chart, cluster_charts, emit_csv, emit_svg, frequency_table, playtime_percentiles,
    roc_chart, survival_chart,
)
from .report.emit import ChartSpec, Series
from .report.tables import FREQUENCY_KEYS, GRANULARITIES, GROUP_KEYS
from .schemas import RunConfig, SynthConfig, WindowSpec
from .survival import km_estimate, median_survival
from .synth import generate_traces, write_ground_truth

logger = logging.getLogger(__name__)

COMMANDS = ("ingest", "profile", "survival", "train", "evaluate", "report", "synth")
CLASSIFIERS = ("lr", "svm", "knn", "rf")
SEED_NAMES = ("split", "cv", "search", "model")
BAR_KEYS = ("level_interval", "race", "class")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

DEFAULT_SYNTH = {
    "players": 1000,
    "groups": [
        {"name": "long", "fraction": 0.5, "mean_lifetime_days": 200.0, "activity_probability": 0.6,
         "mean_snapshots_per_day": 8.0, "guild_probability": 0.7},
        {"name": "short", "fraction": 0.5, "mean_lifetime_days": 150.0, "activity_probability": 0.4,
         "mean_snapshots_per_day": 4.0, "guild_probability": 0.3},
    ],
}


class UsageError(Exception):
    """Bad flags or an unusable run config"""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _int_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")
    if not values:
        raise argparse.ArgumentTypeError("list is empty")
    return values


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _str_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="Run-config JSON (default: $PLAYERCHURN_CONFIG or config/paper.json)")
    common.add_argument("--output-dir", help="Directory for artifacts and the manifest")
    common.add_argument("--threads", type=int, help="Worker cap; 1 is the reference output")
    common.add_argument("--seed", type=int, help="Master seed every derived seed comes from")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    traces = _Parser(add_help=False)
    traces.add_argument("inputs", nargs="*", help="Trace files (default: inputs from the run config)")
    traces.add_argument("--strict", action="store_true", help="Abort on the first malformed row")
    traces.add_argument("--window-start", help="Window start, e.g. 2008-01-01")
    traces.add_argument("--window-end", help="Window end, e.g. 2008-12-31 23:59:59")
    traces.add_argument("--gap-days", type=int, help="Churn gap in days (default 180)")
    traces.add_argument("--trial-days", type=int, help="Drop characters observed for fewer days")
    traces.add_argument("--density-mode", choices=["span", "slots"])

    learning = _Parser(add_help=False)
    learning.add_argument("--dataset", help="Dataset CSV written by 'profile' instead of raw traces")
    learning.add_argument("--features", type=_str_list, help="Comma-separated feature spec")
    learning.add_argument("--preset", help="Named hyperparameter preset from the run config")
    learning.add_argument("--cv-folds", type=int, help="Stratified folds for cross-validation")

    parser = _Parser(
        prog="playerchurn",
        description="Churn analytics over MMORPG snapshot traces",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  playerchurn synth --players 2000 --output-dir out/synth
  playerchurn ingest out/synth/trace.csv --output-dir out/ingest
  playerchurn survival out/synth/trace.csv --gaps 60,90,120,180
  playerchurn train out/synth/trace.csv --model rf --preset paper
  playerchurn evaluate out/synth/trace.csv --preset paper --threads 4
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sub.add_parser("ingest", parents=[common, traces], help="Merge, validate and deduplicate traces")
    sub.add_parser("profile", parents=[common, traces], help="Player profiles and the labelled dataset")

    survival = sub.add_parser("survival", parents=[common, traces], help="Kaplan-Meier curves and cohorts")
    survival.add_argument("--gaps", type=_int_list, help="Churn gaps in days, e.g. 60,90,120,180")
    survival.add_argument("--at-days", type=_int_list, default=[215],
                          help="Days at which to report the probability of not churning")
    survival.add_argument("--tau-step", type=float, default=30.0, help="Spacing of the RMST tau sweep")

    train = sub.add_parser("train", parents=[common, traces, learning], help="Fit and score one model")
    train.add_argument("--model", choices=sorted(MODEL_FAMILIES), default="rf")
    train.add_argument("--grid", help="JSON object of parameter lists to search, e.g. '{\"C\": [1, 25]}'")
    train.add_argument("--n-iter", type=int, help="Random search draws (default: exhaustive grid)")

    evaluate = sub.add_parser("evaluate", parents=[common, traces, learning],
                              help="All classifiers, clustering baselines and feature selection")
    evaluate.add_argument("--models", type=_str_list, default=list(CLASSIFIERS))
    evaluate.add_argument("--keep", type=int, help="Features RFE keeps (default: half)")

    report = sub.add_parser("report", parents=[common, traces], help="Distribution tables and charts")
    report.add_argument("--group-by", choices=GROUP_KEYS, help="Also split activity series by this key")
    report.add_argument("--percentiles", type=_float_list)

    synth = sub.add_parser("synth", parents=[common], help="Synthetic traces with known ground truth")
    synth.add_argument("--players", type=int)
    synth.add_argument("--window-days", type=int)
    synth.add_argument("--join-spread-days", type=int)
    return parser


def _validation_message(error: ValidationError) -> str:
    parts = [f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in error.errors()]
    return f"invalid config ({'; '.join(parts)})"


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Environment defaults, then the run-config file, then flags"""
    try:
        Config.validate()
    except ValueError as e:
        raise UsageError(str(e))

    data: Dict[str, Any] = {
        "output_dir": Config.OUTPUT_DIR,
        "threads": Config.THREADS,
        "spill_rows": Config.SPILL_ROWS,
    }
    path = Path(args.config) if args.config else Config.run_config_path()
    if path.exists():
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise UsageError(f"{path}: not valid JSON ({e})")
        if not isinstance(loaded, dict):
            raise UsageError(f"{path}: run config must be a JSON object")
        data.update(loaded)
    elif args.config or Config.RUN_CONFIG:
        raise UsageError(f"config file not found: {path}")

    flags = {
        "output_dir": args.output_dir,
        "threads": args.threads,
        "seed": args.seed,
        "gap_days": getattr(args, "gap_days", None),
        "trial_days": getattr(args, "trial_days", None),
        "density_mode": getattr(args, "density_mode", None),
        "gaps": getattr(args, "gaps", None),
        "features": getattr(args, "features", None),
        "cv_folds": getattr(args, "cv_folds", None),
        "percentiles": getattr(args, "percentiles", None),
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    if getattr(args, "inputs", None):
        data["inputs"] = list(args.inputs)
    if getattr(args, "strict", False):
        data["trace_schema"] = {**data.get("trace_schema", {}), "strict": True}
    start, end = getattr(args, "window_start", None), getattr(args, "window_end", None)
    if start or end:
        window = dict(data.get("window") or {})
        if start:
            window["start"] = start
        if end:
            window["end"] = end
        data["window"] = window
    if getattr(args, "command", None) == "synth":
        synth = dict(data.get("synth") or DEFAULT_SYNTH)
        for key in ("players", "window_days", "join_spread_days"):
            if getattr(args, key, None) is not None:
                synth[key] = getattr(args, key)
        data["synth"] = synth

    return RunConfig.model_validate(data)


def derive_seeds(master: int) -> Dict[str, int]:
    """Independent child seeds for each random stage, all from the master seed"""
    children = np.random.SeedSequence(master).spawn(len(SEED_NAMES))
    return {name: int(child.generate_state(1)[0]) for name, child in zip(SEED_NAMES, children)}


def _one_line(error: BaseException) -> str:
    return " ".join(str(error).split()) or type(error).__name__


# ---------------------------------------------------------------------------
# Shared stages
# ---------------------------------------------------------------------------

def _load_trace(run_config: RunConfig, run_log: RunLogger) -> Tuple[pd.DataFrame, WindowSpec]:
    if not run_config.inputs:
        raise UsageError("no trace files given (pass paths or set 'inputs' in the run config)")

    print(f"⏳ Ingesting {len(run_config.inputs)} trace file(s)...")
    result = ingest_traces(run_config.inputs, run_config.trace_schema, threads=run_config.threads,
                           spill_rows=run_config.spill_rows)
    stats = result.stats
    print(f"✓ Accepted {stats.rows_accepted} rows ({stats.rows_rejected} rejected, "
          f"{stats.duplicates_dropped} duplicates) for {stats.unique_characters} characters")
    for reject in result.rejects[:5]:
        print(f"   ⚠️  {reject}")
    if stats.rows_rejected:
        run_log.log_warning(f"{stats.rows_rejected} trace rows rejected")
    run_log.log_stage("ingest", **stats.model_dump(mode="json"))

    try:
        frame = result.frame
    finally:
        result.close()
    if run_config.window is not None:
        window = run_config.window
        frame = window_filter(frame, window.start, window.end)
    elif stats.window_start is None:
        raise DataError("traces hold no valid rows")
    else:
        start = pd.Timestamp(stats.window_start).normalize()
        end = pd.Timestamp(stats.window_end).normalize() + pd.Timedelta(hours=23, minutes=50)
        window = WindowSpec(start=start.to_pydatetime(), end=end.to_pydatetime())
    if frame.empty:
        raise DataError(f"no snapshots inside the window {window.start} .. {window.end}")
    return frame, window


def _profiles(run_config: RunConfig, run_log: RunLogger) -> Tuple[pd.DataFrame, ProfileTable]:
    frame, window = _load_trace(run_config, run_log)
    table = build_profiles(frame, window, run_config.density_mode)
    run_log.log_stage("profiles", characters=len(table), window_days=window.days,
                      density_mode=run_config.density_mode)
    print(f"✓ Built {len(table)} profiles over a {window.days}-day window")
    return frame, table


def _trial_filtered(table: ProfileTable, run_config: RunConfig, run_log: RunLogger) -> ProfileTable:
    kept = filter_trial(table, run_config.trial_days)
    run_log.log_stage("trial_filter", min_days=run_config.trial_days, kept=len(kept), dropped=len(table) - len(kept))
    if len(kept) == 0:
        raise DataError(f"no characters observed for at least {run_config.trial_days} days")
    return kept


def _dataset(args: argparse.Namespace, run_config: RunConfig, run_log: RunLogger) -> FeatureMatrix:
    if args.dataset:
        matrix = read_dataset(args.dataset)
        print(f"✓ Loaded dataset {args.dataset}: {matrix.n_rows} rows x {len(matrix.feature_names)} features")
    else:
        _, table = _profiles(run_config, run_log)
        table = _trial_filtered(table, run_config, run_log)
        schema = run_config.trace_schema
        matrix = assemble_dataset(table, run_config.features, run_config.gap_days,
                                  default_vocabularies(schema.races, schema.classes))
    positives = int(matrix.labels.sum())
    run_log.log_stage("dataset", rows=matrix.n_rows, features=len(matrix.feature_names),
                      label=matrix.label_name, positives=positives)
    if positives == 0 or positives == matrix.n_rows:
        raise DataError(f"{matrix.label_name} has a single class ({positives} of {matrix.n_rows} churned)")
    print(f"✓ Dataset: {matrix.n_rows} players, {positives} churned under {matrix.label_name}")
    return matrix


def _preset(args: argparse.Namespace, run_config: RunConfig, family: str) -> Dict[str, Any]:
    if not args.preset:
        return {}
    if args.preset not in run_config.presets:
        raise UsageError(f"unknown preset '{args.preset}' (known: {sorted(run_config.presets)})")
    return run_config.preset(args.preset, family)


def _split(matrix: FeatureMatrix, seeds: Dict[str, int]) -> Tuple[FeatureMatrix, FeatureMatrix]:
    train_idx, test_idx = train_test_split(matrix.labels, seeds["split"])
    return matrix.take(train_idx), matrix.take(test_idx)


def _fit_bundle(family: str, params: Dict[str, Any], train: FeatureMatrix, seed: int, threads: int,
                meta: Dict[str, Any]) -> ModelBundle:
    scaler = Standardizer().fit(train.rows)
    estimator = make_model(family, params, seed=seed, threads=threads)
    estimator.fit(scaler.transform(train.rows), train.labels)
    return ModelBundle(estimator=estimator, feature_names=list(train.feature_names),
                       standardizer=scaler, meta=meta)


def _metric_row(family: str, params: Dict[str, Any], fold: str, metric: str, value: float) -> dict:
    return {"model": family, "params": json.dumps(params, sort_keys=True), "fold": fold,
            "metric": metric, "value": value}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(args: argparse.Namespace, run_config: RunConfig, run_log: RunLogger):
    if not run_config.inputs:
        raise UsageError("no trace files given (pass paths or set 'inputs' in the run config)")
    print(f"⏳ Ingesting {len(run_config.inputs)} trace file(s)...")
    result = ingest_traces(run_config.inputs, run_config.trace_schema, threads=run_config.threads,
                           spill_rows=run_config.spill_rows)
    chunks = result.iter_frames()
    if run_config.window is not None:
        window = run_config.window
        chunks = (window_filter(chunk, window.start, window.end) for chunk in chunks)
    try:
        rows_in_window = write_trace_chunks(chunks, run_log.artifact("trace.csv"), run_config.trace_schema)
    finally:
        result.close()
    run_log.log_stage("ingest", **result.stats.model_dump(mode="json"), rows_in_window=rows_in_window)

    write_stats(result.stats, run_log.artifact("ingest_stats.csv"))
    rejects = pd.DataFrame(
        [{"path": r.path, "line": r.line_number, "reason": r.reason} for r in result.rejects],
        columns=["path", "line", "reason"],
    )
    emit_csv(rejects, run_log.artifact("rejects.csv"))

    stats = result.stats
    print(f"✓ Rows read: {stats.rows_read} | accepted: {stats.rows_accepted} | "
          f"rejected: {stats.rows_rejected} | duplicates: {stats.duplicates_dropped}")
    print(f"   Characters: {stats.unique_characters} | races: {stats.unique_races} | "
          f"classes: {stats.unique_classes} | zones: {stats.unique_zones} | guilds: {stats.unique_guilds}")
    if stats.rows_rejected:
        run_log.log_warning(f"{stats.rows_rejected} trace rows rejected")


def cmd_profile(args: argparse.Namespace, run_config: RunConfig, run_log: RunLogger):
    _, table = _profiles(run_config, run_log)
    write_profiles(table, run_log.artifact("profiles.csv"))
    kept = _trial_filtered(table, run_config, run_log)
    schema = run_config.trace_schema
    matrix = assemble_dataset(kept, run_config.features, run_config.gap_days,
                              default_vocabularies(schema.races, schema.classes))
    write_dataset(matrix, run_log.artifact("dataset.csv"))
    print(f"✓ {len(kept)} of {len(table)} characters pass the {run_config.trial_days}-day trial filter")
    print(f"✓ {int(matrix.labels.sum())} churned under {matrix.label_name}")


def cmd_survival(args: argparse.Namespace, run_config: RunConfig, run_log: RunLogger):
    _, table = _profiles(run_config, run_log)
    table = _trial_filtered(table, run_config, run_log)

    curves = []
    summary = []
    for gap in run_config.gaps:
        curve = km_estimate(label_table(table, gap))
        emit_csv(curve.to_frame(), run_log.artifact(f"km_gap{gap}.csv"))
        curves.append((f"{gap}-day gap", curve))
        median = median_survival(curve)
        row = {"gap_days": gap, "subjects": curve.n_subjects, "events": int(np.sum(curve.events)),
               "median_survival_days": median if median is not None else float("nan")}
        for day in args.at_days:
            row[f"survival_at_{day}"] = curve.survival_at(day)
        summary.append(row)
        at = ", ".join(f"S({d})={row[f'survival_at_{d}']:.3f}" for d in args.at_days)
        print(f"✓ Gap {gap}d: {row['events']} churn events in {curve.n_subjects} players, {at}")

    emit_svg(survival_chart(curves, title="Kaplan-Meier survival by churn gap"),
             run_log.artifact("km_overlay.svg"), run_config.svg)
    emit_csv(pd.DataFrame(summary), run_log.artifact("survival_summary.csv"))

    gap = run_config.gap_days
    print(f"⏳ Cohort comparisons under the {gap}-day gap...")
    comparisons = cohort_comparisons(table, gap, run_config.hours_thresholds,
                                     run_config.density_threshold, args.tau_step)
    emit_csv(summary_frame(comparisons), run_log.artifact(f"cohorts_gap{gap}.csv"))
    emit_csv(sweep_frame(comparisons), run_log.artifact(f"tau_sweep_gap{gap}.csv"))
    for c in comparisons:
        if c.churn_ratio is not None:
            print(f"   {c.name}: {c.group} churns {c.churn_ratio:.2f}x vs {c.reference} (tau={c.tau:g}d)")
        if c.name == "guild":
            emit_svg(survival_chart([(c.reference, c.reference_curve), (c.group, c.group_curve)],
                                    title=f"Guild vs no guild, {gap}-day gap"),
                     run_log.artifact(f"km_guild_gap{gap}.svg"), run_config.svg)
    run_log.log_stage("survival", gaps=list(run_config.gaps), comparisons=len(comparisons))


def cmd_train(args: argparse.Namespace, run_config: RunConfig, run_log: RunLogger):
    seeds = derive_seeds(run_config.seed)
    for name, value in seeds.items():
        run_log.set_seed(name, value)
    family = args.model
    params = _preset(args, run_config, family)
    metric = "accuracy" if family == "kmeans" else "roc_auc"

    matrix = _dataset(args, run_config, run_log)
    train, test = _split(matrix, seeds)
    plan = stratified_kfold(train.labels, run_config.cv_folds, seeds["cv"])

    rows: List[dict] = []
    if args.grid:
        try:
            grid = json.loads(args.grid)
        except json.JSONDecodeError as e:
            raise UsageError(f"--grid is not valid JSON ({e})")
        if not isinstance(grid, dict):
            raise UsageError("--grid must be a JSON object of parameter lists")
        print(f"⏳ Searching {family} over {grid} ({plan.k}-fold CV, {metric})...")
        if args.n_iter:
            search = random_search(family, grid, args.n_iter, seeds["search"], train.rows, train.labels,
                                   plan, metric, run_config.threads, run_config.threshold, params)
        else:
            search = grid_search(family, grid, train.rows, train.labels, plan, metric,
                                 seeds["model"], run_config.threads, run_config.threshold, params)
        rows.extend(search.to_frame().to_dict("records"))
        params = {**params, **search.best_params}
        print(f"✓ Best {metric} {search.best_score:.4f} at {search.best_params}")
    else:
        print(f"⏳ Cross-validating {family} {params} ({plan.k} folds)...")
        result = cross_validate(family, params, train.rows, train.labels, plan, metric,
                                seeds["model"], run_config.threads, run_config.threshold)
        for fold, score in enumerate(result.fold_scores):
            rows.append(_metric_row(family, params, str(fold), metric, score))
        rows.append(_metric_row(family, params, "mean", metric, result.mean_score))
        print(f"✓ CV {metric}: {result.mean_score:.4f}")
    run_log.log_stage("cross_validation", model=family, params=params, folds=plan.k)

    bundle = _fit_bundle(family, params, train, seeds["model"], run_config.threads,
                         meta={"label": matrix.label_name, "preset": args.preset or ""})
    save_model(bundle, run_log.artifact(f"model_{family}.txt"))

    prepared = bundle.prepare(test.rows)
    predictions = predict_rows(bundle.estimator, prepared, run_config.threshold)
    matrix_counts = confusion(test.labels, predictions)
    rows.append(_metric_row(family, params, "test", "accuracy", matrix_counts.accuracy))
    rows.append(_metric_row(family, params, "test", "false_positives", matrix_counts.fp))
    if metric == "roc_auc":
        roc = roc_auc(test.labels, score_rows(bundle.estimator, prepared))
        rows.append(_metric_row(family, params, "test", "roc_auc", roc.auc))
        emit_csv(roc.to_frame(), run_log.artifact(f"roc_{family}.csv"))
        emit_svg(roc_chart([(family, roc)], title=f"{family} test ROC"),
                 run_log.artifact(f"roc_{family}.svg"), run_config.svg)
        print(f"✓ Test ROC AUC: {roc.auc:.4f}")
    emit_csv(pd.DataFrame(rows, columns=["model", "params", "fold", "metric", "value"]),
             run_log.artifact(f"metrics_{family}.csv"))
    print(f"✓ Test accuracy: {matrix_counts.accuracy:.4f} ({matrix_counts.fp} false positives)")
    run_log.log_stage("test", model=family, rows=test.n_rows, accuracy=matrix_counts.accuracy)


def _clustering_baselines(train: FeatureMatrix, test: FeatureMatrix, seed: int, threads: int,
                          chart: Optional[Callable[[int, np.ndarray, np.ndarray], None]] = None) -> List[dict]:
    """k-means on the raw standardized rows and on 2 and 3 principal components"""
    scaler = Standardizer().fit(train.rows)
    X_train, X_test = scaler.transform(train.rows), scaler.transform(test.rows)
    rows = []
    for components in (None, 2, 3):
        if components is not None and components > min(X_train.shape[0] - 1, X_train.shape[1]):
            logger.warning(f"skipping PCA({components}) baseline: too few features")
            continue
        fit_rows, eval_rows = X_train, X_test
        if components is not None:
            pca = PcaModel(n_components=components).fit(X_train)
            fit_rows, eval_rows = pca.transform(X_train), pca.transform(X_test)
            if chart is not None:
                chart(components, fit_rows, train.labels)
        model = KMeansModel(n_clusters=2, seed=seed, threads=threads).fit(fit_rows, train.labels)
        accuracy = confusion(test.labels, model.predict(eval_rows)).accuracy
        method = "kmeans" if components is None else f"pca{components}+kmeans"
        rows.append({"method": method, "components": components or X_train.shape[1],
                     "test_accuracy": accuracy})
        print(f"   {method}: test accuracy {accuracy:.4f}")
    return rows


def cmd_evaluate(args: argparse.Namespace, run_config: RunConfig, run_log: RunLogger):
    seeds = derive_seeds(run_config.seed)
    for name, value in seeds.items():
        run_log.set_seed(name, value)
    unknown = [m for m in args.models if m not in CLASSIFIERS]
    if unknown:
        raise UsageError(f"unknown model(s) {unknown} (choose from {list(CLASSIFIERS)})")

    matrix = _dataset(args, run_config, run_log)
    train, test = _split(matrix, seeds)
    plan = stratified_kfold(train.labels, run_config.cv_folds, seeds["cv"])

    summary, rocs = [], []
    for family in args.models:
        params = _preset(args, run_config, family)
        print(f"⏳ {family} {params}...")
        cv = cross_validate(family, params, train.rows, train.labels, plan, "roc_auc",
                            seeds["model"], run_config.threads, run_config.threshold)
        bundle = _fit_bundle(family, params, train, seeds["model"], run_config.threads,
                             meta={"label": matrix.label_name})
        prepared = bundle.prepare(test.rows)
        roc = roc_auc(test.labels, score_rows(bundle.estimator, prepared))
        counts = confusion(test.labels, predict_rows(bundle.estimator, prepared, run_config.threshold))
        emit_csv(roc.to_frame(), run_log.artifact(f"roc_{family}.csv"))
        rocs.append((family, roc))
        summary.append({"model": family, "params": json.dumps(params, sort_keys=True),
                        "cv_roc_auc": cv.mean_score, "test_roc_auc": roc.auc,
                        "test_accuracy": counts.accuracy, "false_positives": counts.fp})
        print(f"✓ {family}: CV AUC {cv.mean_score:.4f} | test AUC {roc.auc:.4f} | "
              f"accuracy {counts.accuracy:.4f} | FP {counts.fp}")
    emit_csv(pd.DataFrame(summary), run_log.artifact("evaluation.csv"))
    if rocs:
        emit_svg(roc_chart(rocs, title="Test ROC"), run_log.artifact("roc_all.svg"), run_config.svg)
    run_log.log_stage("classifiers", models=list(args.models), folds=plan.k)

    print("⏳ Clustering baselines...")

    def cluster_svg(components: int, points: np.ndarray, labels: np.ndarray):
        emit_svg(cluster_charts(points, labels, title=f"PCA({components}) train rows"),
                 run_log.artifact(f"clusters_pca{components}.svg"), run_config.svg)

    emit_csv(pd.DataFrame(_clustering_baselines(train, test, seeds["model"], run_config.threads,
                                                chart=cluster_svg)),
             run_log.artifact("clustering.csv"))

    standardized = Standardizer().fit_transform(train.rows)
    try:
        emit_csv(pd.DataFrame(variance_table(standardized)), run_log.artifact("pca_variance.csv"))
    except ValueError as e:
        logger.warning(f"PCA variance report skipped: {e}")

    n_features = len(train.feature_names)
    keep = args.keep if args.keep else max(1, n_features // 2)
    c = float(_preset(args, run_config, "lr").get("C", 25.0))
    print(f"⏳ Feature selection (ANOVA F and RFE down to {keep})...")
    report = selection_report(train.feature_names, train.rows, train.labels, keep, c=c)
    emit_csv(report, run_log.artifact("feature_selection.csv"))
    top = report.sort_values("f_rank").head(3)["feature"].tolist()
    print(f"✓ Top F-scores: {', '.join(top)}")


def cmd_report(args: argparse.Namespace, run_config: RunConfig, run_log: RunLogger):
    frame, table = _profiles(run_config, run_log)

    for key in FREQUENCY_KEYS:
        freq = frequency_table(frame, key)
        emit_csv(freq.to_frame(), run_log.artifact(f"freq_{key}.csv"))
        if key in BAR_KEYS:
            emit_svg(bar_chart(freq.rows, "value", "count", title=f"Characters by {key}"),
                     run_log.artifact(f"freq_{key}.svg"), run_config.svg)
    print(f"✓ {len(FREQUENCY_KEYS)} frequency tables")

    for granularity in GRANULARITIES:
        series = activity_series(frame, granularity)
        emit_csv(series, run_log.artifact(f"activity_{granularity}.csv"))
        if args.group_by:
            grouped = activity_series(frame, granularity, args.group_by)
            emit_csv(grouped, run_log.artifact(f"activity_{granularity}_by_{args.group_by}.csv"))
    daily = activity_series(frame, "day")
    spec = ChartSpec(kind="line", title="Active characters per day", x_label="day of window",
                     y_label="active characters",
                     series=[Series(name="all", x=list(range(len(daily))),
                                    y=daily["active_characters"].tolist())])
    emit_svg(spec, run_log.artifact("activity_day.svg"), run_config.svg)
    print(f"✓ Activity series at {', '.join(GRANULARITIES)} granularity")

    percentiles = playtime_percentiles(table, run_config.percentiles)
    emit_csv(percentiles, run_log.artifact("playtime_percentiles.csv"))
    median = percentiles.loc[percentiles["percentile"] == "50", "hours"]
    if len(median):
        print(f"✓ Median daily play time: {float(median.iloc[0]):.2f} h")
    run_log.log_stage("report", characters=len(table), snapshots=len(frame))


def cmd_synth(args: argparse.Namespace, run_config: RunConfig, run_log: RunLogger):
    synth: SynthConfig = run_config.synth.model_copy(update={"seed": run_config.seed})
    print(f"⏳ Synthesizing {synth.players} players over {synth.window_days} days "
          f"({len(synth.groups)} groups)...")
    frame, truth = generate_traces(synth)
    write_trace(frame, run_log.artifact("trace.csv"), run_config.trace_schema)
    write_ground_truth(truth, run_log.artifact("ground_truth.csv"))
    run_log.log_stage("synth", players=synth.players, snapshots=len(frame),
                      churned=int(truth["churned"].sum()))
    print(f"✓ {len(frame)} snapshots, {int(truth['churned'].sum())} of {synth.players} players churned")


HANDLERS: Dict[str, Callable[[argparse.Namespace, RunConfig, RunLogger], None]] = {
    "ingest": cmd_ingest,
    "profile": cmd_profile,
    "survival": cmd_survival,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "synth": cmd_synth,
}


def _configure_logging(level: Optional[str]):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(StatusFormatter())
    logging.basicConfig(
        level=getattr(logging, (level or Config.LOG_LEVEL).upper(), logging.INFO),
        handlers=[handler],
        force=True,
    )


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, run one subcommand and return the exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"❌ Usage error: {_one_line(e)}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    _configure_logging(args.log_level)
    try:
        run_config = resolve_config(args)
    except UsageError as e:
        print(f"❌ Usage error: {_one_line(e)}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as e:
        print(f"❌ Usage error: {_validation_message(e)}", file=sys.stderr)
        return EXIT_USAGE

    print("\n" + "=" * 100)
    print(f"PLAYERCHURN {args.command.upper()}")
    print("=" * 100)
    print(f"Output: {run_config.output_dir}")
    print(f"Seed: {run_config.seed} | Threads: {run_config.threads}")
    print("-" * 100)

    start_time = time.time()
    code = EXIT_OK
    try:
        run_log = RunLogger(Path(run_config.output_dir), args.command, run_config.model_dump(mode="json"))
    except OSError as e:
        print(f"❌ Data error: cannot create output directory ({_one_line(e)})", file=sys.stderr)
        return EXIT_DATA
    run_log.set_seed("master", run_config.seed)
    try:
        with warnings.catch_warnings(record=True) as caught, RunLogHandler(run_log):
            warnings.simplefilter("always")
            HANDLERS[args.command](args, run_config, run_log)
        for w in caught:
            print(f"⚠️  Warning: {_one_line(w.message)}")
            run_log.log_warning(_one_line(w.message))
    except UsageError as e:
        print(f"❌ Usage error: {_one_line(e)}", file=sys.stderr)
        code = EXIT_USAGE
    except (DataError, ValueError, OSError, ArithmeticError) as e:
        print(f"❌ Data error: {_one_line(e)}", file=sys.stderr)
        code = EXIT_DATA
    except Exception as e:
        logger.debug("internal error", exc_info=True)
        print(f"❌ Internal error: {type(e).__name__}: {_one_line(e)}", file=sys.stderr)
        code = EXIT_INTERNAL
    finally:
        run_log.log_stage("finish", exit_code=code)
        manifest = run_log.save()

    print("-" * 100)
    if code == EXIT_OK:
        print(f"✓ {args.command} finished in {time.time() - start_time:.1f}s, "
              f"{len(run_log.artifacts)} artifact(s) in {run_config.output_dir}")
    print(f"📝 Manifest: {manifest}")
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

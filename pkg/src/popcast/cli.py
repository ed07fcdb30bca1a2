"""Command-line surface: ingest, score, evaluate, sweep, horizon, synth, compare.

Every subcommand is deterministic given its inputs, flags, and seed; repeated
invocations produce byte-identical CSV/JSON outputs. Report-producing
subcommands additionally render figures next to the delimited output unless
``--no-figures`` is passed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import ContractError, ParseError, PopcastError
from .events import (
    InputFormat,
    InteractionLog,
    apply_filters,
    parse_events,
    read_canonical,
    sample_users,
    summarize,
    write_canonical,
)
from .experiment import (
    ExperimentPlan,
    ExperimentReport,
    PredictorTemplate,
    Selector,
    compare_predictors,
    compute_averages,
    read_metric_rows,
    run_grid,
    horizon_sweep,
    sample_cuts,
    write_comparison,
    write_report,
    run_for_cuts,
)
from .index import CutSpec, build_index
from .predictors import score_pbp, score_proposed, score_total_popularity, write_score_table
from .synthgen import SynthModelParams, generate, write_synth_outputs

_GRANULARITIES = ("days", "epoch-seconds", "iso8601")


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _comma_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _comma_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _read_raw_events(path: str, fmt: InputFormat) -> InteractionLog:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return parse_events(fh, fmt, epoch_label=Path(path).name)
    except ParseError as exc:
        raise PopcastError(f"{path}: {exc}") from exc


def _read_canonical_events(path: str) -> InteractionLog:
    try:
        return read_canonical(path, epoch_label=Path(path).name)
    except ParseError as exc:
        raise PopcastError(f"{path}: {exc}") from exc


def _read_ownership(path: str) -> dict[int, int]:
    ownership: dict[int, int] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if len(row) < 2:
                raise PopcastError(f"{path}: line {line_no}: expected item_id,user_id")
            try:
                ownership[int(row[0])] = int(row[1])
            except ValueError:
                raise PopcastError(f"{path}: line {line_no}: bad ids {row[:2]}") from None
    return ownership


# -- subcommands ---------------------------------------------------------


def _cmd_ingest(args: argparse.Namespace) -> int:
    columns = tuple(args.columns.split(","))
    fmt = InputFormat(
        delimiter=args.delimiter,
        has_header=args.header,
        day_granularity=args.day_granularity,
        columns=columns,
    )
    log = _read_raw_events(args.raw, fmt)
    ownership = _read_ownership(args.ownership) if args.ownership else None
    log = apply_filters(
        log,
        min_rating_exclusive=args.min_rating_exclusive,
        min_user_events=args.min_user_events,
        ownership=ownership,
        activity_count_before_rating_filter=args.activity_count_before_rating,
    )
    summary = {}
    if args.sample_users is not None:
        log = sample_users(log, args.sample_users, args.seed)
        summary["seed"] = args.seed
    write_canonical(log, args.out)
    summary.update(summarize(log))
    summary["out"] = str(args.out)
    summary["schema_version"] = 1
    _print_json(summary)
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    log = _read_canonical_events(args.events)
    index = build_index(log)
    cut = CutSpec(t=args.t, t_p=args.tp, t_f=args.tf)
    if args.predictor == "total":
        table = score_total_popularity(index, cut)
    elif args.predictor == "pbp":
        table = score_pbp(index, cut, args.lambda_, pbp_form=args.pbp_form)
    else:
        table = score_proposed(
            index,
            cut,
            args.lambda_,
            args.gamma,
            pbp_form=args.pbp_form,
            windowed_decay=args.decay_window == "past",
        )
    write_score_table(table, args.out)
    _print_json(
        {
            "out": str(args.out),
            "n_items": len(table.scores),
            "normalized": table.normalized,
            "schema_version": 1,
        }
    )
    return 0


def _plan_from_args(args: argparse.Namespace) -> ExperimentPlan:
    base = ExperimentPlan.from_json_file(args.plan) if args.plan else ExperimentPlan()
    updates: dict[str, object] = {}
    if getattr(args, "cuts", None) is not None:
        updates["n_cuts"] = args.cuts
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "tp", None) is not None:
        updates["t_p_days"] = args.tp
    if getattr(args, "tf", None) is not None:
        updates["t_f_days"] = args.tf
    if getattr(args, "n", None) is not None:
        updates["ns"] = args.n
    if getattr(args, "lambda_grid", None) is not None:
        updates["lambda_grid"] = args.lambda_grid
    if getattr(args, "gamma_grid", None) is not None:
        updates["gamma_grid"] = args.gamma_grid
    if getattr(args, "warmup_days", None) is not None:
        updates["warmup_days"] = args.warmup_days
    if getattr(args, "novelty_basis", None) is not None:
        updates["novelty_basis"] = args.novelty_basis
    if getattr(args, "predictors", None) is not None:
        updates["predictors"] = tuple(
            PredictorTemplate(kind=kind.strip()) for kind in args.predictors.split(",")
        )
    return replace(base, **updates) if updates else base


def _finish_report(
    report: ExperimentReport, out_dir: str, figures: bool, kind: str
) -> int:
    paths = write_report(report, out_dir)
    figure_paths: list[str] = []
    if figures:
        from . import figures as figmod

        render = figmod.horizon_figures if kind == "horizon" else figmod.sweep_figures
        figure_paths = [str(p) for p in render(report, out_dir)]
    _print_json(
        {
            "metrics": str(paths["metrics"]),
            "summary": str(paths["summary"]),
            "figures": figure_paths,
            "n_rows": len(report.rows),
            "n_failed_cells": len(report.failures),
            "schema_version": 1,
        }
    )
    return 1 if report.failures else 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    log = _read_canonical_events(args.events)
    index = build_index(log)
    plan = _plan_from_args(args)
    report = run_grid(index, plan, workers=args.workers)
    return _finish_report(report, args.out, args.figures, "sweep")


def _cmd_horizon(args: argparse.Namespace) -> int:
    log = _read_canonical_events(args.events)
    index = build_index(log)
    plan = _plan_from_args(args)
    report = horizon_sweep(index, plan, list(args.tf_list), workers=args.workers)
    return _finish_report(report, args.out, args.figures, "horizon")


def _cmd_evaluate(args: argparse.Namespace) -> int:
    log = _read_canonical_events(args.events)
    index = build_index(log)
    template = PredictorTemplate(
        kind=args.predictor,
        lambda_=args.lambda_ if args.predictor != "total" else None,
        gamma=args.gamma if args.predictor == "proposed" else None,
    )
    plan = _plan_from_args(args)
    plan = replace(plan, predictors=(template,))
    if args.t is not None:
        for t in args.t:
            index.check_cut(CutSpec(t=t, t_p=plan.t_p_days, t_f=plan.t_f_days))
        cut_days = sorted(args.t)
    else:
        cut_days = [c.t for c in sample_cuts(index, plan)]
    rows, failures = run_for_cuts(index, plan, cut_days, workers=args.workers)
    report = ExperimentReport(
        plan=plan.to_dict(),
        cuts=cut_days,
        rows=rows,
        failures=failures,
        averages=compute_averages(rows),
    )
    return _finish_report(report, args.out, args.figures, "sweep")


def _cmd_synth(args: argparse.Namespace) -> int:
    params = SynthModelParams(
        horizon_days=args.horizon_days,
        links_per_day=args.links_per_day,
        new_items_per_day=args.new_items_per_day,
        n_users=args.n_users,
        attachment_offset=args.attachment_offset,
        fitness=args.fitness,
        fitness_mean=args.fitness_mean,
        theta=args.theta,
        seed=args.seed,
    )
    truth = generate(params)
    truth_out = args.truth_out or str(Path(args.out).with_suffix("")) + "_truth.csv"
    write_synth_outputs(truth, args.out, truth_out)
    summary = summarize(truth.log)
    summary.update(
        {
            "seed": params.seed,
            "out": str(args.out),
            "truth_out": str(truth_out),
            "schema_version": 1,
        }
    )
    _print_json(summary)
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    metrics_path = Path(args.metrics)
    if metrics_path.is_dir():
        metrics_path = metrics_path / "metrics.csv"
    rows = read_metric_rows(metrics_path)
    report = ExperimentReport(
        plan={},
        cuts=sorted({r.t for r in rows}),
        rows=rows,
        failures=[],
        averages=compute_averages(rows),
    )
    cmp = compare_predictors(
        report, Selector.parse(args.baseline), Selector.parse(args.challenger)
    )
    out_dir = args.out or str(metrics_path.parent)
    paths = write_comparison(cmp, out_dir)
    figure_paths: list[str] = []
    if args.figures:
        from . import figures as figmod

        figure_paths = [str(p) for p in figmod.comparison_figures(cmp, out_dir)]
    _print_json(
        {
            "comparison_csv": str(paths["comparison_csv"]),
            "comparison_json": str(paths["comparison_json"]),
            "figures": figure_paths,
            "baseline": cmp.baseline,
            "challenger": cmp.challenger,
            "schema_version": 1,
        }
    )
    return 0


# -- parser ---------------------------------------------------------------


def _add_figures_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--figures",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="render PNG figures alongside the CSV/JSON output (default: on)",
    )


def _add_plan_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--plan", help="JSON plan file; flags below override its fields")
    parser.add_argument("--cuts", type=int, help="number of sampled cut days (default: 10)")
    parser.add_argument("--seed", type=int, help="sampling seed (default: 42)")
    parser.add_argument("--tp", type=int, help="trailing window length in days (default: 30)")
    parser.add_argument("--tf", type=int, help="future window length in days (default: 30)")
    parser.add_argument(
        "--n", type=_comma_ints, help="comma-separated list sizes (default: 50,100,200)"
    )
    parser.add_argument(
        "--warmup-days",
        type=int,
        help="minimum history before a cut (default: trailing window length)",
    )
    parser.add_argument(
        "--novelty-basis",
        choices=("total", "past-gain"),
        help="incumbent ranking that defines new entries (default: total)",
    )
    parser.add_argument(
        "--workers", type=int, default=1, help="parallel cut workers; output-invariant (default: 1)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="popcast",
        description="Predict near-future item popularity in user-item interaction logs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and filter a raw log into canonical form")
    p.add_argument("raw", help="raw input CSV")
    p.add_argument("--out", required=True, help="canonical event CSV to write")
    p.add_argument("--delimiter", default=",", help="field delimiter (default: ,)")
    p.add_argument(
        "--header",
        action=argparse.BooleanOptionalAction,
        default=False,
        help="first line is a header (default: no)",
    )
    p.add_argument(
        "--day-granularity",
        choices=_GRANULARITIES,
        default="epoch-seconds",
        help="timestamp interpretation (default: epoch-seconds)",
    )
    p.add_argument(
        "--columns",
        default="user_id,item_id,timestamp,rating",
        help="comma-separated column meanings in file order "
        "(default: user_id,item_id,timestamp,rating; trailing rating optional)",
    )
    p.add_argument(
        "--min-rating-exclusive",
        type=int,
        default=None,
        help="keep events with rating strictly greater than this (default: no filter)",
    )
    p.add_argument(
        "--min-user-events",
        type=int,
        default=0,
        help="drop users with fewer events than this (default: 0, no filter)",
    )
    p.add_argument(
        "--activity-count-before-rating",
        action="store_true",
        help="count user activity before the rating filter instead of after",
    )
    p.add_argument(
        "--ownership",
        default=None,
        help="item_id,user_id CSV enabling self-link removal (default: off)",
    )
    p.add_argument(
        "--sample-users",
        type=int,
        default=None,
        help="keep a uniform sample of this many users (default: off)",
    )
    p.add_argument("--seed", type=int, default=42, help="user sampling seed (default: 42)")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("score", help="score all candidate items at a cut day")
    p.add_argument("events", help="canonical event CSV")
    p.add_argument("--predictor", required=True, choices=("total", "pbp", "proposed"))
    p.add_argument("--t", type=int, required=True, help="cut day")
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.9,
                   help="recency weight in [0,1] (default: 0.9)")
    p.add_argument("--gamma", type=float, default=0.1, help="decay rate per day (default: 0.1)")
    p.add_argument("--tp", type=int, default=30, help="trailing window in days (default: 30)")
    p.add_argument("--tf", type=int, default=30, help="future window in days (default: 30)")
    p.add_argument(
        "--pbp-form",
        choices=("window-start-degree", "window-gain"),
        default="window-start-degree",
        help="what lambda subtracts from the degree (default: window-start-degree)",
    )
    p.add_argument(
        "--decay-window",
        choices=("all", "past"),
        default="all",
        help="links feeding the recency weight (default: all up to the cut)",
    )
    p.add_argument("--out", required=True, help="score CSV to write (JSON sidecar alongside)")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("evaluate", help="metrics for one predictor over sampled or given cuts")
    p.add_argument("events", help="canonical event CSV")
    p.add_argument("--predictor", required=True, choices=("total", "pbp", "proposed"))
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.9,
                   help="recency weight in [0,1] (default: 0.9)")
    p.add_argument("--gamma", type=float, default=0.1, help="decay rate per day (default: 0.1)")
    p.add_argument(
        "--t",
        type=_comma_ints,
        default=None,
        help="comma-separated explicit cut days (default: sample via --cuts/--seed)",
    )
    _add_plan_flags(p)
    _add_figures_flag(p)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="full parameter grid over sampled cuts")
    p.add_argument("events", help="canonical event CSV")
    _add_plan_flags(p)
    p.add_argument(
        "--lambda-grid", type=_comma_floats, help="comma-separated lambda values (default: 0.9)"
    )
    p.add_argument(
        "--gamma-grid", type=_comma_floats, help="comma-separated gamma values (default: 0.1)"
    )
    p.add_argument(
        "--predictors",
        help="comma-separated predictor kinds (default: total,pbp,proposed)",
    )
    _add_figures_flag(p)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("horizon", help="sweep repeated across future-window lengths")
    p.add_argument("events", help="canonical event CSV")
    p.add_argument(
        "--tf-list",
        type=_comma_ints,
        required=True,
        help="comma-separated future window lengths in days",
    )
    _add_plan_flags(p)
    p.add_argument(
        "--lambda-grid", type=_comma_floats, help="comma-separated lambda values (default: 0.9)"
    )
    p.add_argument(
        "--gamma-grid", type=_comma_floats, help="comma-separated gamma values (default: 0.1)"
    )
    p.add_argument(
        "--predictors",
        help="comma-separated predictor kinds (default: total,pbp,proposed)",
    )
    _add_figures_flag(p)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=_cmd_horizon)

    p = sub.add_parser("synth", help="generate a synthetic interaction log")
    p.add_argument("--horizon-days", type=int, default=365, help="days to simulate (default: 365)")
    p.add_argument("--links-per-day", type=int, default=100, help="links per day (default: 100)")
    p.add_argument(
        "--new-items-per-day",
        type=float,
        default=1.0,
        help="expected new items per day, Poisson (default: 1.0)",
    )
    p.add_argument("--n-users", type=int, default=1000, help="user universe size (default: 1000)")
    p.add_argument(
        "--attachment-offset",
        type=float,
        default=1.0,
        help="additive degree smoothing for newborn items (default: 1.0)",
    )
    p.add_argument(
        "--fitness",
        choices=("constant", "uniform", "exponential"),
        default="constant",
        help="per-item fitness distribution (default: constant)",
    )
    p.add_argument(
        "--fitness-mean", type=float, default=1.0,
        help="mean of the exponential fitness draw (default: 1.0)",
    )
    p.add_argument("--theta", type=float, default=0.0, help="aging rate per day (default: 0.0)")
    p.add_argument("--seed", type=int, default=42, help="generator seed (default: 42)")
    p.add_argument("--out", required=True, help="canonical event CSV to write")
    p.add_argument(
        "--truth-out",
        default=None,
        help="per-item truth CSV (default: <out stem>_truth.csv)",
    )
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("compare", help="side-by-side averages for two predictors in a report")
    p.add_argument("metrics", help="metrics.csv path or report directory")
    p.add_argument(
        "--baseline", required=True,
        help="selector: kind[,lambda=X][,gamma=X][,tp=N][,tf=N]",
    )
    p.add_argument(
        "--challenger", required=True,
        help="selector: kind[,lambda=X][,gamma=X][,tp=N][,tf=N]",
    )
    p.add_argument("--out", default=None, help="output directory (default: next to metrics)")
    _add_figures_flag(p)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        name = getattr(exc, "filename", None) or exc
        print(f"error: file not found: {name}", file=sys.stderr)
        return 2
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PopcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

"""Sweep orchestration: sampled cuts, predictor grids, averaged reports.

A plan fixes the cut sampling, the parameter grids, and the predictors to
run. The runner evaluates every (cut, predictor, lambda, gamma, n) cell,
collects raw metric rows, and averages each parameterization across cuts,
excluding undefined values and reporting how many were excluded. Everything
is deterministic given the input log and the plan seed; the worker count
changes only wall time, never output bytes.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterator, Sequence

import numpy as np

from . import __version__
from .errors import ContractError, PopcastError
from .index import CutSpec, TemporalIndex
from .metrics import METRIC_CSV_COLUMNS, evaluate, ground_truth
from .predictors import (
    PREDICTOR_KINDS,
    PredictorSpec,
    score_pbp,
    score_proposed,
    score_total_popularity,
)

SCHEMA_VERSION = 1

NOVELTY_BASES = ("total", "past-gain")


@dataclass(frozen=True)
class PredictorTemplate:
    """A predictor with free parameters left to the plan grids.

    ``lambda_`` and ``gamma`` set to None sweep the plan's grids; ``t_p``
    set to None uses the plan's window length.
    """

    kind: str
    lambda_: float | None = None
    gamma: float | None = None
    t_p: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in PREDICTOR_KINDS:
            raise ContractError(f"kind must be one of {PREDICTOR_KINDS}, got {self.kind!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "PredictorTemplate":
        return cls(
            kind=data["kind"],
            lambda_=data.get("lambda"),
            gamma=data.get("gamma"),
            t_p=data.get("t_p"),
        )

    def to_dict(self) -> dict[str, object]:
        return {"kind": self.kind, "lambda": self.lambda_, "gamma": self.gamma, "t_p": self.t_p}


_DEFAULT_PREDICTORS = (
    PredictorTemplate(kind="total"),
    PredictorTemplate(kind="pbp"),
    PredictorTemplate(kind="proposed"),
)


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything a sweep needs besides the event log itself."""

    n_cuts: int = 10
    seed: int = 42
    t_p_days: int = 30
    t_f_days: int = 30
    lambda_grid: tuple[float, ...] = (0.9,)
    gamma_grid: tuple[float, ...] = (0.1,)
    ns: tuple[int, ...] = (50, 100, 200)
    predictors: tuple[PredictorTemplate, ...] = _DEFAULT_PREDICTORS
    warmup_days: int | None = None  # None -> t_p_days
    novelty_basis: str = "total"

    def __post_init__(self) -> None:
        if self.n_cuts < 1:
            raise ContractError(f"n_cuts must be >= 1, got {self.n_cuts}")
        if self.t_p_days < 1 or self.t_f_days < 1:
            raise ContractError("window lengths must be >= 1")
        if not self.lambda_grid or not self.gamma_grid:
            raise ContractError("parameter grids must be nonempty")
        if not self.ns or any(n < 1 for n in self.ns):
            raise ContractError("ns must be positive")
        if not self.predictors:
            raise ContractError("at least one predictor is required")
        if self.warmup_days is not None and self.warmup_days < 0:
            raise ContractError("warmup_days must be >= 0")
        if self.novelty_basis not in NOVELTY_BASES:
            raise ContractError(
                f"novelty_basis must be one of {NOVELTY_BASES}, got {self.novelty_basis!r}"
            )
        for lam in self.lambda_grid:
            if not 0.0 <= lam <= 1.0:
                raise ContractError(f"lambda {lam} outside [0, 1]")
        for gam in self.gamma_grid:
            if gam < 0:
                raise ContractError(f"gamma {gam} must be >= 0")

    @property
    def effective_warmup(self) -> int:
        return self.t_p_days if self.warmup_days is None else self.warmup_days

    def to_dict(self) -> dict[str, object]:
        return {
            "n_cuts": self.n_cuts,
            "seed": self.seed,
            "t_p_days": self.t_p_days,
            "t_f_days": self.t_f_days,
            "lambda_grid": list(self.lambda_grid),
            "gamma_grid": list(self.gamma_grid),
            "ns": list(self.ns),
            "predictors": [t.to_dict() for t in self.predictors],
            "warmup_days": self.warmup_days,
            "novelty_basis": self.novelty_basis,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentPlan":
        kwargs = dict(data)
        for key in ("lambda_grid", "gamma_grid", "ns"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        if "predictors" in kwargs:
            kwargs["predictors"] = tuple(
                PredictorTemplate.from_dict(p) for p in kwargs["predictors"]
            )
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentPlan":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class MetricRow:
    """One evaluated grid cell at one cut."""

    t: int
    predictor: str
    lambda_: float | None
    gamma: float | None
    t_p: int
    t_f: int
    n: int
    p_n: float
    q_n: float | None
    auc: float | None

    @property
    def param_key(self) -> tuple:
        return (self.predictor, self.lambda_, self.gamma, self.t_p, self.t_f, self.n)


@dataclass(frozen=True)
class FailedCell:
    t: int
    predictor: str
    lambda_: float | None
    gamma: float | None
    t_p: int
    t_f: int
    reason: str


@dataclass(frozen=True)
class AverageRow:
    """Mean of the defined per-cut values for one parameterization."""

    predictor: str
    lambda_: float | None
    gamma: float | None
    t_p: int
    t_f: int
    n: int
    p_n: float
    q_n: float | None
    auc: float | None
    cuts_counted: int
    q_n_excluded: int
    auc_excluded: int

    @property
    def param_key(self) -> tuple:
        return (self.predictor, self.lambda_, self.gamma, self.t_p, self.t_f, self.n)


@dataclass
class ExperimentReport:
    plan: dict
    cuts: list[int]
    rows: list[MetricRow]
    failures: list[FailedCell]
    averages: list[AverageRow] = field(default_factory=list)
    version: str = __version__


def sample_cuts(index: TemporalIndex, plan: ExperimentPlan) -> list[CutSpec]:
    """Draw cut days uniformly without replacement, sorted ascending.

    Cuts come from ``[min_day + warmup, max_day - T_F]`` so every cut has a
    full warmup behind it and a full future window ahead of it.
    """
    lo = index.min_day + plan.effective_warmup
    hi = index.max_day - plan.t_f_days
    if lo > hi:
        raise ContractError(
            f"no feasible cut days: warmup {plan.effective_warmup} and future window "
            f"{plan.t_f_days} leave an empty range in [{index.min_day}, {index.max_day}]"
        )
    feasible = hi - lo + 1
    if plan.n_cuts > feasible:
        raise ContractError(
            f"cannot sample {plan.n_cuts} distinct cut days; only {feasible} feasible"
        )
    rng = np.random.default_rng(plan.seed)
    days = rng.choice(np.arange(lo, hi + 1), size=plan.n_cuts, replace=False)
    return [CutSpec(t=int(t), t_p=plan.t_p_days, t_f=plan.t_f_days) for t in sorted(days.tolist())]


def _param_combos(
    template: PredictorTemplate, plan: ExperimentPlan
) -> Iterator[tuple[float | None, float | None]]:
    if template.kind == "total":
        yield (None, None)
        return
    lambdas = [template.lambda_] if template.lambda_ is not None else list(plan.lambda_grid)
    if template.kind == "pbp":
        for lam in lambdas:
            yield (lam, None)
        return
    gammas = [template.gamma] if template.gamma is not None else list(plan.gamma_grid)
    for lam in lambdas:
        for gam in gammas:
            yield (lam, gam)


def _evaluate_cut(
    index: TemporalIndex, t: int, plan: ExperimentPlan
) -> tuple[list[MetricRow], list[FailedCell]]:
    rows: list[MetricRow] = []
    failures: list[FailedCell] = []
    truth_cut = CutSpec(t=t, t_p=plan.t_p_days, t_f=plan.t_f_days)
    truth = ground_truth(index, truth_cut)
    if plan.novelty_basis == "total":
        basis = score_total_popularity(index, truth_cut)
    else:
        basis = score_pbp(index, truth_cut, 1.0)
    for template in plan.predictors:
        t_p = template.t_p if template.t_p is not None else plan.t_p_days
        cut = CutSpec(t=t, t_p=t_p, t_f=plan.t_f_days)
        for lam, gam in _param_combos(template, plan):
            try:
                if template.kind == "total":
                    table = score_total_popularity(index, cut)
                elif template.kind == "pbp":
                    table = score_pbp(index, cut, lam)
                else:
                    table = score_proposed(index, cut, lam, gam)
                triples = evaluate(table, truth, basis, plan.ns)
            except PopcastError as exc:
                failures.append(
                    FailedCell(
                        t=t, predictor=template.kind, lambda_=lam, gamma=gam,
                        t_p=t_p, t_f=plan.t_f_days, reason=str(exc),
                    )
                )
                continue
            for triple in triples:
                if triple.p_n is None:
                    failures.append(
                        FailedCell(
                            t=t, predictor=template.kind, lambda_=lam, gamma=gam,
                            t_p=t_p, t_f=plan.t_f_days,
                            reason=triple.p_reason or "undefined precision",
                        )
                    )
                    continue
                rows.append(
                    MetricRow(
                        t=t, predictor=template.kind, lambda_=lam, gamma=gam,
                        t_p=t_p, t_f=plan.t_f_days, n=triple.n,
                        p_n=triple.p_n, q_n=triple.q_n, auc=triple.auc,
                    )
                )
    return rows, failures


def compute_averages(rows: Sequence[MetricRow]) -> list[AverageRow]:
    """Group rows by parameterization and average the defined values."""
    groups: dict[tuple, list[MetricRow]] = {}
    order: list[tuple] = []
    for row in rows:
        key = row.param_key
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    averages = []
    for key in order:
        members = groups[key]
        q_values = [r.q_n for r in members if r.q_n is not None]
        a_values = [r.auc for r in members if r.auc is not None]
        predictor, lam, gam, t_p, t_f, n = key
        averages.append(
            AverageRow(
                predictor=predictor, lambda_=lam, gamma=gam, t_p=t_p, t_f=t_f, n=n,
                p_n=math.fsum(r.p_n for r in members) / len(members),
                q_n=math.fsum(q_values) / len(q_values) if q_values else None,
                auc=math.fsum(a_values) / len(a_values) if a_values else None,
                cuts_counted=len(members),
                q_n_excluded=len(members) - len(q_values),
                auc_excluded=len(members) - len(a_values),
            )
        )
    return averages


def verify_averages(report: ExperimentReport) -> None:
    """Recompute averages from the raw rows and compare; raises on drift."""
    recomputed = compute_averages(report.rows)
    if recomputed != report.averages:
        raise ContractError("report averages do not match their raw rows")


def run_for_cuts(
    index: TemporalIndex,
    plan: ExperimentPlan,
    cut_days: Sequence[int],
    workers: int = 1,
) -> tuple[list[MetricRow], list[FailedCell]]:
    """Evaluate the plan's grid at explicit cut days; row order is fixed."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: _evaluate_cut(index, t, plan), cut_days))
    else:
        results = [_evaluate_cut(index, t, plan) for t in cut_days]
    rows: list[MetricRow] = []
    failures: list[FailedCell] = []
    for cut_rows, cut_failures in results:
        rows.extend(cut_rows)
        failures.extend(cut_failures)
    return rows, failures


def run_grid(index: TemporalIndex, plan: ExperimentPlan, workers: int = 1) -> ExperimentReport:
    """Evaluate the full (cut x predictor x lambda x gamma x n) grid."""
    cuts = sample_cuts(index, plan)
    cut_days = [c.t for c in cuts]
    rows, failures = run_for_cuts(index, plan, cut_days, workers=workers)
    report = ExperimentReport(
        plan=plan.to_dict(),
        cuts=cut_days,
        rows=rows,
        failures=failures,
        averages=compute_averages(rows),
    )
    verify_averages(report)
    return report


def horizon_sweep(
    index: TemporalIndex,
    plan: ExperimentPlan,
    t_f_list: Sequence[int],
    workers: int = 1,
) -> ExperimentReport:
    """Run the grid once per future-window length, sharing the sampled cuts.

    Cuts are sampled against the longest window so every length in
    ``t_f_list`` fits.
    """
    if not t_f_list or any(t_f < 1 for t_f in t_f_list):
        raise ContractError("t_f_list must be nonempty positive day counts")
    sampling_plan = replace(plan, t_f_days=max(t_f_list))
    cut_days = [c.t for c in sample_cuts(index, sampling_plan)]
    rows: list[MetricRow] = []
    failures: list[FailedCell] = []
    for t_f in t_f_list:
        stage = replace(plan, t_f_days=t_f)
        stage_rows, stage_failures = run_for_cuts(index, stage, cut_days, workers=workers)
        rows.extend(stage_rows)
        failures.extend(stage_failures)
    plan_echo = plan.to_dict()
    plan_echo["t_f_list"] = list(t_f_list)
    report = ExperimentReport(
        plan=plan_echo,
        cuts=cut_days,
        rows=rows,
        failures=failures,
        averages=compute_averages(rows),
    )
    verify_averages(report)
    return report


# -- serialization -----------------------------------------------------


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(value)


def write_metric_rows(rows: Sequence[MetricRow], dest: IO[str] | str | Path) -> None:
    """Write the raw metric rows CSV (one line per evaluated cell)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_metric_rows(rows, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(METRIC_CSV_COLUMNS)
    for r in rows:
        writer.writerow(
            [
                r.t,
                r.predictor,
                _fmt(r.lambda_),
                _fmt(r.gamma),
                r.t_p,
                r.t_f,
                r.n,
                _fmt(r.p_n),
                _fmt(r.q_n),
                _fmt(r.auc),
                int(r.q_n is not None),
                int(r.auc is not None),
            ]
        )


def read_metric_rows(source: IO[str] | str | Path) -> list[MetricRow]:
    """Read back a CSV written by :func:`write_metric_rows`."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return read_metric_rows(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if header != list(METRIC_CSV_COLUMNS):
        raise ContractError(f"unexpected metric CSV header: {header}")
    rows = []
    for raw in reader:
        if not raw:
            continue
        (t, predictor, lam, gam, t_p, t_f, n, p_n, q_n, auc_val, _, _) = raw
        rows.append(
            MetricRow(
                t=int(t),
                predictor=predictor,
                lambda_=float(lam) if lam else None,
                gamma=float(gam) if gam else None,
                t_p=int(t_p),
                t_f=int(t_f),
                n=int(n),
                p_n=float(p_n),
                q_n=float(q_n) if q_n else None,
                auc=float(auc_val) if auc_val else None,
            )
        )
    return rows


def report_summary(report: ExperimentReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "version": report.version,
        "plan": report.plan,
        "cuts": report.cuts,
        "averages": [
            {
                "predictor": a.predictor,
                "lambda": a.lambda_,
                "gamma": a.gamma,
                "t_p": a.t_p,
                "t_f": a.t_f,
                "n": a.n,
                "p_n": a.p_n,
                "q_n": a.q_n,
                "auc": a.auc,
                "cuts_counted": a.cuts_counted,
                "q_n_excluded": a.q_n_excluded,
                "auc_excluded": a.auc_excluded,
            }
            for a in report.averages
        ],
        "n_failed_cells": len(report.failures),
        "failed_cells": [
            {
                "t": f.t,
                "predictor": f.predictor,
                "lambda": f.lambda_,
                "gamma": f.gamma,
                "t_p": f.t_p,
                "t_f": f.t_f,
                "reason": f.reason,
            }
            for f in report.failures
        ],
    }


def write_report(report: ExperimentReport, out_dir: str | Path) -> dict[str, Path]:
    """Write ``metrics.csv`` and ``summary.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "metrics.csv"
    json_path = out / "summary.json"
    write_metric_rows(report.rows, csv_path)
    json_path.write_text(
        json.dumps(report_summary(report), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return {"metrics": csv_path, "summary": json_path}


# -- predictor comparison ----------------------------------------------


@dataclass(frozen=True)
class Selector:
    """Picks one parameterization out of a report; None fields are wildcards."""

    kind: str
    lambda_: float | None = None
    gamma: float | None = None
    t_p: int | None = None
    t_f: int | None = None

    def matches(self, key: tuple) -> bool:
        predictor, lam, gam, t_p, t_f, _n = key
        if predictor != self.kind:
            return False
        for want, have in (
            (self.lambda_, lam),
            (self.gamma, gam),
            (self.t_p, t_p),
            (self.t_f, t_f),
        ):
            if want is not None and have != want:
                return False
        return True

    @classmethod
    def parse(cls, text: str) -> "Selector":
        """Parse ``kind[,lambda=X][,gamma=X][,tp=N][,tf=N]``."""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ContractError("empty selector")
        kind = parts[0]
        kwargs: dict[str, object] = {}
        names = {"lambda": ("lambda_", float), "gamma": ("gamma", float),
                 "tp": ("t_p", int), "tf": ("t_f", int)}
        for part in parts[1:]:
            if "=" not in part:
                raise ContractError(f"bad selector clause {part!r}")
            name, _, value = part.partition("=")
            if name not in names:
                raise ContractError(f"unknown selector field {name!r}")
            attr, cast = names[name]
            kwargs[attr] = cast(value)
        return cls(kind=kind, **kwargs)


@dataclass(frozen=True)
class ComparisonRow:
    n: int
    metric: str
    baseline: float | None
    challenger: float | None
    delta: float | None
    wins: int
    ties: int
    losses: int
    win_rate: float | None


@dataclass(frozen=True)
class Comparison:
    baseline: dict
    challenger: dict
    rows: list[ComparisonRow]


def _distinct_params(rows: Sequence[MetricRow], selector: Selector, what: str) -> tuple:
    keys = {r.param_key[:5] for r in rows if selector.matches(r.param_key)}
    if not keys:
        raise ContractError(f"{what} selector matches no cells in the report")
    if len(keys) > 1:
        raise ContractError(
            f"{what} selector matches {len(keys)} parameterizations; narrow it: "
            f"{sorted(keys)}"
        )
    return keys.pop()


def compare_predictors(
    report: ExperimentReport, baseline: Selector, challenger: Selector
) -> Comparison:
    """Side-by-side averages and per-cut win counts for two predictors.

    For each metric and list size, a cut counts as a challenger win when its
    defined value strictly exceeds the baseline's; equal values are ties and
    contribute half a win to the win rate.
    """
    base_key = _distinct_params(report.rows, baseline, "baseline")
    chal_key = _distinct_params(report.rows, challenger, "challenger")

    def cells(key: tuple) -> dict[tuple[int, int], MetricRow]:
        return {
            (r.t, r.n): r
            for r in report.rows
            if r.param_key[:5] == key
        }

    base_cells = cells(base_key)
    chal_cells = cells(chal_key)
    avg = {a.param_key: a for a in report.averages}

    ns = sorted({n for _, n in base_cells} & {n for _, n in chal_cells})
    shared_ts = sorted({t for t, _ in base_cells} & {t for t, _ in chal_cells})
    rows: list[ComparisonRow] = []
    for n in ns:
        base_avg = avg.get(base_key + (n,))
        chal_avg = avg.get(chal_key + (n,))
        for metric in ("p_n", "q_n", "auc"):
            wins = ties = losses = 0
            for t in shared_ts:
                b = getattr(base_cells.get((t, n)), metric, None)
                c = getattr(chal_cells.get((t, n)), metric, None)
                if b is None or c is None:
                    continue
                if c > b:
                    wins += 1
                elif c < b:
                    losses += 1
                else:
                    ties += 1
            counted = wins + ties + losses
            b_mean = getattr(base_avg, metric, None) if base_avg else None
            c_mean = getattr(chal_avg, metric, None) if chal_avg else None
            rows.append(
                ComparisonRow(
                    n=n,
                    metric=metric,
                    baseline=b_mean,
                    challenger=c_mean,
                    delta=(c_mean - b_mean) if b_mean is not None and c_mean is not None else None,
                    wins=wins,
                    ties=ties,
                    losses=losses,
                    win_rate=(wins + 0.5 * ties) / counted if counted else None,
                )
            )
    kinds = ("predictor", "lambda", "gamma", "t_p", "t_f")
    return Comparison(
        baseline=dict(zip(kinds, base_key)),
        challenger=dict(zip(kinds, chal_key)),
        rows=rows,
    )


def sign_test_p(wins: int, losses: int) -> float:
    """One-sided exact sign test: probability of >= wins successes in
    wins + losses fair coin flips. Ties are excluded by the caller."""
    trials = wins + losses
    if trials == 0:
        return 1.0
    total = sum(math.comb(trials, k) for k in range(wins, trials + 1))
    return total / 2.0**trials


def write_comparison(cmp: Comparison, out_dir: str | Path) -> dict[str, Path]:
    """Write ``comparison.csv`` and ``comparison.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "comparison.csv"
    json_path = out / "comparison.json"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["n", "metric", "baseline", "challenger", "delta", "wins", "ties", "losses", "win_rate"]
        )
        for r in cmp.rows:
            writer.writerow(
                [r.n, r.metric, _fmt(r.baseline), _fmt(r.challenger), _fmt(r.delta),
                 r.wins, r.ties, r.losses, _fmt(r.win_rate)]
            )
    payload = {
        "schema_version": SCHEMA_VERSION,
        "baseline": cmp.baseline,
        "challenger": cmp.challenger,
        "rows": [
            {
                "n": r.n, "metric": r.metric, "baseline": r.baseline,
                "challenger": r.challenger, "delta": r.delta, "wins": r.wins,
                "ties": r.ties, "losses": r.losses, "win_rate": r.win_rate,
            }
            for r in cmp.rows
        ],
    }
    json_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return {"comparison_csv": csv_path, "comparison_json": json_path}

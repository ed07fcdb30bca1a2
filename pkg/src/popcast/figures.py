"""Render report figures to image files next to the delimited outputs.

Every function takes a finished report and writes PNG files with
deterministic names into a ``figures`` subdirectory, returning the paths.
Rendering is headless (Agg) and optional: nothing here feeds back into the
CSV/JSON outputs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .experiment import Comparison, ExperimentReport

_METRIC_LABELS = {"p_n": "precision", "q_n": "novelty", "auc": "AUC"}

_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": None}}


def _fig_dir(out_dir: str | Path) -> Path:
    path = Path(out_dir) / "figures"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _series_label(predictor: str, lambda_, gamma, t_p) -> str:
    parts = [predictor]
    if lambda_ is not None:
        parts.append(f"lambda={lambda_:g}")
    if gamma is not None:
        parts.append(f"gamma={gamma:g}")
    if t_p is not None:
        parts.append(f"tp={t_p}")
    return ", ".join(parts)


def sweep_figures(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    """One metric-vs-lambda chart per (metric, n); one line per gamma value."""
    fig_dir = _fig_dir(out_dir)
    ns = sorted({a.n for a in report.averages})
    written: list[Path] = []
    for metric in ("p_n", "q_n", "auc"):
        for n in ns:
            rows = [a for a in report.averages if a.n == n and getattr(a, metric) is not None]
            if not rows:
                continue
            fig, ax = plt.subplots(figsize=(6, 4))
            plotted = False
            for a in [r for r in rows if r.predictor == "total"]:
                ax.axhline(getattr(a, metric), color="gray", linestyle=":", label="total")
                plotted = True
            pbp_rows = sorted(
                (r for r in rows if r.predictor == "pbp" and r.lambda_ is not None),
                key=lambda r: r.lambda_,
            )
            if pbp_rows:
                ax.plot(
                    [r.lambda_ for r in pbp_rows],
                    [getattr(r, metric) for r in pbp_rows],
                    marker="s",
                    linestyle="--",
                    label=_series_label("pbp", None, None, pbp_rows[0].t_p),
                )
                plotted = True
            gammas = sorted({r.gamma for r in rows if r.predictor == "proposed"})
            for gamma in gammas:
                series = sorted(
                    (r for r in rows if r.predictor == "proposed" and r.gamma == gamma),
                    key=lambda r: r.lambda_,
                )
                if series:
                    ax.plot(
                        [r.lambda_ for r in series],
                        [getattr(r, metric) for r in series],
                        marker="o",
                        label=f"proposed, gamma={gamma:g}",
                    )
                    plotted = True
            if not plotted:
                plt.close(fig)
                continue
            ax.set_xlabel("lambda")
            ax.set_ylabel(f"mean {_METRIC_LABELS[metric]}")
            ax.set_title(f"{_METRIC_LABELS[metric]} at n={n}")
            ax.grid(alpha=0.3)
            ax.legend(fontsize=8)
            path = fig_dir / f"sweep_{metric}_n{n}.png"
            fig.savefig(path, **_SAVE_KWARGS)
            plt.close(fig)
            written.append(path)
    return written


def horizon_figures(report: ExperimentReport, out_dir: str | Path) -> list[Path]:
    """Metric vs future-window length, one line per parameterization."""
    fig_dir = _fig_dir(out_dir)
    ns = sorted({a.n for a in report.averages})
    written: list[Path] = []
    for metric in ("p_n", "q_n", "auc"):
        for n in ns:
            rows = [a for a in report.averages if a.n == n and getattr(a, metric) is not None]
            series_keys = sorted(
                {(a.predictor, a.lambda_, a.gamma, a.t_p) for a in rows},
                key=lambda k: (k[0], k[1] or 0, k[2] or 0, k[3]),
            )
            fig, ax = plt.subplots(figsize=(6, 4))
            plotted = False
            for key in series_keys:
                predictor, lam, gam, t_p = key
                points = sorted(
                    (
                        a
                        for a in rows
                        if (a.predictor, a.lambda_, a.gamma, a.t_p) == key
                    ),
                    key=lambda a: a.t_f,
                )
                if len(points) < 1:
                    continue
                ax.plot(
                    [a.t_f for a in points],
                    [getattr(a, metric) for a in points],
                    marker="o",
                    label=_series_label(predictor, lam, gam, t_p),
                )
                plotted = True
            if not plotted:
                plt.close(fig)
                continue
            ax.set_xlabel("future window length (days)")
            ax.set_ylabel(f"mean {_METRIC_LABELS[metric]}")
            ax.set_title(f"{_METRIC_LABELS[metric]} at n={n} vs horizon")
            ax.grid(alpha=0.3)
            ax.legend(fontsize=8)
            path = fig_dir / f"horizon_{metric}_n{n}.png"
            fig.savefig(path, **_SAVE_KWARGS)
            plt.close(fig)
            written.append(path)
    return written


def comparison_figures(cmp: Comparison, out_dir: str | Path) -> list[Path]:
    """Grouped bar chart per metric: baseline vs challenger across n."""
    fig_dir = _fig_dir(out_dir)
    written: list[Path] = []
    for metric in ("p_n", "q_n", "auc"):
        rows = [r for r in cmp.rows if r.metric == metric and r.baseline is not None]
        if not rows:
            continue
        ns = [r.n for r in rows]
        x = range(len(ns))
        width = 0.38
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.bar(
            [i - width / 2 for i in x],
            [r.baseline for r in rows],
            width,
            label=f"baseline ({cmp.baseline['predictor']})",
        )
        ax.bar(
            [i + width / 2 for i in x],
            [r.challenger for r in rows],
            width,
            label=f"challenger ({cmp.challenger['predictor']})",
        )
        ax.set_xticks(list(x), [str(n) for n in ns])
        ax.set_xlabel("n")
        ax.set_ylabel(f"mean {_METRIC_LABELS[metric]}")
        ax.set_title(f"{_METRIC_LABELS[metric]} comparison")
        ax.grid(alpha=0.3, axis="y")
        ax.legend(fontsize=8)
        path = fig_dir / f"compare_{metric}.png"
        fig.savefig(path, **_SAVE_KWARGS)
        plt.close(fig)
        written.append(path)
    return written

"""Per-item prediction scores at a cut time.

Three predictors are implemented:

* ``total``: accumulated degree at the cut day.
* ``pbp``: degree minus lambda times the degree at the window start,
  interpolating total popularity (lambda 0) and the trailing-window gain
  (lambda 1).
* ``proposed``: the pbp gain factor multiplied by an exponential
  recency-weighted link count, normalized so scores sum to one.

Every table is defined over the candidate set (items with at least one link
on or before the cut day) and all raw scores are nonnegative.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO

import numpy as np

from .errors import ContractError, NoCandidatesError
from .index import CutSpec, TemporalIndex

log = logging.getLogger(__name__)

PREDICTOR_KINDS = ("total", "pbp", "proposed")

#: What the lambda-weighted subtrahend of the gain factor is. The default
#: subtracts the degree at the window start, so lambda interpolates between
#: total popularity and the window gain. The alternate form subtracts the
#: window gain itself.
PBP_FORMS = ("window-start-degree", "window-gain")

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PredictorSpec:
    """Which predictor to run and its parameters."""

    kind: str
    lambda_: float = 0.0
    gamma: float = 0.0
    t_p: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in PREDICTOR_KINDS:
            raise ContractError(f"kind must be one of {PREDICTOR_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ContractError(f"lambda must be in [0, 1], got {self.lambda_}")
        if self.gamma < 0:
            raise ContractError(f"gamma must be >= 0, got {self.gamma}")
        if self.kind in ("pbp", "proposed") and self.t_p is not None and self.t_p < 1:
            raise ContractError(f"t_p must be >= 1, got {self.t_p}")

    def to_dict(self) -> dict[str, object]:
        return {
            "kind": self.kind,
            "lambda": self.lambda_ if self.kind != "total" else None,
            "gamma": self.gamma if self.kind == "proposed" else None,
            "t_p": self.t_p if self.kind != "total" else None,
        }


@dataclass(frozen=True)
class ScoreTable:
    """Scores per candidate item at a cut, with provenance."""

    cut: CutSpec
    spec: PredictorSpec
    scores: dict[int, float]
    normalized: bool = False

    def items_by_id(self) -> list[int]:
        return sorted(self.scores)


def _candidates(index: TemporalIndex, cut: CutSpec) -> np.ndarray:
    index.check_cut(cut)
    mask = index.candidate_mask(cut.t)
    if not mask.any():
        raise NoCandidatesError(f"no item has a link on or before day {cut.t}")
    return mask


def _gain_factor(
    index: TemporalIndex,
    cut: CutSpec,
    lambda_: float,
    mask: np.ndarray,
    pbp_form: str,
) -> np.ndarray:
    if pbp_form not in PBP_FORMS:
        raise ContractError(f"pbp_form must be one of {PBP_FORMS}, got {pbp_form!r}")
    k_now = index.degrees_at(cut.t)[mask].astype(np.float64)
    k_start = index.degrees_at(cut.t - cut.t_p)[mask].astype(np.float64)
    if pbp_form == "window-start-degree":
        return k_now - lambda_ * k_start
    return k_now - lambda_ * (k_now - k_start)


def _table(
    index: TemporalIndex,
    cut: CutSpec,
    spec: PredictorSpec,
    mask: np.ndarray,
    values: np.ndarray,
) -> ScoreTable:
    if float(values.min(initial=0.0)) < 0:
        raise ContractError("negative raw score; upstream bug")
    items = index.item_ids[mask].tolist()
    return ScoreTable(cut=cut, spec=spec, scores=dict(zip(items, values.tolist())))


def score_total_popularity(index: TemporalIndex, cut: CutSpec) -> ScoreTable:
    """Score every candidate by its accumulated degree at the cut day."""
    mask = _candidates(index, cut)
    values = index.degrees_at(cut.t)[mask].astype(np.float64)
    return _table(index, cut, PredictorSpec(kind="total"), mask, values)


def score_pbp(
    index: TemporalIndex,
    cut: CutSpec,
    lambda_: float,
    *,
    pbp_form: str = "window-start-degree",
) -> ScoreTable:
    """Degree at t minus lambda times the degree at the window start."""
    if not 0.0 <= lambda_ <= 1.0:
        raise ContractError(f"lambda must be in [0, 1], got {lambda_}")
    mask = _candidates(index, cut)
    values = _gain_factor(index, cut, lambda_, mask, pbp_form)
    spec = PredictorSpec(kind="pbp", lambda_=lambda_, t_p=cut.t_p)
    return _table(index, cut, spec, mask, values)


def score_proposed(
    index: TemporalIndex,
    cut: CutSpec,
    lambda_: float,
    gamma: float,
    *,
    pbp_form: str = "window-start-degree",
    windowed_decay: bool = False,
) -> ScoreTable:
    """Gain factor times recency-weighted link count, normalized to sum 1.

    Each link contributes exp(gamma * (day - t)) to its item's recency
    weight; by default all links up to t count, with ``windowed_decay`` only
    those inside the trailing window. When every raw score is zero the table
    is returned unnormalized.
    """
    if not 0.0 <= lambda_ <= 1.0:
        raise ContractError(f"lambda must be in [0, 1], got {lambda_}")
    if gamma < 0:
        raise ContractError(f"gamma must be >= 0, got {gamma}")
    mask = _candidates(index, cut)
    gain = _gain_factor(index, cut, lambda_, mask, pbp_form)
    since = cut.t - cut.t_p if windowed_decay else None
    decay = index.decay_sums(cut.t, gamma, since=since)[mask]
    spec = PredictorSpec(kind="proposed", lambda_=lambda_, gamma=gamma, t_p=cut.t_p)
    table = _table(index, cut, spec, mask, gain * decay)
    normalized = normalize_scores(table)
    if not normalized.normalized:
        log.warning(
            "all raw scores are zero at t=%d (lambda=%g, gamma=%g); "
            "returning unnormalized table",
            cut.t,
            lambda_,
            gamma,
        )
    return normalized


def score(index: TemporalIndex, cut: CutSpec, spec: PredictorSpec, **kwargs) -> ScoreTable:
    """Dispatch to the scorer named by ``spec.kind``."""
    if spec.kind == "total":
        return score_total_popularity(index, cut)
    if spec.kind == "pbp":
        return score_pbp(index, cut, spec.lambda_, **kwargs)
    return score_proposed(index, cut, spec.lambda_, spec.gamma, **kwargs)


def normalize_scores(table: ScoreTable) -> ScoreTable:
    """Divide scores by their sum; all-zero tables come back unchanged."""
    values = list(table.scores.values())
    if any(v < 0 for v in values):
        raise ContractError("negative raw score; cannot normalize")
    total = math.fsum(values)
    if total == 0.0:
        return replace(table, normalized=False)
    scaled = {item: v / total for item, v in table.scores.items()}
    return replace(table, scores=scaled, normalized=True)


def rank_top_n(table: ScoreTable, n: int) -> list[int]:
    """Item ids by descending score, ties by ascending id, first n entries."""
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    ordered = sorted(table.scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [item for item, _ in ordered[:n]]


def write_score_table(
    table: ScoreTable, csv_dest: IO[str] | str | Path, sidecar: str | Path | None = None
) -> None:
    """Write ``item_id,score`` rows plus a JSON sidecar with provenance.

    Rows are emitted in ascending item id, so identical inputs produce
    identical bytes. When ``csv_dest`` is a path and ``sidecar`` is not given,
    the sidecar lands next to it with a ``.json`` suffix.
    """
    if isinstance(csv_dest, (str, Path)):
        path = Path(csv_dest)
        if sidecar is None:
            sidecar = path.with_suffix(".json")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write_score_table(table, fh, sidecar=sidecar)
        return
    writer = csv.writer(csv_dest, lineterminator="\n")
    writer.writerow(["item_id", "score"])
    for item in table.items_by_id():
        writer.writerow([item, repr(table.scores[item])])
    if sidecar is not None:
        meta = {
            "schema_version": SCHEMA_VERSION,
            "cut": {"t": table.cut.t, "t_p": table.cut.t_p, "t_f": table.cut.t_f},
            "predictor": table.spec.to_dict(),
            "normalized": table.normalized,
            "n_items": len(table.scores),
        }
        Path(sidecar).write_text(
            json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

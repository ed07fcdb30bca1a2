"""Ranking-accuracy metrics against realized future gains.

Three metrics compare a predictor's ranking at a cut with the ranking by
links actually received in the future window:

* precision: fraction of the predicted top n that is in the realized top n.
* novelty: fraction of "new entries" (realized top-n items absent from the
  top n by accumulated popularity at the cut) that the predictor placed in
  its top n. Undefined when there are no new entries.
* AUC: probability that a realized-top-n item outscores a non-top-n
  candidate under the predictor, ties counted half. Undefined when either
  side is empty.

When fewer than n candidates exist, n is clamped to the candidate count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError
from .index import CutSpec, TemporalIndex, warn_if_truncated
from .predictors import ScoreTable, rank_top_n

REASON_EMPTY_CANDIDATES = "empty-candidate-set"
REASON_EMPTY_NOVELTY = "empty-novelty-set"
REASON_EMPTY_NEGATIVE = "empty-negative-set"

#: Column order of the metric rows CSV emitted by the experiment runner.
METRIC_CSV_COLUMNS = (
    "t",
    "predictor",
    "lambda",
    "gamma",
    "T_P",
    "T_F",
    "n",
    "p_n",
    "q_n",
    "auc",
    "q_defined",
    "auc_defined",
)


@dataclass(frozen=True)
class GroundTruth:
    """Realized future gains per candidate item at a cut."""

    cut: CutSpec
    gains: dict[int, int]
    order: tuple[int, ...]  # descending gain, ascending id

    @classmethod
    def from_gains(cls, cut: CutSpec, gains: dict[int, int]) -> "GroundTruth":
        order = tuple(sorted(gains, key=lambda item: (-gains[item], item)))
        return cls(cut=cut, gains=gains, order=order)

    def real_top_n(self, n: int) -> list[int]:
        if n < 1:
            raise ContractError(f"n must be >= 1, got {n}")
        return list(self.order[:n])


@dataclass(frozen=True)
class MetricTriple:
    """One (n, precision, novelty, AUC) row; undefined values carry a reason."""

    n: int
    p_n: float | None
    q_n: float | None
    auc: float | None
    p_reason: str | None = None
    q_reason: str | None = None
    auc_reason: str | None = None


def ground_truth(index: TemporalIndex, cut: CutSpec) -> GroundTruth:
    """Future gain of every candidate item at the cut."""
    index.check_cut(cut)
    warn_if_truncated(index, cut)
    mask = index.candidate_mask(cut.t)
    items = index.item_ids[mask].tolist()
    gains = (index.degrees_at(cut.t + cut.t_f) - index.degrees_at(cut.t))[mask]
    return GroundTruth.from_gains(cut, dict(zip(items, gains.tolist())))


def _check_same_cut(what: str, a: CutSpec, b: CutSpec) -> None:
    if a.t != b.t:
        raise ContractError(f"{what}: cut day mismatch ({a.t} vs {b.t})")


def precision_at_n(predicted: Sequence[int], truth: GroundTruth, n: int) -> float | None:
    """Overlap fraction of predicted and realized top n (set semantics)."""
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    n_eff = min(n, len(truth.gains))
    if n_eff == 0:
        return None
    hits = len(set(predicted[:n_eff]) & set(truth.real_top_n(n_eff)))
    return hits / n_eff


def novelty_q_n(
    predicted: Sequence[int],
    truth: GroundTruth,
    past_rank_basis: ScoreTable,
    n: int,
) -> float | None:
    """Fraction of realized new entries the predictor put in its top n.

    ``past_rank_basis`` defines the incumbent top n at the cut (normally the
    accumulated-degree table). New entries are realized top-n items missing
    from that basis top n; returns None when there are none.
    """
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    _check_same_cut("novelty basis", past_rank_basis.cut, truth.cut)
    n_eff = min(n, len(truth.gains))
    if n_eff == 0:
        return None
    past_top = set(rank_top_n(past_rank_basis, n_eff))
    new_entries = [o for o in truth.real_top_n(n_eff) if o not in past_top]
    if not new_entries:
        return None
    hits = len(set(predicted[:n_eff]) & set(new_entries))
    return hits / len(new_entries)


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j < len(values) and values[order[j]] == values[order[i]]:
            j += 1
        ranks[order[i:j]] = (i + 1 + j) / 2.0
        i = j
    return ranks


def auc(scores: ScoreTable, truth: GroundTruth, n: int) -> float | None:
    """Pairwise ranking accuracy of realized top-n items vs the rest."""
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    _check_same_cut("auc", scores.cut, truth.cut)
    if set(scores.scores) != set(truth.gains):
        raise ContractError("auc: score table and ground truth cover different items")
    n_eff = min(n, len(truth.gains))
    if n_eff == 0:
        return None
    items = sorted(truth.gains)
    positives = set(truth.real_top_n(n_eff))
    labels = np.fromiter((i in positives for i in items), dtype=bool, count=len(items))
    n_pos = int(labels.sum())
    n_neg = len(items) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    values = np.fromiter((scores.scores[i] for i in items), dtype=np.float64, count=len(items))
    ranks = _midranks(values)
    rank_sum = float(ranks[labels].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def evaluate(
    scores: ScoreTable,
    truth: GroundTruth,
    past_rank_basis: ScoreTable,
    ns: Sequence[int],
) -> list[MetricTriple]:
    """All three metrics for each list size in ``ns``."""
    if not ns:
        raise ContractError("ns must be nonempty")
    _check_same_cut("evaluate", scores.cut, truth.cut)
    n_candidates = len(truth.gains)
    if n_candidates and max(ns) > n_candidates:
        warnings.warn(
            f"list size {max(ns)} exceeds the {n_candidates} candidates at "
            f"t={truth.cut.t}; clamping",
            stacklevel=2,
        )
    if n_candidates == 0:
        return [
            MetricTriple(
                n=n,
                p_n=None,
                q_n=None,
                auc=None,
                p_reason=REASON_EMPTY_CANDIDATES,
                q_reason=REASON_EMPTY_CANDIDATES,
                auc_reason=REASON_EMPTY_CANDIDATES,
            )
            for n in ns
        ]
    predicted = rank_top_n(scores, n_candidates)
    triples = []
    for n in ns:
        p = precision_at_n(predicted, truth, n)
        q = novelty_q_n(predicted, truth, past_rank_basis, n)
        a = auc(scores, truth, n)
        triples.append(
            MetricTriple(
                n=n,
                p_n=p,
                q_n=q,
                auc=a,
                q_reason=None if q is not None else REASON_EMPTY_NOVELTY,
                auc_reason=None if a is not None else REASON_EMPTY_NEGATIVE,
            )
        )
    return triples

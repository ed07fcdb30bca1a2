"""Synthetic bipartite interaction logs with controllable growth dynamics.

Items accrue links by a multiplicative rule: on day ``d`` item ``i`` is
chosen with probability proportional to ``(degree_i + A) * fitness_i *
exp(-theta * (d - birth_i))``. The additive offset ``A`` gives newborn items
a nonzero chance, fitness is a per-item multiplier drawn at birth, and
``theta`` is the per-day aging rate. Users are drawn uniformly and carry no
dynamics of their own. The generator is a verification harness for the
predictors, not a model fitted to any real dataset.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np

from .errors import ContractError
from .events import InteractionEvent, InteractionLog, make_log, write_canonical
from .index import CutSpec, build_index
from .metrics import ground_truth
from .predictors import rank_top_n, score_total_popularity

FITNESS_KINDS = ("constant", "uniform", "exponential")


@dataclass(frozen=True)
class SynthModelParams:
    """Growth-model knobs; every draw is deterministic given the seed."""

    horizon_days: int
    links_per_day: int
    new_items_per_day: float = 1.0
    n_users: int = 1000
    attachment_offset: float = 1.0
    fitness: str = "constant"
    fitness_mean: float = 1.0
    theta: float = 0.0
    seed: int = 42

    def __post_init__(self) -> None:
        if self.horizon_days < 1:
            raise ContractError(f"horizon_days must be >= 1, got {self.horizon_days}")
        if self.links_per_day < 1:
            raise ContractError(f"links_per_day must be >= 1, got {self.links_per_day}")
        if self.new_items_per_day < 0:
            raise ContractError("new_items_per_day must be >= 0")
        if self.n_users < 1:
            raise ContractError(f"n_users must be >= 1, got {self.n_users}")
        if self.attachment_offset <= 0:
            raise ContractError("attachment_offset must be > 0")
        if self.fitness not in FITNESS_KINDS:
            raise ContractError(f"fitness must be one of {FITNESS_KINDS}, got {self.fitness!r}")
        if self.fitness_mean <= 0:
            raise ContractError("fitness_mean must be > 0")
        if self.theta < 0:
            raise ContractError(f"theta must be >= 0, got {self.theta}")


@dataclass(frozen=True)
class SynthTruth:
    """A generated log plus the hidden per-item state that produced it."""

    params: SynthModelParams
    birth_day: dict[int, int]
    fitness: dict[int, float]
    log: InteractionLog


def weighted_choice(rng: np.random.Generator, weights: np.ndarray) -> int:
    """Index drawn proportionally to ``weights`` (all >= 0, positive sum)."""
    cum = np.cumsum(weights)
    total = cum[-1]
    if total <= 0:
        raise ContractError("attachment weights must have a positive sum")
    r = rng.random() * total
    return min(int(np.searchsorted(cum, r, side="right")), len(weights) - 1)


def _draw_fitness(rng: np.random.Generator, params: SynthModelParams, count: int) -> list[float]:
    if count == 0:
        return []
    if params.fitness == "constant":
        return [1.0] * count
    if params.fitness == "uniform":
        return rng.random(count).tolist()
    return rng.exponential(params.fitness_mean, count).tolist()


def generate(params: SynthModelParams) -> SynthTruth:
    """Grow a log for ``horizon_days`` at ``links_per_day``.

    Item 0 is always born on day 0 so the first draw has a live item. New
    items arrive Poisson-distributed each day and are eligible the same day.
    Repeat (user, item) pairs are dropped afterward, keeping the earliest,
    so the emitted log is canonical.
    """
    rng = np.random.default_rng(params.seed)
    births: list[int] = []
    fitness: list[float] = []
    degrees: list[int] = []
    raw_links: list[tuple[int, int, int]] = []

    for day in range(params.horizon_days):
        n_new = int(rng.poisson(params.new_items_per_day))
        if day == 0:
            n_new += 1  # unconditional seed item
        births.extend([day] * n_new)
        fitness.extend(_draw_fitness(rng, params, n_new))
        degrees.extend([0] * n_new)

        ages = day - np.asarray(births, dtype=np.float64)
        base = np.asarray(fitness) * np.exp(-params.theta * ages)
        weights = (np.asarray(degrees, dtype=np.float64) + params.attachment_offset) * base

        users = rng.integers(0, params.n_users, size=params.links_per_day)
        for link in range(params.links_per_day):
            item = weighted_choice(rng, weights)
            raw_links.append((int(users[link]), item, day))
            degrees[item] += 1
            weights[item] += base[item]

    log = make_log(
        InteractionEvent(user_id=u, item_id=i, day=d) for u, i, d in raw_links
    )
    return SynthTruth(
        params=params,
        birth_day={i: b for i, b in enumerate(births)},
        fitness={i: f for i, f in enumerate(fitness)},
        log=log,
    )


def label_potential_items(truth: SynthTruth, cut: CutSpec, n: int) -> set[int]:
    """Realized top-n items that were not in the top n by accumulated degree.

    These are the "new entries" the novelty metric counts, computed on the
    generated log itself.
    """
    index = build_index(truth.log)
    gt = ground_truth(index, cut)
    n_eff = min(n, len(gt.gains))
    if n_eff == 0:
        return set()
    basis = score_total_popularity(index, cut)
    past_top = set(rank_top_n(basis, n_eff))
    return {o for o in gt.real_top_n(n_eff) if o not in past_top}


def write_truth_sidecar(truth: SynthTruth, dest: IO[str] | str | Path) -> None:
    """Write the per-item ground truth CSV ``item_id,birth_day,fitness``."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_truth_sidecar(truth, fh)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(["item_id", "birth_day", "fitness"])
    for item in sorted(truth.birth_day):
        writer.writerow([item, truth.birth_day[item], repr(truth.fitness[item])])


def write_synth_outputs(
    truth: SynthTruth, events_path: str | Path, truth_path: str | Path
) -> None:
    """Emit the canonical event CSV and the truth sidecar."""
    write_canonical(truth.log, events_path)
    write_truth_sidecar(truth, truth_path)

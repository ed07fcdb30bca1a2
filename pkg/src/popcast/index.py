"""Time-indexed per-item link-day structure with window and decay queries.

Per-item event days are stored as sorted arrays, so point queries are binary
searches and whole-universe queries are single vectorized passes. Boundary
conventions: the degree at day ``t`` counts event days ``<= t``, the trailing
window covers ``(t - T_P, t]``, and the future window covers ``(t, t + T_F]``.
Windows are therefore disjoint and degrees decompose exactly:
``degree_at(t) + future_gain(t, T_F) == degree_at(t + T_F)``.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, EmptyLogError
from .events import InteractionLog

_CACHE_MAGIC = b"TIDX"
_CACHE_VERSION = 1


@dataclass(frozen=True)
class CutSpec:
    """A training cut day with trailing and future window lengths in days."""

    t: int
    t_p: int
    t_f: int

    def __post_init__(self) -> None:
        if self.t_p < 1:
            raise ContractError(f"t_p must be >= 1, got {self.t_p}")
        if self.t_f < 1:
            raise ContractError(f"t_f must be >= 1, got {self.t_f}")


class TemporalIndex:
    """Immutable per-item day lists; safe for concurrent read queries."""

    def __init__(
        self,
        item_ids: np.ndarray,
        flat_days: np.ndarray,
        starts: np.ndarray,
        min_day: int,
        max_day: int,
    ) -> None:
        self.item_ids = np.asarray(item_ids, dtype=np.int64)
        self._flat_days = np.asarray(flat_days, dtype=np.int64)
        self._starts = np.asarray(starts, dtype=np.int64)
        self.min_day = int(min_day)
        self.max_day = int(max_day)
        counts = np.diff(self._starts)
        self._flat_pos = np.repeat(np.arange(len(self.item_ids)), counts)
        self._first_days = self._flat_days[self._starts[:-1]]
        self._pos = {int(i): p for p, i in enumerate(self.item_ids)}
        # memoized whole-universe queries; keyed by query args, immutable values
        self._degree_cache: dict[int, np.ndarray] = {}
        self._decay_cache: dict[tuple[int, float, int | None], np.ndarray] = {}

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_links(self) -> int:
        return len(self._flat_days)

    def days_for(self, item: int) -> np.ndarray:
        """Sorted event days of one item (empty for unknown items). Read-only."""
        pos = self._pos.get(item)
        if pos is None:
            return np.empty(0, dtype=np.int64)
        return self._flat_days[self._starts[pos] : self._starts[pos + 1]]

    def check_cut(self, cut: CutSpec) -> None:
        if not self.min_day <= cut.t <= self.max_day:
            raise ContractError(
                f"cut day {cut.t} outside data range [{self.min_day}, {self.max_day}]"
            )

    # -- point queries -------------------------------------------------

    def degree_at(self, item: int, t: int) -> int:
        """Number of links item has received on or before day t."""
        days = self.days_for(item)
        return int(np.searchsorted(days, t, side="right"))

    def past_gain(self, item: int, cut: CutSpec) -> int:
        """Links received in the trailing window (t - T_P, t]."""
        return self.degree_at(item, cut.t) - self.degree_at(item, cut.t - cut.t_p)

    def future_gain(self, item: int, cut: CutSpec) -> int:
        """Links received in the future window (t, t + T_F]."""
        return self.degree_at(item, cut.t + cut.t_f) - self.degree_at(item, cut.t)

    def decay_weight_sum(
        self, item: int, t: int, gamma: float, *, since: int | None = None
    ) -> float:
        """Sum of exp(gamma * (day - t)) over the item's event days <= t.

        With ``gamma == 0`` this equals ``degree_at(item, t)`` exactly. Pass
        ``since`` to restrict the sum to days strictly after it.
        """
        if gamma < 0:
            raise ContractError(f"gamma must be >= 0, got {gamma}")
        days = self.days_for(item)
        hi = int(np.searchsorted(days, t, side="right"))
        lo = 0 if since is None else int(np.searchsorted(days, since, side="right"))
        segment = days[lo:hi]
        if segment.size == 0:
            return 0.0
        return float(np.exp(gamma * (segment - t).astype(np.float64)).sum())

    def candidate_items(self, t: int) -> set[int]:
        """Items with at least one link on or before day t."""
        return set(self.item_ids[self.candidate_mask(t)].tolist())

    # -- whole-universe queries (aligned with self.item_ids) ------------

    def candidate_mask(self, t: int) -> np.ndarray:
        return self._first_days <= t

    def degrees_at(self, t: int) -> np.ndarray:
        """Degree of every item at day t, aligned with ``item_ids``."""
        cached = self._degree_cache.get(t)
        if cached is None:
            mask = self._flat_days <= t
            cached = np.bincount(self._flat_pos[mask], minlength=self.n_items).astype(
                np.int64
            )
            self._degree_cache[t] = cached
        return cached

    def decay_sums(self, t: int, gamma: float, since: int | None = None) -> np.ndarray:
        """Decay-weight sum of every item at day t, aligned with ``item_ids``."""
        if gamma < 0:
            raise ContractError(f"gamma must be >= 0, got {gamma}")
        key = (t, float(gamma), since)
        cached = self._decay_cache.get(key)
        if cached is None:
            mask = self._flat_days <= t
            if since is not None:
                mask &= self._flat_days > since
            delta = (self._flat_days[mask] - t).astype(np.float64)
            weights = np.exp(gamma * delta)
            cached = np.bincount(
                self._flat_pos[mask], weights=weights, minlength=self.n_items
            )
            self._decay_cache[key] = cached
        return cached

    # -- disk cache ------------------------------------------------------

    def save_cache(self, path: str | Path) -> None:
        """Write a binary snapshot of the index (versioned, lossless)."""
        with open(path, "wb") as fh:
            fh.write(
                struct.pack(
                    "<4sHIqq",
                    _CACHE_MAGIC,
                    _CACHE_VERSION,
                    self.n_items,
                    self.min_day,
                    self.max_day,
                )
            )
            for pos, item in enumerate(self.item_ids):
                days = self._flat_days[self._starts[pos] : self._starts[pos + 1]]
                deltas = np.empty(len(days), dtype=np.uint32)
                deltas[0] = days[0]
                deltas[1:] = np.diff(days)
                fh.write(struct.pack("<qI", int(item), len(days)))
                fh.write(deltas.astype("<u4").tobytes())

    @classmethod
    def load_cache(cls, path: str | Path) -> "TemporalIndex":
        """Read a snapshot written by :meth:`save_cache`; refuses other versions."""
        with open(path, "rb") as fh:
            header = fh.read(struct.calcsize("<4sHIqq"))
            magic, version, n_items, min_day, max_day = struct.unpack("<4sHIqq", header)
            if magic != _CACHE_MAGIC:
                raise ContractError(f"not an index cache file: bad magic {magic!r}")
            if version != _CACHE_VERSION:
                raise ContractError(
                    f"index cache version {version} unsupported (expected {_CACHE_VERSION})"
                )
            item_ids = np.empty(n_items, dtype=np.int64)
            day_chunks: list[np.ndarray] = []
            starts = np.zeros(n_items + 1, dtype=np.int64)
            for pos in range(n_items):
                item, count = struct.unpack("<qI", fh.read(struct.calcsize("<qI")))
                raw = fh.read(4 * count)
                if len(raw) != 4 * count:
                    raise ContractError("truncated index cache file")
                deltas = np.frombuffer(raw, dtype="<u4").astype(np.int64)
                item_ids[pos] = item
                day_chunks.append(np.cumsum(deltas))
                starts[pos + 1] = starts[pos] + count
            if fh.read(1):
                raise ContractError("trailing bytes in index cache file")
        flat_days = (
            np.concatenate(day_chunks) if day_chunks else np.empty(0, dtype=np.int64)
        )
        index = cls(item_ids, flat_days, starts, min_day, max_day)
        if index.n_links and (
            int(flat_days.min()) != min_day or int(flat_days.max()) != max_day
        ):
            raise ContractError("corrupt index cache: day range mismatch")
        return index


def build_index(log: InteractionLog) -> TemporalIndex:
    """Build a :class:`TemporalIndex` from a log; rejects empty logs."""
    if log.n_links == 0:
        raise EmptyLogError("cannot index an empty log")
    n = log.n_links
    items = np.fromiter((e.item_id for e in log.events), dtype=np.int64, count=n)
    days = np.fromiter((e.day for e in log.events), dtype=np.int64, count=n)
    order = np.lexsort((days, items))
    items_sorted = items[order]
    days_sorted = days[order]
    item_ids, counts = np.unique(items_sorted, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)))
    return TemporalIndex(
        item_ids, days_sorted, starts, int(days.min()), int(days.max())
    )


def warn_if_truncated(index: TemporalIndex, cut: CutSpec) -> None:
    """Emit a warning when the future window extends past the last event day."""
    if cut.t + cut.t_f > index.max_day:
        warnings.warn(
            f"future window (t={cut.t}, t_f={cut.t_f}) extends past the last "
            f"event day {index.max_day}; gains are truncated",
            stacklevel=2,
        )

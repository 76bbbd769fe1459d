"""Single-variable ranking criteria: robust out-of-distribution mass and
histogram entropy.

Both criteria score each parameter independently and sort descending, so a
ranking is just an ordered (param_id, score) list tagged with its method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import ColumnView, DataMatrix, column
from .errors import EmptyColumn, KOutOfRange

# Empirical factor mapping the median absolute deviation to a standard
# deviation estimate for Gaussian data.
MADE_TO_SIGMA = 1.483

METHOD_MADE = "made"
METHOD_ENTROPY = "entropy"
METHOD_RFE = "rfe"
METHOD_RFE_KMED = "rfe-kmed"


@dataclass(frozen=True)
class MadeStats:
    """Robust location/spread of one column plus its out-of-distribution mass.

    ``made`` is the median absolute deviation from the median. A sample is out
    of distribution when its absolute deviation reaches
    ``n_factor * 1.483 * made``. When ``made`` is zero (constant or
    majority-constant column) the fallback score is the fraction of samples
    different from the median.
    """

    median: float
    made: float
    n_factor: float
    ood_fraction: float


def made_stats(col: ColumnView, n_factor: float) -> MadeStats:
    x = np.asarray(col.samples, dtype=np.float64)
    if x.size == 0:
        raise EmptyColumn(f"column {col.param_id!r} is empty")
    if n_factor <= 0:
        raise ValueError("n_factor must be positive")
    med = float(np.median(x))
    dev = np.abs(x - med)
    made = float(np.median(dev))
    if made > 0.0:
        ood = float(np.mean(dev >= n_factor * MADE_TO_SIGMA * made))
    else:
        ood = float(np.mean(x != med))
    return MadeStats(median=med, made=made, n_factor=float(n_factor), ood_fraction=ood)


@dataclass(frozen=True)
class Binning:
    """Interior histogram edges; the two outer bins are unbounded.

    Bin ``b`` covers ``(edges[b-1], edges[b]]`` with the conventions
    ``edges[-1] = -inf`` and ``edges[len] = +inf``, so every real value lands
    in exactly one of ``len(edges) + 1`` bins and a binning built on one
    sample can be reused for any other.
    """

    edges: tuple[float, ...]

    def __post_init__(self) -> None:
        edges = tuple(float(e) for e in self.edges)
        if not edges:
            raise ValueError("binning needs at least one edge")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("edges must be strictly increasing")
        object.__setattr__(self, "edges", edges)

    @property
    def n_bins(self) -> int:
        return len(self.edges) + 1

    def assign(self, x: np.ndarray) -> np.ndarray:
        """Bin index for each value; never out of range."""
        return np.searchsorted(np.asarray(self.edges), np.asarray(x), side="left")


def make_binning(col: ColumnView, n_interior: int) -> Binning:
    """Equal-width binning over the reference sample's range.

    ``n_interior`` is the number of interior intervals; a constant sample
    degenerates to a single edge (two unbounded bins).
    """
    if n_interior < 1:
        raise ValueError("n_interior must be at least 1")
    x = np.asarray(col.samples, dtype=np.float64)
    if x.size == 0:
        raise EmptyColumn(f"column {col.param_id!r} is empty")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return Binning(edges=(lo,))
    edges = np.unique(np.linspace(lo, hi, n_interior + 1))
    return Binning(edges=tuple(float(e) for e in edges))


def entropy(col: ColumnView, bins: Binning) -> float:
    """Shannon entropy (natural log) of the column's bin occupancy."""
    x = np.asarray(col.samples, dtype=np.float64)
    if x.size == 0:
        raise EmptyColumn(f"column {col.param_id!r} is empty")
    counts = np.bincount(bins.assign(x), minlength=bins.n_bins)
    p = counts[counts > 0] / x.size
    return max(float(-(p * np.log(p)).sum()), 0.0)


@dataclass(frozen=True)
class FeatureRanking:
    """Ordered (param_id, score) list, best first, tagged with its method."""

    method: str
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        ids = [pid for pid, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate param id in ranking")
        object.__setattr__(
            self, "entries", tuple((str(p), float(s)) for p, s in self.entries)
        )

    def __len__(self) -> int:
        return len(self.entries)

    def to_csv_lines(self) -> list[str]:
        lines = ["rank,param_id,method,score"]
        for rank, (pid, score) in enumerate(self.entries, start=1):
            lines.append(f"{rank},{pid},{self.method},{score!r}")
        return lines


def _rank(method: str, scores: dict[str, float]) -> FeatureRanking:
    # descending score, lexicographic param id on ties
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return FeatureRanking(method=method, entries=tuple(ordered))


def rank_by_made(m: DataMatrix, n_factor: float) -> FeatureRanking:
    """Rank parameters by out-of-distribution mass, largest first.

    Favors columns with a tight baseline plus a few spikes, which is exactly
    the behavior that makes the criterion fragile on sparse yield columns.
    """
    scores = {
        pid: made_stats(column(m, pid), n_factor).ood_fraction for pid in m.param_ids
    }
    return _rank(METHOD_MADE, scores)


def rank_by_entropy(m: DataMatrix, n_interior: int) -> FeatureRanking:
    """Rank parameters by histogram entropy, largest first.

    Each column is binned on its own training sample; the unbounded outer
    bins keep the score stable under arbitrarily large injected values.
    """
    scores: dict[str, float] = {}
    for pid in m.param_ids:
        col = column(m, pid)
        scores[pid] = entropy(col, make_binning(col, n_interior))
    return _rank(METHOD_ENTROPY, scores)


def select_top(r: FeatureRanking, k: int) -> set[str]:
    """Ids of the best k entries."""
    if not 1 <= k <= len(r.entries):
        raise KOutOfRange(f"k={k} outside 1..{len(r.entries)}")
    return {pid for pid, _ in r.entries[:k]}


def entropy_upper_bound(bins: Binning) -> float:
    """ln(number of bins), the maximum reachable entropy."""
    return math.log(bins.n_bins)

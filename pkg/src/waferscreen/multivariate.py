"""Model-embedded feature selection: recursive elimination, its k-medoid
shortcut, and the two fusion rules used to combine methods.

The RFE loop retrains the one-class model on the surviving columns, scores
every feature with the model's influence criterion and drops the weakest
batch until the target size is reached. The k-medoid variant stops the loop
after a few iterations and picks one representative per cluster of
similarly-behaving variables instead, which trades a little accuracy for a
large number of skipped retrains.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import DataMatrix, restrict
from .errors import IterationOutOfRange, KTooLarge, TooFewMethods
from .ocsvm import KernelSpec, rfe_criteria, standardize_columns, train

AUTO = "auto"


@dataclass(frozen=True)
class RfeConfig:
    """Knobs for one elimination run.

    ``target_size`` must come from the caller; there is no sensible universal
    default because it depends on the downstream model's grid search.
    """

    target_size: int
    batch_remove: int = 1
    nu: float = 0.5
    kernel: KernelSpec | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.target_size < 1:
            raise ValueError("target_size must be at least 1")
        if self.batch_remove < 1:
            raise ValueError("batch_remove must be at least 1")


@dataclass(frozen=True)
class RfeIteration:
    """State of one loop pass: who survived into it, how each scored, who left."""

    surviving: tuple[str, ...]
    criteria: Mapping[str, float]
    eliminated: tuple[str, ...]
    solver_converged: bool


@dataclass(frozen=True)
class RfeTrace:
    iterations: tuple[RfeIteration, ...]

    def __len__(self) -> int:
        return len(self.iterations)

    def to_csv_lines(self) -> list[str]:
        lines = ["iteration,param_id,criterion,eliminated"]
        for it, rec in enumerate(self.iterations):
            gone = set(rec.eliminated)
            for pid in rec.surviving:
                lines.append(
                    f"{it},{pid},{rec.criteria[pid]!r},{1 if pid in gone else 0}"
                )
        return lines


def _criteria_map(
    m: DataMatrix, surviving: Sequence[str], cfg: RfeConfig, tol: float, threads: int
):
    sub = restrict(m, set(surviving))
    model, report = train(sub, nu=cfg.nu, kernel=cfg.kernel, tol=tol, seed=cfg.seed)
    values = rfe_criteria(model, threads=threads)
    return {pid: float(values[i]) for i, pid in enumerate(sub.param_ids)}, report


def _weakest(criteria: Mapping[str, float], n: int) -> list[str]:
    return [pid for pid, _ in sorted(criteria.items(), key=lambda kv: (kv[1], kv[0]))[:n]]


def rfe(
    m: DataMatrix,
    cfg: RfeConfig,
    tol: float = 1e-6,
    threads: int = 1,
) -> tuple[set[str], RfeTrace]:
    """Recursively eliminate the least influential features down to target size.

    Each iteration removes ``min(batch_remove, |S| - target_size)`` features,
    smallest criterion first with lexicographic tie-breaks, and is recorded in
    the trace. A non-converged solve is noted but elimination proceeds on the
    best iterate.
    """
    if not cfg.target_size < m.n_params:
        raise ValueError(
            f"target_size {cfg.target_size} must be below n_params {m.n_params}"
        )
    surviving = list(m.param_ids)
    records: list[RfeIteration] = []
    while len(surviving) > cfg.target_size:
        criteria, report = _criteria_map(m, surviving, cfg, tol, threads)
        n_remove = min(cfg.batch_remove, len(surviving) - cfg.target_size)
        victims = _weakest(criteria, n_remove)
        records.append(
            RfeIteration(
                surviving=tuple(surviving),
                criteria=criteria,
                eliminated=tuple(victims),
                solver_converged=report.converged,
            )
        )
        gone = set(victims)
        surviving = [pid for pid in surviving if pid not in gone]
    return set(surviving), RfeTrace(iterations=tuple(records))


def rank_cluster_diagnostic(
    trace: RfeTrace, iteration: int
) -> tuple[tuple[str, float], ...]:
    """Criterion-sorted listing at one recorded iteration, best first.

    Export this for plotting: variables with near-equal criteria cluster into
    visually flat runs, which is what motivates the k-medoid shortcut. No
    clustering decision is taken here.
    """
    if not 0 <= iteration < len(trace.iterations):
        raise IterationOutOfRange(
            f"iteration {iteration} outside 0..{len(trace.iterations) - 1}"
        )
    rec = trace.iterations[iteration]
    return tuple(sorted(rec.criteria.items(), key=lambda kv: (-kv[1], kv[0])))


@dataclass(frozen=True)
class MedoidClustering:
    k: int
    medoid_ids: frozenset[str]
    assignment: Mapping[str, str]
    total_cost: float


def kmedoids(
    points: Mapping[str, np.ndarray], k: int, max_iter: int = 100
) -> MedoidClustering:
    """Deterministic k-medoids on Euclidean distances.

    Seeding picks the k points with the smallest normalized distance mass
    v_j = sum_i d_ij / sum_l d_il, then alternates nearest-medoid assignment
    with per-cluster medoid refresh until assignments are stable. A cluster
    emptied by coincident seeds is repaired by moving its medoid to the worst
    served point, which strictly lowers the cost. There is no randomness
    anywhere, so reruns agree exactly.
    """
    ids = sorted(points)
    if k > len(ids):
        raise KTooLarge(f"k={k} but only {len(ids)} points")
    if k < 1:
        raise ValueError("k must be at least 1")
    vectors = [np.asarray(points[pid], dtype=np.float64).ravel() for pid in ids]
    if len({v.size for v in vectors}) != 1:
        raise ValueError("all points must share one vector length")
    P = np.array(vectors)
    sq = (
        np.sum(P * P, axis=1)[:, None]
        + np.sum(P * P, axis=1)[None, :]
        - 2.0 * (P @ P.T)
    )
    np.clip(sq, 0.0, None, out=sq)
    D = np.sqrt(sq)

    row_mass = D.sum(axis=1)
    safe = np.where(row_mass > 0.0, row_mass, 1.0)
    v = (D / safe[:, None]).sum(axis=0)
    medoids = list(np.argsort(v, kind="stable")[:k])

    for _ in range(max_iter):
        assign = np.argmin(D[:, medoids], axis=1)
        new_medoids = list(medoids)
        served = D[np.arange(len(ids)), np.asarray(medoids)[assign]]
        for c in range(k):
            members = np.flatnonzero(assign == c)
            if members.size == 0:
                new_medoids[c] = int(np.argmax(served))
                continue
            intra = D[np.ix_(members, members)].sum(axis=1)
            new_medoids[c] = int(members[int(np.argmin(intra))])
        if new_medoids == medoids:
            break
        medoids = new_medoids
    assign = np.argmin(D[:, medoids], axis=1)

    assignment = {ids[i]: ids[medoids[int(c)]] for i, c in enumerate(assign)}
    total = float(sum(D[i, medoids[int(c)]] for i, c in enumerate(assign)))
    return MedoidClustering(
        k=k,
        medoid_ids=frozenset(ids[i] for i in medoids),
        assignment=assignment,
        total_cost=total,
    )


def rfe_kmedoid(
    m: DataMatrix,
    p: int | str,
    k: int,
    cfg: RfeConfig,
    tol: float = 1e-6,
    threads: int = 1,
) -> set[str]:
    """Short RFE run followed by k-medoid representative picking.

    Runs ``p`` elimination iterations (or, with ``p="auto"``, stops as soon as
    the criterion order of the survivors repeats between two consecutive
    iterations, or when only k variables remain), then clusters the surviving
    variables in observation space and returns the k medoids. An explicit
    ``p`` that leaves fewer than k survivors is an error. Variables enter the
    clustering as their z-scored sample vectors, matching the solver's view
    of the data.
    """
    auto = isinstance(p, str)
    if auto and p != AUTO:
        raise ValueError(f"p must be a positive int or {AUTO!r}")
    if not auto and p < 1:
        raise ValueError("p must be at least 1")
    floor = max(k, 1) if auto else 1
    surviving = list(m.param_ids)
    prev_order: list[str] | None = None
    iteration = 0
    while len(surviving) > floor:
        if not auto and iteration >= p:
            break
        criteria, _ = _criteria_map(m, surviving, cfg, tol, threads)
        n_remove = min(cfg.batch_remove, len(surviving) - floor)
        victims = set(_weakest(criteria, n_remove))
        surviving = [pid for pid in surviving if pid not in victims]
        iteration += 1
        if auto:
            order = sorted(surviving, key=lambda pid: (criteria[pid], pid))
            if prev_order is not None and order == [
                pid for pid in prev_order if pid in set(surviving)
            ]:
                break
            prev_order = order
    if k > len(surviving):
        raise KTooLarge(
            f"k={k} but only {len(surviving)} variables survive the {p} iterations"
        )
    Z, _, _ = standardize_columns(m.values)
    keep = {pid: i for i, pid in enumerate(m.param_ids)}
    points = {pid: Z[:, keep[pid]] for pid in surviving}
    return set(kmedoids(points, k).medoid_ids)


def fuse_feature_sets_both(a: set[str], b: set[str]) -> set[str]:
    """Feature-level fusion: parameters kept by both methods."""
    return set(a) & set(b)


def fuse_detections_combined(flags: Sequence[set[str]]) -> set[str]:
    """Detection-level fusion: lots flagged by every method."""
    if len(flags) < 2:
        raise TooFewMethods("combined fusion needs at least two flag sets")
    out = set(flags[0])
    for s in flags[1:]:
        out &= set(s)
    return out

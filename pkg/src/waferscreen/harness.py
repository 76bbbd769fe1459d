"""Synthetic wafer data, per-method pipelines and Total/ECC evaluation.

The generator mimics the two production test regimes: parametric columns are
Gaussian with per-column location and spread, yield columns are sparse
non-negative counts. Defective lots get a shift on a hidden informative
subset of columns, so detection quality can be evaluated without any real
(confidential) data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .data import DataMatrix, Label, LabelSet, restrict
from .errors import EmptySelection, MissingLabels, SpecInvalid
from .multivariate import (
    RfeConfig,
    fuse_detections_combined,
    fuse_feature_sets_both,
    rfe,
    rfe_kmedoid,
)
from .ocsvm import KernelSpec, decision_matrix, train
from .univariate import (
    METHOD_ENTROPY,
    METHOD_MADE,
    METHOD_RFE,
    METHOD_RFE_KMED,
    rank_by_entropy,
    rank_by_made,
    select_top,
)

METHOD_BOTH = "both"
METHOD_COMBINED = "combined"

PIPELINE_METHODS = (METHOD_MADE, METHOD_ENTROPY, METHOD_BOTH, METHOD_RFE, METHOD_RFE_KMED)

# informative columns are this share of all columns, at least one
INFORMATIVE_SHARE = 0.1


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of one synthetic data set; fully determined by its seed."""

    n_lots: int
    n_parametric: int
    n_yield: int
    n_bad_lots: int
    defect_shift: float = 3.0
    yield_sparsity: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_lots < 1 or self.n_parametric < 0 or self.n_yield < 0:
            raise SpecInvalid("counts must be non-negative and n_lots >= 1")
        if self.n_parametric + self.n_yield < 1:
            raise SpecInvalid("need at least one column")
        if not 0 <= self.n_bad_lots < self.n_lots:
            raise SpecInvalid("n_bad_lots must be below n_lots")
        if not 0.0 <= self.yield_sparsity < 1.0:
            raise SpecInvalid("yield_sparsity must be in [0, 1)")


# desk-scale default: full method matrix in minutes on a laptop
DEFAULT_SPEC = SyntheticSpec(
    n_lots=400,
    n_parametric=120,
    n_yield=380,
    n_bad_lots=12,
    defect_shift=3.0,
    yield_sparsity=0.85,
    seed=7,
)


@dataclass(frozen=True)
class GenerationMeta:
    """Ground truth of the generator: which lots were hit, on which columns."""

    informative_ids: tuple[str, ...]
    bad_lot_ids: tuple[str, ...]
    defect_shift: float


def generate(spec: SyntheticSpec) -> tuple[DataMatrix, LabelSet, GenerationMeta]:
    """Draw one matrix plus labels; identical spec gives identical bits."""
    rng = np.random.default_rng(spec.seed)
    n_cols = spec.n_parametric + spec.n_yield
    lot_width = max(4, len(str(spec.n_lots)))
    lot_ids = tuple(f"L{i:0{lot_width}d}" for i in range(spec.n_lots))
    param_ids = tuple(
        [f"P{j:04d}" for j in range(spec.n_parametric)]
        + [f"Y{j:04d}" for j in range(spec.n_yield)]
    )

    values = np.zeros((spec.n_lots, n_cols))
    sigmas = np.ones(n_cols)
    for j in range(spec.n_parametric):
        mu = rng.uniform(-5.0, 5.0)
        sigma = rng.uniform(0.5, 2.0)
        sigmas[j] = sigma
        values[:, j] = rng.normal(mu, sigma, size=spec.n_lots)
    for j in range(spec.n_parametric, n_cols):
        lam = rng.uniform(1.0, 8.0)
        counts = 1.0 + rng.poisson(lam, size=spec.n_lots)
        zero = rng.random(spec.n_lots) < spec.yield_sparsity
        counts[zero] = 0.0
        values[:, j] = counts

    bad_rows = np.sort(rng.choice(spec.n_lots, size=spec.n_bad_lots, replace=False))
    n_informative = max(1, round(INFORMATIVE_SHARE * n_cols))
    pool = (
        np.arange(spec.n_parametric)
        if spec.n_parametric >= 1
        else np.arange(spec.n_parametric, n_cols)
    )
    informative = np.sort(
        rng.choice(pool, size=min(n_informative, pool.size), replace=False)
    )
    if spec.n_bad_lots:
        for j in informative:
            if j < spec.n_parametric:
                values[bad_rows, j] += spec.defect_shift * sigmas[j]
            else:
                values[bad_rows, j] += np.ceil(spec.defect_shift)

    matrix = DataMatrix(values=values, param_ids=param_ids, lot_ids=lot_ids)
    bad_set = {lot_ids[i] for i in bad_rows}
    labels = LabelSet(
        labels={
            lot: (Label.BAD if lot in bad_set else Label.GOOD) for lot in lot_ids
        }
    )
    meta = GenerationMeta(
        informative_ids=tuple(param_ids[j] for j in informative),
        bad_lot_ids=tuple(sorted(bad_set)),
        defect_shift=spec.defect_shift,
    )
    return matrix, labels, meta


def select_features(
    m: DataMatrix,
    method: str,
    k: int,
    nu: float = 0.5,
    kernel: KernelSpec | None = None,
    seed: int = 0,
    batch_remove: int = 1,
    p: int | str = "auto",
    n_factor: float = 3.0,
    n_interior: int = 32,
    threads: int = 1,
) -> set[str]:
    """Feature subset of size k (or the intersection size for ``both``)."""
    if method == METHOD_MADE:
        return select_top(rank_by_made(m, n_factor), k)
    if method == METHOD_ENTROPY:
        return select_top(rank_by_entropy(m, n_interior), k)
    if method == METHOD_BOTH:
        both = fuse_feature_sets_both(
            select_top(rank_by_made(m, n_factor), k),
            select_top(rank_by_entropy(m, n_interior), k),
        )
        if not both:
            raise EmptySelection("made and entropy top-k sets do not intersect")
        return both
    cfg = RfeConfig(
        target_size=k, batch_remove=batch_remove, nu=nu, kernel=kernel, seed=seed
    )
    if method == METHOD_RFE:
        selected, _ = rfe(m, cfg, threads=threads)
        return selected
    if method == METHOD_RFE_KMED:
        return rfe_kmedoid(m, p, k, cfg, threads=threads)
    raise ValueError(f"unknown method {method!r}")


def run_pipeline(
    m: DataMatrix,
    method: str,
    k: int,
    nu: float = 0.5,
    kernel: KernelSpec | None = None,
    threshold: float = 0.0,
    seed: int = 0,
    batch_remove: int = 1,
    p: int | str = "auto",
    n_factor: float = 3.0,
    n_interior: int = 32,
    threads: int = 1,
) -> set[str]:
    """Select features, train on all lots, return the flagged lot set."""
    keep = select_features(
        m,
        method,
        k,
        nu=nu,
        kernel=kernel,
        seed=seed,
        batch_remove=batch_remove,
        p=p,
        n_factor=n_factor,
        n_interior=n_interior,
        threads=threads,
    )
    sub = restrict(m, keep)
    model, _ = train(sub, nu=nu, kernel=kernel, seed=seed)
    values = decision_matrix(model, sub.values)
    return {lot for lot, v in zip(m.lot_ids, values) if v < threshold}


@dataclass(frozen=True)
class EvalRow:
    method: str
    total_flagged: int
    total_lots: int
    bad_caught: int
    bad_total: int

    def __post_init__(self) -> None:
        if self.bad_caught > self.bad_total or self.total_flagged > self.total_lots:
            raise ValueError("inconsistent evaluation counts")


@dataclass(frozen=True)
class EvalTable:
    """Per-method detection counts in the Total/ECC presentation."""

    rows: tuple[EvalRow, ...]

    def to_text(self) -> str:
        methods = [r.method for r in self.rows]
        total = [f"{r.total_flagged}/{r.total_lots}" for r in self.rows]
        ecc = [f"{r.bad_caught}/{r.bad_total}" for r in self.rows]
        width = [
            max(len(m), len(t), len(e)) for m, t, e in zip(methods, total, ecc)
        ]
        head = max(len("Total"), len("ECC"))
        lines = []
        for label, cells in (("", methods), ("Total", total), ("ECC", ecc)):
            row = label.ljust(head)
            for w, cell in zip(width, cells):
                row += "  " + cell.ljust(w)
            lines.append(row.rstrip())
        return "\n".join(lines)

    def to_csv_lines(self) -> list[str]:
        lines = ["method,total_flagged,total_lots,bad_caught,bad_total"]
        for r in self.rows:
            lines.append(
                f"{r.method},{r.total_flagged},{r.total_lots},{r.bad_caught},{r.bad_total}"
            )
        return lines


def evaluate(flags: Mapping[str, set[str]], labels: LabelSet) -> EvalTable:
    """Count detections per method, adding a combined row when possible.

    Every flagged lot must be labeled. The combined row applies the
    all-methods intersection rule to the given flag sets.
    """
    known = set(labels.labels)
    for method, flagged in flags.items():
        missing = set(flagged) - known
        if missing:
            raise MissingLabels(
                f"method {method!r} flags unlabeled lots: {sorted(missing)[:5]}"
            )
    bad = labels.bad_lots()
    total_lots = len(labels)

    def row(name: str, flagged: set[str]) -> EvalRow:
        return EvalRow(
            method=name,
            total_flagged=len(flagged),
            total_lots=total_lots,
            bad_caught=len(flagged & bad),
            bad_total=len(bad),
        )

    rows = [row(name, set(flagged)) for name, flagged in flags.items()]
    if len(flags) >= 2:
        rows.append(
            row(METHOD_COMBINED, fuse_detections_combined([set(v) for v in flags.values()]))
        )
    return EvalTable(rows=tuple(rows))

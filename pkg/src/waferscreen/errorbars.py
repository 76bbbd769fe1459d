"""Score uncertainty from feature selection.

Two tools live here. The first-order perturbation propagates small shifts of
the training references through the decision function with the dual
coefficients frozen, which is the argument for neglecting measurement noise.
The ensemble experiment quantifies the error that is *not* negligible: it
retrains many models with random feature subsets removed, measures how much
each test sample's score wobbles across them, and calibrates that spread
against the spread of a single raw variable. The fitted ratio later converts
an observable variable spread into a predicted score spread, whose band
around the frontier is the grey zone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .data import DataMatrix, restrict
from .errors import DimMismatch, InsufficientRows
from .ocsvm import KernelSpec, OcSvmModel, decision_matrix, kernel_grad, train
from .util import parallel_map

VARIABLE_DRAWS = 20


@dataclass(frozen=True)
class PerturbationResult:
    """First-order score change, one term per support vector."""

    delta_f: float
    first_order_terms: np.ndarray

    def __post_init__(self) -> None:
        terms = np.asarray(self.first_order_terms, dtype=np.float64)
        terms.setflags(write=False)
        object.__setattr__(self, "first_order_terms", terms)


def perturb_decision(model: OcSvmModel, x, deltas) -> PerturbationResult:
    """Linearized score change when each support vector moves by its delta.

    ``x`` is a raw point; the deltas displace the stored (standardized)
    support coordinates, one vector per support vector. Term i is
    ``a_i * <delta_i, grad_xi K(z, r_i)>`` and ``delta_f`` is their sum.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != len(model.feature_ids):
        raise DimMismatch(
            f"point has dim {x.size}, model expects {len(model.feature_ids)}"
        )
    D = np.asarray(deltas, dtype=np.float64)
    n_sv = len(model.support_indices)
    if D.shape != (n_sv, len(model.feature_ids)):
        raise DimMismatch(
            f"deltas shape {D.shape}, expected ({n_sv}, {len(model.feature_ids)})"
        )
    z = model.standardize(x[None, :])[0]
    alphas = model.support_alphas()
    terms = np.empty(n_sv)
    for i in range(n_sv):
        terms[i] = alphas[i] * float(
            D[i] @ kernel_grad(model.kernel, z, model.train_refs[i])
        )
    return PerturbationResult(delta_f=float(terms.sum()), first_order_terms=terms)


@dataclass(frozen=True)
class ErrorBarCalibration:
    """Proportionality between per-sample score spread and raw variable spread.

    ``ratio`` is the through-origin least-squares slope over the variable
    draws; ``r_squared`` is the uncentered coefficient of determination of
    that proportional fit.
    """

    removal_fraction: float
    ratio: float
    r_squared: float
    n_models: int
    n_removed: int

    def __post_init__(self) -> None:
        if self.n_models < 2:
            raise ValueError("calibration needs at least 2 models")
        if not 0.0 <= self.removal_fraction < 1.0:
            raise ValueError("removal_fraction must be in [0, 1)")
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValueError("r_squared must be in [0, 1]")

    def to_csv_lines(self) -> list[str]:
        return [
            "removal_fraction,ratio,r_squared,n_models,n_removed",
            f"{self.removal_fraction!r},{self.ratio!r},{self.r_squared!r},"
            f"{self.n_models},{self.n_removed}",
        ]


def ensemble_experiment(
    m: DataMatrix,
    n_models: int,
    n_removed: int,
    nu: float = 0.5,
    kernel: KernelSpec | None = None,
    seed: int = 0,
    n_variable_draws: int = VARIABLE_DRAWS,
    threads: int = 1,
) -> tuple[ErrorBarCalibration, np.ndarray]:
    """Random-removal ensemble over a half split.

    The first half of the rows trains every model; each model drops
    ``n_removed`` distinct features chosen by its own seeded stream, and
    scores every second-half row. Returns the fitted calibration plus the
    (n_test_rows x n_models) score matrix.

    The fit draws ``n_variable_draws`` training-half variables, pairs each
    raw variable spread with the mean per-sample score spread of a
    bootstrap-matched resample of the model columns, and regresses through
    the origin. Model training is order-independent, so any ``threads``
    count gives identical output.
    """
    if n_models < 2:
        raise ValueError("n_models must be at least 2")
    if not 0 <= n_removed < m.n_params:
        raise ValueError(f"n_removed must be in 0..{m.n_params - 1}")
    if m.n_lots < 4:
        raise InsufficientRows("ensemble needs at least 4 lots for a half split")

    n_train = m.n_lots // 2
    train_half = _take_rows(m, range(n_train))
    test_vals = m.values[n_train:, :]

    root = np.random.SeedSequence(seed)
    streams = root.spawn(n_models + 2)

    def score_one(idx: int) -> np.ndarray:
        rng = np.random.default_rng(streams[idx])
        removed = set(rng.choice(m.n_params, size=n_removed, replace=False).tolist())
        kept = [pid for j, pid in enumerate(m.param_ids) if j not in removed]
        cols = [j for j in range(m.n_params) if j not in removed]
        sub = restrict(train_half, set(kept))
        model, _ = train(sub, nu=nu, kernel=kernel, seed=seed)
        return decision_matrix(model, test_vals[:, cols])

    columns = parallel_map(score_one, list(range(n_models)), threads)
    scores = np.column_stack(columns)

    draw_rng = np.random.default_rng(streams[n_models])
    boot_rng = np.random.default_rng(streams[n_models + 1])
    xs = np.empty(n_variable_draws)
    ys = np.empty(n_variable_draws)
    for v in range(n_variable_draws):
        var = int(draw_rng.integers(0, m.n_params))
        xs[v] = float(np.std(train_half.values[:, var], ddof=1))
        boot = boot_rng.integers(0, n_models, size=n_models)
        ys[v] = float(np.mean(np.std(scores[:, boot], axis=1, ddof=1)))

    sxx = float(xs @ xs)
    ratio = float(xs @ ys) / sxx if sxx > 0.0 else 0.0
    ss_tot = float(ys @ ys)
    if ss_tot > 0.0:
        res = ys - ratio * xs
        r_squared = min(max(1.0 - float(res @ res) / ss_tot, 0.0), 1.0)
    else:
        # all-zero spreads fit the zero line exactly
        r_squared = 1.0

    calibration = ErrorBarCalibration(
        removal_fraction=n_removed / m.n_params,
        ratio=ratio,
        r_squared=r_squared,
        n_models=n_models,
        n_removed=n_removed,
    )
    return calibration, scores


def _take_rows(m: DataMatrix, rows) -> DataMatrix:
    rows = list(rows)
    return DataMatrix(
        values=m.values[rows, :],
        param_ids=m.param_ids,
        lot_ids=tuple(m.lot_ids[i] for i in rows),
    )


@dataclass(frozen=True)
class GreyZoneReport:
    """Lots whose score sits inside the predicted score spread of the frontier."""

    sigma_pred: float
    grey_lot_ids: frozenset[str]
    grey_fraction: float


def grey_zone(
    scores: Mapping[str, float],
    calibration: ErrorBarCalibration,
    sigma_variable: float,
) -> GreyZoneReport:
    """Flag lots with |score| below the predicted score standard deviation."""
    if sigma_variable < 0.0:
        raise ValueError("sigma_variable must be non-negative")
    sigma_pred = calibration.ratio * sigma_variable
    grey = frozenset(lot for lot, s in scores.items() if abs(s) < sigma_pred)
    fraction = len(grey) / len(scores) if scores else 0.0
    return GreyZoneReport(
        sigma_pred=sigma_pred, grey_lot_ids=grey, grey_fraction=fraction
    )

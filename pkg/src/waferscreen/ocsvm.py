"""nu-style one-class SVM with a deterministic pairwise dual solver.

Training solves

    minimize    0.5 * a' Q a
    subject to  0 <= a_i <= 1/(nu * n),   sum_i a_i = 1,

where Q is the kernel Gram matrix of the z-scored training rows. The solver
repeatedly picks the maximal KKT-violating pair (ties to the lowest index),
takes the exact line-search step clipped to the box, and stops when the
violation drops below ``tol``. Everything is deterministic, so identical
inputs give identical models.

The decision value of a point x is ``sum_i a_i K(x, x_i) - rho``; positive
means inside the training distribution, negative means flagged. ``rho`` is
the mean kernel expansion over the unbounded support vectors, which places
those vectors on the frontier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataMatrix, fmt_float
from .errors import DegenerateData, DimMismatch, MalformedModel
from .util import chunked, parallel_map

LINEAR = "linear"
RBF = "rbf"

# alpha above this is a support vector
SUPPORT_EPS = 1e-10
# tolerance on sum(alpha) = 1
EQUALITY_EPS = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its width.

    ``gamma`` applies to the RBF kernel only; leave it ``None`` to have
    :func:`train` resolve it from the data (see :func:`default_gamma`).
    """

    kind: str
    gamma: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in (LINEAR, RBF):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == RBF and self.gamma is not None and not self.gamma > 0:
            raise ValueError("rbf gamma must be positive")
        if self.kind == LINEAR and self.gamma is not None:
            raise ValueError("linear kernel takes no gamma")


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    max_kkt_violation: float
    converged: bool


@dataclass(frozen=True)
class OcSvmModel:
    """Trained frontier model.

    ``alphas`` spans all training lots; ``support_indices`` points at the
    entries above :data:`SUPPORT_EPS` and ``train_refs`` holds exactly those
    rows, already standardized. ``center``/``scale`` is the affine map applied
    to raw inputs before any kernel evaluation (a zero-variance training
    column gets scale 1).
    """

    alphas: np.ndarray
    rho: float
    kernel: KernelSpec
    nu: float
    support_indices: tuple[int, ...]
    feature_ids: tuple[str, ...]
    train_refs: np.ndarray
    center: np.ndarray
    scale: np.ndarray

    def __post_init__(self) -> None:
        refs = np.asarray(self.train_refs, dtype=np.float64)
        if refs.shape != (len(self.support_indices), len(self.feature_ids)):
            raise ValueError("train_refs shape does not match supports x features")
        for name in ("alphas", "train_refs", "center", "scale"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_train(self) -> int:
        return len(self.alphas)

    def support_alphas(self) -> np.ndarray:
        return self.alphas[list(self.support_indices)]

    def standardize(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.center) / self.scale


def standardize_columns(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """z-score each column; zero-variance columns are shifted but not scaled."""
    X = np.asarray(X, dtype=np.float64)
    center = X.mean(axis=0)
    sd = X.std(axis=0)
    scale = np.where(sd > 0.0, sd, 1.0)
    return (X - center) / scale, center, scale


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise DimMismatch(f"{name} must be a non-empty 1-d vector")
    return arr


def kernel_eval(k: KernelSpec, a, b) -> float:
    """K(a, b) for one pair of points."""
    a = _as_vector(a, "a")
    b = _as_vector(b, "b")
    if a.shape != b.shape:
        raise DimMismatch(f"dim {a.size} vs {b.size}")
    if k.kind == LINEAR:
        return float(a @ b)
    if k.gamma is None:
        raise ValueError("rbf gamma not resolved")
    d = a - b
    return float(np.exp(-k.gamma * (d @ d)))


def kernel_grad(k: KernelSpec, x, xi) -> np.ndarray:
    """Gradient of K(x, xi) with respect to the reference point xi."""
    x = _as_vector(x, "x")
    xi = _as_vector(xi, "xi")
    if x.shape != xi.shape:
        raise DimMismatch(f"dim {x.size} vs {xi.size}")
    if k.kind == LINEAR:
        return x.copy()
    if k.gamma is None:
        raise ValueError("rbf gamma not resolved")
    return 2.0 * k.gamma * (x - xi) * kernel_eval(k, x, xi)


def kernel_gram(k: KernelSpec, A: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    """Gram matrix K(A_i, B_j); B defaults to A."""
    A = np.asarray(A, dtype=np.float64)
    B = A if B is None else np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise DimMismatch(f"incompatible shapes {A.shape} and {B.shape}")
    if k.kind == LINEAR:
        return A @ B.T
    if k.gamma is None:
        raise ValueError("rbf gamma not resolved")
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.clip(sq, 0.0, None, out=sq)
    return np.exp(-k.gamma * sq)


def default_gamma(Z: np.ndarray) -> float:
    """Median-heuristic RBF width: 1 / (n_features * median pairwise sq dist)."""
    Z = np.asarray(Z, dtype=np.float64)
    n, d = Z.shape
    sq = (
        np.sum(Z * Z, axis=1)[:, None]
        + np.sum(Z * Z, axis=1)[None, :]
        - 2.0 * (Z @ Z.T)
    )
    med = float(np.median(sq[np.triu_indices(n, 1)])) if n > 1 else 0.0
    if med <= 0.0:
        return 1.0 / d
    return 1.0 / (d * med)


def _solve_dual(Q: np.ndarray, nu: float, tol: float, max_iter: int):
    n = Q.shape[0]
    cap = 1.0 / (nu * n)
    alpha = np.full(n, 1.0 / n)
    G = Q @ alpha
    iterations = 0
    violation = np.inf
    while True:
        g_up = np.where(alpha < cap, G, np.inf)
        i = int(np.argmin(g_up))
        if not np.isfinite(g_up[i]):
            # box fully saturated (nu = 1): the feasible set is one point
            violation = 0.0
            break
        g_dn = np.where(alpha > 0.0, G, -np.inf)
        j = int(np.argmax(g_dn))
        violation = float(g_dn[j] - g_up[i])
        if violation <= tol or iterations >= max_iter:
            break
        quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
        step = violation / quad if quad > 0.0 else np.inf
        cap_i = cap - alpha[i]
        cap_j = alpha[j]
        step = min(step, cap_i, cap_j)
        alpha[i] = cap if step == cap_i else alpha[i] + step
        alpha[j] = 0.0 if step == cap_j else alpha[j] - step
        G += step * (Q[:, i] - Q[:, j])
        iterations += 1
    violation = max(violation, 0.0)
    report = SolverReport(
        iterations=iterations,
        max_kkt_violation=violation,
        converged=violation <= tol,
    )
    return alpha, G, report


def train(
    m: DataMatrix,
    nu: float,
    kernel: KernelSpec | None = None,
    tol: float = 1e-6,
    max_iter: int = 10_000_000,
    seed: int = 0,
) -> tuple[OcSvmModel, SolverReport]:
    """Fit the one-class frontier on all rows of ``m``.

    ``seed`` is accepted for interface stability; the solver itself is fully
    deterministic (maximal-violating-pair selection with lowest-index ties),
    so it is currently unused. A non-converged run still returns the best
    iterate, flagged through the report.
    """
    if not 0.0 < nu <= 1.0:
        raise ValueError(f"nu must be in (0, 1], got {nu}")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if m.n_lots < 2:
        raise DegenerateData("training needs at least 2 lots")
    Z, center, scale = standardize_columns(m.values)
    if kernel is None:
        kernel = KernelSpec(RBF)
    if kernel.kind == RBF and kernel.gamma is None:
        kernel = KernelSpec(RBF, gamma=default_gamma(Z))
    Q = kernel_gram(kernel, Z)
    alpha, G, report = _solve_dual(Q, nu, tol, max_iter)

    bound = 1.0 / (nu * m.n_lots)
    unbounded = (alpha > SUPPORT_EPS) & (alpha < bound)
    if unbounded.any():
        rho = float(G[unbounded].mean())
    else:
        lo = float(G[alpha > 0.0].max())
        below = alpha < bound
        hi = float(G[below].min()) if below.any() else lo
        rho = 0.5 * (lo + hi)

    support = tuple(int(i) for i in np.flatnonzero(alpha > SUPPORT_EPS))
    model = OcSvmModel(
        alphas=alpha,
        rho=rho,
        kernel=kernel,
        nu=float(nu),
        support_indices=support,
        feature_ids=m.param_ids,
        train_refs=Z[list(support)],
        center=center,
        scale=scale,
    )
    return model, report


def decision(model: OcSvmModel, x) -> float:
    """Signed frontier distance of one raw point; negative means flagged."""
    x = _as_vector(x, "x")
    if x.size != len(model.feature_ids):
        raise DimMismatch(f"point has dim {x.size}, model expects {len(model.feature_ids)}")
    return float(decision_matrix(model, x[None, :])[0])


def decision_matrix(model: OcSvmModel, X: np.ndarray) -> np.ndarray:
    """Decision values for many raw points at once (rows of X)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.feature_ids):
        raise DimMismatch(f"matrix shape {X.shape} does not fit {len(model.feature_ids)} features")
    Z = model.standardize(X)
    K = kernel_gram(model.kernel, Z, model.train_refs)
    return K @ model.support_alphas() - model.rho


def primal_weights(model: OcSvmModel) -> tuple[np.ndarray, np.ndarray]:
    """Linear primal weights w = sum_i a_i x_i over the stored (standardized)
    references, plus the per-feature squared magnitudes used for ranking."""
    w = model.support_alphas() @ model.train_refs
    return w, w * w


def rfe_criteria(model: OcSvmModel, threads: int = 1) -> np.ndarray:
    """Per-feature influence scores; lower means less influential.

    Linear kernel: squared primal weight per feature. RBF kernel: magnitude
    of the change in the dual objective 0.5 a'Qa when the feature is dropped
    from every pairwise distance with the coefficients held fixed. A feature
    that is constant across the references scores exactly zero under both.

    Feature evaluations are independent given the frozen model, so they may
    be chunked over ``threads`` workers without changing the result.
    """
    if model.kernel.kind == LINEAR:
        return primal_weights(model)[1]
    a = model.support_alphas()
    refs = model.train_refs
    gamma = model.kernel.gamma
    K = kernel_gram(model.kernel, refs)
    B = np.outer(a, a) * K
    base = float(B.sum())

    def score_block(features: range) -> list[float]:
        block = []
        for f in features:
            diff = refs[:, f][:, None] - refs[:, f][None, :]
            without = float((B * np.exp(gamma * diff * diff)).sum())
            block.append(0.5 * abs(base - without))
        return block

    blocks = parallel_map(score_block, chunked(range(refs.shape[1]), threads), threads)
    return np.array([v for block in blocks for v in block])


def rfe_criterion(model: OcSvmModel, j: int) -> float:
    """Influence score of one feature (see :func:`rfe_criteria`)."""
    if not 0 <= j < len(model.feature_ids):
        raise DimMismatch(f"feature index {j} outside 0..{len(model.feature_ids) - 1}")
    return float(rfe_criteria(model)[j])


MODEL_FORMAT = "ocsvm-model/1"


def _join(values) -> str:
    return ",".join(fmt_float(v) for v in np.asarray(values, dtype=np.float64).ravel())


def save_model(model: OcSvmModel, path, header_comment: str | None = None) -> None:
    """Write the model as a flat key=value text file (format-tagged)."""
    import json

    lines = []
    if header_comment is not None:
        lines.append(f"# {header_comment}")
    lines += [
        f"format={MODEL_FORMAT}",
        f"kind={model.kernel.kind}",
        f"gamma={'' if model.kernel.gamma is None else fmt_float(model.kernel.gamma)}",
        f"nu={fmt_float(model.nu)}",
        f"rho={fmt_float(model.rho)}",
        f"feature_ids={json.dumps(list(model.feature_ids))}",
        f"center={_join(model.center)}",
        f"scale={_join(model.scale)}",
        f"alphas={_join(model.alphas)}",
        f"support_indices={','.join(str(i) for i in model.support_indices)}",
        "train_refs=" + ";".join(_join(row) for row in model.train_refs),
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> OcSvmModel:
    """Parse a file written by :func:`save_model`."""
    import json

    fields: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise MalformedModel(f"{path}: bad line {line!r}")
            key, _, value = line.partition("=")
            fields[key] = value
    if fields.get("format") != MODEL_FORMAT:
        raise MalformedModel(f"{path}: unsupported format {fields.get('format')!r}")
    try:
        kind = fields["kind"]
        gamma = float(fields["gamma"]) if fields["gamma"] else None
        support = tuple(
            int(t) for t in fields["support_indices"].split(",") if t != ""
        )
        feature_ids = tuple(json.loads(fields["feature_ids"]))
        refs_rows = [
            [float(t) for t in row.split(",")]
            for row in fields["train_refs"].split(";")
            if row != ""
        ]
        refs = (
            np.array(refs_rows, dtype=np.float64)
            if refs_rows
            else np.zeros((0, len(feature_ids)))
        )
        model = OcSvmModel(
            alphas=np.array([float(t) for t in fields["alphas"].split(",")]),
            rho=float(fields["rho"]),
            kernel=KernelSpec(kind, gamma),
            nu=float(fields["nu"]),
            support_indices=support,
            feature_ids=feature_ids,
            train_refs=refs,
            center=np.array([float(t) for t in fields["center"].split(",")]),
            scale=np.array([float(t) for t in fields["scale"].split(",")]),
        )
    except (KeyError, ValueError) as exc:
        raise MalformedModel(f"{path}: {exc}") from exc
    return model

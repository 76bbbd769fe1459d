"""Independent reference implementations used only by the tests.

These deliberately avoid the library's solver paths: the dual oracle is plain
projected gradient descent on the box-constrained simplex, and the clustering
oracle enumerates every medoid subset.
"""

from __future__ import annotations

import itertools

import numpy as np


def project_box_simplex(v: np.ndarray, cap: float) -> np.ndarray:
    """Euclidean projection onto {0 <= a_i <= cap, sum a = 1} by bisection."""
    lo, hi = float(v.min()) - cap - 1.0, float(v.max())
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.clip(v - mid, 0.0, cap).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi), 0.0, cap)


def pgd_dual_oracle(
    Q: np.ndarray, nu: float, max_steps: int = 10**6, stop: float = 1e-14
) -> tuple[np.ndarray, float]:
    """Brute-force minimizer of 0.5 a'Qa over the box-simplex.

    Fixed-step projected gradient descent with step 1/lambda_max(Q); stops at
    a fixed point (movement below ``stop``) or after ``max_steps``. Returns
    the iterate and its objective value.
    """
    n = Q.shape[0]
    cap = 1.0 / (nu * n)
    eta = 1.0 / max(float(np.linalg.eigvalsh(Q)[-1]), 1e-12)
    a = project_box_simplex(np.full(n, 1.0 / n), cap)
    for _ in range(max_steps):
        a_new = project_box_simplex(a - eta * (Q @ a), cap)
        moved = float(np.max(np.abs(a_new - a)))
        a = a_new
        if moved <= stop:
            break
    return a, 0.5 * float(a @ Q @ a)


def standardize_reference(X: np.ndarray) -> np.ndarray:
    """z-score columns the way the trainer documents it (std 0 -> divide by 1)."""
    sd = X.std(axis=0)
    return (X - X.mean(axis=0)) / np.where(sd > 0.0, sd, 1.0)


def kkt_violation(Q: np.ndarray, alpha: np.ndarray, nu: float) -> float:
    """Largest optimality violation of a feasible dual point."""
    cap = 1.0 / (nu * len(alpha))
    g = Q @ alpha
    down = g[alpha > 0.0]
    up = g[alpha < cap]
    if up.size == 0 or down.size == 0:
        return 0.0
    return max(float(down.max() - up.min()), 0.0)


def exhaustive_kmedoids_cost(points: dict[str, np.ndarray], k: int) -> float:
    """Minimum total cost over every possible medoid subset of size k."""
    ids = sorted(points)
    P = np.array([np.asarray(points[i], dtype=np.float64).ravel() for i in ids])
    sq = (
        np.sum(P * P, axis=1)[:, None]
        + np.sum(P * P, axis=1)[None, :]
        - 2.0 * (P @ P.T)
    )
    D = np.sqrt(np.clip(sq, 0.0, None))
    best = np.inf
    for subset in itertools.combinations(range(len(ids)), k):
        cost = float(D[:, subset].min(axis=1).sum())
        best = min(best, cost)
    return best

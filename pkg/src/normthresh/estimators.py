"""Mean estimators for samples of random vectors.

The central estimator is the thresholded empirical mean: every observation
``x`` with ``lam * ||x|| > 1`` is pulled back radially onto the sphere of
radius ``1 / lam`` before averaging. Baselines (empirical mean, median of
means, norm-trimmed mean) share the same input conventions so they can be
swapped inside a simulation campaign.

Samples are plain ``(n, d)`` float arrays, rows are observations. All means
are computed with the same fixed-order pairwise reduction over rows, which
makes results reproducible bit for bit and lets the thresholded mean equal
the empirical mean exactly when no row is clipped.
"""

import math
from typing import NamedTuple

import numpy as np

from ._rng import make_rng

__all__ = [
    "as_sample",
    "as_vector",
    "psi",
    "shrink",
    "shrink_rows",
    "thresholded_mean",
    "empirical_mean",
    "median_of_means",
    "geometric_median",
    "GeometricMedianResult",
    "trimmed_mean",
]


def as_sample(data) -> np.ndarray:
    """Validate and return ``data`` as a finite float array of shape (n, d).

    A 1-d input is read as ``n`` scalar observations (``d = 1``).
    """
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"sample must be 2-dimensional, got shape {x.shape}")
    if x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"sample must have n >= 1 and d >= 1, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains NaN or infinite entries")
    return x


def as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v[None]
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains NaN or infinite entries")
    return v


_INSIDE = 1.0 - 2.0**-49


def _check_lambda(lam) -> float:
    lam = float(lam)
    if not (math.isfinite(lam) and lam > 0):
        raise ValueError(f"lambda must be positive and finite, got {lam}")
    return lam


def _row_norms(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", x, x))


def _tree_sum(rows: np.ndarray) -> np.ndarray:
    """Pairwise sum over axis 0 in a fixed, index-determined order."""
    while rows.shape[0] > 1:
        m = rows.shape[0]
        if m % 2:
            rows = np.concatenate([rows[0 : m - 1 : 2] + rows[1:m:2], rows[m - 1 :]])
        else:
            rows = rows[0::2] + rows[1::2]
    return rows[0].copy()


def _tree_mean(rows: np.ndarray) -> np.ndarray:
    return _tree_sum(rows) / rows.shape[0]


def psi(t):
    """Threshold function ``min(t, 1)`` on the non-negative half-line."""
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("psi is defined for finite t >= 0")
    out = np.minimum(arr, 1.0)
    return float(out) if out.ndim == 0 else out


def shrink_rows(x: np.ndarray, lam: float) -> np.ndarray:
    """Apply :func:`shrink` to every row of a validated (n, d) array."""
    lam = _check_lambda(lam)
    norms = _row_norms(x)
    clip = lam * norms > 1.0
    if not np.any(clip):
        return x.copy()
    out = x.copy()
    # land a few ulps inside the sphere so lam * ||y|| <= 1 survives any
    # summation order used to recompute the norm
    out[clip] = x[clip] * (_INSIDE / (lam * norms[clip]))[:, None]
    over = clip & (lam * _row_norms(out) > 1.0)
    while np.any(over):
        out[over] *= np.nextafter(1.0, 0.0)
        over = over & (lam * _row_norms(out) > 1.0)
    return out


def shrink(x, lam) -> np.ndarray:
    """Project ``x`` onto the closed ball of radius ``1 / lam``.

    Returns ``x`` unchanged when ``lam * ||x|| <= 1`` (including ``x = 0``),
    otherwise ``x / (lam * ||x||)``.
    """
    v = as_vector(x)
    return shrink_rows(v[None, :], lam)[0]


def thresholded_mean(sample, lam) -> np.ndarray:
    """Average of the radially thresholded observations.

    Parameters
    ----------
    sample : array_like, shape (n, d)
        Observations, one per row.
    lam : float
        Shrinkage scale; rows are clipped to norm at most ``1 / lam``.

    Returns
    -------
    ndarray, shape (d,)
    """
    x = as_sample(sample)
    return _tree_mean(shrink_rows(x, lam))


def empirical_mean(sample) -> np.ndarray:
    return _tree_mean(as_sample(sample))


class GeometricMedianResult(NamedTuple):
    point: np.ndarray
    converged: bool
    n_iter: int
    objective: float


def _objective(points: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(_row_norms(points - y)))


def _vertex_is_optimal(points: np.ndarray, k: int, atol: float) -> bool:
    """Subgradient test: is data point ``k`` itself a geometric median?"""
    diff = points - points[k]
    dist = _row_norms(diff)
    same = dist <= atol
    if np.all(same):
        return True
    pull = np.sum(diff[~same] / dist[~same][:, None], axis=0)
    return float(np.linalg.norm(pull)) <= float(np.count_nonzero(same))


def geometric_median(points, tol: float = 1e-10, max_iter: int = 10_000) -> GeometricMedianResult:
    """Geometric median by Weiszfeld iteration with anchored steps.

    When an iterate lands on a data point the Vardi-Zhang modified step is
    used, and the iteration stops at that point if it satisfies the
    optimality condition. The nearest data point to each iterate is also
    tested once for optimality, which avoids the slow sublinear approach to
    an optimum located on a data point.

    ``tol`` is a displacement tolerance, scaled by ``max(1, max|points|)``.
    If ``max_iter`` is exhausted the best iterate seen is returned with
    ``converged=False``.
    """
    p = as_sample(points)
    if not (tol > 0):
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    m = p.shape[0]
    if m == 1:
        return GeometricMedianResult(p[0].copy(), True, 0, 0.0)

    atol = tol * max(1.0, float(np.max(np.abs(p))))
    y = _tree_mean(p)
    best, best_obj = y, _objective(p, y)
    checked = set()

    for it in range(1, max_iter + 1):
        diff = p - y
        dist = _row_norms(diff)
        k = int(np.argmin(dist))
        if k not in checked:
            checked.add(k)
            if _vertex_is_optimal(p, k, atol):
                return GeometricMedianResult(p[k].copy(), True, it, _objective(p, p[k]))

        near = dist <= atol
        far = ~near
        if not np.any(far):
            return GeometricMedianResult(y.copy(), True, it, _objective(p, y))
        w = 1.0 / dist[far]
        target = np.sum(p[far] * w[:, None], axis=0) / np.sum(w)
        if np.any(near):
            eta = float(np.count_nonzero(near))
            r = float(np.linalg.norm(np.sum(-diff[far] * w[:, None], axis=0)))
            if r <= eta:
                return GeometricMedianResult(y.copy(), True, it, _objective(p, y))
            gamma = eta / r
            y_new = (1.0 - gamma) * target + gamma * y
        else:
            y_new = target

        obj = _objective(p, y_new)
        if obj < best_obj:
            best, best_obj = y_new, obj
        if np.linalg.norm(y_new - y) <= atol:
            return GeometricMedianResult(y_new, True, it, obj)
        y = y_new

    return GeometricMedianResult(best, False, max_iter, best_obj)


def median_of_means(sample, blocks: int, rng_seed: int) -> np.ndarray:
    """Geometric median of block means.

    Rows are shuffled with a generator keyed by ``rng_seed`` and cut into
    ``blocks`` contiguous groups; when ``n`` is not divisible by ``blocks``
    the first ``n % blocks`` groups get one extra row.
    """
    x = as_sample(sample)
    n = x.shape[0]
    blocks = int(blocks)
    if not 1 <= blocks <= n:
        raise ValueError(f"blocks must satisfy 1 <= blocks <= n={n}, got {blocks}")
    if blocks == 1:
        return empirical_mean(x)
    perm = make_rng(rng_seed).permutation(n)
    q, r = divmod(n, blocks)
    sizes = [q + 1] * r + [q] * (blocks - r)
    bounds = np.cumsum([0] + sizes)
    shuffled = x[perm]
    means = np.stack([_tree_mean(shuffled[bounds[j] : bounds[j + 1]]) for j in range(blocks)])
    return geometric_median(means).point


def trimmed_mean(sample, trim_fraction: float) -> np.ndarray:
    """Mean after discarding the ``ceil(trim_fraction * n)`` largest-norm rows.

    Ties in norm are broken by row index (later rows are dropped first).
    """
    x = as_sample(sample)
    f = float(trim_fraction)
    if not 0.0 <= f < 0.5:
        raise ValueError(f"trim_fraction must lie in [0, 0.5), got {f}")
    n = x.shape[0]
    k = math.ceil(round(f * n, 9))
    if k >= n:
        raise ValueError(f"trimming {k} of {n} rows leaves nothing to average")
    if k == 0:
        return empirical_mean(x)
    order = np.argsort(_row_norms(x), kind="stable")
    keep = np.sort(order[: n - k])
    return _tree_mean(x[keep])

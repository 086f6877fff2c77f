"""Deterministic clustering and statistics primitives.

Seeded k-means (k-means++ init), histogram Otsu thresholding and the
Wilcoxon signed-rank test.  All randomness flows through an explicit
seed so identical calls give bitwise-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class KMeansResult:
    centers: np.ndarray  # (k, dim)
    assignment: np.ndarray  # (n,) center index per point
    iterations: int


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # (n, k) squared euclidean distances
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def kmeans(points, k: int, seed: int, max_iter: int = 100) -> KMeansResult:
    """Lloyd's algorithm with k-means++ initialization.

    If k >= number of distinct points, the distinct points themselves are
    returned as centers (first-occurrence order) with zero iterations.
    Empty clusters are re-seeded with the point farthest from its center.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError("need a non-empty (n, dim) point set")
    n = points.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")

    distinct, first_idx = np.unique(points, axis=0, return_index=True)
    if k >= distinct.shape[0]:
        order = np.sort(first_idx)
        centers = points[order]
        assignment = np.argmin(_sq_dists(points, centers), axis=1)
        return KMeansResult(centers.copy(), assignment, 0)

    rng = np.random.Generator(np.random.PCG64(seed))

    # k-means++ seeding
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = _sq_dists(points, centers[:1]).ravel()
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[c] = points[idx]
        closest = np.minimum(closest, _sq_dists(points, centers[c : c + 1]).ravel())

    assignment = np.full(n, -1)
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(points, centers)
        new_assignment = np.argmin(d2, axis=1)
        if np.array_equal(new_assignment, assignment):
            return KMeansResult(centers, assignment, it)
        assignment = new_assignment
        for c in range(k):
            mask = assignment == c
            if mask.any():
                centers[c] = points[mask].mean(axis=0)
            else:
                # standard remedy: steal the point farthest from its center
                far = int(np.argmax(d2[np.arange(n), assignment]))
                centers[c] = points[far]
                assignment[far] = c
    return KMeansResult(centers, assignment, max_iter)


def otsu(values) -> float:
    """Otsu threshold of a value distribution using 256 equal-width bins.

    Returns the lowest bin edge maximizing between-class variance; a
    constant input returns that constant.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size < 1:
        raise ValueError("need at least one value")
    vmin, vmax = values.min(), values.max()
    if vmin == vmax:
        return float(vmin)
    nbins = 256
    hist, edges = np.histogram(values, bins=nbins, range=(vmin, vmax))
    hist = hist.astype(np.float64)
    total = hist.sum()
    centers = (edges[:-1] + edges[1:]) / 2.0

    weighted = hist * centers
    cum_w = np.cumsum(hist)
    best_k, best_v = None, -np.inf
    for k in range(1, nbins):
        w0 = cum_w[k - 1]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        # fsum keeps the sums correctly rounded so near-tied cuts resolve
        # to the same (lowest) edge regardless of summation order
        mu0 = math.fsum(weighted[:k]) / w0
        mu1 = math.fsum(weighted[k:]) / w1
        v = w0 * w1 * (mu0 - mu1) ** 2
        if v > best_v:
            best_v, best_k = v, k
    return float(edges[best_k])


@dataclass
class WilcoxonResult:
    statistic: float
    p_value: float
    significant: bool


def wilcoxon_signed_rank(x, y, alpha: float = 0.05) -> WilcoxonResult:
    """Two-sided signed-rank test, tie-averaged ranks, normal approximation
    with continuity correction.  Zero differences are dropped; fewer than 6
    surviving pairs is an error.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("paired samples must have equal length")
    d = x - y
    d = d[d != 0.0]
    n = d.size
    if n < 6:
        raise ValueError("insufficient paired samples (need >= 6 nonzero differences)")

    absd = np.abs(d)
    order = np.argsort(absd, kind="stable")
    ranks = np.empty(n)
    sorted_abs = absd[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1

    w_plus = ranks[d > 0].sum()
    w_minus = ranks[d < 0].sum()
    statistic = min(w_plus, w_minus)
    mean = n * (n + 1) / 4.0

    if n <= EXACT_LIMIT:
        p = _exact_two_sided_p(ranks, w_plus, mean)
    else:
        var = n * (n + 1) * (2 * n + 1) / 24.0
        _, tie_counts = np.unique(sorted_abs, return_counts=True)
        var -= (tie_counts**3 - tie_counts).sum() / 48.0
        if var <= 0:
            return WilcoxonResult(statistic, 1.0, False)
        dev = w_plus - mean
        z = (dev - 0.5 * np.sign(dev)) / math.sqrt(var) if dev != 0 else 0.0
        p = 2.0 * (1.0 - 0.5 * (1.0 + math.erf(abs(z) / math.sqrt(2.0))))
    p = min(1.0, p)
    return WilcoxonResult(float(statistic), float(p), bool(p < alpha))


EXACT_LIMIT = 25


def _exact_two_sided_p(ranks, w_obs: float, mean: float) -> float:
    """P(|W+ - mean| >= |w_obs - mean|) over all sign assignments.

    Counting runs over doubled ranks so tie-averaged half-integer ranks
    stay exact integers.
    """
    doubled = np.rint(2.0 * np.asarray(ranks)).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        counts[r:] += counts[: total + 1 - r].copy()
    dev = abs(2.0 * w_obs - 2.0 * mean)
    sums = np.arange(total + 1, dtype=np.float64)
    extreme = np.abs(sums - 2.0 * mean) >= dev - 1e-9
    return float(counts[extreme].sum() / counts.sum())

"""Post-processing (components, size filter, seed estimation, seeded
delineation) and saliency evaluation metrics (weighted F-measure, MAE).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .imgcore import as_image

BINARIZE_THRESHOLD = 0.5
EIGHT = np.ones((3, 3), dtype=int)


@dataclass
class ComponentMap:
    labels: np.ndarray  # (h, w) ints, 0 = background
    n_components: int
    areas: np.ndarray  # (n_components,) pixel counts, label l at areas[l-1]


@dataclass
class MetricReport:
    fbw: float
    mae: float
    per_image: list = field(default_factory=list)  # of (name, fbw, mae)

    def to_json(self) -> dict:
        return {
            "fbw": self.fbw,
            "mae": self.mae,
            "per_image": [
                {"name": n, "fbw": f, "mae": m} for n, f, m in self.per_image
            ],
        }


def _binarize(sal: np.ndarray) -> np.ndarray:
    sal = as_image(sal)[:, :, 0]
    return sal > BINARIZE_THRESHOLD


def connected_components(binary: np.ndarray) -> ComponentMap:
    """8-connected labeling with raster-order label assignment."""
    mask = _binarize(binary) if np.asarray(binary).dtype != bool else np.asarray(binary)
    if mask.ndim == 3:
        mask = mask[:, :, 0]
    labels, n = ndimage.label(mask, structure=EIGHT)
    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    return ComponentMap(labels, int(n), areas)


def size_filter(sal: np.ndarray, min_area: int = 0, max_area: int = None) -> np.ndarray:
    """Zero out components (of the binarized map) outside [min_area, max_area]."""
    if max_area is None:
        max_area = np.iinfo(np.int64).max
    if min_area > max_area:
        raise ValueError("min_area must be <= max_area")
    sal = as_image(sal)
    comp = connected_components(sal)
    keep = np.zeros(comp.n_components + 1, dtype=bool)
    for label in range(1, comp.n_components + 1):
        keep[label] = min_area <= comp.areas[label - 1] <= max_area
    out = sal.copy()
    out[:, :, 0] = np.where(keep[comp.labels], sal[:, :, 0], 0.0)
    return out


def estimate_seeds(sal: np.ndarray, erosion_radius: float = 1.0,
                   dilation_radius: float = 30.0) -> tuple:
    """Object seeds from Euclidean erosion; background seeds outside the
    Euclidean dilation (both via distance transforms).
    """
    mask = _binarize(sal)
    if mask.any():
        eroded = ndimage.distance_transform_edt(mask) > erosion_radius
    else:
        eroded = mask
    if not mask.any():
        outside = np.ones_like(mask, dtype=bool)  # no object: everything is far
    elif (~mask).any():
        outside = ndimage.distance_transform_edt(~mask) > dilation_radius
    else:
        outside = np.zeros_like(mask)
    obj = set(zip(*(idx.tolist() for idx in np.nonzero(eroded))))
    bg = set(zip(*(idx.tolist() for idx in np.nonzero(outside))))
    return obj, bg


def seeded_delineation(img: np.ndarray, obj_seeds, bg_seeds) -> np.ndarray:
    """Shortest-path forest over the 8-neighbor grid with additive feature
    distance arc weights; each pixel takes its cheapest seed's class.

    Ties break by (cost, background first, raster order).  With either
    seed set empty the binarized input is returned unchanged.
    """
    img = as_image(img)
    h, w, _ = img.shape
    if not obj_seeds or not bg_seeds:
        return (_binarize(img) if img.shape[2] == 1 else np.zeros((h, w), bool)).astype(
            np.float64
        )[:, :, None]
    cost = np.full((h, w), np.inf)
    label = np.zeros((h, w), dtype=np.int8)  # 0 bg, 1 obj
    done = np.zeros((h, w), dtype=bool)
    heap = []
    for cls, seeds in ((0, bg_seeds), (1, obj_seeds)):
        for (i, j) in sorted(seeds):
            if cost[i, j] > 0.0 or (cost[i, j] == 0.0 and cls < label[i, j]):
                cost[i, j] = 0.0
                label[i, j] = cls
                heapq.heappush(heap, (0.0, cls, i * w + j))
    neighbors = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    while heap:
        c, cls, flat = heapq.heappop(heap)
        i, j = divmod(flat, w)
        if done[i, j]:
            continue
        if c > cost[i, j] or (c == cost[i, j] and cls > label[i, j]):
            continue
        done[i, j] = True
        for di, dj in neighbors:
            ni, nj = i + di, j + dj
            if not (0 <= ni < h and 0 <= nj < w) or done[ni, nj]:
                continue
            arc = math.sqrt(float(((img[i, j] - img[ni, nj]) ** 2).sum()))
            nc = c + arc
            if nc < cost[ni, nj] or (nc == cost[ni, nj] and cls < label[ni, nj]):
                cost[ni, nj] = nc
                label[ni, nj] = cls
                heapq.heappush(heap, (nc, cls, ni * w + nj))
    return label.astype(np.float64)[:, :, None]


def _dependency_kernel(window: int, sigma: float) -> np.ndarray:
    r = window // 2
    y, x = np.mgrid[-r : r + 1, -r : r + 1]
    k = np.exp(-(x**2 + y**2) / (2.0 * sigma**2))
    return k / k.sum()


def weighted_fmeasure(sal: np.ndarray, gt: np.ndarray, beta: float = 1.0,
                      window: int = 7, sigma: float = 5.0,
                      use_dependency_weights: bool = True) -> float:
    """Weighted F-measure with spatial dependency weighting of errors.

    False negatives near other errors are smoothed through a Gaussian
    over the ground-truth region; false positives are discounted by
    distance from the object.  With `use_dependency_weights` off this
    degenerates to the classic F-measure.
    """
    sal = as_image(sal)[:, :, 0].astype(np.float64)
    gtm = as_image(gt)[:, :, 0] > BINARIZE_THRESHOLD
    if sal.shape != gtm.shape:
        raise ValueError("saliency and ground truth dims differ")
    eps = np.finfo(np.float64).eps
    n_fg = int(gtm.sum())
    if n_fg == 0:
        return 1.0 if (sal <= BINARIZE_THRESHOLD).all() else 0.0

    err = np.abs(sal - gtm.astype(np.float64))
    if use_dependency_weights:
        dist, (ii, jj) = ndimage.distance_transform_edt(~gtm, return_indices=True)
        # outside the object, take the error of the nearest object pixel
        err_t = err.copy()
        err_t[~gtm] = err[ii[~gtm], jj[~gtm]]
        blurred = ndimage.correlate(
            err_t, _dependency_kernel(window, sigma), mode="constant"
        )
        min_err = err.copy()
        take = gtm & (blurred < err)
        min_err[take] = blurred[take]
        weight = np.ones_like(err)
        weight[~gtm] = 2.0 - np.exp(math.log(0.5) / sigma * dist[~gtm])
        ew = min_err * weight
    else:
        ew = err
    tpw = n_fg - ew[gtm].sum()
    fpw = ew[~gtm].sum()
    recall = 1.0 - ew[gtm].mean()
    precision = tpw / (eps + tpw + fpw)
    if recall <= 0 or precision <= 0:
        return 0.0
    b2 = beta**2
    return float((1 + b2) * precision * recall / (eps + b2 * precision + recall))


def mae(sal: np.ndarray, gt: np.ndarray, scaled: bool = True) -> float:
    """Mean absolute error between maps in [0, 1]; reported x100 by default."""
    sal = as_image(sal)[:, :, 0]
    gtm = as_image(gt)[:, :, 0]
    if sal.shape != gtm.shape:
        raise ValueError("saliency and ground truth dims differ")
    value = float(np.abs(sal - gtm).mean())
    return value * 100.0 if scaled else value


def evaluate_pairs(pairs) -> MetricReport:
    """Aggregate (name, sal, gt) triples into a MetricReport (mean of per-image)."""
    per_image = []
    for name, sal, gt in pairs:
        per_image.append((name, weighted_fmeasure(sal, gt), mae(sal, gt)))
    if not per_image:
        raise ValueError("no image pairs to evaluate")
    fbw = float(np.mean([f for _, f, _ in per_image]))
    mae_mean = float(np.mean([m for _, _, m in per_image]))
    return MetricReport(fbw, mae_mean, per_image)

"""Acceptance gate: one test per primary criterion, one printed line each.

Every criterion is verified against an independent oracle or a
hand-computed fixture at its stated tolerance; tolerances are never
loosened here.
"""

import json
import math
import os
import time

import numpy as np
import pytest
from scipy import ndimage

from flimsod import synth
from flimsod.cli import main as cli_main
from flimsod.decoder import adapt_weights, channel_polarity, saliency
from flimsod.encoder import (
    ArchitectureSpec,
    KernelBank,
    LayerSpec,
    arch_params,
    convolve,
)
from flimsod.evalpp import (
    estimate_seeds,
    mae,
    seeded_delineation,
    size_filter,
    weighted_fmeasure,
)
from flimsod.modelio import load_model
from flimsod.numerics import otsu
from flimsod.separable import factorize
from flimsod.simplify import _simplify_pass, simplify_layer


def _report(name: str, ok: bool):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    assert ok, name


# --------------------------------------------------------------------------
# 1. convolution vs per-pixel triple-loop oracle


def _conv_oracle(img, kernels, dilations):
    h, w, f = img.shape
    m, a, _, _ = kernels.shape
    r = a // 2
    out = np.zeros((h, w, m))
    for y in range(h):
        for x in range(w):
            for c in range(m):
                acc = 0.0
                for d in dilations:
                    for i in range(a):
                        for j in range(a):
                            yy = y + (i - r) * d
                            xx = x + (j - r) * d
                            if 0 <= yy < h and 0 <= xx < w:
                                for b in range(f):
                                    acc += img[yy, xx, b] * kernels[c, i, j, b]
                out[y, x, c] = acc
    return out


def test_criterion_convolution_oracle():
    rng = np.random.default_rng(11)
    ok = True
    for _ in range(200):
        h, w = rng.integers(2, 9, size=2)
        f = int(rng.integers(1, 4))
        a = int(rng.choice([1, 3]))
        m = int(rng.integers(1, 5))
        n_d = int(rng.integers(1, 4))
        dilations = tuple(sorted(rng.choice([1, 2, 3], size=n_d, replace=False)))
        img = rng.normal(size=(h, w, f))
        bank = KernelBank(rng.normal(size=(m, a, a, f)), np.ones(m, dtype=np.int64))
        got = convolve(img, bank, dilations)
        want = _conv_oracle(img, bank.kernels, dilations)
        ok &= bool(np.abs(got - want).max() <= 1e-9)
        # linearity: multi-dilation output is the sum of single-dilation runs
        acc = None
        for d in dilations:
            single = convolve(img, bank, (d,))
            acc = single if acc is None else acc + single
        ok &= bool(np.array_equal(got, acc))
    _report("convolution-oracle (200 random instances, 1e-9 + exact linearity)", ok)


# --------------------------------------------------------------------------
# 2. factorization formulas on hand-computed fixtures


def _const_bank(pairs):
    """2-kernel/2-channel 1x1 banks from (c0, c1) coefficient pairs."""
    kernels = np.array([[[[float(c0), float(c1)]]] for c0, c1 in pairs])
    return KernelBank(kernels, np.ones(len(pairs), dtype=np.int64))


def test_criterion_factorization_fixtures():
    tol = 1e-12
    ok = True
    # fixture A: kernels (1,2) and (3,6); mu=(2,4), var=(1,4), beta=6,
    # omega=(1/3, 8/3), phi = [(1/3, 16/3), (1, 16)]
    layer = factorize(_const_bank([(1, 2), (3, 6)]))
    ok &= bool(np.abs(layer.depthwise - np.array([[[2.0, 4.0]]])).max() <= tol)
    ok &= bool(
        np.abs(layer.pointwise - np.array([[1 / 3, 16 / 3], [1.0, 16.0]])).max() <= tol
    )
    # fixture B: 3x3 constant-channel kernels (1,2) and (3,0); mu=(2,1),
    # var=(1,1), beta=3, omega=(2/3, 1/3); phi(k1)=(2/3, 2/3), phi(k2)=(2,0)
    kernels = np.stack(
        [
            np.stack([np.full((3, 3), 1.0), np.full((3, 3), 2.0)], axis=-1),
            np.stack([np.full((3, 3), 3.0), np.full((3, 3), 0.0)], axis=-1),
        ]
    )
    layer = factorize(KernelBank(kernels, np.ones(2, dtype=np.int64)))
    ok &= bool(np.abs(layer.depthwise - np.array([2.0, 1.0])).max() <= tol)
    ok &= bool(
        np.abs(layer.pointwise - np.array([[2 / 3, 2 / 3], [2.0, 0.0]])).max() <= tol
    )
    # fixture C: kernels (5,1) and (1,1); mu=(3,1), var=(4,0), beta=4,
    # omega=(3,0); phi = [(15,0), (3,0)]
    layer = factorize(_const_bank([(5, 1), (1, 1)]))
    ok &= bool(np.abs(layer.depthwise - np.array([[[3.0, 1.0]]])).max() <= tol)
    ok &= bool(np.abs(layer.pointwise - np.array([[15.0, 0.0], [3.0, 0.0]])).max() <= tol)
    # depthwise kernel equals the elementwise mean on 100 random banks
    rng = np.random.default_rng(12)
    for _ in range(100):
        m = int(rng.integers(1, 6))
        a = int(rng.choice([1, 3]))
        f = int(rng.integers(1, 4))
        kernels = rng.normal(size=(m, a, a, f)) + 1.0  # keep beta away from 0
        bank = KernelBank(kernels, np.ones(m, dtype=np.int64))
        want = sum(kernels[c] for c in range(m)) / m
        ok &= bool(np.abs(factorize(bank).depthwise - want).max() <= 1e-12)
    _report("factorization-fixtures (three hand-computed banks, 1e-12)", ok)


# --------------------------------------------------------------------------
# 3. simplification trace and invariants


def test_criterion_simplification():
    ok = True
    # {k, k, k'} with k=1, k'=9 (1x1x1): the duplicate pair merges; the
    # survivor bakes its transferred count -> kernels {2, 9}, counts reset
    kernels = np.array([1.0, 1.0, 9.0]).reshape(3, 1, 1, 1)
    bank = KernelBank(kernels, np.ones(3, dtype=np.int64))
    out, report = simplify_layer(bank, 1)
    ok &= out.m == 2
    ok &= bool(np.allclose(out.kernels.ravel(), [2.0, 9.0]))
    ok &= bool((out.counts == 1).all())
    ok &= report.removed_per_iteration == [1]
    rng = np.random.default_rng(13)
    for _ in range(500):
        m = int(rng.integers(1, 7))
        a = int(rng.choice([1, 3]))
        f = int(rng.integers(1, 3))
        kernels = rng.normal(size=(m, a, a, f))
        counts = rng.integers(1, 5, size=m)
        new_k, new_c, removed, _ = _simplify_pass(kernels, counts.copy())
        ok &= new_k.shape[0] <= m  # monotonically non-increasing
        ok &= new_k.shape[0] == m - removed
        ok &= int(new_c.sum()) == int(counts.sum())  # counts conserved
        baked, _ = simplify_layer(KernelBank(kernels, counts), 1)
        ok &= baked.m <= m
    for _ in range(20):
        m = int(rng.integers(2, 7))
        kernel = rng.normal(size=(1, 1, 1, 2))
        uniform = KernelBank(
            np.repeat(kernel, m, axis=0), np.ones(m, dtype=np.int64)
        )
        out, _ = simplify_layer(uniform, 3)
        ok &= out.m == m and bool(np.array_equal(out.kernels, uniform.kernels))
    _report("simplification (duplicate-merge trace + 500 random banks)", ok)


# --------------------------------------------------------------------------
# 4. decoder rule table


def test_criterion_decoder_rule_table():
    # all 16 combinations of (mean_low, mean_high, psi_above_min,
    # psi_below_max); fg = low & above_min, bg = high & below_max, and a
    # simultaneous fg/bg (zero-spread tie) discards the channel
    table = {}
    for bits in range(16):
        low, high, above, below = (bool(bits >> k & 1) for k in range(4))
        fg = low and above
        bg = high and below
        table[(low, high, above, below)] = 0 if (fg and bg) else 1 if fg else -1 if bg else 0
    ok = all(
        channel_polarity(*combo) == want for combo, want in table.items()
    ) and len(table) == 16
    # feature-level spot checks driving the same branches through adapt_weights
    h = np.full((10, 10), 9.9e-3)
    h[0, 0] = 1.99e-2  # psi ~ 0.01 -> background-eligible
    lo = np.where(np.arange(100).reshape(10, 10) < 50, 1e-3, -1e-3)  # psi 0.5
    mid = np.full((10, 10), 2.5e-5)  # mean in the dead band
    w = adapt_weights(np.stack([lo, mid, h], axis=-1))
    ok &= list(w.alpha) == [1, 0, -1]
    # zero-spread tie: identical channels, psi in the [0.1, 0.2) overlap
    chan = np.zeros((10, 10))
    chan.ravel()[:15] = 1.0  # psi = 0.15: both ratio conditions hold
    w = adapt_weights(np.stack([chan, chan], axis=-1))
    ok &= w.sigma2 == 0.0 and list(w.alpha) == [0, 0]
    _report("decoder-rule-table (16 branch combinations, exact)", ok)


# --------------------------------------------------------------------------
# 5. parameter accounting


def test_criterion_accounting():
    def layer(m, in_separable):
        return LayerSpec(
            kernel_size=3,
            n_kernels=m,
            per_marker=1,
            pool_kind="max",
            pool_size=3,
            pool_stride=1,
            mode="separable" if in_separable else "regular",
        )

    regular = arch_params(ArchitectureSpec([layer(m, False) for m in (32, 32, 8, 8)], 3))
    separable = arch_params(ArchitectureSpec([layer(m, True) for m in (32, 32, 8, 8)], 3))
    ok = regular == 12960
    ok &= separable == 2115
    ok &= separable / regular < 1 / 5
    # known difference: the documented convention does not reproduce the
    # independently published 12.73K figure
    ok &= regular != 12730
    _report("accounting (12,960 regular / 2,115 separable, ratio < 1/5)", ok)


# --------------------------------------------------------------------------
# 6. metrics vs independently coded references


def _ref_gauss(window, sigma):
    r = window // 2
    k = [
        [math.exp(-(i * i + j * j) / (2.0 * sigma * sigma)) for j in range(-r, r + 1)]
        for i in range(-r, r + 1)
    ]
    s = sum(map(sum, k))
    return [[v / s for v in row] for row in k]


def _ref_weighted_fmeasure(sal, gt, beta=1.0, window=7, sigma=5.0):
    """Loop-based reference; shares only the EDT nearest-pixel primitive."""
    h, w = sal.shape
    n_fg = int(gt.sum())
    if n_fg == 0:
        return 1.0 if all(sal.ravel() <= 0.5) else 0.0
    err = [[abs(sal[i, j] - (1.0 if gt[i, j] else 0.0)) for j in range(w)] for i in range(h)]
    dist, (ii, jj) = ndimage.distance_transform_edt(~gt, return_indices=True)
    err_t = [
        [err[i][j] if gt[i, j] else err[ii[i, j]][jj[i, j]] for j in range(w)]
        for i in range(h)
    ]
    kern = _ref_gauss(window, sigma)
    r = window // 2
    ew = [[0.0] * w for _ in range(h)]
    for i in range(h):
        for j in range(w):
            if gt[i, j]:
                blur = 0.0
                for di in range(-r, r + 1):
                    for dj in range(-r, r + 1):
                        ni, nj = i + di, j + dj
                        if 0 <= ni < h and 0 <= nj < w:
                            blur += kern[di + r][dj + r] * err_t[ni][nj]
                ew[i][j] = min(err[i][j], blur)
            else:
                weight = 2.0 - math.exp(math.log(0.5) / sigma * dist[i, j])
                ew[i][j] = err[i][j] * weight
    fg_err = [ew[i][j] for i in range(h) for j in range(w) if gt[i, j]]
    bg_err = [ew[i][j] for i in range(h) for j in range(w) if not gt[i, j]]
    eps = np.finfo(np.float64).eps
    tpw = n_fg - sum(fg_err)
    recall = 1.0 - sum(fg_err) / n_fg
    precision = tpw / (eps + tpw + sum(bg_err))
    if recall <= 0 or precision <= 0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * precision * recall / (eps + b2 * precision + recall)


def _ref_otsu(values):
    """Exhaustive scan over all 256-bin cut edges (loop-based)."""
    vals = np.asarray(values, dtype=np.float64).ravel()
    lo, hi = float(vals.min()), float(vals.max())
    if hi <= lo:
        return lo
    edges = np.linspace(lo, hi, 257)
    bins = np.clip(np.searchsorted(edges, vals, side="right") - 1, 0, 255)
    counts = [int((bins == b).sum()) for b in range(256)]
    centers = [(edges[b] + edges[b + 1]) / 2.0 for b in range(256)]
    n = vals.size
    best_v, best_e = -math.inf, None
    for k in range(1, 256):
        w0 = sum(counts[:k])
        w1 = n - w0
        if w0 == 0 or w1 == 0:
            continue
        mu0 = math.fsum(counts[b] * centers[b] for b in range(k)) / w0
        mu1 = math.fsum(counts[b] * centers[b] for b in range(k, 256)) / w1
        v = w0 * w1 * (mu0 - mu1) ** 2
        if v > best_v:
            best_v, best_e = v, float(edges[k])
    return best_e


def test_criterion_metrics():
    rng = np.random.default_rng(14)
    gt = np.zeros((16, 16))
    gt[4:12, 4:12] = 1.0
    ok = weighted_fmeasure(gt, gt) == 1.0 and mae(gt, gt) == 0.0
    ok &= weighted_fmeasure(1.0 - gt, gt) == 0.0 and mae(1.0 - gt, gt) == 100.0
    for _ in range(50):
        sal = rng.random((16, 16))
        mask = ndimage.binary_dilation(rng.random((16, 16)) > 0.92, iterations=2)
        got = weighted_fmeasure(sal, mask.astype(float))
        want = _ref_weighted_fmeasure(sal, mask)
        ok &= abs(got - want) <= 1e-6
        ok &= abs(mae(sal, mask.astype(float)) - float(np.abs(sal - mask).mean()) * 100) <= 1e-6
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        vals = rng.choice([rng.random, lambda s: rng.integers(0, 5, s) / 4.0])(n)
        ok &= otsu(vals) == _ref_otsu(vals)
    _report("metrics (reference Fw/MAE 1e-6, Otsu vs exhaustive scan)", ok)


# --------------------------------------------------------------------------
# 7. end-to-end determinism and held-out quality


def test_criterion_end_to_end(tmp_path):
    t0 = time.time()
    root = str(tmp_path)
    synth.write_corpus(root, n=6, size=40, seed=0)
    arch = {
        "input_channels": 3,
        "layers": [
            {"kernel_size": 1, "dilations": [1], "n_kernels": 32, "per_marker": 16,
             "pool": "avg", "pool_size": 3, "pool_stride": 2, "mode": "regular"},
            {"kernel_size": 1, "dilations": [1], "n_kernels": 32, "per_marker": 16,
             "pool": "avg", "pool_size": 3, "pool_stride": 1, "mode": "regular"},
        ],
    }
    arch_path = os.path.join(root, "arch.json")
    with open(arch_path, "w") as fh:
        json.dump(arch, fh)
    paths = [os.path.join(root, f"model{k}.flim") for k in (1, 2)]
    for p in paths:
        rc = cli_main(
            ["train", "--arch", arch_path, "--images", os.path.join(root, "images"),
             "--markers", os.path.join(root, "markers"), "--out", p, "--seed", "2"]
        )
        assert rc == 0
    with open(paths[0], "rb") as fh:
        blob1 = fh.read()
    with open(paths[1], "rb") as fh:
        blob2 = fh.read()
    ok = blob1 == blob2

    model = load_model(paths[0])
    rng = np.random.default_rng(0)
    for _ in range(6):
        synth.blob_instance(rng, 40)  # skip the training draws
    scores = []
    for _ in range(6):
        img, gt, _ = synth.blob_instance(rng, 40)
        img = np.round(img * 255) / 255.0  # the same 8-bit grid as stored PNGs
        sal = saliency(model, img, sigma="stdev")
        obj, bg = estimate_seeds(sal, erosion_radius=1.0, dilation_radius=6.0)
        seg = seeded_delineation(img, obj, bg)
        scores.append(weighted_fmeasure(seg, gt[:, :, None].astype(float)))
    fbw = float(np.mean(scores))
    elapsed = time.time() - t0
    ok &= fbw >= 0.85
    ok &= elapsed < 30.0
    _report(
        f"end-to-end (byte-identical={blob1 == blob2}, held-out Fw={fbw:.3f}, "
        f"{elapsed:.1f}s)",
        ok,
    )


# --------------------------------------------------------------------------
# 8. post-processing


def _delineation_oracle(img, obj_seeds, bg_seeds):
    """Independent per-class multi-source Dijkstra; equal costs go to bg."""
    import heapq

    h, w, _ = img.shape
    neighbors = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]

    def dists(seeds):
        cost = {(i, j): math.inf for i in range(h) for j in range(w)}
        heap = []
        for s in seeds:
            cost[s] = 0.0
            heapq.heappush(heap, (0.0, s))
        while heap:
            c, (i, j) = heapq.heappop(heap)
            if c > cost[(i, j)]:
                continue
            for di, dj in neighbors:
                ni, nj = i + di, j + dj
                if 0 <= ni < h and 0 <= nj < w:
                    arc = math.sqrt(float(((img[i, j] - img[ni, nj]) ** 2).sum()))
                    if c + arc < cost[(ni, nj)]:
                        cost[(ni, nj)] = c + arc
                        heapq.heappush(heap, (c + arc, (ni, nj)))
        return cost

    d_obj, d_bg = dists(obj_seeds), dists(bg_seeds)
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            out[i, j] = 1.0 if d_obj[(i, j)] < d_bg[(i, j)] else 0.0
    return out[:, :, None]


def test_criterion_postprocessing():
    rng = np.random.default_rng(15)
    ok = True
    for _ in range(200):
        h, w = rng.integers(4, 20, size=2)
        sal = (rng.random((h, w)) > 0.5).astype(float) * rng.random((h, w))
        lo = int(rng.integers(0, 4))
        hi = int(rng.integers(lo, 30))
        once = size_filter(sal, min_area=lo, max_area=hi)
        twice = size_filter(once, min_area=lo, max_area=hi)
        ok &= bool(np.array_equal(once, twice))
    for _ in range(50):
        h, w = rng.integers(2, 9, size=2)
        img = rng.random((h, w, int(rng.integers(1, 4))))
        cells = [(i, j) for i in range(h) for j in range(w)]
        rng.shuffle(cells)
        n_obj = int(rng.integers(1, max(2, h * w // 3)))
        n_bg = int(rng.integers(1, max(2, h * w // 3)))
        obj = set(cells[:n_obj])
        bg = set(cells[n_obj:n_obj + n_bg])
        got = seeded_delineation(img, obj, bg)
        want = _delineation_oracle(img, obj, bg)
        ok &= bool(np.array_equal(got, want))
    _report("post-processing (size_filter idempotent, delineation oracle)", ok)

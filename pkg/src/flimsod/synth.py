"""Synthetic bright-blob corpus for demos, self-checks and benchmarks.

Each instance is a dark noisy background with one bright disk, plus a
scribble label image (object disk at the blob center, background stripe
along the left edge) and a ground-truth mask.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image as PILImage

from .pngio import write_gray_png


def blob_instance(rng, size: int = 40):
    """One (image, gt_mask, marker_label) triple.

    Returns the image as (h, w, 3) float in [0, 1], the ground truth as a
    boolean (h, w) mask and the markers as a uint8 label image (0
    unmarked, 1 background, 2 object).
    """
    margin = size // 3
    ci = int(rng.integers(margin, size - margin))
    cj = int(rng.integers(margin, size - margin))
    radius = int(rng.integers(size // 5, size // 4 + 1))

    yy, xx = np.mgrid[0:size, 0:size]
    mask = (yy - ci) ** 2 + (xx - cj) ** 2 <= radius**2

    # per-image color jitter keeps marker statistics broad across the corpus
    base = rng.uniform(0.1, 0.35, size=3)
    blob = rng.uniform(0.65, 0.9, size=3)
    img = np.empty((size, size, 3))
    img[:] = base
    # mild sinusoidal texture so the background is not flat
    freq = rng.uniform(0.2, 0.6)
    phase = rng.uniform(0, 2 * np.pi)
    img += 0.04 * np.sin(freq * yy + phase)[:, :, None]
    img[mask] = blob
    img += rng.normal(scale=0.05, size=img.shape)
    img = np.clip(img, 0.0, 1.0)

    label = np.zeros((size, size), dtype=np.uint8)
    inner = (yy - ci) ** 2 + (xx - cj) ** 2 <= 3**2
    label[inner] = 2
    label[:, 0] = 1  # background stripe well away from any blob center
    return img, mask, label


def write_corpus(root, n: int = 6, size: int = 40, seed: int = 0):
    """Write `n` instances under root/{images,markers,gt}; returns names."""
    rng = np.random.default_rng(seed)
    dirs = {d: os.path.join(root, d) for d in ("images", "markers", "gt")}
    for d in dirs.values():
        os.makedirs(d, exist_ok=True)
    names = []
    for k in range(n):
        name = f"blob{k:02d}.png"
        img, mask, label = blob_instance(rng, size)
        PILImage.fromarray(np.round(img * 255).astype(np.uint8)).save(
            os.path.join(dirs["images"], name)
        )
        write_gray_png(label, os.path.join(dirs["markers"], name))
        write_gray_png(mask.astype(np.uint8) * 255, os.path.join(dirs["gt"], name))
        names.append(name)
    return names

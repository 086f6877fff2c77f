"""Factorization of a regular kernel bank into depthwise + pointwise form.

The depthwise kernel is the bank's mean kernel; pointwise weights come
from channel statistics of the bank (channel importance times the mean
coefficient of each kernel's channel slice).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import imgcore
from .encoder import KernelBank, _dilated_windows
from .imgcore import as_image

BETA_TOLERANCE = 1e-12


@dataclass
class SeparableLayer:
    depthwise: np.ndarray  # (a, a, f)
    pointwise: np.ndarray  # (m, f)
    counts: np.ndarray  # (m,)

    def __post_init__(self):
        self.depthwise = np.asarray(self.depthwise, dtype=np.float64)
        self.pointwise = np.asarray(self.pointwise, dtype=np.float64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.depthwise.ndim != 3:
            raise ValueError("depthwise kernel must be (a, a, f)")
        if self.pointwise.ndim != 2 or self.pointwise.shape[1] != self.depthwise.shape[2]:
            raise ValueError("pointwise must be (m, f) matching depthwise channels")
        if self.counts.shape != (self.pointwise.shape[0],):
            raise ValueError("one count per pointwise kernel required")

    @property
    def m(self) -> int:
        return self.pointwise.shape[0]

    @property
    def size(self) -> int:
        return self.depthwise.shape[0]

    @property
    def channels(self) -> int:
        return self.depthwise.shape[2]


def mean_kernel(bank: KernelBank) -> np.ndarray:
    """Elementwise mean over the bank's kernels (the depthwise kernel)."""
    if bank.m < 1:
        raise ValueError("empty kernel bank")
    return bank.kernels.mean(axis=0)


def channel_statistics(bank: KernelBank, sigma: str = "variance"):
    """Per-channel mean, spread and importance over all bank coefficients.

    `sigma` selects between the mean squared deviation ("variance") and
    its square root ("stdev") as the spread measure.
    """
    if sigma not in ("variance", "stdev"):
        raise ValueError(f"unknown sigma mode {sigma!r}")
    k = bank.kernels  # (m, a, a, f)
    mu = k.mean(axis=(0, 1, 2))  # (f,)
    spread = ((k - mu) ** 2).mean(axis=(0, 1, 2))
    if sigma == "stdev":
        spread = np.sqrt(spread)
    beta = mu.sum()
    if abs(beta) < BETA_TOLERANCE:
        raise ValueError("degenerate channel means (beta ~ 0)")
    omega = mu * spread / beta
    return mu, spread, beta, omega


def factorize(bank: KernelBank, sigma: str = "variance") -> SeparableLayer:
    """Mean-kernel depthwise + channel-importance pointwise factorization."""
    depthwise = mean_kernel(bank)
    _, _, _, omega = channel_statistics(bank, sigma)
    a2 = bank.size**2
    # per kernel c and channel b: (omega_b / a^2) * sum_ij k_c[i, j, b]
    sums = bank.kernels.sum(axis=(1, 2))  # (m, f)
    pointwise = sums * (omega / a2)[None, :]
    return SeparableLayer(depthwise, pointwise, bank.counts.copy())


def depthwise_convolve(img: np.ndarray, depthwise: np.ndarray, dilations=(1,)) -> np.ndarray:
    """Per-channel spatial convolution, summed over dilation factors."""
    img = as_image(img)
    a = depthwise.shape[0]
    out = None
    for d in dilations:
        win = _dilated_windows(img, a, d)  # (h, w, f, x, y)
        y = np.einsum("hwfxy,xyf->hwf", win, depthwise, optimize=True)
        out = y if out is None else out + y
    return out


def pointwise_combine(feat: np.ndarray, pointwise: np.ndarray) -> np.ndarray:
    """Channel mixing: out[..., c] = sum_b feat[..., b] * pointwise[c, b]."""
    return np.einsum("hwf,mf->hwm", feat, pointwise, optimize=True)


def convolve_separable(img: np.ndarray, layer: SeparableLayer, dilations=(1,)) -> np.ndarray:
    img = as_image(img)
    if img.shape[2] != layer.channels:
        raise imgcore.ChannelMismatchError(
            f"image has {img.shape[2]} channels, layer expects {layer.channels}"
        )
    return pointwise_combine(depthwise_convolve(img, layer.depthwise, dilations), layer.pointwise)

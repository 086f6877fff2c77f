"""Adaptive pointwise decoder.

For each image, every channel of a layer output is classified as
foreground (+1), background (-1) or discarded (0) from the distribution
of channel means, its Otsu threshold and a per-channel foreground ratio.
The saliency map is the rectified, min-max normalized weighted channel
sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import imgcore
from .imgcore import as_image
from .numerics import otsu

PSI_FOREGROUND_MIN = 0.1
PSI_BACKGROUND_MAX = 0.2


@dataclass
class DecoderWeights:
    alpha: np.ndarray  # (m,) values in {-1, 0, +1}
    tau: float
    sigma2: float
    psi: np.ndarray  # (m,) in [0, 1]

    def to_json(self) -> dict:
        return {
            "alpha": [int(a) for a in self.alpha],
            "tau": float(self.tau),
            "sigma2": float(self.sigma2),
            "psi": [float(p) for p in self.psi],
        }


def channel_polarity(mean_low: bool, mean_high: bool,
                     psi_above_min: bool, psi_below_max: bool) -> int:
    """Branch rule mapping the four channel conditions to {-1, 0, +1}.

    foreground needs a low mean and enough foreground ratio; background a
    high mean and a small ratio; both at once (zero spread) discards.
    """
    is_fg = mean_low and psi_above_min
    is_bg = mean_high and psi_below_max
    if is_fg and is_bg:
        return 0
    if is_fg:
        return 1
    if is_bg:
        return -1
    return 0


def adapt_weights(feat: np.ndarray, sigma: str = "variance") -> DecoderWeights:
    """Estimate channel polarities from the channel-mean distribution.

    A channel is foreground when its mean is at least sigma^2 below the
    Otsu threshold of the mean distribution and enough of it binarizes to
    foreground; background when the mean is high and the foreground ratio
    small.  When both mean conditions hold at once (zero spread) the
    channel is discarded.
    """
    if sigma not in ("variance", "stdev"):
        raise ValueError(f"unknown sigma mode {sigma!r}")
    feat = as_image(feat)
    m = feat.shape[2]
    if m < 2:
        raise ValueError("decoder needs multiple channels")
    mu = feat.mean(axis=(0, 1))  # (m,)
    tau = otsu(mu)
    margin = float(mu.var()) if sigma == "variance" else float(mu.std())
    psi = np.empty(m)
    for b in range(m):
        chan = feat[:, :, b]
        t = otsu(chan)
        psi[b] = float((chan > t).mean())
    alpha = np.array(
        [
            channel_polarity(
                mu[b] <= tau - margin,
                mu[b] >= tau + margin,
                psi[b] > PSI_FOREGROUND_MIN,
                psi[b] < PSI_BACKGROUND_MAX,
            )
            for b in range(m)
        ],
        dtype=np.int64,
    )
    return DecoderWeights(alpha, float(tau), margin, psi)


def decode(feat: np.ndarray, w: DecoderWeights) -> np.ndarray:
    """S = minmax(ReLU(sum_b alpha_b * feat_b)) as a single-channel image."""
    feat = as_image(feat)
    if feat.shape[2] != w.alpha.shape[0]:
        raise imgcore.ChannelMismatchError(
            f"feature has {feat.shape[2]} channels, weights have {w.alpha.shape[0]}"
        )
    s = np.maximum((feat * w.alpha[None, None, :]).sum(axis=2), 0.0)
    smin, smax = s.min(), s.max()
    if smax > smin:
        s = (s - smin) / (smax - smin)
    elif smax > 0.0:
        s = np.ones_like(s)
    return s[:, :, None]


def saliency(model, img: np.ndarray, layer_index: int = -1,
             sigma: str = "variance") -> np.ndarray:
    """Full forward pass: encode to `layer_index`, adapt, decode, upsample."""
    from .encoder import run_layer

    img = as_image(img)
    n = len(model.layers)
    if layer_index < 0:
        layer_index += n
    if not (0 <= layer_index < n):
        raise ValueError(f"layer index {layer_index} out of range")
    feat = img
    for layer in model.layers[: layer_index + 1]:
        feat = run_layer(feat, layer)
    w = adapt_weights(feat, sigma=sigma)
    s = decode(feat, w)
    return imgcore.upsample_bilinear(s, img.shape[0], img.shape[1])

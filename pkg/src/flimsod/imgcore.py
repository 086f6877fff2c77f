"""Dense image tensors, adjacencies, patches, markers and layer plumbing.

Images are plain ``float64`` numpy arrays of shape ``(h, w, f)``.  All
operations here are pure functions; nothing mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OBJECT = "object"
BACKGROUND = "background"

# marker PNG pixel codes
MARKER_UNMARKED = 0
MARKER_BACKGROUND = 1
MARKER_OBJECT = 2


class BoundsError(ValueError):
    pass


class ChannelMismatchError(ValueError):
    pass


def as_image(arr) -> np.ndarray:
    """Coerce to an (h, w, f) float64 image. 2D input becomes single-channel."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[0] < 1 or a.shape[1] < 1 or a.shape[2] < 1:
        raise ValueError(f"expected (h, w, f) image, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Adjacency:
    """Square displacement neighborhood of odd side `size`, scaled by `dilation`.

    Displacements are enumerated in fixed row-major order over
    {-size//2 .. size//2}^2 so downstream consumers are deterministic.
    """

    size: int
    dilation: int = 1
    displacements: tuple = field(init=False)

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError("adjacency size must be odd and >= 1")
        if self.dilation < 1:
            raise ValueError("dilation must be >= 1")
        r = self.size // 2
        disp = tuple(
            (dx * self.dilation, dy * self.dilation)
            for dx in range(-r, r + 1)
            for dy in range(-r, r + 1)
        )
        object.__setattr__(self, "displacements", disp)


@dataclass
class Marker:
    """One connected scribble component."""

    pixels: frozenset  # of (i, j)
    cls: str  # OBJECT or BACKGROUND
    id: int


@dataclass
class MarkerSet:
    image_id: str
    markers: list  # of Marker

    def all_pixels(self):
        for m in self.markers:
            yield from m.pixels


@dataclass
class NormalizationStats:
    mean: np.ndarray  # (f,)
    stdev: np.ndarray  # (f,)
    epsilon: float = 1e-6


def extract_patch(img: np.ndarray, center, adj: Adjacency) -> np.ndarray:
    """Patch of shape (a, a, f) around `center`; out-of-bounds filled with zeros."""
    img = as_image(img)
    h, w, f = img.shape
    i, j = center
    if not (0 <= i < h and 0 <= j < w):
        raise BoundsError(f"patch center {center} outside {h}x{w} image")
    a = adj.size
    patch = np.zeros((a, a, f), dtype=np.float64)
    r = a // 2
    for x in range(a):
        for y in range(a):
            ni = i + (x - r) * adj.dilation
            nj = j + (y - r) * adj.dilation
            if 0 <= ni < h and 0 <= nj < w:
                patch[x, y, :] = img[ni, nj, :]
    return patch


def marker_normalization_stats(imgs, marker_sets) -> NormalizationStats:
    """Per-channel mean/stdev over the union of marker pixels of all images.

    Population standard deviation; unmarked pixels never contribute.
    """
    values = []
    for img, ms in zip(imgs, marker_sets):
        img = as_image(img)
        for i, j in ms.all_pixels():
            values.append(img[i, j, :])
    if not values:
        raise ValueError("no marker pixels")
    stacked = np.stack(values)
    return NormalizationStats(
        mean=stacked.mean(axis=0), stdev=stacked.std(axis=0)
    )


def normalize(img: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    img = as_image(img)
    if img.shape[2] != stats.mean.shape[0]:
        raise ChannelMismatchError(
            f"image has {img.shape[2]} channels, stats have {stats.mean.shape[0]}"
        )
    return (img - stats.mean) / (stats.stdev + stats.epsilon)


def relu(img: np.ndarray) -> np.ndarray:
    return np.maximum(as_image(img), 0.0)


def pool(img: np.ndarray, kind: str, size: int, stride: int = 1) -> np.ndarray:
    """Centered max/avg pooling over zero-padded size x size windows.

    Output dims are ceil(h/stride) x ceil(w/stride); the window for output
    pixel (i', j') is centered at input pixel (i'*stride, j'*stride).
    """
    if kind not in ("max", "avg"):
        raise ValueError(f"unknown pooling kind {kind!r}")
    if size < 1 or size % 2 == 0:
        raise ValueError("pooling size must be odd")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    img = as_image(img)
    if size == 1 and stride == 1:
        return img.copy()
    r = size // 2
    padded = np.pad(img, ((r, r), (r, r), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(padded, (size, size), axis=(0, 1))
    win = win[::stride, ::stride]  # (h', w', f, size, size)
    if kind == "max":
        return win.max(axis=(3, 4))
    return win.mean(axis=(3, 4))


def upsample_bilinear(img: np.ndarray, h: int, w: int) -> np.ndarray:
    """Channelwise bilinear resampling, half-pixel centers (no corner alignment)."""
    img = as_image(img)
    h0, w0, _ = img.shape
    if h < 1 or w < 1:
        raise ValueError("target dims must be >= 1")
    if (h0, w0) == (h, w):
        return img.copy()

    def _coords(n_out, n_in):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = src - lo
        return lo, hi, frac

    i0, i1, fi = _coords(h, h0)
    j0, j1, fj = _coords(w, w0)
    top = img[i0][:, j0] * (1 - fj)[None, :, None] + img[i0][:, j1] * fj[None, :, None]
    bot = img[i1][:, j0] * (1 - fj)[None, :, None] + img[i1][:, j1] * fj[None, :, None]
    return top * (1 - fi)[:, None, None] + bot * fi[:, None, None]


def project_markers(markers: MarkerSet, total_stride: int) -> MarkerSet:
    """Map marker pixels to the next layer's grid by floor division."""
    if total_stride < 1:
        raise ValueError("total_stride must be >= 1")
    if total_stride == 1:
        return MarkerSet(markers.image_id, [Marker(m.pixels, m.cls, m.id) for m in markers.markers])
    out = []
    for m in markers.markers:
        projected = frozenset((i // total_stride, j // total_stride) for i, j in m.pixels)
        if projected:
            out.append(Marker(projected, m.cls, m.id))
    return MarkerSet(markers.image_id, out)


def markers_from_label_image(label: np.ndarray, image_id: str = "") -> MarkerSet:
    """Decode a marker raster (0 unmarked / 1 background / 2 object).

    Each 4-connected component of equal nonzero value becomes one Marker.
    """
    from scipy import ndimage

    label = np.asarray(label)
    if label.ndim == 3:
        label = label[:, :, 0]
    markers = []
    next_id = 1
    four = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    for value, cls in ((MARKER_BACKGROUND, BACKGROUND), (MARKER_OBJECT, OBJECT)):
        comp, n = ndimage.label(label == value, structure=four)
        for c in range(1, n + 1):
            ii, jj = np.nonzero(comp == c)
            markers.append(
                Marker(frozenset(zip(ii.tolist(), jj.tolist())), cls, next_id)
            )
            next_id += 1
    return MarkerSet(image_id, markers)


def markers_to_label_image(ms: MarkerSet, h: int, w: int) -> np.ndarray:
    out = np.zeros((h, w), dtype=np.uint8)
    for m in ms.markers:
        code = MARKER_OBJECT if m.cls == OBJECT else MARKER_BACKGROUND
        for i, j in m.pixels:
            out[i, j] = code
    return out

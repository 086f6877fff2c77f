"""Marker-driven kernel estimation, multi-dilation convolution and layer
execution, plus parameter/FLOP accounting.

A kernel bank is an ``(m, a, a, f)`` array with per-kernel representation
counts.  Kernels are snapped to actual candidate patches, so every kernel
in a freshly estimated bank is an image patch observed under a marker.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import imgcore
from .imgcore import Adjacency, MarkerSet, NormalizationStats, as_image
from .numerics import kmeans

log = logging.getLogger(__name__)


@dataclass
class KernelBank:
    kernels: np.ndarray  # (m, a, a, f)
    counts: np.ndarray  # (m,) positive ints

    def __post_init__(self):
        self.kernels = np.asarray(self.kernels, dtype=np.float64)
        if self.kernels.ndim != 4:
            raise ValueError("kernel bank must be (m, a, a, f)")
        if self.kernels.shape[0] < 1:
            raise ValueError("kernel bank must contain at least one kernel")
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (self.kernels.shape[0],):
            raise ValueError("one count per kernel required")
        if (self.counts < 1).any():
            raise ValueError("counts must be positive")

    @property
    def m(self) -> int:
        return self.kernels.shape[0]

    @property
    def size(self) -> int:
        return self.kernels.shape[1]

    @property
    def channels(self) -> int:
        return self.kernels.shape[3]


@dataclass
class LayerSpec:
    kernel_size: int = 3
    dilations: tuple = (1,)
    n_kernels: int = 8
    per_marker: int = 4
    pool_kind: str = "max"
    pool_size: int = 3
    pool_stride: int = 1
    mode: str = "regular"  # or "separable"

    def __post_init__(self):
        self.dilations = tuple(int(d) for d in self.dilations)
        if not self.dilations or any(d < 1 for d in self.dilations):
            raise ValueError("dilations must be non-empty, all >= 1")
        if list(self.dilations) != sorted(set(self.dilations)):
            raise ValueError("dilations must be strictly increasing")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel size must be odd")
        if self.n_kernels < 1 or self.per_marker < 1:
            raise ValueError("kernel counts must be >= 1")
        if self.mode not in ("regular", "separable"):
            raise ValueError(f"unknown layer mode {self.mode!r}")

    def to_json(self) -> dict:
        return {
            "kernel_size": self.kernel_size,
            "dilations": list(self.dilations),
            "n_kernels": self.n_kernels,
            "per_marker": self.per_marker,
            "pool": self.pool_kind,
            "pool_size": self.pool_size,
            "pool_stride": self.pool_stride,
            "mode": self.mode,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LayerSpec":
        return cls(
            kernel_size=int(obj.get("kernel_size", 3)),
            dilations=tuple(obj.get("dilations", [1])),
            n_kernels=int(obj.get("n_kernels", 8)),
            per_marker=int(obj.get("per_marker", 4)),
            pool_kind=obj.get("pool", "max"),
            pool_size=int(obj.get("pool_size", 3)),
            pool_stride=int(obj.get("pool_stride", 1)),
            mode=obj.get("mode", "regular"),
        )


@dataclass
class ArchitectureSpec:
    layers: list  # of LayerSpec
    input_channels: int

    def __post_init__(self):
        if not self.layers:
            raise ValueError("architecture needs at least one layer")

    def to_json(self) -> dict:
        return {
            "input_channels": self.input_channels,
            "layers": [l.to_json() for l in self.layers],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ArchitectureSpec":
        return cls(
            layers=[LayerSpec.from_json(l) for l in obj["layers"]],
            input_channels=int(obj["input_channels"]),
        )

    @classmethod
    def load(cls, path) -> "ArchitectureSpec":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass
class TrainedLayer:
    spec: LayerSpec
    norm: NormalizationStats
    bank: KernelBank
    separable: object = None  # SeparableLayer when spec.mode == "separable"


@dataclass
class FlimModel:
    arch: ArchitectureSpec
    layers: list = field(default_factory=list)  # of TrainedLayer
    seed: int = 0
    provenance: dict = field(default_factory=dict)


def _marker_patches(img, markers: MarkerSet, a: int):
    """Per-marker candidate patch matrices, flattened row-major (a, a, f)."""
    adj = Adjacency(a, 1)
    out = []
    for m in markers.markers:
        pix = sorted(m.pixels)
        patches = [imgcore.extract_patch(img, p, adj).ravel() for p in pix]
        out.append(np.stack(patches))
    return out


def estimate_kernels(imgs, marker_sets, spec: LayerSpec, seed: int) -> KernelBank:
    """Two-stage clustering of marker-centered patches into a kernel bank.

    Each marker is reduced to at most `per_marker` representatives; the
    union of representatives is clustered down to `n_kernels`.  Every
    returned kernel is snapped to its nearest candidate patch, so the
    bank is a subset of the observed patches.
    """
    a = spec.kernel_size
    f = as_image(imgs[0]).shape[2]
    candidates = []
    marker_ordinal = 0
    for img, ms in zip(imgs, marker_sets):
        for patches in _marker_patches(img, ms, a):
            k = min(spec.per_marker, patches.shape[0])
            sub_seed = int(
                np.random.SeedSequence([seed, marker_ordinal]).generate_state(1)[0]
            )
            res = kmeans(patches, k, seed=sub_seed)
            # snap each per-marker center to the closest actual patch
            for center in res.centers:
                idx = int(np.argmin(((patches - center) ** 2).sum(axis=1)))
                candidates.append(patches[idx])
            marker_ordinal += 1
    if not candidates:
        raise ValueError("no marker pixels")
    union = np.stack(candidates)
    m = min(spec.n_kernels, union.shape[0])
    if m < spec.n_kernels:
        log.warning(
            "requested %d kernels but only %d candidates available",
            spec.n_kernels,
            union.shape[0],
        )
    final_seed = int(np.random.SeedSequence([seed, 0x5EED]).generate_state(1)[0])
    res = kmeans(union, m, seed=final_seed)
    kernels = []
    for center in res.centers:
        idx = int(np.argmin(((union - center) ** 2).sum(axis=1)))
        kernels.append(union[idx].reshape(a, a, f))
    bank = np.stack(kernels)
    return KernelBank(bank, np.ones(bank.shape[0], dtype=np.int64))


def _dilated_windows(img: np.ndarray, a: int, d: int) -> np.ndarray:
    """(h, w, f, a, a) view of zero-padded dilated patches around each pixel."""
    r = (a // 2) * d
    padded = np.pad(img, ((r, r), (r, r), (0, 0)))
    eff = (a - 1) * d + 1
    win = np.lib.stride_tricks.sliding_window_view(padded, (eff, eff), axis=(0, 1))
    return win[:, :, :, ::d, ::d]


def convolve(img: np.ndarray, bank: KernelBank, dilations=(1,)) -> np.ndarray:
    """Multi-dilation convolution: outputs summed over dilation factors.

    With a single dilation this is the regular convolution; coefficients
    are shared across dilation factors.
    """
    img = as_image(img)
    if img.shape[2] != bank.channels:
        raise imgcore.ChannelMismatchError(
            f"image has {img.shape[2]} channels, bank expects {bank.channels}"
        )
    a = bank.size
    out = None
    for d in dilations:
        win = _dilated_windows(img, a, d)
        # win: (h, w, f, x, y); kernels: (m, x, y, f)
        y = np.einsum("hwfxy,mxyf->hwm", win, bank.kernels, optimize=True)
        out = y if out is None else out + y
    return out


def run_layer(img: np.ndarray, layer: TrainedLayer) -> np.ndarray:
    """normalize -> convolve (regular or separable) -> relu -> pool."""
    from .separable import convolve_separable

    x = imgcore.normalize(img, layer.norm)
    if layer.spec.mode == "separable":
        if layer.separable is None:
            raise ValueError("separable layer has no factorized kernels")
        y = convolve_separable(x, layer.separable, layer.spec.dilations)
    else:
        y = convolve(x, layer.bank, layer.spec.dilations)
    y = imgcore.relu(y)
    return imgcore.pool(y, layer.spec.pool_kind, layer.spec.pool_size, layer.spec.pool_stride)


def _train_single_layer(feats, marker_sets, spec: LayerSpec, seed: int, layer_index: int,
                        simplify_n: int = 0) -> TrainedLayer:
    from .separable import factorize
    from .simplify import simplify_layer

    layer_seed = int(np.random.SeedSequence([seed, layer_index]).generate_state(1)[0])
    norm = imgcore.marker_normalization_stats(feats, marker_sets)
    normed = [imgcore.normalize(f, norm) for f in feats]
    bank = estimate_kernels(normed, marker_sets, spec, layer_seed)
    if simplify_n > 0:
        bank, _ = simplify_layer(bank, simplify_n)
    sep = factorize(bank) if spec.mode == "separable" else None
    return TrainedLayer(spec, norm, bank, sep)


def train_encoder(imgs, marker_sets, arch: ArchitectureSpec, seed: int,
                  simplify_each_layer: int = 0, start_layer: int = 0,
                  model: FlimModel = None) -> FlimModel:
    """Layer-by-layer training: stats -> kernels -> execute -> project markers.

    `start_layer`/`model` allow retraining only a suffix of the layers
    (used after simplification); layers below `start_layer` are reused.
    """
    imgs = [as_image(im) for im in imgs]
    if model is None:
        model = FlimModel(arch=arch, seed=seed)
    feats = list(imgs)
    markers = list(marker_sets)
    model.layers = model.layers[:start_layer]
    for li, spec in enumerate(arch.layers):
        if li < start_layer:
            layer = model.layers[li]
        else:
            try:
                layer = _train_single_layer(
                    feats, markers, spec, seed, li, simplify_each_layer
                )
            except Exception as exc:
                raise RuntimeError(f"training failed at layer {li}: {exc}") from exc
            model.layers.append(layer)
        feats = [run_layer(f, layer) for f in feats]
        if spec.pool_stride > 1:
            markers = [imgcore.project_markers(ms, spec.pool_stride) for ms in markers]
    return model


def count_params(layers) -> int:
    """a^2*f_in*m per regular layer; a^2*f_in + m*f_in per separable layer.

    Normalization statistics are not counted.
    """
    total = 0
    for layer in layers:
        spec = layer.spec
        f_in = layer.bank.channels
        a2 = spec.kernel_size**2
        m = layer.bank.m
        if spec.mode == "separable":
            total += a2 * f_in + m * f_in
        else:
            total += a2 * f_in * m
    return total


def arch_params(arch: ArchitectureSpec) -> int:
    """Parameter count straight from an architecture (no trained model)."""
    total = 0
    f_in = arch.input_channels
    for spec in arch.layers:
        a2 = spec.kernel_size**2
        if spec.mode == "separable":
            total += a2 * f_in + spec.n_kernels * f_in
        else:
            total += a2 * f_in * spec.n_kernels
        f_in = spec.n_kernels
    return total


def count_flops(layers, input_dims, dilations_applied: bool = True) -> int:
    """FLOPs for one forward pass at the given spatial input dims.

    Convolution: 2 ops per multiply-add.  Pooling counts one op per window
    element, ReLU one per element.
    """
    h, w = input_dims
    total = 0
    for layer in layers:
        spec = layer.spec
        f_in = layer.bank.channels
        m = layer.bank.m
        a2 = spec.kernel_size**2
        nd = len(spec.dilations) if dilations_applied else 1
        if spec.mode == "separable":
            total += h * w * f_in * 2 * a2 * nd  # depthwise
            total += h * w * m * 2 * f_in * nd  # pointwise
        else:
            total += h * w * m * nd * 2 * a2 * f_in
        total += h * w * m  # relu
        h2 = -(-h // spec.pool_stride)
        w2 = -(-w // spec.pool_stride)
        total += h2 * w2 * m * spec.pool_size**2  # pooling
        h, w = h2, w2
    return total

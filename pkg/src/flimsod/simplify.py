"""Iterative removal of redundant kernels with magnitude compensation.

A kernel with below-average uniqueness is removed when its nearest
neighbor is still present; the neighbor inherits its representation
count.  After each pass the surviving kernels are scaled by their counts
(magnitude baked in) so downstream convolution needs no extra weighting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import FlimModel, KernelBank, train_encoder


@dataclass
class SimplifyReport:
    iterations: int = 0
    removed_per_iteration: list = field(default_factory=list)
    final_m: int = 0
    uniqueness_mean_trace: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "iterations": self.iterations,
            "removed_per_iteration": self.removed_per_iteration,
            "final_m": self.final_m,
            "uniqueness_mean_trace": self.uniqueness_mean_trace,
        }


def _pairwise_sq(flat: np.ndarray) -> np.ndarray:
    diff = flat[:, None, :] - flat[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def uniqueness(bank: KernelBank) -> np.ndarray:
    """Mean squared distance of each kernel to all bank members (self included)."""
    flat = bank.kernels.reshape(bank.m, -1)
    return _pairwise_sq(flat).sum(axis=1) / bank.m


def _simplify_pass(kernels: np.ndarray, counts: np.ndarray):
    """One removal pass, counts NOT yet baked into magnitudes.

    Kernels with uniqueness strictly below the mean are removable; each
    is dropped only if its nearest neighbor (ties broken by lowest index)
    is still present, transferring its count to the neighbor.
    """
    m = kernels.shape[0]
    if m < 2:
        return kernels, counts, 0, 0.0
    flat = kernels.reshape(m, -1)
    d2 = _pairwise_sq(flat)
    ups = d2.sum(axis=1) / m
    mean_up = ups.mean()
    d2_nn = d2 + np.where(np.eye(m, dtype=bool), np.inf, 0.0)
    nearest = np.argmin(d2_nn, axis=1)  # argmin takes the lowest index on ties
    removable = ups < mean_up
    alive = np.ones(m, dtype=bool)
    counts = counts.copy()
    removed = 0
    for i in range(m):
        if removable[i] and alive[nearest[i]]:
            alive[i] = False
            counts[nearest[i]] += counts[i]
            removed += 1
    return kernels[alive], counts[alive], removed, float(mean_up)


def simplify_layer(bank: KernelBank, n: int) -> tuple:
    """Run `n` removal passes over the bank; returns (bank, report).

    After every pass the surviving kernels are scaled by their counts and
    the counts reset to one (magnitude baked in).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    kernels = bank.kernels.copy()
    counts = bank.counts.copy()
    report = SimplifyReport(iterations=n)
    for _ in range(n):
        kernels, counts, removed, mean_up = _simplify_pass(kernels, counts)
        report.removed_per_iteration.append(removed)
        report.uniqueness_mean_trace.append(mean_up)
        kernels = kernels * counts[:, None, None, None]
        counts = np.ones(kernels.shape[0], dtype=np.int64)
    report.final_m = kernels.shape[0]
    return KernelBank(kernels, counts), report


def simplify_network(model: FlimModel, layer_index: int, n: int,
                     imgs=None, marker_sets=None) -> tuple:
    """Simplify one layer's bank and retrain all subsequent layers.

    `imgs`/`marker_sets` are the original training context; they are only
    optional when the simplified layer is the last one.
    """
    from .separable import factorize

    if not (0 <= layer_index < len(model.layers)):
        raise ValueError(f"layer index {layer_index} out of range")
    layer = model.layers[layer_index]
    new_bank, report = simplify_layer(layer.bank, n)
    layer.bank = new_bank
    if layer.spec.mode == "separable":
        layer.separable = factorize(new_bank)
    has_downstream = layer_index + 1 < len(model.layers)
    if has_downstream:
        if imgs is None or marker_sets is None:
            raise ValueError("missing training context for downstream retraining")
        model = train_encoder(
            imgs, marker_sets, model.arch, model.seed,
            start_layer=layer_index + 1, model=model,
        )
    return model, report

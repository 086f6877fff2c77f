#!/usr/bin/env python3
"""Parameter/FLOP accounting and simplification sweep.

Compares regular vs depthwise-separable variants of a reference
4-layer architecture and reports how iterative kernel-bank
simplification shrinks a trained model.

Usage: python scripts/benchmark_separable.py [--seed N]
"""

import argparse

import numpy as np

from flimsod import synth
from flimsod.encoder import (
    ArchitectureSpec,
    LayerSpec,
    arch_params,
    count_flops,
    train_encoder,
)
from flimsod.imgcore import markers_from_label_image
from flimsod.simplify import simplify_layer


def reference_arch(mode: str) -> ArchitectureSpec:
    pools = [("max", 5, 1), ("avg", 5, 1), ("max", 7, 1), ("max", 5, 1)]
    widths = [32, 32, 8, 8]
    dil = [(1,), (1,), (1,), (7,)]
    layers = [
        LayerSpec(kernel_size=3, n_kernels=m, per_marker=4, pool_kind=p,
                  pool_size=s, pool_stride=st, mode=mode, dilations=d)
        for m, (p, s, st), d in zip(widths, pools, dil)
    ]
    return ArchitectureSpec(layers, input_channels=3)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    regular = reference_arch("regular")
    separable = reference_arch("separable")
    pr, ps = arch_params(regular), arch_params(separable)
    print("reference 4-layer architecture (3x3 kernels, widths 32/32/8/8):")
    print(f"  regular params:   {pr:>8,}")
    print(f"  separable params: {ps:>8,}  ({pr / ps:.1f}x fewer)")

    rng = np.random.default_rng(args.seed)
    train = [synth.blob_instance(rng, 40) for _ in range(4)]
    arch = ArchitectureSpec(
        [LayerSpec(kernel_size=3, n_kernels=16, per_marker=8,
                   pool_kind="avg", pool_size=3, pool_stride=2)],
        input_channels=3,
    )
    model = train_encoder(
        [t[0] for t in train],
        [markers_from_label_image(t[2], image_id=str(i)) for i, t in enumerate(train)],
        arch,
        seed=args.seed,
    )
    bank = model.layers[0].bank
    print(f"\nsimplification sweep on a trained 16-kernel layer "
          f"({count_flops(model.layers, (40, 40)):,} FLOPs @40x40):")
    for n in range(1, 5):
        out, report = simplify_layer(bank, n)
        print(f"  {n} pass(es): {bank.m} -> {out.m} kernels "
              f"(removed per pass: {report.removed_per_iteration})")


if __name__ == "__main__":
    main()

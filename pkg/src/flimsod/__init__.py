"""Backpropagation-free salient object detection (FLIM-style networks).

Kernels are estimated from user-drawn markers, convolutions can be
regular, separable and/or multi-dilation, layers can be simplified by
redundancy removal, and saliency is produced by a per-image adaptive
pointwise decoder.
"""

__version__ = "0.1.0"

"""Single-file model container: JSON header + float32 weight blob.

Layout: magic ``FLIM1``, uint32 little-endian header length, UTF-8 JSON
header, then one length-prefixed little-endian float32 blob per tensor in
the order the header declares them.  Save/load/save round-trips are
byte-identical.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .encoder import ArchitectureSpec, FlimModel, KernelBank, LayerSpec, TrainedLayer
from .imgcore import NormalizationStats
from .separable import SeparableLayer

MAGIC = b"FLIM1"
VERSION_MAJOR = 1
VERSION_MINOR = 0


class ModelFormatError(ValueError):
    """Typed container error; `code` is one of bad-magic, bad-version,
    truncated, invariant."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def _layer_tensors(layer: TrainedLayer):
    tensors = [
        ("norm_mean", layer.norm.mean),
        ("norm_stdev", layer.norm.stdev),
        ("kernels", layer.bank.kernels),
    ]
    if layer.separable is not None:
        tensors.append(("depthwise", layer.separable.depthwise))
        tensors.append(("pointwise", layer.separable.pointwise))
    return tensors


def model_to_bytes(model: FlimModel) -> bytes:
    layers_meta = []
    blobs = []
    for layer in model.layers:
        tensors = _layer_tensors(layer)
        meta = {
            "spec": layer.spec.to_json(),
            "epsilon": layer.norm.epsilon,
            "counts": [int(c) for c in layer.bank.counts],
            "tensors": [{"name": n, "shape": list(t.shape)} for n, t in tensors],
        }
        if layer.separable is not None:
            meta["separable_counts"] = [int(c) for c in layer.separable.counts]
        layers_meta.append(meta)
        blobs.extend(t for _, t in tensors)
    header = {
        "version": {"major": VERSION_MAJOR, "minor": VERSION_MINOR},
        "seed": model.seed,
        "provenance": model.provenance,
        "arch": model.arch.to_json(),
        "layers": layers_meta,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    out = bytearray(MAGIC)
    out += struct.pack("<I", len(header_bytes))
    out += header_bytes
    for t in blobs:
        data = np.ascontiguousarray(t, dtype="<f4").tobytes()
        out += struct.pack("<I", len(data))
        out += data
    return bytes(out)


def model_from_bytes(data: bytes) -> FlimModel:
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise ModelFormatError("bad-magic", "not a model file")
    pos = len(MAGIC)
    (hlen,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if pos + hlen > len(data):
        raise ModelFormatError("truncated", "header extends past end of file")
    try:
        header = json.loads(data[pos : pos + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError("invariant", f"unreadable header: {exc}") from exc
    pos += hlen
    if not isinstance(header, dict) or "version" not in header:
        raise ModelFormatError("invariant", "header missing version")
    if header["version"].get("major") != VERSION_MAJOR:
        raise ModelFormatError(
            "bad-version", f"unsupported major version {header['version']}"
        )

    def read_tensor(shape):
        nonlocal pos
        if pos + 4 > len(data):
            raise ModelFormatError("truncated", "missing tensor length prefix")
        (blen,) = struct.unpack_from("<I", data, pos)
        pos += 4
        expected = int(np.prod(shape)) * 4
        if blen != expected:
            raise ModelFormatError(
                "invariant", f"tensor length {blen} != expected {expected}"
            )
        if pos + blen > len(data):
            raise ModelFormatError("truncated", "tensor data cut short")
        arr = np.frombuffer(data, dtype="<f4", count=expected // 4, offset=pos)
        pos += blen
        return arr.astype(np.float64).reshape(shape)

    try:
        arch = ArchitectureSpec.from_json(header["arch"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError("invariant", f"bad architecture: {exc}") from exc

    layers = []
    for li, meta in enumerate(header.get("layers", [])):
        try:
            spec = LayerSpec.from_json(meta["spec"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError("invariant", f"layer {li}: bad spec: {exc}") from exc
        tensors = {}
        for tmeta in meta["tensors"]:
            tensors[tmeta["name"]] = read_tensor(tuple(tmeta["shape"]))
        for required in ("norm_mean", "norm_stdev", "kernels"):
            if required not in tensors:
                raise ModelFormatError("invariant", f"layer {li}: missing {required}")
        kernels = tensors["kernels"]
        if kernels.ndim != 4:
            raise ModelFormatError("invariant", f"layer {li}: kernels must be 4D")
        counts = np.asarray(meta.get("counts", []), dtype=np.int64)
        if counts.shape[0] != kernels.shape[0]:
            raise ModelFormatError(
                "invariant",
                f"layer {li}: header declares {counts.shape[0]} counts "
                f"but blob holds {kernels.shape[0]} kernels",
            )
        if kernels.shape[3] != tensors["norm_mean"].shape[0]:
            raise ModelFormatError(
                "invariant", f"layer {li}: kernel channels disagree with stats"
            )
        if not np.isfinite(kernels).all():
            raise ModelFormatError("invariant", f"layer {li}: non-finite kernels")
        norm = NormalizationStats(
            tensors["norm_mean"], tensors["norm_stdev"], float(meta["epsilon"])
        )
        try:
            sep = None
            if "depthwise" in tensors:
                if "pointwise" not in tensors:
                    raise ValueError("incomplete separable tensors")
                sep = SeparableLayer(
                    tensors["depthwise"],
                    tensors["pointwise"],
                    np.asarray(meta.get("separable_counts", []), dtype=np.int64),
                )
            bank = KernelBank(kernels, counts)
            layers.append(TrainedLayer(spec, norm, bank, sep))
        except ValueError as exc:
            raise ModelFormatError("invariant", f"layer {li}: {exc}") from exc
    if pos != len(data):
        raise ModelFormatError("invariant", f"{len(data) - pos} trailing bytes")
    return FlimModel(
        arch=arch,
        layers=layers,
        seed=int(header.get("seed", 0)),
        provenance=header.get("provenance", {}),
    )


def save_model(model: FlimModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def load_model(path) -> FlimModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())

"""PNG reading/writing.

Reading goes through Pillow.  Grayscale writing uses a canonical
encoder (filter 0 rows, stored-deflate zlib stream) so identical pixel
data always yields identical bytes, independent of library versions.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np
from PIL import Image as PILImage

from .imgcore import as_image


def _chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def _stored_zlib(raw: bytes) -> bytes:
    """zlib container with uncompressed deflate blocks (deterministic)."""
    out = bytearray(b"\x78\x01")
    n = len(raw)
    pos = 0
    while True:
        block = raw[pos : pos + 65535]
        pos += len(block)
        final = 1 if pos >= n else 0
        out.append(final)
        out += struct.pack("<H", len(block))
        out += struct.pack("<H", 0xFFFF ^ len(block))
        out += block
        if final:
            break
    out += struct.pack(">I", zlib.adler32(raw) & 0xFFFFFFFF)
    return bytes(out)


def encode_gray_png(arr: np.ndarray) -> bytes:
    """8-bit grayscale PNG bytes for a (h, w) uint8 array."""
    arr = np.asarray(arr)
    if arr.ndim == 3:
        arr = arr[:, :, 0]
    arr = arr.astype(np.uint8)
    h, w = arr.shape
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    raw = b"".join(b"\x00" + arr[i].tobytes() for i in range(h))
    return (
        b"\x89PNG\r\n\x1a\n"
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", _stored_zlib(raw))
        + _chunk(b"IEND", b"")
    )


def write_gray_png(arr: np.ndarray, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_gray_png(arr))


def saliency_to_png_bytes(sal: np.ndarray) -> bytes:
    """Saliency map in [0, 1] -> 8-bit grayscale PNG (value = round(255*s))."""
    sal = as_image(sal)[:, :, 0]
    return encode_gray_png(np.round(np.clip(sal, 0.0, 1.0) * 255.0).astype(np.uint8))


def channel_to_png_bytes(chan: np.ndarray) -> bytes:
    """Min-max scale one feature channel to 8 bits and encode."""
    chan = np.asarray(chan, dtype=np.float64)
    lo, hi = chan.min(), chan.max()
    if hi > lo:
        chan = (chan - lo) / (hi - lo)
    else:
        chan = np.zeros_like(chan)
    return encode_gray_png(np.round(chan * 255.0).astype(np.uint8))


def load_image(path) -> np.ndarray:
    """PNG -> float image in [0, 1]; RGB kept as 3 channels, alpha dropped."""
    with PILImage.open(path) as im:
        if im.mode in ("RGBA", "P", "CMYK"):
            im = im.convert("RGB")
        arr = np.asarray(im)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr.astype(np.float64) / 255.0


def load_gray(path) -> np.ndarray:
    """PNG -> raw (h, w) uint8 values (marker rasters, ground truth)."""
    with PILImage.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im).copy()

"""Binary PGM (P5) / PPM (P6) reading and writing, 8-bit only."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class ImageFormatError(ValueError):
    pass


def _tokens(buf: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out, i = [], 0
    while len(out) < count:
        while i < len(buf) and buf[i : i + 1].isspace():
            i += 1
        if i >= len(buf):
            raise ImageFormatError("truncated header")
        if buf[i : i + 1] == b"#":
            while i < len(buf) and buf[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(buf) and not buf[j : j + 1].isspace():
            j += 1
        out.append(buf[i:j])
        i = j
    # exactly one whitespace byte separates header from raster
    return out, i + 1


def to_luminance(rgb: np.ndarray) -> np.ndarray:
    """Y = 0.299 R + 0.587 G + 0.114 B, rounded to the nearest integer."""
    rgb = np.asarray(rgb, dtype=float)
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.floor(y + 0.5)


def read_image(path) -> np.ndarray:
    """Load a P5 (gray) or P6 (color, converted to luminance) file as float array."""
    buf = Path(path).read_bytes()
    (magic, w, h, maxval), start = _tokens(buf, 4)
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"unsupported format {magic!r}; expected P5 or P6")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise ImageFormatError("only 8-bit (maxval 255) images are supported")
    channels = 3 if magic == b"P6" else 1
    size = w * h * channels
    raster = np.frombuffer(buf, dtype=np.uint8, count=size, offset=start) if len(buf) - start >= size else None
    if raster is None:
        raise ImageFormatError("truncated raster")
    if channels == 3:
        return to_luminance(raster.reshape(h, w, 3))
    return raster.reshape(h, w).astype(float)


def write_pgm(path, img: np.ndarray) -> None:
    """Write a gray image as P5, clipping to [0, 255] and rounding."""
    arr = np.clip(np.floor(np.asarray(img, dtype=float) + 0.5), 0, 255).astype(np.uint8)
    h, w = arr.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes())


def write_ppm(path, rgb: np.ndarray) -> None:
    arr = np.clip(np.floor(np.asarray(rgb, dtype=float) + 0.5), 0, 255).astype(np.uint8)
    h, w, _ = arr.shape
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + arr.tobytes())

"""8-bit RGB raster container plus PPM (P6) and PNG file I/O.

PPM output is written byte-for-byte deterministically and is the format
used for golden-file comparisons; PNG support goes through Pillow.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ImageError(ValueError):
    """Malformed image buffer or image file."""


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Dense 8-bit, 3-channel RGB raster.

    ``data`` is a (height, width, 3) uint8 array, row-major, RGB order.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ImageError(f"expected a (h, w, 3) array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            raise ImageError(f"expected uint8 samples, got dtype {arr.dtype}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ImageError("empty image")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3

    @property
    def nbytes(self) -> int:
        return self.data.nbytes

    def copy(self) -> "ImageBuffer":
        return ImageBuffer(self.data.copy())

    def same_pixels(self, other: "ImageBuffer") -> bool:
        return self.data.shape == other.data.shape and bool(
            np.array_equal(self.data, other.data)
        )


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to nearest integer, halves away from zero (float in, float out)."""
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def quantize(values: np.ndarray) -> np.ndarray:
    """Round half-away-from-zero and clamp to the 8-bit sample range."""
    return np.clip(round_half_away(values), 0, 255).astype(np.uint8)


def write_ppm(img: ImageBuffer, path) -> None:
    header = b"P6\n%d %d\n255\n" % (img.width, img.height)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.data.tobytes())


def read_ppm(path) -> ImageBuffer:
    with open(path, "rb") as fh:
        blob = fh.read()
    fields = []
    pos = 0
    # header = magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed between them
    while len(fields) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageError(f"truncated PPM header in {path}")
        fields.append(blob[start:pos])
    pos += 1  # single whitespace byte after maxval
    if fields[0] != b"P6":
        raise ImageError(f"not a binary PPM (P6) file: {path}")
    width, height, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise ImageError(f"unsupported PPM maxval {maxval} (expected 255)")
    expected = width * height * 3
    raster = blob[pos : pos + expected]
    if len(raster) != expected:
        raise ImageError(f"PPM raster truncated: {len(raster)} of {expected} bytes")
    data = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return ImageBuffer(data.copy())


def read_image(path) -> ImageBuffer:
    """Read a PPM or PNG (or anything Pillow decodes) into an ImageBuffer."""
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        return read_ppm(path)
    from PIL import Image

    with Image.open(path) as im:
        return ImageBuffer(np.asarray(im.convert("RGB"), dtype=np.uint8).copy())


def write_image(img: ImageBuffer, path) -> None:
    """Write PPM for the .ppm suffix, otherwise defer to Pillow."""
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        write_ppm(img, path)
        return
    from PIL import Image

    Image.fromarray(img.data, mode="RGB").save(path)


def synthetic_image(width: int = 64, height: int = 64, seed: int = 0) -> ImageBuffer:
    """Deterministic colorful test image: gradients, a checker, mild texture."""
    if width < 1 or height < 1:
        raise ImageError("image dimensions must be positive")
    x = np.linspace(0.0, 255.0, width)
    y = np.linspace(0.0, 255.0, height)
    xx, yy = np.meshgrid(x, y)
    checker = ((np.arange(height)[:, None] // 8 + np.arange(width)[None, :] // 8) % 2) * 96.0
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    texture = gen.integers(0, 32, size=(height, width)).astype(np.float64)
    rgb = np.stack([xx, yy, 64.0 + checker + texture], axis=-1)
    return ImageBuffer(quantize(rgb))

"""The 24 basis image perturbations.

Every kernel is parameterized by a single magnitude ``alpha`` in [0, 1]:
alpha = 0 is a bit-exact identity, alpha = 1 the most severe setting.

Kinds:
  * 12 photometric: each of R/G/B/H/S/V blended linearly toward the
    channel maximum ("lighter") or minimum ("darker"),
  * 10 geometric: signed shear/translate (x and y) and rotation about the
    image center, each followed by a zoom-crop that removes padded borders,
  * Gaussian blur and additive Gaussian noise.

All kernels are pure functions of their inputs and safe to call
concurrently on shared read-only images.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .image import ImageBuffer, quantize


class AugmentationError(ValueError):
    """Invalid magnitude, malformed spec, or unusable transform."""


class DegenerateCropError(AugmentationError):
    """The zoom-crop rectangle collapsed to zero area (magnitude too large)."""


class AugmentationKind(str, enum.Enum):
    """Closed set of the 24 basis perturbations."""

    R_LIGHTER = "r_lighter"
    R_DARKER = "r_darker"
    G_LIGHTER = "g_lighter"
    G_DARKER = "g_darker"
    B_LIGHTER = "b_lighter"
    B_DARKER = "b_darker"
    H_LIGHTER = "h_lighter"
    H_DARKER = "h_darker"
    S_LIGHTER = "s_lighter"
    S_DARKER = "s_darker"
    V_LIGHTER = "v_lighter"
    V_DARKER = "v_darker"
    SHEAR_X_POS = "shear_x_pos"
    SHEAR_X_NEG = "shear_x_neg"
    SHEAR_Y_POS = "shear_y_pos"
    SHEAR_Y_NEG = "shear_y_neg"
    TRANSLATE_X_POS = "translate_x_pos"
    TRANSLATE_X_NEG = "translate_x_neg"
    TRANSLATE_Y_POS = "translate_y_pos"
    TRANSLATE_Y_NEG = "translate_y_neg"
    ROTATE_POS = "rotate_pos"
    ROTATE_NEG = "rotate_neg"
    BLUR = "blur"
    NOISE = "noise"

    @classmethod
    def from_name(cls, name: str) -> "AugmentationKind":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise AugmentationError(f"unknown augmentation kind {name!r}; one of: {valid}")


ALL_KINDS = tuple(AugmentationKind)

# kind -> (channel, direction) for the photometric 12
_CHANNEL_KINDS = {
    k: (k.value.split("_")[0], k.value.split("_")[1])
    for k in ALL_KINDS
    if k.value.split("_")[0] in ("r", "g", "b", "h", "s", "v")
}

# kind -> (operation, sign) for the geometric 10
_GEOMETRIC_KINDS = {
    AugmentationKind.SHEAR_X_POS: ("shear_x", 1.0),
    AugmentationKind.SHEAR_X_NEG: ("shear_x", -1.0),
    AugmentationKind.SHEAR_Y_POS: ("shear_y", 1.0),
    AugmentationKind.SHEAR_Y_NEG: ("shear_y", -1.0),
    AugmentationKind.TRANSLATE_X_POS: ("translate_x", 1.0),
    AugmentationKind.TRANSLATE_X_NEG: ("translate_x", -1.0),
    AugmentationKind.TRANSLATE_Y_POS: ("translate_y", 1.0),
    AugmentationKind.TRANSLATE_Y_NEG: ("translate_y", -1.0),
    AugmentationKind.ROTATE_POS: ("rotate", 1.0),
    AugmentationKind.ROTATE_NEG: ("rotate", -1.0),
}

# Magnitude ranges for geometric transforms at alpha = 1.
SHEAR_MAX = 0.3
TRANSLATE_MAX_FRACTION = 0.3
ROTATE_MAX_DEGREES = 30.0

# Per-channel (v_min, v_max) blend endpoints. H tops out at 180 and V is
# floored at 10 so full darkening never produces an all-black image.
CHANNEL_RANGES = {
    "r": (0.0, 255.0),
    "g": (0.0, 255.0),
    "b": (0.0, 255.0),
    "h": (0.0, 180.0),
    "s": (0.0, 255.0),
    "v": (10.0, 255.0),
}


@dataclass(frozen=True)
class AugmentationSpec:
    """One perturbation: a kind, a magnitude in [0, 1], and a noise seed."""

    kind: AugmentationKind
    magnitude: float
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.kind, AugmentationKind):
            object.__setattr__(self, "kind", AugmentationKind.from_name(str(self.kind)))
        _check_alpha(self.magnitude)
        if not 0 <= int(self.seed) < 2**64:
            raise AugmentationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if math.isnan(alpha) or not 0.0 <= alpha <= 1.0:
        raise AugmentationError(f"magnitude must lie in [0, 1], got {alpha}")
    return alpha


# ---------------------------------------------------------------------------
# photometric kernels


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Hexcone RGB -> HSV with H in [0, 180) and S, V in [0, 255].

    Input is any (..., 3) array of 0..255 samples; output is float64 and
    unquantized so scale-then-invert round trips lose at most the final
    rounding step.
    """
    arr = np.asarray(rgb, dtype=np.float64)
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    v = np.maximum(np.maximum(r, g), b)
    lo = np.minimum(np.minimum(r, g), b)
    delta = v - lo

    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(v > 0, delta / np.where(v > 0, v, 1.0) * 255.0, 0.0)
        dsafe = np.where(delta > 0, delta, 1.0)
        h_deg = np.select(
            [delta == 0, v == r, v == g],
            [
                np.zeros_like(v),
                (60.0 * ((g - b) / dsafe)) % 360.0,
                60.0 * ((b - r) / dsafe) + 120.0,
            ],
            default=60.0 * ((r - g) / dsafe) + 240.0,
        )
    out = np.empty_like(arr)
    out[..., 0] = h_deg / 2.0
    out[..., 1] = s
    out[..., 2] = v
    return out


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Inverse of rgb_to_hsv; returns float64 RGB in [0, 255] (unrounded)."""
    arr = np.asarray(hsv, dtype=np.float64)
    h_deg = (arr[..., 0] * 2.0) % 360.0
    s = np.clip(arr[..., 1], 0.0, 255.0) / 255.0
    v = np.clip(arr[..., 2], 0.0, 255.0)

    c = v * s
    x = c * (1.0 - np.abs((h_deg / 60.0) % 2.0 - 1.0))
    m = v - c
    sector = np.floor(h_deg / 60.0).astype(np.int64) % 6

    zeros = np.zeros_like(c)
    rp = np.choose(sector, [c, x, zeros, zeros, x, c])
    gp = np.choose(sector, [x, c, c, x, zeros, zeros])
    bp = np.choose(sector, [zeros, zeros, x, c, c, x])
    return np.stack([rp + m, gp + m, bp + m], axis=-1)


def channel_scale(img: ImageBuffer, channel: str, direction: str, alpha: float) -> ImageBuffer:
    """Blend one channel linearly toward its extreme.

    lighter: v' = alpha * v_max + (1 - alpha) * v
    darker:  v' = alpha * v_min + (1 - alpha) * v

    R/G/B act on the raw samples; H/S/V go through an unquantized HSV
    conversion, blend there, and convert back. Final samples are rounded
    half-away-from-zero and clamped to [0, 255].
    """
    alpha = _check_alpha(alpha)
    channel = channel.lower()
    if channel not in CHANNEL_RANGES:
        raise AugmentationError(f"unknown channel {channel!r}")
    if direction not in ("lighter", "darker"):
        raise AugmentationError(f"direction must be 'lighter' or 'darker', got {direction!r}")
    if alpha == 0.0:
        return img.copy()

    v_min, v_max = CHANNEL_RANGES[channel]
    target = v_max if direction == "lighter" else v_min

    if channel in ("r", "g", "b"):
        idx = "rgb".index(channel)
        out = img.data.astype(np.float64)
        out[..., idx] = alpha * target + (1.0 - alpha) * out[..., idx]
        return ImageBuffer(quantize(out))

    idx = "hsv".index(channel)
    hsv = rgb_to_hsv(img.data)
    hsv[..., idx] = alpha * target + (1.0 - alpha) * hsv[..., idx]
    return ImageBuffer(quantize(hsv_to_rgb(hsv)))


# ---------------------------------------------------------------------------
# geometric kernels


def affine_matrix(op: str, direction: str, alpha: float, width: int, height: int) -> np.ndarray:
    """3x3 forward transform matrix for one geometric kind.

    Magnitude mapping: shear factor 0.3*alpha, translation
    0.3*alpha*(width or height), rotation 30 degrees * alpha about the
    image center. The negative direction negates the parameter.
    """
    alpha = _check_alpha(alpha)
    if direction not in ("positive", "negative"):
        raise AugmentationError(f"direction must be 'positive' or 'negative', got {direction!r}")
    sign = 1.0 if direction == "positive" else -1.0
    if op == "shear_x":
        return _shear_matrix(sign * SHEAR_MAX * alpha, 0.0)
    if op == "shear_y":
        return _shear_matrix(0.0, sign * SHEAR_MAX * alpha)
    if op == "translate_x":
        return _translate_matrix(sign * TRANSLATE_MAX_FRACTION * alpha * width, 0.0)
    if op == "translate_y":
        return _translate_matrix(0.0, sign * TRANSLATE_MAX_FRACTION * alpha * height)
    if op == "rotate":
        theta = math.radians(sign * ROTATE_MAX_DEGREES * alpha)
        return rotation_matrix(theta, width, height)
    raise AugmentationError(f"unknown geometric operation {op!r}")


def _shear_matrix(sx: float, sy: float) -> np.ndarray:
    return np.array([[1.0, sx, 0.0], [sy, 1.0, 0.0], [0.0, 0.0, 1.0]])


def _translate_matrix(tx: float, ty: float) -> np.ndarray:
    return np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])


def rotation_matrix(theta: float, width: int, height: int) -> np.ndarray:
    """Rotation by theta radians holding the image center fixed."""
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    c, s = math.cos(theta), math.sin(theta)
    # T(center) @ R(theta) @ T(-center), written out
    return np.array(
        [
            [c, -s, cx - c * cx + s * cy],
            [s, c, cy - s * cx - c * cy],
            [0.0, 0.0, 1.0],
        ]
    )


def _clip_polygon(poly: list, edge_fn) -> list:
    """One Sutherland-Hodgman half-plane clip; edge_fn(p) >= 0 means inside."""
    out = []
    n = len(poly)
    for i in range(n):
        cur, nxt = poly[i], poly[(i + 1) % n]
        cin, nin = edge_fn(cur) >= 0.0, edge_fn(nxt) >= 0.0
        if cin:
            out.append(cur)
        if cin != nin:
            t = edge_fn(cur) / (edge_fn(cur) - edge_fn(nxt))
            out.append((cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])))
    return out


def _valid_region_polygon(matrix: np.ndarray, width: int, height: int) -> list:
    """Forward image of the sampling box intersected with the canvas box.

    Coordinates are pixel centers, so the box is [0, w-1] x [0, h-1].
    """
    xmax, ymax = width - 1.0, height - 1.0
    corners = np.array(
        [[0.0, 0.0, 1.0], [xmax, 0.0, 1.0], [xmax, ymax, 1.0], [0.0, ymax, 1.0]]
    ).T
    warped = matrix @ corners
    poly = [(warped[0, i] / warped[2, i], warped[1, i] / warped[2, i]) for i in range(4)]
    for edge in (
        lambda p: p[0],
        lambda p: xmax - p[0],
        lambda p: p[1],
        lambda p: ymax - p[1],
    ):
        poly = _clip_polygon(poly, edge)
        if len(poly) < 3:
            return []
    return poly


def _polygon_slices(poly: list, y_levels: np.ndarray):
    """Left/right x-extent of a convex polygon at each horizontal level."""
    px = np.array([p[0] for p in poly])
    py = np.array([p[1] for p in poly])
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    y = y_levels[:, None]
    spans = (np.minimum(py, qy) <= y) & (y <= np.maximum(py, qy))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(qy != py, (y - py) / np.where(qy != py, qy - py, 1.0), 0.0)
    cross_x = px + t * (qx - px)
    # horizontal edges contribute both endpoints
    horiz = (qy == py) & spans
    left = np.where(spans, np.where(horiz, np.minimum(px, qx), cross_x), np.inf)
    right = np.where(spans, np.where(horiz, np.maximum(px, qx), cross_x), -np.inf)
    return left.min(axis=1), right.max(axis=1)


def largest_inner_rect(matrix: np.ndarray, width: int, height: int):
    """Largest axis-aligned rectangle containing only in-bounds samples.

    Returns (x0, y0, x1, y1) in pixel-center coordinates. Raises
    DegenerateCropError when the valid region has no area.
    """
    poly = _valid_region_polygon(matrix, width, height)
    if len(poly) < 3:
        raise DegenerateCropError("transform leaves no in-bounds region")
    ys_vertices = np.array(sorted({p[1] for p in poly}))
    y_lo, y_hi = ys_vertices[0], ys_vertices[-1]
    if y_hi - y_lo <= 0:
        raise DegenerateCropError("valid region has zero height")

    def best_pair(levels: np.ndarray):
        levels = np.unique(levels)
        xl, xr = _polygon_slices(poly, levels)
        xl2 = np.maximum(xl[:, None], xl[None, :])
        xr2 = np.minimum(xr[:, None], xr[None, :])
        w = np.clip(xr2 - xl2, 0.0, None)
        h = np.abs(levels[:, None] - levels[None, :])
        areas = w * h
        i, j = np.unravel_index(np.argmax(areas), areas.shape)
        return areas[i, j], levels[min(i, j)], levels[max(i, j)]

    # coarse grid (vertex levels included so axis-aligned regions are exact),
    # then two local zooms around the best pair
    levels = np.union1d(np.linspace(y_lo, y_hi, 257), ys_vertices)
    area, ya, yb = best_pair(levels)
    step = (y_hi - y_lo) / 256.0
    for _ in range(2):
        la = np.linspace(max(y_lo, ya - step), min(y_hi, ya + step), 33)
        lb = np.linspace(max(y_lo, yb - step), min(y_hi, yb + step), 33)
        area, ya, yb = best_pair(np.concatenate([la, lb, [ya, yb]]))
        step /= 16.0
    if area <= 1e-9:
        raise DegenerateCropError("inscribed rectangle has zero area")
    xl, xr = _polygon_slices(poly, np.array([ya, yb]))
    return (max(xl[0], xl[1]), ya, min(xr[0], xr[1]), yb)


def apply_affine(img: ImageBuffer, matrix: np.ndarray) -> ImageBuffer:
    """Warp under the inverse map, zoom-crop the padded border, and rescale.

    The output is the largest axis-aligned rectangle of the warped canvas
    containing no out-of-bounds samples, resampled bilinearly back to the
    input dimensions in a single pass.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.shape != (3, 3):
        raise AugmentationError(f"expected a 3x3 matrix, got shape {m.shape}")
    if not np.allclose(m[2], (0.0, 0.0, 1.0), atol=1e-12):
        raise AugmentationError("bottom matrix row must be (0, 0, 1)")
    if abs(np.linalg.det(m)) < 1e-12:
        raise AugmentationError("singular transform matrix")
    h, w = img.height, img.width
    if h < 2 or w < 2:
        raise AugmentationError("affine transforms require images of at least 2x2 pixels")

    x0, y0, x1, y1 = largest_inner_rect(m, w, h)

    us = x0 + np.arange(w) * ((x1 - x0) / (w - 1))
    vs = y0 + np.arange(h) * ((y1 - y0) / (h - 1))
    uu, vv = np.meshgrid(us, vs)
    inv = np.linalg.inv(m)
    xs = inv[0, 0] * uu + inv[0, 1] * vv + inv[0, 2]
    ys = inv[1, 0] * uu + inv[1, 1] * vv + inv[1, 2]
    return ImageBuffer(quantize(_bilinear(img.data, xs, ys)))


def _bilinear(data: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    h, w = data.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    xi = np.clip(np.floor(xs).astype(np.int64), 0, w - 2)
    yi = np.clip(np.floor(ys).astype(np.int64), 0, h - 2)
    fx = (xs - xi)[..., None]
    fy = (ys - yi)[..., None]
    img = data.astype(np.float64)
    top = (1.0 - fx) * img[yi, xi] + fx * img[yi, xi + 1]
    bot = (1.0 - fx) * img[yi + 1, xi] + fx * img[yi + 1, xi + 1]
    return (1.0 - fy) * top + fy * bot


# ---------------------------------------------------------------------------
# blur and noise


def blur_kernel_size(alpha: float) -> int:
    """Nearest odd kernel size on the line 1 + 48*alpha (1 at 0, 49 at 1)."""
    alpha = _check_alpha(alpha)
    return 2 * int(math.floor(24.0 * alpha + 0.5)) + 1


def blur_sigma(size: int) -> float:
    return 0.3 * ((size - 1) / 2.0 - 1.0) + 0.8


def gaussian_blur(img: ImageBuffer, alpha: float) -> ImageBuffer:
    """Separable Gaussian blur with reflected edges."""
    size = blur_kernel_size(alpha)
    if size == 1:
        return img.copy()
    pad = (size - 1) // 2
    if pad > min(img.height, img.width) - 1:
        raise AugmentationError(
            f"kernel size {size} too large for a {img.width}x{img.height} image"
        )
    sigma = blur_sigma(size)
    taps = np.exp(-((np.arange(size) - pad) ** 2) / (2.0 * sigma * sigma))
    taps /= taps.sum()

    padded = np.pad(img.data.astype(np.float64), ((pad, pad), (pad, pad), (0, 0)), mode="reflect")
    rows = np.zeros((img.height, padded.shape[1], 3))
    for t in range(size):
        rows += taps[t] * padded[t : t + img.height]
    out = np.zeros((img.height, img.width, 3))
    for t in range(size):
        out += taps[t] * rows[:, t : t + img.width]
    return ImageBuffer(quantize(out))


NOISE_SIGMA_MAX = 50.0


def gaussian_noise(img: ImageBuffer, alpha: float, seed: int) -> ImageBuffer:
    """Additive zero-mean Gaussian noise, sigma = 50*alpha.

    Samples come from a single Philox stream keyed by the seed, so the
    noise value at a given pixel index is fixed regardless of how the
    array is traversed or chunked.
    """
    alpha = _check_alpha(alpha)
    if alpha == 0.0:
        return img.copy()
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    noise = gen.standard_normal(img.data.shape)
    return ImageBuffer(quantize(img.data.astype(np.float64) + NOISE_SIGMA_MAX * alpha * noise))


# ---------------------------------------------------------------------------
# dispatcher


def apply(spec: AugmentationSpec, img: ImageBuffer) -> ImageBuffer:
    """Route one spec to its kernel. Magnitude 0 is the identity for every kind."""
    if spec.magnitude == 0.0:
        return img.copy()
    kind = spec.kind
    if kind in _CHANNEL_KINDS:
        channel, direction = _CHANNEL_KINDS[kind]
        return channel_scale(img, channel, direction, spec.magnitude)
    if kind in _GEOMETRIC_KINDS:
        op, sign = _GEOMETRIC_KINDS[kind]
        direction = "positive" if sign > 0 else "negative"
        m = affine_matrix(op, direction, spec.magnitude, img.width, img.height)
        return apply_affine(img, m)
    if kind is AugmentationKind.BLUR:
        return gaussian_blur(img, spec.magnitude)
    if kind is AugmentationKind.NOISE:
        return gaussian_noise(img, spec.magnitude, spec.seed)
    raise AugmentationError(f"unhandled kind {kind}")


def describe(spec: AugmentationSpec) -> dict:
    """JSON-friendly view of a spec including derived kernel parameters."""
    info = {"kind": spec.kind.value, "alpha": float(spec.magnitude), "seed": int(spec.seed)}
    if spec.kind is AugmentationKind.BLUR:
        info["kernel_size"] = blur_kernel_size(spec.magnitude)
        info["sigma"] = blur_sigma(info["kernel_size"])
    elif spec.kind is AugmentationKind.NOISE:
        info["sigma"] = NOISE_SIGMA_MAX * float(spec.magnitude)
    return info

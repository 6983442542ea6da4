import math

import numpy as np
import pytest

from adaptaug.augment import (
    AugmentationError,
    DegenerateCropError,
    affine_matrix,
    apply_affine,
    largest_inner_rect,
    rotation_matrix,
)
from adaptaug.image import ImageBuffer


def checkerboard(h=64, w=64, cell=8):
    yy, xx = np.mgrid[0:h, 0:w]
    plane = (((yy // cell) + (xx // cell)) % 2 * 255).astype(np.uint8)
    return ImageBuffer(np.stack([plane] * 3, axis=-1))


def test_zero_alpha_is_identity_matrix():
    for op in ("shear_x", "shear_y", "translate_x", "translate_y", "rotate"):
        m = affine_matrix(op, "positive", 0.0, 64, 48)
        assert np.allclose(m, np.eye(3), atol=1e-15)


def test_shear_entry_linear_mapping():
    m = affine_matrix("shear_x", "positive", 0.5, 64, 64)
    expected = np.eye(3)
    expected[0, 1] = 0.15
    assert np.allclose(m, expected, atol=1e-15)
    m_neg = affine_matrix("shear_x", "negative", 0.5, 64, 64)
    assert m_neg[0, 1] == -0.15


def test_rotation_entries_at_full_magnitude():
    # trig entries computed independently of the matrix constructor
    m = affine_matrix("rotate", "positive", 1.0, 64, 64)
    assert m[0, 0] == pytest.approx(math.cos(math.radians(30.0)), abs=1e-12)
    assert m[1, 0] == pytest.approx(math.sin(math.radians(30.0)), abs=1e-12)
    assert m[0, 1] == pytest.approx(-math.sin(math.radians(30.0)), abs=1e-12)


def test_translation_scales_with_dimension():
    m = affine_matrix("translate_x", "positive", 1.0, 100, 50)
    assert m[0, 2] == pytest.approx(30.0)
    m = affine_matrix("translate_y", "negative", 0.5, 100, 50)
    assert m[1, 2] == pytest.approx(-7.5)


def test_alpha_validation():
    with pytest.raises(AugmentationError):
        affine_matrix("rotate", "positive", 1.2, 64, 64)


@pytest.mark.parametrize("op", ["shear_x", "shear_y", "translate_x", "translate_y", "rotate"])
def test_composition_equals_matrix_product(op):
    # applying alpha then beta equals one transform with the summed parameter
    a, b = 0.23, 0.31
    ma = affine_matrix(op, "positive", a, 64, 64)
    mb = affine_matrix(op, "positive", b, 64, 64)
    product = ma @ mb
    if op == "rotate":
        combined = rotation_matrix(math.radians(30.0 * (a + b)), 64, 64)
    else:
        combined = affine_matrix(op, "positive", a + b, 64, 64)
        if op.startswith("shear"):
            i, j = (0, 1) if op == "shear_x" else (1, 0)
            combined[i, j] = 0.3 * a + 0.3 * b
        else:
            idx = 0 if op == "translate_x" else 1
            combined[idx, 2] = 0.3 * 64 * (a + b)
    assert np.abs(product - combined).max() < 1e-9


def test_identity_matrix_is_bit_exact(image64):
    out = apply_affine(image64, np.eye(3))
    assert out.same_pixels(image64)


def test_singular_matrix_rejected(image64):
    m = np.eye(3)
    m[0, 0] = 0.0
    m[0, 1] = 0.0
    with pytest.raises(AugmentationError, match="singular"):
        apply_affine(image64, m)


def test_bad_bottom_row_rejected(image64):
    m = np.eye(3)
    m[2, 0] = 0.5
    with pytest.raises(AugmentationError, match="bottom"):
        apply_affine(image64, m)


def test_full_translation_is_degenerate(image64):
    m = np.eye(3)
    m[0, 2] = float(image64.width)
    with pytest.raises(DegenerateCropError):
        apply_affine(image64, m)


def test_output_keeps_dimensions(image64):
    for op in ("shear_x", "translate_y", "rotate"):
        m = affine_matrix(op, "negative", 1.0, image64.width, image64.height)
        out = apply_affine(image64, m)
        assert out.data.shape == image64.data.shape


def _analytic_rotated_rect(w, h, angle):
    """Largest axis-aligned rectangle inside a w x h rectangle rotated by angle."""
    width_is_longer = w >= h
    side_long, side_short = (w, h) if width_is_longer else (h, w)
    sin_a, cos_a = abs(math.sin(angle)), abs(math.cos(angle))
    if side_short <= 2.0 * sin_a * cos_a * side_long or abs(sin_a - cos_a) < 1e-10:
        x = 0.5 * side_short
        wr, hr = (x / sin_a, x / cos_a) if width_is_longer else (x / cos_a, x / sin_a)
    else:
        cos_2a = cos_a * cos_a - sin_a * sin_a
        wr = (w * cos_a - h * sin_a) / cos_2a
        hr = (h * cos_a - w * sin_a) / cos_2a
    return wr, hr


def test_rotation_crop_matches_analytic_inscribed_rectangle():
    img = checkerboard(64, 64)
    angle = math.radians(10.0)
    m = rotation_matrix(angle, img.width, img.height)
    x0, y0, x1, y1 = largest_inner_rect(m, img.width, img.height)

    wr, hr = _analytic_rotated_rect(img.width - 1.0, img.height - 1.0, angle)
    cx, cy = (img.width - 1) / 2.0, (img.height - 1) / 2.0
    assert x1 - x0 == pytest.approx(wr, abs=0.05)
    assert y1 - y0 == pytest.approx(hr, abs=0.05)
    assert (x0 + x1) / 2.0 == pytest.approx(cx, abs=0.05)
    assert (y0 + y1) / 2.0 == pytest.approx(cy, abs=0.05)


def test_rotation_crop_nonsquare():
    angle = math.radians(-17.0)
    w, h = 96, 48
    m = rotation_matrix(angle, w, h)
    x0, y0, x1, y1 = largest_inner_rect(m, w, h)
    wr, hr = _analytic_rotated_rect(w - 1.0, h - 1.0, angle)
    assert x1 - x0 == pytest.approx(wr, rel=0.01)
    assert y1 - y0 == pytest.approx(hr, rel=0.01)


def test_shear_crop_region():
    # shear leans the column span by s*y; the best crop cuts the slanted edge
    w = h = 65
    s = 0.3
    m = np.eye(3)
    m[0, 1] = s
    x0, y0, x1, y1 = largest_inner_rect(m, w, h)
    # valid region: s*y <= x <= w-1 for y in [0, h-1]; optimum keeps full height
    assert y0 == pytest.approx(0.0, abs=1e-6)
    assert y1 == pytest.approx(h - 1.0, abs=1e-6)
    assert x0 == pytest.approx(s * (h - 1.0), abs=0.05)
    assert x1 == pytest.approx(w - 1.0, abs=1e-6)

import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_array_equal
from scipy import ndimage

from snakelp import imagecore
from snakelp.errors import BadHeader, BadMagic, TooSmall, Truncated
from snakelp.imagecore import FloatField, GrayImage


def test_load_pgm_single_pixel(tmp_path):
    path = tmp_path / "one.pgm"
    path.write_bytes(b"P5\n1 1\n255\n\x7f")
    img = imagecore.load_pgm(path)
    assert (img.width, img.height) == (1, 1)
    assert img.pixels[0, 0] == 127


def test_load_pgm_with_comments(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n# max\n255\n\x01\x02")
    assert_array_equal(imagecore.load_pgm(path).pixels, [[1, 2]])


@pytest.mark.parametrize("payload, error", [
    (b"P2\n1 1\n255\n0", BadMagic),
    (b"P5\nx 1\n255\n\x00", BadHeader),
    (b"P5\n1 1\n65535\n\x00\x00", BadHeader),
    (b"P5\n4 4\n255\n\x00\x00", Truncated),
])
def test_load_pgm_rejects(tmp_path, payload, error):
    path = tmp_path / "bad.pgm"
    path.write_bytes(payload)
    with pytest.raises(error):
        imagecore.load_pgm(path)


def test_save_pgm_sizes(tmp_path):
    path = tmp_path / "z.pgm"
    imagecore.save_pgm(GrayImage(np.zeros((1, 1), np.uint8)), path)
    raw = path.read_bytes()
    # "P5\n1 1\n255\n" is 11 bytes, plus one payload byte
    assert raw == b"P5\n1 1\n255\n\x00"
    assert len(raw) == len(b"P5\n1 1\n255\n") + 1 == 12
    imagecore.save_pgm(GrayImage(np.full((2, 2), 9, np.uint8)), path)
    raw = path.read_bytes()
    header = b"P5\n2 2\n255\n"
    assert raw.startswith(header) and len(raw) - len(header) == 4


def test_pgm_round_trip_bytes(tmp_path):
    rng = np.random.default_rng(3)
    img = GrayImage(rng.integers(0, 256, (16, 16), dtype=np.uint8))
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    imagecore.save_pgm(img, a)
    back = imagecore.load_pgm(a)
    imagecore.save_pgm(back, b)
    assert back == img
    assert a.read_bytes() == b.read_bytes()


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))))
def test_pgm_round_trip_property(tmp_path_factory, pixels):
    path = tmp_path_factory.mktemp("pgm") / "p.pgm"
    imagecore.save_pgm(GrayImage(pixels), path)
    assert_array_equal(imagecore.load_pgm(path).pixels, pixels)


def test_pfm_single_value_payload(tmp_path):
    path = tmp_path / "one.pfm"
    imagecore.save_pfm(FloatField(np.ones((1, 1))), path)
    raw = path.read_bytes()
    assert raw.startswith(b"Pf\n")
    assert raw[-4:] == bytes.fromhex("0000803f")


def test_pfm_rows_bottom_to_top(tmp_path):
    path = tmp_path / "two.pfm"
    imagecore.save_pfm(FloatField(np.array([[1.0], [2.0]])), path)
    assert struct.unpack("<2f", path.read_bytes()[-8:]) == (2.0, 1.0)


def test_pfm_constant_and_random_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    for field in (np.full((4, 6), 0.5), rng.random((7, 5)).astype(np.float32).astype(np.float64)):
        a, b = tmp_path / "a.pfm", tmp_path / "b.pfm"
        imagecore.save_pfm(FloatField(field), a)
        back = imagecore.load_pfm(a)
        assert_array_equal(back.values, field)
        imagecore.save_pfm(back, b)
        assert a.read_bytes() == b.read_bytes()


def test_pfm_rejects(tmp_path):
    path = tmp_path / "bad.pfm"
    path.write_bytes(b"PF\n1 1\n-1.0\n" + bytes(12))
    with pytest.raises(BadMagic):
        imagecore.load_pfm(path)
    path.write_bytes(b"Pf\n2 2\n-1.0\n" + bytes(8))
    with pytest.raises(Truncated):
        imagecore.load_pfm(path)


def test_gray_image_invariants():
    with pytest.raises(ValueError):
        GrayImage(np.full((2, 2), 300))
    with pytest.raises(ValueError):
        GrayImage(np.zeros((0, 3)))
    img = GrayImage(np.zeros((2, 3), np.uint8))
    assert len(img.data) == img.width * img.height == 6
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1


def test_float_field_rejects_non_finite():
    with pytest.raises(ValueError):
        FloatField(np.array([[np.nan]]))


def test_rectangle_pixel_count():
    img = imagecore.generate_shape("rectangle", 400, 320)
    on = img.pixels == 255
    rows, cols = np.nonzero(on)
    # box from (0.25w, 0.25h) to (0.75w, 0.75h), sampled at pixel centres
    assert on.sum() == (0.5 * 400) * (0.5 * 320) == 32000
    assert (rows.min(), rows.max(), cols.min(), cols.max()) == (80, 239, 100, 299)


@pytest.mark.parametrize("kind", list(imagecore.ShapeKind))
def test_shapes_binary_centered_and_sized(kind):
    img = imagecore.generate_shape(kind, 400, 320)
    assert set(np.unique(img.pixels)) <= {0, 255}
    rows, cols = np.nonzero(img.pixels == 255)
    assert abs((rows.min() + rows.max()) / 2 - 160) <= 48
    assert abs((cols.min() + cols.max()) / 2 - 200) <= 48
    if kind is not imagecore.ShapeKind.MULTI:
        extent = max(rows.max() - rows.min() + 1, cols.max() - cols.min() + 1)
        assert 0.4 * 320 <= extent <= 0.7 * 320


def test_multi_has_three_components():
    img = imagecore.generate_shape("multi", 400, 320)
    _, count = ndimage.label(img.pixels == 255, structure=np.ones((3, 3)))
    assert count == 3


def test_shape_too_small_and_deterministic():
    with pytest.raises(TooSmall):
        imagecore.generate_shape("arrow", 16, 16)
    assert imagecore.generate_shape("heart", 64, 48) == imagecore.generate_shape("heart", 64, 48)


def test_fill_polygon_square_outline():
    mask = imagecore.fill_polygon([(1, 1), (4, 1), (4, 4), (1, 4)], 6, 6)
    expected = np.zeros((6, 6), bool)
    expected[1:4, 1:4] = True
    assert_array_equal(mask, expected)


def test_noise_zero_sigma_identity(arrow):
    assert imagecore.add_gaussian_noise(arrow, 0.0, 1) == arrow


def test_noise_statistics():
    flat = GrayImage(np.full((320, 400), 128, np.uint8))
    out = imagecore.add_gaussian_noise(flat, 25.0, 11)
    diff = out.pixels.astype(float) - 128
    assert abs(diff.std() - 25) <= 2
    assert abs(diff.mean()) < 0.5


def test_noise_deterministic_and_seed_sensitive(arrow):
    a = imagecore.add_gaussian_noise(arrow, 50, 7)
    assert a == imagecore.add_gaussian_noise(arrow, 50, 7)
    assert not a == imagecore.add_gaussian_noise(arrow, 50, 8)


def test_standard_normals_follow_box_muller():
    raw = np.random.PCG64(42).random_raw(2)
    u1 = ((int(raw[0]) >> 11) + 1) * 2.0 ** -53
    u2 = (int(raw[1]) >> 11) * 2.0 ** -53
    r = np.sqrt(-2 * np.log(u1))
    expected = [r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)]
    assert_array_equal(imagecore.standard_normals(2, 42), expected)
    assert len(imagecore.standard_normals(3, 42)) == 3


def test_noise_rounds_then_clamps():
    img = GrayImage(np.array([[0, 255]], np.uint8))
    out = imagecore.add_gaussian_noise(img, 1000.0, 1)
    n = imagecore.standard_normals(2, 1) * 1000.0
    assert_array_equal(out.pixels[0], np.clip(np.rint([0 + n[0], 255 + n[1]]), 0, 255))

import numpy as np
import pytest

from conftest import texture
from pervisor.imagecore import GrayImage
from pervisor.morph import (
    ContourFormatError,
    ContourPair,
    blend,
    interpolate_contour,
    load_contours,
    morph_sequence,
)


def gray(value, shape=(16, 16)):
    return GrayImage(np.full(shape, value, dtype=np.uint8))


class TestContourPair:
    def test_validation(self):
        with pytest.raises(ValueError):
            ContourPair(np.zeros((1, 2)), np.zeros((1, 2)))
        with pytest.raises(ValueError):
            ContourPair(np.zeros((3, 2)), np.zeros((4, 2)))

    def test_interpolation_endpoints_and_midpoint(self):
        pair = ContourPair(
            np.array([[0.0, 0.0], [10.0, 0.0]]), np.array([[0.0, 4.0], [10.0, 8.0]])
        )
        assert np.array_equal(interpolate_contour(pair, 1.0), pair.source_points)
        assert np.array_equal(interpolate_contour(pair, 0.0), pair.dest_points)
        assert np.array_equal(
            interpolate_contour(pair, 0.5), np.array([[0.0, 2.0], [10.0, 4.0]])
        )

    def test_bad_alpha(self):
        pair = ContourPair(np.zeros((2, 2)), np.ones((2, 2)))
        with pytest.raises(ValueError):
            interpolate_contour(pair, 1.5)


class TestBlend:
    def test_endpoints_exact(self):
        a, b = texture(40, n=32), texture(41, n=32)
        assert blend(a, b, 1.0) == a
        assert blend(a, b, 0.0) == b

    def test_midpoint_constant_images(self):
        assert blend(gray(100), gray(200), 0.5).pixels[0, 0] == 150

    def test_rounding_half_up(self):
        # 0.5 * 101 + 0.5 * 100 = 100.5 rounds away from zero to 101.
        assert blend(gray(101), gray(100), 0.5).pixels[0, 0] == 101

    def test_linear_in_alpha_within_one_level(self):
        a, b = texture(42, n=32), texture(43, n=32)
        fa = a.pixels.astype(np.float64)
        fb = b.pixels.astype(np.float64)
        for alpha in np.linspace(0, 1, 11):
            got = blend(a, b, float(alpha)).pixels.astype(np.float64)
            exact = alpha * fa + (1 - alpha) * fb
            assert np.abs(got - exact).max() <= 0.5

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            blend(gray(0, (4, 4)), gray(0, (4, 5)), 0.5)


class TestMorphSequence:
    def test_endpoints_bit_exact_no_contours(self):
        a, b = texture(44, n=32), texture(45, n=32)
        seq = morph_sequence(a, b, None, 5)
        assert len(seq.frames) == 5
        assert np.array_equal(seq.frames[0].pixels, a.pixels)
        assert np.array_equal(seq.frames[-1].pixels, b.pixels)

    def test_endpoints_bit_exact_with_contours(self):
        a, b = texture(46, n=32), texture(47, n=32)
        pair = ContourPair(
            np.array([[8.0, 8.0], [20.0, 12.0], [15.0, 25.0]]),
            np.array([[10.0, 9.0], [18.0, 14.0], [12.0, 22.0]]),
        )
        seq = morph_sequence(a, b, pair, 7)
        assert np.array_equal(seq.frames[0].pixels, a.pixels)
        assert np.array_equal(seq.frames[-1].pixels, b.pixels)

    def test_constant_pair_is_constant_throughout(self):
        a = gray(77, (24, 24))
        seq = morph_sequence(a, a, None, 6)
        for f in seq.frames:
            assert np.array_equal(f.pixels, a.pixels)

    def test_identity_contours_reduce_to_dissolve(self):
        a, b = texture(48, n=32), texture(49, n=32)
        pts = np.array([[5.0, 5.0], [20.0, 20.0]])
        pair = ContourPair(pts, pts)
        with_pair = morph_sequence(a, b, pair, 5)
        without = morph_sequence(a, b, None, 5)
        for fa, fb in zip(with_pair.frames, without.frames):
            assert np.array_equal(fa.pixels, fb.pixels)

    def test_contour_points_actually_move(self):
        # A warp that pulls a bright dot's contour point: the dot should
        # appear near the interpolated position at the midpoint frame.
        a = np.zeros((33, 33), dtype=np.uint8)
        a[8, 8] = 255
        b = np.zeros((33, 33), dtype=np.uint8)
        b[24, 24] = 255
        pair = ContourPair(np.array([[8.0, 8.0], [0.0, 0.0]]),
                           np.array([[24.0, 24.0], [0.0, 0.0]]))
        seq = morph_sequence(GrayImage(a), GrayImage(b), pair, 3)
        mid = seq.frames[1].pixels
        y, x = np.unravel_index(np.argmax(mid), mid.shape)
        assert abs(int(x) - 16) <= 2 and abs(int(y) - 16) <= 2

    def test_frame_monotone_for_monotone_inputs(self):
        a, b = gray(200, (8, 8)), gray(40, (8, 8))
        seq = morph_sequence(a, b, None, 9)
        vals = [int(f.pixels[0, 0]) for f in seq.frames]
        assert vals == sorted(vals, reverse=True)
        assert vals[0] == 200 and vals[-1] == 40

    def test_bad_args(self):
        with pytest.raises(ValueError):
            morph_sequence(gray(0), gray(0), None, 1)
        with pytest.raises(ValueError):
            morph_sequence(gray(0, (4, 4)), gray(0, (5, 4)), None, 3)


class TestContourFile:
    def test_parse(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("1 2\n3.5 4\n\n5 6\n7 8\n")
        pair = load_contours(p)
        assert pair.source_points.tolist() == [[1.0, 2.0], [3.5, 4.0]]
        assert pair.dest_points.tolist() == [[5.0, 6.0], [7.0, 8.0]]

    def test_extra_blank_lines_ok(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("\n1 2\n3 4\n\n\n5 6\n7 8\n\n")
        assert load_contours(p).source_points.shape == (2, 2)

    def test_bad_token_count(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("1 2 3\n\n4 5\n")
        with pytest.raises(ContourFormatError):
            load_contours(p)

    def test_not_a_number(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("1 x\n\n4 5\n")
        with pytest.raises(ContourFormatError):
            load_contours(p)

    def test_wrong_block_count(self, tmp_path):
        p = tmp_path / "c.txt"
        p.write_text("1 2\n3 4\n")
        with pytest.raises(ContourFormatError):
            load_contours(p)

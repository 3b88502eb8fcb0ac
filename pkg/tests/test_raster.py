import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topokit import PatchLayout, ScalarField, extract_patch, read_field, tile, write_field
from topokit.raster import (
    MalformedHeaderError,
    TruncatedPayloadError,
    ValueRangeError,
    read_grid,
    write_grid,
    write_pgm,
)


def tpr1_bytes(width, height, values):
    return (
        b"TPR1"
        + struct.pack("<II", width, height)
        + np.asarray(values, dtype="<f4").tobytes()
    )


class TestScalarField:
    def test_valid_construction(self):
        f = ScalarField(np.array([[0.0, 0.5], [1.0, 0.25]]))
        assert f.width == 2 and f.height == 2
        assert f.value(1, 0) == 1.0

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            ScalarField(np.array([[0.5, 1.5]]))
        with pytest.raises(ValueError):
            ScalarField(np.array([[-0.1]]))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            ScalarField(np.array([[np.nan]]))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            ScalarField(np.zeros((0, 3)))

    def test_immutable(self):
        f = ScalarField(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            f.values[0, 0] = 1.0


class TestTpr1:
    def test_read_example(self, tmp_path):
        p = tmp_path / "f.tpr1"
        p.write_bytes(tpr1_bytes(2, 1, [0.5, 1.0]))
        f = read_field(p)
        assert f.width == 2 and f.height == 1
        assert f.values.tolist() == [[0.5, 1.0]]

    def test_single_pixel_file_is_16_bytes(self, tmp_path):
        p = tmp_path / "f.tpr1"
        write_field(ScalarField(np.array([[0.25]])), p)
        assert p.stat().st_size == 16
        assert read_field(p).values.tolist() == [[0.25]]

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "f.tpr1"
        p.write_bytes(tpr1_bytes(3, 3, [0.0] * 8))
        with pytest.raises(TruncatedPayloadError) as err:
            read_field(p)
        assert err.value.offset == 12 + 32

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "f.tpr1"
        p.write_bytes(b"NOPE" + struct.pack("<II", 1, 1) + b"\x00" * 4)
        with pytest.raises(MalformedHeaderError) as err:
            read_field(p)
        assert err.value.offset == 0

    def test_value_out_of_range_names_offset(self, tmp_path):
        p = tmp_path / "f.tpr1"
        p.write_bytes(tpr1_bytes(2, 1, [0.5, 1.5]))
        with pytest.raises(ValueRangeError) as err:
            read_field(p)
        assert err.value.offset == 12 + 4

    def test_nan_payload_rejected(self, tmp_path):
        p = tmp_path / "f.tpr1"
        p.write_bytes(tpr1_bytes(1, 1, [np.nan]))
        with pytest.raises(ValueRangeError):
            read_field(p)

    def test_roundtrip_seeded_65x65(self, tmp_path):
        rng = np.random.default_rng(123)
        vals = rng.random((65, 65), dtype=np.float32).astype(np.float64)
        f = ScalarField(vals)
        p = tmp_path / "f.tpr1"
        write_field(f, p)
        g = read_field(p)
        assert np.array_equal(f.values, g.values)

    def test_roundtrip_byte_identity(self, tmp_path):
        rng = np.random.default_rng(9)
        vals = rng.random((17, 11), dtype=np.float32).astype(np.float64)
        p1 = tmp_path / "a.tpr1"
        p2 = tmp_path / "b.tpr1"
        write_field(ScalarField(vals), p1)
        write_field(read_field(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_write_unwritable_path(self):
        with pytest.raises(OSError):
            write_field(ScalarField(np.zeros((1, 1))), "/nonexistent-dir/f.tpr1")

    def test_grid_roundtrip_allows_any_sign(self, tmp_path):
        p = tmp_path / "g.tpr1"
        grid = np.array([[-1.5, 0.0], [2.25, -0.125]])
        write_grid(grid, p)
        assert np.array_equal(read_grid(p), grid)


class TestPgm:
    def test_single_pixel_maxval_255(self, tmp_path):
        p = tmp_path / "f.pgm"
        p.write_bytes(b"P5\n1 1\n255\n" + bytes([255]))
        f = read_field(p)
        assert f.values.tolist() == [[1.0]]

    def test_comments_and_16bit(self, tmp_path):
        p = tmp_path / "f.pgm"
        payload = np.array([0, 30000, 65535, 123], dtype=">u2").tobytes()
        p.write_bytes(b"P5\n# a comment\n2 2\n65535\n" + payload)
        f = read_field(p)
        assert f.shape == (2, 2)
        assert f.value(0, 1) == 30000 / 65535

    def test_not_p5(self, tmp_path):
        p = tmp_path / "f.pgm"
        p.write_bytes(b"P2\n1 1\n255\n0")
        with pytest.raises(MalformedHeaderError):
            read_field(p)

    def test_truncated(self, tmp_path):
        p = tmp_path / "f.pgm"
        p.write_bytes(b"P5\n2 2\n255\n\x00\x00")
        with pytest.raises(TruncatedPayloadError):
            read_field(p)

    def test_sample_exceeding_maxval(self, tmp_path):
        p = tmp_path / "f.pgm"
        p.write_bytes(b"P5\n1 1\n100\n" + bytes([200]))
        with pytest.raises(ValueRangeError):
            read_field(p)

    def test_write_pgm_roundtrip_8bit_source(self, tmp_path):
        vals = np.arange(16).reshape(4, 4) / 255.0
        f = ScalarField(vals)
        p = tmp_path / "f.pgm"
        write_pgm(f, p, maxval=65535)
        g = read_field(p)
        assert np.allclose(g.values, f.values, atol=1e-9)


class TestTile:
    def test_256_patch_65(self):
        f = ScalarField(np.zeros((256, 256)))
        layout = tile(f, 65)
        rows = sorted({a[0] for a in layout.anchors})
        cols = sorted({a[1] for a in layout.anchors})
        assert rows == [0, 65, 130, 191]
        assert cols == [0, 65, 130, 191]
        assert len(layout.anchors) == 16

    def test_exact_fit(self):
        layout = tile(ScalarField(np.zeros((65, 65))), 65)
        assert layout.anchors == ((0, 0),)

    def test_small_field_single_clipped_anchor(self):
        layout = tile(ScalarField(np.zeros((64, 64))), 65)
        assert layout.anchors == ((0, 0),)
        patch = extract_patch(ScalarField(np.zeros((64, 64))), (0, 0), 65)
        assert patch.shape == (64, 64)

    def test_patch_size_too_small(self):
        with pytest.raises(ValueError):
            tile(ScalarField(np.zeros((4, 4))), 1)

    def test_deterministic(self):
        f = ScalarField(np.zeros((100, 70)))
        assert tile(f, 33).anchors == tile(f, 33).anchors

    @settings(max_examples=60, deadline=None)
    @given(
        h=st.integers(1, 150),
        w=st.integers(1, 150),
        patch=st.integers(2, 70),
    )
    def test_coverage(self, h, w, patch):
        layout = tile(ScalarField(np.zeros((h, w))), patch)
        covered = np.zeros((h, w), dtype=bool)
        for r, c in layout.anchors:
            covered[r : r + patch, c : c + patch] = True
        assert covered.all()
        assert list(layout.anchors) == sorted(set(layout.anchors))


class TestExtractPatch:
    def test_identity_patch(self):
        f = ScalarField(np.array([[0.1, 0.2], [0.3, 0.4]]))
        p = extract_patch(f, (0, 0), 2)
        assert np.array_equal(p.values, f.values)

    def test_bottom_right_block(self):
        f = ScalarField(np.arange(9).reshape(3, 3) / 10.0)
        p = extract_patch(f, (1, 1), 2)
        assert p.values.tolist() == [[0.4, 0.5], [0.7, 0.8]]

    def test_out_of_bounds(self):
        f = ScalarField(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            extract_patch(f, (5, 5), 2)
        with pytest.raises(ValueError):
            extract_patch(f, (2, 0), 2)

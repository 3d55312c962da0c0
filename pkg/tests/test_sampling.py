import numpy as np
import pytest

from rasterdip.sampling import (
    PRESET_PATTERNS,
    SamplingMask,
    SamplingPattern,
    build_mask,
    degrade,
    expected_count,
    extract_lowres,
    scatter_lowres,
    speedup,
)
from rasterdip.tensor import Tensor


def brute_force_count(height, width, pattern):
    """Enumerate the mask membership rule with explicit loops."""
    n = 0
    for r in range(height):
        for c in range(width):
            if ((c - pattern.offset_x) % pattern.sx == 0
                    and (r - pattern.offset_y) % pattern.sy == 0):
                n += 1
    return n


class TestBuildMask:
    def test_unit_pattern_is_all_ones(self):
        m = build_mask(13, 7, SamplingPattern(1, 1))
        assert m.sampled_count == 13 * 7
        assert m.density == 1.0
        np.testing.assert_array_equal(m.grid, 1)

    def test_sparse_preset_count_on_300(self):
        m = build_mask(300, 300, SamplingPattern(10, 5))
        assert m.sampled_count == 1800
        assert m.density == pytest.approx(0.02)

    def test_enumerated_count_small(self):
        m = build_mask(21, 21, SamplingPattern(7, 3))
        assert m.sampled_count == 3 * 7 == brute_force_count(21, 21, SamplingPattern(7, 3))
        assert m.density == pytest.approx(21 / 441)

    def test_counts_match_brute_force_and_formula(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            sx, sy = int(rng.integers(1, 9)), int(rng.integers(1, 9))
            ox = int(rng.integers(0, sx))
            oy = int(rng.integers(0, sy))
            h, w = int(rng.integers(1, 40)), int(rng.integers(1, 40))
            p = SamplingPattern(sx, sy, ox, oy)
            m = build_mask(h, w, p)
            ref = brute_force_count(h, w, p)
            assert m.sampled_count == ref == expected_count(h, w, p)
            assert m.density * h * w == pytest.approx(ref, abs=1e-9)

    def test_membership_rule_positions(self):
        p = SamplingPattern(3, 2, 1, 1)
        m = build_mask(6, 7, p)
        for r in range(6):
            for c in range(7):
                expect = (c - 1) % 3 == 0 and (r - 1) % 2 == 0
                assert m.grid[r, c] == int(expect)

    def test_row_and_column_replication(self):
        m_fast = build_mask(9, 12, SamplingPattern(4, 1))
        assert all(np.array_equal(m_fast.grid[0], row) for row in m_fast.grid)
        m_slow = build_mask(12, 9, SamplingPattern(1, 4))
        assert all(np.array_equal(m_slow.grid[:, 0], col) for col in m_slow.grid.T)

    def test_offset_validation(self):
        with pytest.raises(ValueError, match="offset_x"):
            SamplingPattern(3, 2, offset_x=3)
        with pytest.raises(ValueError, match="offset_y"):
            SamplingPattern(3, 2, offset_y=-1)
        with pytest.raises(ValueError, match=">= 1"):
            SamplingPattern(0, 2)
        with pytest.raises(ValueError):
            build_mask(0, 5, SamplingPattern(1, 1))

    def test_parse_and_label(self):
        p = SamplingPattern.parse("10, 5")
        assert (p.sx, p.sy) == (10, 5)
        assert p.label() == "10,5"
        p2 = SamplingPattern.parse("7,3,2,1")
        assert (p2.offset_x, p2.offset_y) == (2, 1)
        with pytest.raises(ValueError, match="syntax"):
            SamplingPattern.parse("7")
        with pytest.raises(ValueError, match="syntax"):
            SamplingPattern.parse("a,b")

    def test_mask_values_validated(self):
        with pytest.raises(ValueError, match="0 or 1"):
            SamplingMask(np.array([[0, 2]]))


class TestDegrade:
    def test_idempotent(self):
        rng = np.random.default_rng(0)
        x = rng.random((12, 15))
        m = build_mask(12, 15, SamplingPattern(3, 2))
        once = degrade(x, m)
        np.testing.assert_array_equal(degrade(once, m), once)

    def test_all_ones_mask_identity(self):
        rng = np.random.default_rng(1)
        x = rng.random((5, 5))
        m = build_mask(5, 5, SamplingPattern(1, 1))
        np.testing.assert_array_equal(degrade(x, m), x)

    def test_sampled_bits_preserved_others_zero(self):
        rng = np.random.default_rng(2)
        x = rng.random((10, 10)) + 0.5
        m = build_mask(10, 10, SamplingPattern(4, 3))
        out = degrade(x, m)
        assert np.count_nonzero(out) == m.sampled_count
        np.testing.assert_array_equal(out[m.grid == 1], x[m.grid == 1])
        assert np.all(out[m.grid == 0] == 0.0)

    def test_linear(self):
        rng = np.random.default_rng(3)
        a = rng.random((8, 8))
        b = rng.random((8, 8))
        m = build_mask(8, 8, SamplingPattern(2, 2, 1, 0))
        np.testing.assert_array_equal(degrade(a + b, m), degrade(a, m) + degrade(b, m))

    def test_tensor_input_is_differentiable(self):
        m = build_mask(4, 4, SamplingPattern(2, 2))
        x = Tensor(np.ones((1, 1, 4, 4)), requires_grad=True)
        out = degrade(x, m)
        out.sum().backward()
        np.testing.assert_array_equal(x.grad[0, 0], m.grid)

    def test_shape_mismatch(self):
        m = build_mask(4, 4, SamplingPattern(2, 2))
        with pytest.raises(ValueError):
            degrade(np.zeros((5, 4)), m)


class TestLowres:
    def test_unit_pattern_identity(self):
        x = np.arange(20.0).reshape(4, 5)
        np.testing.assert_array_equal(extract_lowres(x, SamplingPattern(1, 1)), x)

    def test_ramp_extraction(self):
        x = np.arange(16.0).reshape(4, 4)
        lr = extract_lowres(x, SamplingPattern(2, 2))
        np.testing.assert_array_equal(lr, [[0.0, 2.0], [8.0, 10.0]])

    def test_scatter_roundtrip_matches_degrade(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            h, w = int(rng.integers(3, 30)), int(rng.integers(3, 30))
            sx, sy = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            p = SamplingPattern(sx, sy, int(rng.integers(0, sx)), int(rng.integers(0, sy)))
            x = rng.random((h, w))
            m = build_mask(h, w, p)
            lr = extract_lowres(x, p)
            assert lr.size == expected_count(h, w, p)
            np.testing.assert_array_equal(scatter_lowres(lr, p, h, w), degrade(x, m))


class TestSpeedup:
    def test_values(self):
        assert speedup(SamplingPattern(10, 5)) == 50
        assert speedup(SamplingPattern(6, 12)) == 72
        assert speedup(SamplingPattern(1, 1)) == 1

    def test_presets(self):
        labels = {p.label() for p in PRESET_PATTERNS}
        assert labels == {"4,1", "5,1", "6,1", "7,3", "10,5", "6,12"}

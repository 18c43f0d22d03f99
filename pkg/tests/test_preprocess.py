from __future__ import annotations

import numpy as np
import pytest

from gebi.preprocess import (
    PreprocessConfig,
    clahe,
    flatten_downsized,
    min_max_stretch,
    normalize_attribution,
    resize_bilinear,
)

LUM = np.array([0.299, 0.587, 0.114])


def scalar_hist_eq(plane: np.ndarray, nbins: int = 256) -> np.ndarray:
    """Reference scalar histogram equalization: (cdf - cdf_min)/(N - cdf_min)."""
    bins = np.minimum((plane * nbins).astype(int), nbins - 1)
    hist = np.bincount(bins.ravel(), minlength=nbins)
    cdf = np.cumsum(hist)
    cdf_min = cdf[np.flatnonzero(hist)[0]]
    return (cdf[bins] - cdf_min) / (plane.size - cdf_min)


class TestResize:
    def test_constant_preserved(self):
        img = np.full((5, 9, 3), 0.5)
        for side in (1, 4, 13):
            assert np.allclose(resize_bilinear(img, side), 0.5)

    def test_checkerboard_to_single_pixel(self):
        grid = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert resize_bilinear(grid, 1)[0, 0] == pytest.approx(0.5)

    def test_identity(self):
        rng = np.random.default_rng(0)
        grid = rng.random((11, 11))
        assert np.abs(resize_bilinear(grid, 11) - grid).max() < 1e-6

    def test_range_not_expanded(self):
        rng = np.random.default_rng(1)
        grid = rng.uniform(0.2, 0.7, size=(8, 14))
        for side in (3, 8, 21):
            out = resize_bilinear(grid, side)
            assert out.min() >= 0.2 - 1e-12
            assert out.max() <= 0.7 + 1e-12

    def test_zero_size_rejected(self):
        with pytest.raises(ValueError):
            resize_bilinear(np.zeros((0, 3)), 4)
        with pytest.raises(ValueError):
            resize_bilinear(np.zeros((3, 3)), 0)


class TestClahe:
    def test_constant_unchanged(self):
        cfg = PreprocessConfig(target_side=32)
        img = np.full((20, 20, 3), 0.437)
        assert np.array_equal(clahe(img, cfg), img)

    def test_idempotent_on_constant(self):
        cfg = PreprocessConfig(target_side=32)
        img = np.full((16, 16, 3), 0.9)
        once = clahe(img, cfg)
        assert np.array_equal(clahe(once, cfg), once)

    def test_two_level_matches_scalar_oracle(self):
        # single tile + high clip degenerates CLAHE to plain equalization
        cfg = PreprocessConfig(target_side=32, clahe_tiles=1, clahe_clip=1e6)
        img = np.zeros((16, 16, 3))
        img[:, :8] = 0.2
        img[:, 8:] = 0.8
        out = clahe(img, cfg)
        expected = scalar_hist_eq(img @ LUM)
        assert np.allclose(out @ LUM, expected, atol=1e-9)
        assert set(np.round(np.unique(out @ LUM), 9)) == {0.0, 1.0}

    def test_output_in_unit_range(self):
        cfg = PreprocessConfig(target_side=32, clahe_tiles=4)
        rng = np.random.default_rng(2)
        for _ in range(100):
            img = rng.random((12, 12, 3))
            out = clahe(img, cfg)
            assert out.min() >= 0.0
            assert out.max() <= 1.0

    def test_chroma_ratios_preserved(self):
        cfg = PreprocessConfig(target_side=32, clahe_tiles=2)
        rng = np.random.default_rng(3)
        img = rng.uniform(0.1, 0.9, size=(10, 10, 3))
        out = clahe(img, cfg)
        ratio = out / img
        unclamped = (out < 1.0) & (out > 0.0)
        rows = np.all(unclamped, axis=2)
        spread = ratio[rows].max(axis=1) - ratio[rows].min(axis=1)
        assert spread.max() < 1e-9


class TestNormalizeAttribution:
    def test_scales_by_max_abs(self):
        out = normalize_attribution(np.array([[2.0, -4.0]]))
        assert np.allclose(out, [[0.5, -1.0]])

    def test_all_zero_unchanged(self):
        grid = np.zeros((3, 3))
        assert np.array_equal(normalize_attribution(grid), grid)

    def test_peak_is_one(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            grid = rng.normal(size=(6, 6))
            assert np.abs(normalize_attribution(grid)).max() == pytest.approx(1.0)

    def test_scale_invariant(self):
        rng = np.random.default_rng(5)
        grid = rng.normal(size=(5, 7))
        for c in (0.5, 3.0, 1e4):
            assert np.allclose(normalize_attribution(c * grid), normalize_attribution(grid))


class TestFlatten:
    def test_attribution_shape(self):
        out = flatten_downsized(np.arange(16, dtype=float).reshape(4, 4), 2)
        assert out.shape == (4,)

    def test_image_shape_per_channel(self):
        out = flatten_downsized(np.zeros((8, 8, 3)), 4)
        assert out.shape == (48,)

    def test_constant_image(self):
        out = flatten_downsized(np.full((6, 6, 3), 0.3), 3)
        assert np.allclose(out, 0.3)

    def test_matches_resize_then_flatten(self):
        rng = np.random.default_rng(6)
        grid = rng.random((9, 9))
        resized = resize_bilinear(grid, 4)
        assert np.array_equal(flatten_downsized(grid, 4), resized.ravel())
        img = rng.random((9, 9, 3))
        r = resize_bilinear(img, 4)
        expected = np.concatenate([r[:, :, c].ravel() for c in range(3)])
        assert np.array_equal(flatten_downsized(img, 4), expected)


class TestStretch:
    def test_stretch_hits_unit_range(self):
        img = np.stack([np.linspace(0.2, 0.6, 16).reshape(4, 4)] * 3, axis=2)
        out = min_max_stretch(img)
        assert out.min() == pytest.approx(0.0)
        assert out.max() == pytest.approx(1.0)

    def test_constant_channel_untouched(self):
        img = np.full((4, 4, 3), 0.25)
        assert np.array_equal(min_max_stretch(img), img)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"target_side": 16},
            {"clahe_tiles": 0},
            {"clahe_clip": 0.5},
            {"downsample_side": 2},
        ],
    )
    def test_invalid_config_rejected(self, kwargs):
        with pytest.raises(ValueError):
            PreprocessConfig(**kwargs)

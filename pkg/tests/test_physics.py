"""Extinction laws, attenuation, and the synthetic streak oracle."""

import math

import numpy as np
import pytest

from derainkit.errors import ConfigurationError
from derainkit.frames import BG, FG, Frame
from derainkit.physics import (
    ExtinctionModel,
    MovingRectangle,
    RainConfig,
    attenuate,
    generate_synthetic_sequence,
    rain_extinction,
    render_streaks,
    smooth_noise_background,
    snow_extinction,
    streak_coverage,
)


class TestExtinction:
    def test_zero_rate_gives_zero(self):
        assert rain_extinction(ExtinctionModel(2.0, 0.7, "rain"), 0.0) == 0.0
        assert snow_extinction(ExtinctionModel(1.0, 1.0, "snow"), 0.0) == 0.0

    def test_linear_case(self):
        assert rain_extinction(ExtinctionModel(1.0, 1.0, "rain"), 2.0) == pytest.approx(2.0)

    def test_power_law_case(self):
        value = rain_extinction(ExtinctionModel(0.5, 0.6, "rain"), 10.0)
        assert value == pytest.approx(0.5 * 10.0**0.6, rel=1e-12)
        assert value == pytest.approx(1.9905, abs=5e-4)

    def test_snow_linear_case(self):
        assert snow_extinction(ExtinctionModel(1.0, 1.0, "snow"), 10.0) == pytest.approx(1.0)

    def test_negative_rate_rejected(self):
        with pytest.raises(ConfigurationError):
            rain_extinction(ExtinctionModel(1.0, 1.0, "rain"), -0.1)
        with pytest.raises(ConfigurationError):
            snow_extinction(ExtinctionModel(1.0, 1.0, "snow"), -2.0)

    def test_kind_checked(self):
        with pytest.raises(ConfigurationError):
            rain_extinction(ExtinctionModel(1.0, 1.0, "snow"), 1.0)
        with pytest.raises(ConfigurationError):
            snow_extinction(ExtinctionModel(1.0, 1.0, "rain"), 1.0)

    def test_negative_coefficient_rejected(self):
        with pytest.raises(ConfigurationError):
            ExtinctionModel(-1.0, 1.0, "rain")

    def test_snow_equals_rain_at_tenth_rate(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            a = rng.uniform(0.0, 5.0)
            b = rng.uniform(0.1, 2.0)
            s = rng.uniform(0.0, 50.0)
            snow = snow_extinction(ExtinctionModel(a, b, "snow"), s)
            rain = rain_extinction(ExtinctionModel(a, b, "rain"), s / 10.0)
            assert snow == pytest.approx(rain, rel=1e-12, abs=1e-300)

    def test_monotone_in_rate(self):
        model = ExtinctionModel(1.3, 0.67, "rain")
        rates = np.linspace(0.0, 40.0, 200)
        values = [rain_extinction(model, r) for r in rates]
        assert all(b >= a for a, b in zip(values, values[1:]))


class TestAttenuate:
    def test_zero_extinction_is_identity(self):
        f = Frame(np.array([[0.0, 128.0, 255.0]]))
        out = attenuate(f, 0.0, 100.0)
        assert (out.data == f.data).all()

    def test_saturates_to_airlight(self):
        f = Frame(np.array([[0.0, 200.0]]))
        out = attenuate(f, 50.0, 50.0, airlight=180.0)
        assert out.data == pytest.approx(180.0, abs=1e-9)

    def test_halving_transmittance(self):
        f = Frame(np.array([[200.0]]))
        out = attenuate(f, math.log(2.0), 1.0, airlight=0.0)
        assert out.data[0, 0] == pytest.approx(100.0, rel=1e-12)

    def test_negative_parameters_rejected(self):
        f = Frame(np.zeros((1, 1)))
        with pytest.raises(ConfigurationError):
            attenuate(f, -1.0, 1.0)
        with pytest.raises(ConfigurationError):
            attenuate(f, 1.0, -1.0)
        with pytest.raises(ConfigurationError):
            attenuate(f, 1.0, 1.0, airlight=300.0)


class TestRainConfig:
    def test_slope_range_enforced(self):
        with pytest.raises(ConfigurationError):
            RainConfig(photometric_slope=0.05)
        with pytest.raises(ConfigurationError):
            RainConfig(photometric_slope=-0.01)

    def test_offset_must_dominate_slope(self):
        # 0.039 * 255 = 9.945, so an offset of 9 could darken bright pixels.
        with pytest.raises(ConfigurationError):
            RainConfig(photometric_slope=0.039, brightness_offset=9.0)
        RainConfig(photometric_slope=0.039, brightness_offset=10.0)


class TestRenderStreaks:
    def test_zero_density_is_identity(self):
        f = Frame(np.full((20, 20), 90.0))
        rainy, mask = render_streaks(f, RainConfig(streaks_per_frame=0.0), 0)
        assert (rainy.data == f.data).all()
        assert mask.count() == 0

    def test_photometric_value_on_constant_background(self):
        # delta = 30 - 0.02 * 100 = 28, so covered pixels read exactly 128.
        f = Frame(np.full((40, 40), 100.0))
        cfg = RainConfig(streaks_per_frame=25.0, photometric_slope=0.02, brightness_offset=30.0, seed=2)
        rainy, mask = render_streaks(f, cfg, 0)
        assert mask.count() > 0
        assert (rainy.data[mask.bits] == 128.0).all()
        assert (rainy.data[~mask.bits] == 100.0).all()

    def test_deterministic_per_seed_and_frame(self):
        f = Frame(np.full((30, 30), 60.0))
        cfg = RainConfig(streaks_per_frame=12.0, seed=9)
        a_frame, a_mask = render_streaks(f, cfg, 5)
        b_frame, b_mask = render_streaks(f, cfg, 5)
        assert (a_frame.data == b_frame.data).all()
        assert (a_mask.bits == b_mask.bits).all()
        c_frame, _ = render_streaks(f, cfg, 6)
        assert (a_frame.data != c_frame.data).any()

    def test_never_darkens(self, textured_frame):
        cfg = RainConfig(streaks_per_frame=80.0, seed=3)
        rainy, _ = render_streaks(textured_frame, cfg, 1)
        assert (rainy.data >= textured_frame.data).all()

    def test_mask_is_exactly_the_changed_pixels(self, textured_frame):
        cfg = RainConfig(streaks_per_frame=40.0, seed=11)
        rainy, mask = render_streaks(textured_frame, cfg, 2)
        changed = rainy.data != textured_frame.data
        assert (changed == mask.bits).all()

    def test_masks_across_frames_overlap_only_by_chance(self):
        # Under independence the expected joint count for a frame pair
        # is |m_a||m_b| / npix. Overlap arrives in clumps (near-parallel
        # capsules share runs of pixels), so the error bar comes from
        # the empirical spread over disjoint pairs, not a Poisson SE.
        f = Frame(np.full((120, 160), 80.0))
        cfg = RainConfig(streaks_per_frame=30.0, seed=13)
        masks = [render_streaks(f, cfg, t)[1].bits for t in range(200)]
        npix = masks[0].size
        diffs = []
        for a, b in zip(masks[0::2], masks[1::2]):
            observed = int((a & b).sum())
            expected = a.sum() * b.sum() / npix
            diffs.append(observed - expected)
        diffs = np.asarray(diffs)
        se = diffs.std(ddof=1) / math.sqrt(len(diffs))
        assert abs(diffs.mean()) <= 3.0 * se


class TestStreakCoverage:
    def test_union_of_segments(self):
        cfg = RainConfig(streaks_per_frame=10.0, seed=4)
        cov = streak_coverage(cfg, (50, 50), 0)
        assert cov.dtype == bool and cov.shape == (50, 50)


class TestSyntheticSequence:
    def test_no_object_no_rain(self):
        bg = Frame(np.full((10, 10), 55.0))
        clean, rainy, streaks, fg = generate_synthetic_sequence(bg, None, None, 1, 10.0)
        assert len(clean) == len(rainy) == 1
        assert (clean[0].data == bg.data).all()
        assert (rainy[0].data == bg.data).all()
        assert streaks[0].count() == 0
        assert (fg[0].labels == BG).all()

    def test_rainy_differs_exactly_on_streak_mask(self, textured_frame):
        cfg = RainConfig(streaks_per_frame=30.0, seed=6)
        clean, rainy, streaks, _ = generate_synthetic_sequence(textured_frame, None, cfg, 5, 10.0)
        for c, r, m in zip(clean, rainy, streaks):
            assert ((c.data != r.data) == m.bits).all()

    def test_object_centroid_advances_with_velocity(self):
        bg = Frame(np.full((40, 60), 30.0))
        rect = MovingRectangle(4.0, 10.0, 8, 6, 2.0, 0.0, 50.0)
        _, _, _, fg = generate_synthetic_sequence(bg, rect, None, 10, 10.0)
        centroids = []
        for mask in fg:
            ys, xs = np.nonzero(mask.labels == FG)
            centroids.append(xs.mean())
        steps = np.diff(centroids)
        assert steps == pytest.approx(np.full(9, 2.0), abs=1e-9)

    def test_object_leaving_frame_rejected(self):
        bg = Frame(np.full((20, 20), 30.0))
        rect = MovingRectangle(10.0, 5.0, 8, 6, 3.0, 0.0, 50.0)
        with pytest.raises(ConfigurationError):
            generate_synthetic_sequence(bg, rect, None, 10, 10.0)


class TestSmoothNoiseBackground:
    def test_range_and_shape(self):
        f = smooth_noise_background(32, 20, low=50.0, high=150.0, seed=1)
        assert (f.height, f.width) == (20, 32)
        assert f.data.min() >= 50.0 and f.data.max() <= 150.0

    def test_rgb_channels(self):
        f = smooth_noise_background(16, 12, channels=3, seed=1)
        assert f.channels == 3

    def test_invalid_range_rejected(self):
        with pytest.raises(ConfigurationError):
            smooth_noise_background(16, 16, low=200.0, high=100.0)

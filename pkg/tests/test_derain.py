"""Deraining filters and the streak detection pipeline."""

import math

import numpy as np
import pytest

from derainkit.derain import (
    GargNayarParams,
    chromatic_filter,
    extract_blobs,
    garg_nayar,
    inpaint_temporal_mean,
    orientation_consensus,
    photometric_candidates,
    photometric_linearity_filter,
    spatial_filter,
    temporal_median,
)
from derainkit.errors import ConfigurationError
from derainkit.frames import BinaryMask, Frame, FrameSequence
from derainkit.metrics import sequence_psnr
from derainkit.physics import RainConfig, render_streaks, smooth_noise_background


def luma_seq(arrays, fps=10.0) -> FrameSequence:
    return FrameSequence(tuple(Frame(np.asarray(a, dtype=np.float64)) for a in arrays), fps)


@pytest.fixture(scope="module")
def rainy_fixture():
    """Static textured background, streaks on every third frame."""
    bg = smooth_noise_background(96, 72, low=40.0, high=200.0, smooth_sigma=3.0, seed=11)
    cfg = RainConfig(streaks_per_frame=10.0, photometric_slope=0.02, brightness_offset=30.0, seed=5)
    n = 30
    rainy, masks = [], []
    for t in range(n):
        if t % 3 == 0 and 3 <= t <= n - 4:
            frame, mask = render_streaks(bg, cfg, t)
        else:
            frame, mask = bg, BinaryMask(np.zeros((bg.height, bg.width), dtype=bool))
        rainy.append(frame)
        masks.append(mask)
    clean = FrameSequence(tuple([bg] * n), fps=10.0)
    return clean, FrameSequence(tuple(rainy), fps=10.0), masks


class TestSpatialFilter:
    def test_constant_unchanged(self):
        f = Frame(np.full((8, 8), 42.0))
        for mode in ("mean", "median"):
            assert (spatial_filter(f, mode).data == 42.0).all()

    def test_impulse_median_suppressed(self):
        data = np.zeros((7, 7))
        data[3, 3] = 255.0
        out = spatial_filter(Frame(data), "median", 3)
        assert out.data[3, 3] == 0.0

    def test_impulse_mean_spreads(self):
        data = np.zeros((7, 7))
        data[3, 3] = 255.0
        out = spatial_filter(Frame(data), "mean", 3)
        assert out.data[3, 3] == pytest.approx(255.0 / 9.0, rel=1e-12)

    def test_mean_matches_brute_force_with_edge_replication(self):
        rng = np.random.default_rng(8)
        data = rng.uniform(0, 255, (6, 5))
        out = spatial_filter(Frame(data), "mean", 3)
        padded = np.pad(data, 1, mode="edge")
        for y in range(6):
            for x in range(5):
                want = padded[y : y + 3, x : x + 3].mean()
                assert out.data[y, x] == pytest.approx(want, rel=1e-12)

    def test_rgb_filtered_per_channel(self):
        rng = np.random.default_rng(9)
        data = rng.uniform(0, 255, (6, 6, 3))
        out = spatial_filter(Frame(data), "median", 3)
        for c in range(3):
            ref = spatial_filter(Frame(data[:, :, c]), "median", 3)
            assert (out.data[:, :, c] == ref.data).all()

    def test_even_k_rejected(self):
        with pytest.raises(ConfigurationError):
            spatial_filter(Frame(np.zeros((4, 4))), "mean", 4)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ConfigurationError):
            spatial_filter(Frame(np.zeros((4, 4))), "box", 3)


class TestTemporalMedian:
    def test_static_sequence_unchanged(self, static_sequence):
        out = temporal_median(static_sequence, 3)
        for a, b in zip(out, static_sequence):
            assert (a.data == b.data).all()

    def test_single_spike_removed(self):
        seq = luma_seq([np.full((2, 2), 100.0), np.full((2, 2), 130.0), np.full((2, 2), 100.0)])
        out = temporal_median(seq, 3)
        assert (out[1].data == 100.0).all()

    def test_boundary_takes_lower_median(self):
        # A clipped two-frame window must resolve to the smaller value,
        # otherwise boundary streaks would survive the filter.
        seq = luma_seq([np.full((2, 2), 100.0), np.full((2, 2), 130.0), np.full((2, 2), 100.0)])
        out = temporal_median(seq, 3)
        assert (out[0].data == 100.0).all()

    def test_exact_reconstruction_of_nonrecurring_streaks(self, rainy_fixture):
        clean, rainy, _ = rainy_fixture
        out = temporal_median(rainy, 3)
        assert max(float(np.abs(a.data - b.data).max()) for a, b in zip(out, clean)) == 0.0

    def test_even_window_rejected(self):
        seq = luma_seq([np.zeros((2, 2))] * 4)
        with pytest.raises(ConfigurationError):
            temporal_median(seq, 4)

    def test_short_sequence_rejected(self):
        with pytest.raises(ConfigurationError):
            temporal_median(luma_seq([np.zeros((2, 2))]), 3)


class TestPhotometricCandidates:
    def make(self, prev, cur, nxt):
        return (
            Frame(np.full((1, 1), float(prev))),
            Frame(np.full((1, 1), float(cur))),
            Frame(np.full((1, 1), float(nxt))),
        )

    def test_symmetric_rise_marked(self):
        p, c, n = self.make(100, 104, 100)
        assert photometric_candidates(p, c, n, 3.0, 1.0).bits[0, 0]

    def test_small_rise_unmarked(self):
        p, c, n = self.make(100, 102, 100)
        assert not photometric_candidates(p, c, n, 3.0, 1.0).bits[0, 0]

    def test_background_change_unmarked(self):
        p, c, n = self.make(100, 125, 120)
        assert not photometric_candidates(p, c, n, 3.0, 1.0).bits[0, 0]

    def test_anti_monotone_in_threshold(self, textured_frame):
        rng = np.random.default_rng(12)
        cur = Frame(np.clip(textured_frame.data + rng.uniform(0, 8, textured_frame.data.shape), 0, 255))
        low = photometric_candidates(textured_frame, cur, textured_frame, 3.0, 1.0)
        high = photometric_candidates(textured_frame, cur, textured_frame, 5.0, 1.0)
        assert not (high.bits & ~low.bits).any()


class TestExtractBlobs:
    def test_empty_mask(self):
        mask = BinaryMask(np.zeros((5, 5), dtype=bool))
        zeros = np.zeros((5, 5))
        assert extract_blobs(mask, zeros, zeros) == []

    def test_vertical_run_orientation(self):
        bits = np.zeros((9, 5), dtype=bool)
        bits[1:8, 2] = True
        blobs = extract_blobs(BinaryMask(bits), np.ones((9, 5)), np.full((9, 5), 100.0))
        assert len(blobs) == 1
        assert blobs[0].orientation == pytest.approx(math.pi / 2, abs=1e-9)
        assert blobs[0].elongation > 100.0

    def test_square_blob_isotropic(self):
        bits = np.zeros((7, 7), dtype=bool)
        bits[2:5, 2:5] = True
        blobs = extract_blobs(BinaryMask(bits), np.ones((7, 7)), np.full((7, 7), 100.0))
        assert blobs[0].elongation == pytest.approx(1.0, abs=1e-9)

    def test_fit_recovers_planted_line(self):
        # delta = -0.02 * I_b + 30 exactly, so the fit should be sharp.
        bits = np.zeros((8, 8), dtype=bool)
        bits[1:7, 3] = True
        background = np.linspace(40.0, 190.0, 64).reshape(8, 8)
        delta = -0.02 * background + 30.0
        blob = extract_blobs(BinaryMask(bits), delta, background)[0]
        assert blob.slope == pytest.approx(0.02, abs=1e-9)
        assert blob.intercept == pytest.approx(30.0, abs=1e-9)
        assert blob.fit_rmse == pytest.approx(0.0, abs=1e-9)

    def test_eight_connectivity(self):
        bits = np.zeros((4, 4), dtype=bool)
        bits[0, 0] = bits[1, 1] = bits[2, 2] = True  # diagonal chain
        blobs = extract_blobs(BinaryMask(bits), np.ones((4, 4)), np.ones((4, 4)))
        assert len(blobs) == 1 and blobs[0].size == 3


class TestLinearityFilter:
    def make_blob(self, slope):
        bits = np.zeros((10, 10), dtype=bool)
        bits[1:9, 4] = True
        background = np.linspace(40.0, 190.0, 100).reshape(10, 10)
        delta = -slope * background + 30.0
        return extract_blobs(BinaryMask(bits), delta, background)[0]

    def test_in_range_slope_accepted(self):
        blob = self.make_blob(0.02)
        accepted = photometric_linearity_filter([blob], GargNayarParams())
        assert accepted == [blob]
        assert abs(blob.slope - 0.02) <= 0.005

    def test_out_of_range_slope_rejected(self):
        assert photometric_linearity_filter([self.make_blob(0.08)], GargNayarParams()) == []

    def test_tiny_blob_rejected(self):
        bits = np.zeros((5, 5), dtype=bool)
        bits[2, 2:4] = True
        blob = extract_blobs(BinaryMask(bits), np.full((5, 5), 28.0), np.full((5, 5), 100.0))[0]
        assert photometric_linearity_filter([blob], GargNayarParams()) == []

    def test_noisy_fit_rejected_by_rmse(self):
        bits = np.zeros((10, 10), dtype=bool)
        bits[1:9, 4] = True
        background = np.linspace(40.0, 190.0, 100).reshape(10, 10)
        rng = np.random.default_rng(3)
        delta = -0.02 * background + 30.0 + rng.normal(0, 12.0, (10, 10))
        blob = extract_blobs(BinaryMask(bits), delta, background)[0]
        assert photometric_linearity_filter([blob], GargNayarParams()) == []


def vertical_blob(x, h0, h1, shape=(24, 24), tilt=None):
    """A one-pixel-wide run used to feed the consensus stage."""
    bits = np.zeros(shape, dtype=bool)
    if tilt is None:
        bits[h0:h1, x] = True
    else:
        for i, y in enumerate(range(h0, h1)):
            bits[y, x + i * tilt] = True
    background = np.full(shape, 100.0)
    delta = -0.02 * background + 30.0
    return extract_blobs(BinaryMask(bits), delta, background)


class TestOrientationConsensus:
    def test_aligned_blobs_confirmed(self):
        frames = [vertical_blob(4, 2, 12) + vertical_blob(12, 5, 16) for _ in range(5)]
        masks = orientation_consensus(frames, (24, 24), GargNayarParams())
        assert all(m.count() > 0 for m in masks)

    def test_outlier_orientation_rejected(self):
        # Placed clear of the vertical columns so the pixel sets are disjoint.
        horizontal = np.zeros((24, 24), dtype=bool)
        horizontal[20, 14:23] = True
        background = np.full((24, 24), 100.0)
        delta = -0.02 * background + 30.0
        outlier = extract_blobs(BinaryMask(horizontal), delta, background)
        frames = [vertical_blob(4, 2, 12) + vertical_blob(12, 5, 16) for _ in range(5)]
        frames[2] = frames[2] + outlier
        masks = orientation_consensus(frames, (24, 24), GargNayarParams())
        assert not (masks[2].bits & horizontal).any()
        assert (masks[2].bits & ~horizontal).any()

    def test_empty_frames_confirm_nothing(self):
        masks = orientation_consensus([[], [], []], (8, 8), GargNayarParams())
        assert all(m.count() == 0 for m in masks)

    def test_blob_order_within_frame_is_irrelevant(self):
        frames = [vertical_blob(4, 2, 12) + vertical_blob(12, 5, 16) for _ in range(5)]
        shuffled = [list(reversed(blobs)) for blobs in frames]
        a = orientation_consensus(frames, (24, 24), GargNayarParams())
        b = orientation_consensus(shuffled, (24, 24), GargNayarParams())
        for ma, mb in zip(a, b):
            assert (ma.bits == mb.bits).all()


class TestChromaticFilter:
    def rgb(self, r, g, b):
        data = np.zeros((1, 1, 3))
        data[0, 0] = [r, g, b]
        return Frame(data)

    def test_equal_channel_change_kept(self):
        cand = BinaryMask(np.ones((1, 1), dtype=bool))
        prev = nxt = self.rgb(100, 100, 100)
        cur = self.rgb(120, 120, 120)
        assert chromatic_filter(cand, prev, cur, nxt, 10.0).bits[0, 0]

    def test_uneven_channel_change_removed(self):
        cand = BinaryMask(np.ones((1, 1), dtype=bool))
        prev = nxt = self.rgb(100, 100, 100)
        cur = self.rgb(130, 105, 105)
        assert not chromatic_filter(cand, prev, cur, nxt, 10.0).bits[0, 0]

    def test_empty_candidates_stay_empty(self):
        cand = BinaryMask(np.zeros((1, 1), dtype=bool))
        prev = cur = nxt = self.rgb(1, 2, 3)
        assert chromatic_filter(cand, prev, cur, nxt, 10.0).count() == 0

    def test_luma_input_rejected(self):
        cand = BinaryMask(np.zeros((1, 1), dtype=bool))
        f = Frame(np.zeros((1, 1)))
        with pytest.raises(ValueError):
            chromatic_filter(cand, f, f, f, 10.0)


class TestInpaint:
    def test_empty_mask_is_identity(self):
        cur = Frame(np.full((2, 2), 50.0))
        out = inpaint_temporal_mean(cur, Frame(np.zeros((2, 2))), Frame(np.zeros((2, 2))),
                                    BinaryMask(np.zeros((2, 2), dtype=bool)))
        assert (out.data == cur.data).all()

    def test_masked_pixel_gets_neighbor_mean(self):
        mask = np.zeros((2, 2), dtype=bool)
        mask[0, 0] = True
        out = inpaint_temporal_mean(
            Frame(np.full((2, 2), 200.0)),
            Frame(np.full((2, 2), 100.0)),
            Frame(np.full((2, 2), 110.0)),
            BinaryMask(mask),
        )
        assert out.data[0, 0] == 105.0
        assert out.data[1, 1] == 200.0

    def test_full_mask_replaces_everything(self):
        out = inpaint_temporal_mean(
            Frame(np.full((2, 2), 200.0)),
            Frame(np.full((2, 2), 100.0)),
            Frame(np.full((2, 2), 110.0)),
            BinaryMask(np.ones((2, 2), dtype=bool)),
        )
        assert (out.data == 105.0).all()


class TestGargNayar:
    def test_rain_free_static_sequence_untouched(self, static_sequence):
        derained, masks = garg_nayar(static_sequence)
        for a, b in zip(derained, static_sequence):
            assert (a.data == b.data).all()
        assert all(m.count() == 0 for m in masks)

    def test_detection_quality_on_synthetic_rain(self, rainy_fixture):
        _, rainy, gt_masks = rainy_fixture
        _, confirmed = garg_nayar(rainy)
        for t, gt in enumerate(gt_masks):
            if gt.count() == 0:
                continue
            tp = (gt.bits & confirmed[t].bits).sum()
            assert tp / gt.count() >= 0.90
            assert tp / max(confirmed[t].count(), 1) >= 0.90

    def test_psnr_improves(self, rainy_fixture):
        clean, rainy, _ = rainy_fixture
        derained, _ = garg_nayar(rainy)
        assert sequence_psnr(derained, clean) > sequence_psnr(rainy, clean)

    def test_modifies_only_confirmed_pixels(self, rainy_fixture):
        _, rainy, _ = rainy_fixture
        derained, confirmed = garg_nayar(rainy)
        for out, src, mask in zip(derained, rainy, confirmed):
            changed = out.data != src.data
            assert not (changed & ~mask.bits).any()

    def test_endpoints_pass_through(self, rainy_fixture):
        _, rainy, _ = rainy_fixture
        derained, masks = garg_nayar(rainy)
        assert (derained[0].data == rainy[0].data).all()
        assert (derained[-1].data == rainy[-1].data).all()
        assert masks[0].count() == 0 and masks[-1].count() == 0

    def test_short_sequence_rejected(self):
        with pytest.raises(ConfigurationError):
            garg_nayar(luma_seq([np.zeros((4, 4))] * 2))
